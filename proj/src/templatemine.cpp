#include "loghier/templatemine.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace loghier {
namespace {

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string tree_key(const std::string& token) {
  return has_digit(token) ? std::string(kWildcard) : token;
}

void split_whitespace(std::string_view s, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
}

}  // namespace

void MinerConfig::validate() const {
  if (tree_depth < 2) throw std::invalid_argument("miner.tree_depth must be >= 2");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
    throw std::invalid_argument("miner.similarity_threshold must be in (0, 1]");
  if (max_children < 1) throw std::invalid_argument("miner.max_children must be >= 1");
}

std::string LogTemplate::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Tokenizer::Tokenizer(const std::vector<MaskRule>& masks) {
  for (const auto& m : masks) masks_.emplace_back(std::regex(m.pattern), m.placeholder);
}

std::vector<std::string> Tokenizer::operator()(std::string_view message) const {
  std::vector<std::string> out;
  if (masks_.empty()) {
    split_whitespace(message, out);
    return out;
  }
  std::string text(message);
  for (const auto& [re, placeholder] : masks_) text = std::regex_replace(text, re, placeholder);
  split_whitespace(text, out);
  return out;
}

std::vector<std::string> tokenize(std::string_view message, const std::vector<MaskRule>& masks) {
  return Tokenizer(masks)(message);
}

TemplateMiner::TemplateMiner(MinerConfig cfg) : cfg_(std::move(cfg)), tokenizer_(cfg_.masks) {
  cfg_.validate();
}

std::size_t TemplateMiner::prefix_levels(std::size_t n_tokens) const {
  return std::min<std::size_t>(static_cast<std::size_t>(cfg_.tree_depth - 2), n_tokens);
}

double TemplateMiner::similarity(const std::vector<std::string>& tmpl, const std::vector<std::string>& tokens) {
  if (tmpl.size() != tokens.size() || tokens.empty()) return 0.0;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    if (tmpl[i] == kWildcard || tmpl[i] == tokens[i]) ++equal;
  return static_cast<double>(equal) / static_cast<double>(tokens.size());
}

TemplateMiner::Node* TemplateMiner::search_leaf(const std::vector<std::string>& tokens) {
  auto it = by_length_.find(tokens.size());
  if (it == by_length_.end()) return nullptr;
  Node* node = it->second.get();
  for (std::size_t level = 0; level < prefix_levels(tokens.size()); ++level) {
    auto child = node->children.find(tree_key(tokens[level]));
    if (child == node->children.end()) child = node->children.find(kWildcard);
    if (child == node->children.end()) return nullptr;
    node = child->second.get();
  }
  return node;
}

TemplateMiner::Node& TemplateMiner::insert_leaf(const std::vector<std::string>& tokens) {
  auto& root = by_length_[tokens.size()];
  if (!root) root = std::make_unique<Node>();
  Node* node = root.get();
  for (std::size_t level = 0; level < prefix_levels(tokens.size()); ++level) {
    std::string key = tree_key(tokens[level]);
    auto child = node->children.find(key);
    if (child == node->children.end()) {
      if (static_cast<int>(node->children.size()) >= cfg_.max_children) key = std::string(kWildcard);
      auto& slot = node->children[key];
      if (!slot) slot = std::make_unique<Node>();
      node = slot.get();
    } else {
      node = child->second.get();
    }
  }
  return *node;
}

MatchResult TemplateMiner::match(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw TemplateMinerError("cannot match an empty token list");
  if (Node* leaf = search_leaf(tokens)) {
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t idx : leaf->templates) {
      double sim = similarity(templates_[idx].tokens, tokens);
      if (sim > best_sim) {
        best_sim = sim;
        best = idx;
      }
    }
    if (best_sim >= cfg_.similarity_threshold) {
      auto& t = templates_[best];
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (t.tokens[i] != tokens[i]) t.tokens[i] = std::string(kWildcard);
      ++t.match_count;
      return {t.id, false};
    }
  }
  Node& leaf = insert_leaf(tokens);
  LogTemplate t{next_id_++, tokens, 1};
  index_[t.id] = templates_.size();
  leaf.templates.push_back(templates_.size());
  templates_.push_back(std::move(t));
  return {templates_.back().id, true};
}

MatchResult TemplateMiner::add_message(std::string_view message) { return match(tokenizer_(message)); }

const LogTemplate& TemplateMiner::get(TemplateId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw TemplateMinerError("unknown template id " + std::to_string(id));
  return templates_[it->second];
}

std::vector<LogTemplate> TemplateMiner::export_templates() const {
  std::vector<LogTemplate> out;
  out.reserve(templates_.size());
  for (const auto& [id, idx] : index_) out.push_back(templates_[idx]);
  return out;
}

TemplateMiner TemplateMiner::import_templates(const std::vector<LogTemplate>& templates, MinerConfig cfg) {
  std::vector<LogTemplate> sorted = templates;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::set<TemplateId> seen;
  TemplateMiner miner(std::move(cfg));
  for (const auto& t : sorted) {
    if (t.id <= 0) throw TemplateMinerError("template id must be positive: " + std::to_string(t.id));
    if (!seen.insert(t.id).second) throw TemplateMinerError("duplicate template id " + std::to_string(t.id));
    if (t.tokens.empty()) throw TemplateMinerError("template " + std::to_string(t.id) + " has no tokens");
    Node& leaf = miner.insert_leaf(t.tokens);
    miner.index_[t.id] = miner.templates_.size();
    leaf.templates.push_back(miner.templates_.size());
    miner.templates_.push_back(t);
    miner.next_id_ = t.id + 1;
  }
  return miner;
}

nlohmann::json templates_to_json(const std::vector<LogTemplate>& templates) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& t : templates) doc.push_back({{"id", t.id}, {"tokens", t.tokens}, {"match_count", t.match_count}});
  return doc;
}

std::vector<LogTemplate> templates_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw TemplateMinerError("template document must be a list");
  std::vector<LogTemplate> out;
  try {
    for (const auto& item : doc) {
      LogTemplate t;
      t.id = item.at("id").get<TemplateId>();
      t.tokens = item.at("tokens").get<std::vector<std::string>>();
      t.match_count = item.value("match_count", std::uint64_t{0});
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw TemplateMinerError(std::string("bad template document: ") + e.what());
  }
  return out;
}

}  // namespace loghier
