#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace loghier {

inline constexpr std::string_view kWildcard = "<*>";

using TemplateId = std::int64_t;

struct MaskRule {
  std::string pattern;  // ECMAScript regex
  std::string placeholder;
};

struct MinerConfig {
  int tree_depth = 4;
  double similarity_threshold = 0.5;
  int max_children = 100;
  std::vector<MaskRule> masks;

  void validate() const;
};

struct LogTemplate {
  TemplateId id = 0;
  std::vector<std::string> tokens;
  std::uint64_t match_count = 0;

  bool operator==(const LogTemplate&) const = default;
  std::string text() const;
};

struct MatchResult {
  TemplateId id = 0;
  bool is_new = false;
};

class TemplateMinerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies masks in order, then splits on whitespace runs.
class Tokenizer {
 public:
  explicit Tokenizer(const std::vector<MaskRule>& masks);
  std::vector<std::string> operator()(std::string_view message) const;

 private:
  std::vector<std::pair<std::regex, std::string>> masks_;
};

std::vector<std::string> tokenize(std::string_view message, const std::vector<MaskRule>& masks = {});

/// Online fixed-depth parse-tree template miner.
///
/// Level one of the tree keys on token count, the next `tree_depth - 2` levels
/// on the leading tokens (tokens containing a digit key as `<*>`), and leaves
/// hold template groups in creation order.
class TemplateMiner {
 public:
  explicit TemplateMiner(MinerConfig cfg = {});

  MatchResult match(const std::vector<std::string>& tokens);
  MatchResult add_message(std::string_view message);

  const LogTemplate& get(TemplateId id) const;
  std::size_t size() const { return templates_.size(); }
  const MinerConfig& config() const { return cfg_; }

  /// Templates ordered by id.
  std::vector<LogTemplate> export_templates() const;
  /// Rebuilds a miner by replaying template creation in id order, which
  /// reproduces the original tree. Throws on duplicate or non-positive ids.
  static TemplateMiner import_templates(const std::vector<LogTemplate>& templates, MinerConfig cfg = {});

  // Similarity of a template to a token list of the same length.
  static double similarity(const std::vector<std::string>& tmpl, const std::vector<std::string>& tokens);

 private:
  struct Node {
    std::map<std::string, std::unique_ptr<Node>, std::less<>> children;
    std::vector<std::size_t> templates;  // indices into templates_
  };

  Node* search_leaf(const std::vector<std::string>& tokens);
  Node& insert_leaf(const std::vector<std::string>& tokens);
  std::size_t prefix_levels(std::size_t n_tokens) const;

  MinerConfig cfg_;
  Tokenizer tokenizer_;
  std::map<std::size_t, std::unique_ptr<Node>> by_length_;
  std::vector<LogTemplate> templates_;
  std::map<TemplateId, std::size_t> index_;
  TemplateId next_id_ = 1;
};

nlohmann::json templates_to_json(const std::vector<LogTemplate>& templates);
std::vector<LogTemplate> templates_from_json(const nlohmann::json& doc);

}  // namespace loghier
