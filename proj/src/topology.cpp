#include "loghier/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace loghier {
namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw TopologyError("unknown key '" + k + "' in " + where);
}

std::optional<TemplateId> parse_template_id(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Root: return "root";
    case NodeKind::Group: return "group";
    case NodeKind::Device: return "device";
    case NodeKind::TemplateLeaf: return "template-leaf";
  }
  return "group";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "root") return NodeKind::Root;
  if (s == "group") return NodeKind::Group;
  if (s == "device") return NodeKind::Device;
  if (s == "template-leaf") return NodeKind::TemplateLeaf;
  throw TopologyError("unknown node kind: " + std::string(s));
}

bool pattern_matches(const std::string& pattern, const std::string& value) {
  if (!pattern.empty() && pattern.back() == '*')
    return value.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0;
  return pattern == value;
}

bool FilterRule::matches(const SignalKey& key) const {
  if (!device && !template_id) return false;
  if (device && !pattern_matches(*device, key.device)) return false;
  if (template_id && *template_id != key.template_id) return false;
  return true;
}

TopologyConfig topology_config_from_json(const json& doc) {
  if (!doc.is_object()) throw TopologyError("topology document must be an object");
  reject_unknown_keys(doc, {"nodes", "filters", "default_weight"}, "topology document");
  TopologyConfig cfg;
  try {
    cfg.default_weight = doc.value("default_weight", 50.0);
    if (doc.contains("nodes")) {
      for (const auto& n : doc.at("nodes")) {
        if (!n.is_object()) throw TopologyError("node entries must be objects");
        std::string id = n.at("id").get<std::string>();
        reject_unknown_keys(n, {"id", "parent", "kind", "weight", "match"}, "node '" + id + "'");
        TopologyNodeSpec spec;
        spec.id = id;
        if (n.contains("parent") && !n.at("parent").is_null()) spec.parent = n.at("parent").get<std::string>();
        spec.kind = n.contains("kind") ? node_kind_from_string(n.at("kind").get<std::string>())
                                       : (spec.parent ? NodeKind::Group : NodeKind::Root);
        if (n.contains("weight") && !n.at("weight").is_null()) spec.weight = n.at("weight").get<double>();
        if (n.contains("match") && !n.at("match").is_null()) {
          const auto& m = n.at("match");
          spec.match = m.is_number_integer() ? std::to_string(m.get<long long>()) : m.get<std::string>();
        }
        cfg.nodes.push_back(std::move(spec));
      }
    }
    if (doc.contains("filters")) {
      for (const auto& f : doc.at("filters")) {
        if (!f.is_object()) throw TopologyError("filter entries must be objects");
        reject_unknown_keys(f, {"device", "template_id"}, "filter");
        FilterRule rule;
        if (f.contains("device")) rule.device = f.at("device").get<std::string>();
        if (f.contains("template_id")) rule.template_id = f.at("template_id").get<TemplateId>();
        if (!rule.device && !rule.template_id) throw TopologyError("filter needs 'device' or 'template_id'");
        cfg.filters.push_back(std::move(rule));
      }
    }
  } catch (const json::exception& e) {
    throw TopologyError(std::string("bad topology document: ") + e.what());
  }
  return cfg;
}

TopologyConfig read_topology_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TopologyError("cannot open topology file: " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw TopologyError("topology file is not valid JSON: " + path.string());
  return topology_config_from_json(doc);
}

double effective_weight(const std::vector<double>& path_weights) {
  if (path_weights.empty()) throw std::invalid_argument("effective_weight needs at least one weight");
  double log_sum = 0.0;
  for (double w : path_weights) {
    if (!(w >= 0.0 && w <= 100.0)) throw std::invalid_argument("weight outside [0, 100]: " + std::to_string(w));
    if (w == 0.0) return 0.0;
    log_sum += std::log(w / 100.0);
  }
  return std::exp(log_sum * 2.0 / static_cast<double>(path_weights.size()));
}

Topology Topology::root_only(std::string root_id, double default_weight) {
  TopologyConfig cfg;
  cfg.default_weight = default_weight;
  cfg.nodes.push_back({std::move(root_id), std::nullopt, NodeKind::Root, std::nullopt, std::nullopt});
  return load(cfg);
}

Topology Topology::load(const TopologyConfig& cfg) {
  if (!(cfg.default_weight >= 0.0 && cfg.default_weight <= 100.0))
    throw TopologyError("default_weight outside [0, 100]");
  std::map<std::string, const TopologyNodeSpec*> specs;
  std::vector<const TopologyNodeSpec*> roots;
  for (const auto& n : cfg.nodes) {
    if (n.id.empty()) throw TopologyError("node with empty id");
    if (!specs.emplace(n.id, &n).second) throw TopologyError("duplicate node id '" + n.id + "'");
    if (n.weight && !(*n.weight >= 0.0 && *n.weight <= 100.0))
      throw TopologyError("weight of node '" + n.id + "' outside [0, 100]: " + std::to_string(*n.weight));
    if (!n.parent) roots.push_back(&n);
    if (n.kind == NodeKind::Root && n.parent) throw TopologyError("root node '" + n.id + "' has a parent");
  }
  if (roots.empty()) throw TopologyError("topology has no root");
  if (roots.size() > 1) throw TopologyError("multiple roots: '" + roots[0]->id + "' and '" + roots[1]->id + "'");
  if (roots[0]->kind != NodeKind::Root && roots[0]->kind != NodeKind::Group)
    throw TopologyError("root node '" + roots[0]->id + "' must be of kind root");

  std::map<std::string, std::vector<const TopologyNodeSpec*>> children;
  for (const auto& n : cfg.nodes) {
    if (!n.parent) continue;
    if (!specs.count(*n.parent)) throw TopologyError("orphan node '" + n.id + "': parent '" + *n.parent + "' not found");
    if (specs.at(*n.parent)->kind == NodeKind::TemplateLeaf)
      throw TopologyError("node '" + n.id + "' has a template-leaf parent");
    children[*n.parent].push_back(&n);
  }
  // Nodes on a cycle are never reached from the root.
  {
    std::set<std::string> reached;
    std::deque<std::string> queue{roots[0]->id};
    while (!queue.empty()) {
      auto id = queue.front();
      queue.pop_front();
      reached.insert(id);
      for (auto* c : children[id]) queue.push_back(c->id);
    }
    for (const auto& n : cfg.nodes)
      if (!reached.count(n.id)) throw TopologyError("cycle through node '" + n.id + "'");
  }

  Topology t;
  t.default_weight_ = cfg.default_weight;
  t.filters_ = cfg.filters;
  std::deque<std::pair<const TopologyNodeSpec*, std::optional<NodeIndex>>> queue{{roots[0], std::nullopt}};
  while (!queue.empty()) {
    auto [spec, parent] = queue.front();
    queue.pop_front();
    Node n;
    n.id = spec->id;
    n.parent = parent;
    n.kind = parent ? spec->kind : NodeKind::Root;
    n.explicit_weight = spec->weight.has_value();
    n.weight = spec->weight.value_or(cfg.default_weight);
    n.match = spec->match;
    NodeIndex idx = t.add_node(std::move(n));
    for (auto* c : children[spec->id]) queue.emplace_back(c, idx);
  }

  for (NodeIndex i = 0; i < t.nodes_.size(); ++i) {
    const auto& n = t.nodes_[i];
    if (n.explicit_children > 0 && n.explicit_children < n.children.size())
      t.warnings_.push_back("node '" + n.id + "' mixes explicit and implicit child weights; missing weights use " +
                            std::to_string(cfg.default_weight));
    if (n.kind == NodeKind::TemplateLeaf) {
      if (!n.parent) continue;
      TemplateId tid = 0;
      if (n.match) {
        auto parsed = parse_template_id(*n.match);
        if (!parsed) throw TopologyError("template-leaf '" + n.id + "' match is not a template id");
        tid = *parsed;
      } else {
        throw TopologyError("template-leaf '" + n.id + "' needs a template id in 'match'");
      }
      t.leaves_[{*n.parent, tid}] = i;
      t.nodes_[i].path_weight = effective_weight(t.path_weights(i));
      continue;
    }
    if (i == kRoot) continue;
    if (n.match) {
      if (!n.match->empty() && n.match->back() == '*')
        t.prefix_patterns_.emplace_back(n.match->substr(0, n.match->size() - 1), i);
      else
        t.literal_devices_.emplace(*n.match, i);
    } else if (n.kind == NodeKind::Device) {
      t.literal_devices_.emplace(n.id, i);
    }
  }
  std::sort(t.prefix_patterns_.begin(), t.prefix_patterns_.end(), [&t](const auto& a, const auto& b) {
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    if (a.first != b.first) return a.first < b.first;
    return t.nodes_[a.second].id < t.nodes_[b.second].id;
  });
  return t;
}

Topology::NodeIndex Topology::add_node(Node n) {
  NodeIndex idx = nodes_.size();
  if (n.parent) {
    auto& p = nodes_[*n.parent];
    n.depth = p.depth + 1;
    p.children.push_back(idx);
    if (n.explicit_weight) ++p.explicit_children;
  }
  if (by_depth_.size() <= n.depth) by_depth_.resize(n.depth + 1);
  by_depth_[n.depth].push_back(idx);
  by_id_.emplace(n.id, idx);
  nodes_.push_back(std::move(n));
  return idx;
}

std::optional<Topology::NodeIndex> Topology::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> Topology::path_weights(NodeIndex leaf) const {
  std::vector<double> w;
  for (NodeIndex i = leaf; nodes_[i].parent; i = *nodes_[i].parent) w.push_back(nodes_[i].weight);
  return w;
}

Topology::NodeIndex Topology::resolve_device(const std::string& device) {
  if (auto it = device_cache_.find(device); it != device_cache_.end()) return it->second;
  NodeIndex holder;
  if (auto lit = literal_devices_.find(device); lit != literal_devices_.end()) {
    holder = lit->second;
  } else {
    std::optional<NodeIndex> group;
    for (const auto& [prefix, idx] : prefix_patterns_) {
      if (device.compare(0, prefix.size(), prefix) == 0) {
        group = idx;
        break;
      }
    }
    if (!group) {
      auto existing = find("unassigned");
      if (existing && nodes_[*existing].parent == kRoot) {
        group = *existing;
      } else {
        Node u;
        u.id = "unassigned";
        u.parent = kRoot;
        u.kind = NodeKind::Group;
        u.weight = default_weight_;
        u.auto_created = true;
        group = add_node(std::move(u));
      }
    }
    Node d;
    d.id = nodes_[*group].id + "/" + device;
    d.parent = *group;
    d.kind = NodeKind::Device;
    d.weight = default_weight_;
    d.auto_created = true;
    if (auto clash = find(d.id)) {
      holder = *clash;
    } else {
      holder = add_node(std::move(d));
    }
  }
  device_cache_.emplace(device, holder);
  return holder;
}

Topology::NodeIndex Topology::resolve_leaf(const SignalKey& key) {
  if (auto it = key_cache_.find(key); it != key_cache_.end()) return it->second;
  NodeIndex dev = resolve_device(key.device);
  NodeIndex leaf;
  if (auto it = leaves_.find({dev, key.template_id}); it != leaves_.end()) {
    leaf = it->second;
  } else {
    Node n;
    n.id = nodes_[dev].id + "/" + std::to_string(key.template_id);
    n.parent = dev;
    n.kind = NodeKind::TemplateLeaf;
    n.weight = default_weight_;
    n.match = std::to_string(key.template_id);
    n.auto_created = true;
    leaf = add_node(std::move(n));
    nodes_[leaf].path_weight = effective_weight(path_weights(leaf));
    leaves_.emplace(std::make_pair(dev, key.template_id), leaf);
  }
  key_cache_.emplace(key, leaf);
  return leaf;
}

bool Topology::keep(const AnomalousPoint& point) const {
  return std::none_of(filters_.begin(), filters_.end(),
                      [&](const FilterRule& r) { return r.matches(point.dimensions); });
}

double Topology::leaf_weight(NodeIndex leaf) const { return nodes_.at(leaf).path_weight; }

double Topology::aggregation_weight(NodeIndex child) const {
  const Node& c = nodes_[child];
  const Node& p = nodes_[*c.parent];
  if (p.explicit_children > 0) return c.weight / 100.0;
  return 1.0 / static_cast<double>(p.children.size());
}

std::size_t Topology::memory_bytes() const {
  std::size_t bytes = nodes_.capacity() * sizeof(Node);
  for (const auto& n : nodes_) bytes += n.id.capacity() + n.children.capacity() * sizeof(NodeIndex);
  bytes += key_cache_.size() * (sizeof(SignalKey) + sizeof(NodeIndex) + 16);
  bytes += leaves_.size() * 48 + by_id_.size() * 48;
  return bytes;
}

}  // namespace loghier
