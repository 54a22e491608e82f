#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "loghier/aggregate.hpp"
#include "loghier/uvad.hpp"

namespace loghier {

enum class NodeKind { Root, Group, Device, TemplateLeaf };

std::string_view to_string(NodeKind k);
NodeKind node_kind_from_string(std::string_view s);

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TopologyNodeSpec {
  std::string id;
  std::optional<std::string> parent;
  NodeKind kind = NodeKind::Group;
  std::optional<double> weight;
  // Device name, or `prefix*`; for template leaves, the template id.
  std::optional<std::string> match;
};

/// An exclusion rule. Set fields must all match for the rule to drop a point.
struct FilterRule {
  std::optional<std::string> device;
  std::optional<TemplateId> template_id;

  bool matches(const SignalKey& key) const;
};

struct TopologyConfig {
  std::vector<TopologyNodeSpec> nodes;
  std::vector<FilterRule> filters;
  double default_weight = 50.0;
};

/// Strict parse: unknown keys are rejected.
TopologyConfig topology_config_from_json(const nlohmann::json& doc);
TopologyConfig read_topology_config(const std::filesystem::path& path);

/// (prod (w_i / 100))^(2 / k) over a leaf's path weights (root excluded).
double effective_weight(const std::vector<double>& path_weights);

bool pattern_matches(const std::string& pattern, const std::string& value);

class Topology {
 public:
  using NodeIndex = std::size_t;
  static constexpr NodeIndex kRoot = 0;

  struct Node {
    std::string id;
    std::optional<NodeIndex> parent;
    NodeKind kind = NodeKind::Group;
    double weight = 50.0;
    bool explicit_weight = false;
    std::optional<std::string> match;
    std::size_t depth = 0;
    std::vector<NodeIndex> children;
    std::size_t explicit_children = 0;
    bool auto_created = false;
    double path_weight = 0.0;  // leaves only
  };

  /// Validates and indexes the tree. Throws TopologyError naming the node.
  static Topology load(const TopologyConfig& cfg);
  /// A tree holding only a root node.
  static Topology root_only(std::string root_id = "root", double default_weight = 50.0);

  /// Leaf for `key`, creating device and template-leaf nodes on first sight.
  NodeIndex resolve_leaf(const SignalKey& key);
  bool keep(const AnomalousPoint& point) const;

  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  std::optional<NodeIndex> find(const std::string& id) const;
  const std::vector<std::vector<NodeIndex>>& depth_index() const { return by_depth_; }
  std::size_t max_depth() const { return by_depth_.empty() ? 0 : by_depth_.size() - 1; }
  double default_weight() const { return default_weight_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Cached effective weight of a leaf's path.
  double leaf_weight(NodeIndex leaf) const;
  /// Weight a child carries in its parent's power mean: the normalized
  /// explicit weight when any sibling is explicit, otherwise 1 / n.
  double aggregation_weight(NodeIndex child) const;

  std::size_t memory_bytes() const;

 private:
  NodeIndex add_node(Node n);
  NodeIndex resolve_device(const std::string& device);
  std::vector<double> path_weights(NodeIndex leaf) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::vector<std::vector<NodeIndex>> by_depth_;
  std::vector<FilterRule> filters_;
  double default_weight_ = 50.0;
  std::map<std::string, NodeIndex> literal_devices_;
  std::vector<std::pair<std::string, NodeIndex>> prefix_patterns_;  // sorted: longest first, then lexicographic
  std::unordered_map<std::string, NodeIndex> device_cache_;
  std::map<std::pair<NodeIndex, TemplateId>, NodeIndex> leaves_;
  std::unordered_map<SignalKey, NodeIndex, SignalKeyHash> key_cache_;
  std::vector<std::string> warnings_;
};

}  // namespace loghier
