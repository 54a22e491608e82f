#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loghier/topology.hpp"
#include "loghier/uvad.hpp"

namespace loghier {

struct WindowConfig {
  Duration size = std::chrono::minutes{15};
  Duration step = std::chrono::minutes{5};
  double percentile_threshold = 90.0;
  double wpm_exponent = 2.0;
  double alert_threshold = 50.0;
  std::size_t history_capacity = 10000;

  void validate() const;
  std::size_t windows_per_point() const { return static_cast<std::size_t>(size / step); }
};

struct Contributor {
  std::string node_id;
  double raw = 0.0;
  bool operator==(const Contributor&) const = default;
};

struct NodeScore {
  Topology::NodeIndex node = 0;
  std::string node_id;
  std::size_t depth = 0;
  Timestamp window_end{};
  double raw = 0.0;
  double rank = 0.0;
  double normalized = 0.0;
  std::vector<Contributor> contributors;  // descending raw, at most 5

  bool operator==(const NodeScore&) const = default;
};

struct Alert {
  Timestamp window_end{};
  std::string datacenter;
  double normalized_root = 0.0;
  std::vector<Contributor> contributor_path;  // root first
};

struct WindowResult {
  Timestamp window_end{};
  /// Root first, then every node with a nonzero raw score ordered by
  /// (depth, index). Nodes not listed scored raw 0, rank 0, normalized 0.
  std::vector<NodeScore> scores;
  std::optional<Alert> alert;

  const NodeScore& root() const { return scores.front(); }
};

// Scoring primitives -------------------------------------------------------------

/// Starts of the d/s windows [k*s, k*s + d) that contain `ts`, ascending.
std::vector<Timestamp> window_assign(Timestamp ts, const WindowConfig& cfg);

/// Maximum-score point per signal key (ties keep the earliest), ordered by key.
std::vector<AnomalousPoint> select_max(std::span<const AnomalousPoint> points);

/// (sum w_i * s_i^p)^(1/p), weights used as given. Empty input scores 0.
double wpm(std::span<const std::pair<double, double>> score_weight, double p);

std::vector<double> implicit_weights(std::size_t n_children);

double normalize_rank(double rank, double threshold);

/// Bounded ring of historical scores with order-statistic lookup.
class PercentileHistory {
 public:
  explicit PercentileHistory(std::size_t capacity = 10000);

  /// 100 * |{h <= raw}| / max(|history|, 1); 0 when empty.
  double rank(double raw) const;
  void push(double raw);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t memory_bytes() const;

 private:
  std::size_t capacity_;
  std::deque<double> ring_;
  std::vector<double> sorted_;
};

double percentile_rank(double raw, const PercentileHistory& history);

// Window evaluation --------------------------------------------------------------

/// Bottom-up power-mean aggregation, per-depth ranking and normalization over
/// one window's max-selected points. Holds the per-depth histories.
class WindowEvaluator {
 public:
  WindowEvaluator(WindowConfig cfg, std::string datacenter);

  WindowResult evaluate(std::span<const AnomalousPoint> selected, Topology& tree, Timestamp window_end);
  const std::vector<PercentileHistory>& histories() const { return histories_; }
  std::size_t memory_bytes() const;

 private:
  WindowConfig cfg_;
  std::string datacenter_;
  std::vector<PercentileHistory> histories_;
  std::vector<double> raw_;   // scratch, indexed by node
  std::vector<char> touched_;
  std::vector<std::vector<Topology::NodeIndex>> touched_by_depth_;
};

/// Sliding-window temporal correlation in front of the evaluator. Evaluates
/// once per step boundary T over the points with T - d <= ts < T.
class HierarchicalDetector {
 public:
  HierarchicalDetector(Topology tree, WindowConfig cfg, std::string datacenter);

  /// Anchors the first evaluation at the step boundary following `origin`.
  void set_origin(Timestamp origin);
  /// Queues UVAD emissions; filtered points are dropped here.
  void add(std::span<const AnomalousPoint> points);
  /// Evaluates every pending boundary T <= frontier.
  std::vector<WindowResult> advance(Timestamp frontier);

  const Topology& topology() const { return tree_; }
  const WindowConfig& config() const { return cfg_; }
  std::size_t filtered_out() const { return filtered_; }
  std::size_t windows_evaluated() const { return windows_; }
  std::optional<Timestamp> next_boundary() const { return next_boundary_; }
  std::size_t memory_bytes() const;

 private:
  Topology tree_;
  WindowConfig cfg_;
  WindowEvaluator evaluator_;
  std::deque<AnomalousPoint> points_;
  std::optional<Timestamp> next_boundary_;
  std::optional<Timestamp> last_point_;
  std::size_t filtered_ = 0;
  std::size_t windows_ = 0;
};

}  // namespace loghier
