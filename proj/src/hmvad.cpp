#include "loghier/hmvad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace loghier {

void WindowConfig::validate() const {
  if (step.count() <= 0 || size.count() <= 0) throw std::invalid_argument("window.size and window.step must be > 0");
  if (step > size) throw std::invalid_argument("window.step must be <= window.size");
  if (size.count() % step.count() != 0) throw std::invalid_argument("window.step must divide window.size");
  if (!(percentile_threshold >= 0.0 && percentile_threshold < 100.0))
    throw std::invalid_argument("window.percentile_threshold must be in [0, 100)");
  if (!(wpm_exponent >= 1.0)) throw std::invalid_argument("window.wpm_exponent must be >= 1");
  if (history_capacity == 0) throw std::invalid_argument("window.history_capacity must be >= 1");
}

std::vector<Timestamp> window_assign(Timestamp ts, const WindowConfig& cfg) {
  std::vector<Timestamp> out;
  Timestamp last = align_down(ts, cfg.step);
  std::size_t n = cfg.windows_per_point();
  out.reserve(n);
  for (std::size_t i = n; i-- > 0;) out.push_back(last - cfg.step * static_cast<long>(i));
  return out;
}

std::vector<AnomalousPoint> select_max(std::span<const AnomalousPoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = points[a];
    const auto& pb = points[b];
    if (pa.dimensions != pb.dimensions) return pa.dimensions < pb.dimensions;
    if (pa.score != pb.score) return pa.score > pb.score;
    return pa.timestamp < pb.timestamp;
  });
  std::vector<AnomalousPoint> out;
  for (std::size_t i : order)
    if (out.empty() || out.back().dimensions != points[i].dimensions) out.push_back(points[i]);
  return out;
}

double wpm(std::span<const std::pair<double, double>> score_weight, double p) {
  double sum = 0.0;
  for (const auto& [s, w] : score_weight) sum += w * std::pow(s, p);
  if (sum <= 0.0) return 0.0;
  return std::pow(sum, 1.0 / p);
}

std::vector<double> implicit_weights(std::size_t n_children) {
  if (n_children == 0) return {};
  return std::vector<double>(n_children, 1.0 / static_cast<double>(n_children));
}

double normalize_rank(double rank, double threshold) {
  if (rank < threshold) return 0.0;
  return std::clamp(100.0 * (rank - threshold) / (100.0 - threshold), 0.0, 100.0);
}

PercentileHistory::PercentileHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("history capacity must be >= 1");
}

double PercentileHistory::rank(double raw) const {
  if (sorted_.empty()) return 0.0;
  auto le = std::upper_bound(sorted_.begin(), sorted_.end(), raw) - sorted_.begin();
  return 100.0 * static_cast<double>(le) / static_cast<double>(sorted_.size());
}

void PercentileHistory::push(double raw) {
  if (ring_.size() == capacity_) {
    double oldest = ring_.front();
    ring_.pop_front();
    sorted_.erase(std::lower_bound(sorted_.begin(), sorted_.end(), oldest));
  }
  ring_.push_back(raw);
  sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), raw), raw);
}

std::size_t PercentileHistory::memory_bytes() const {
  return ring_.size() * sizeof(double) + sorted_.capacity() * sizeof(double);
}

double percentile_rank(double raw, const PercentileHistory& history) { return history.rank(raw); }

// ---------------------------------------------------------------------------

WindowEvaluator::WindowEvaluator(WindowConfig cfg, std::string datacenter)
    : cfg_(cfg), datacenter_(std::move(datacenter)) {
  cfg_.validate();
}

WindowResult WindowEvaluator::evaluate(std::span<const AnomalousPoint> selected, Topology& tree,
                                       Timestamp window_end) {
  const double p = cfg_.wpm_exponent;
  std::vector<Topology::NodeIndex> leaves;
  leaves.reserve(selected.size());
  for (const auto& pt : selected) leaves.push_back(tree.resolve_leaf(pt.dimensions));

  if (raw_.size() < tree.size()) {
    raw_.resize(tree.size(), 0.0);
    touched_.resize(tree.size(), 0);
  }
  if (touched_by_depth_.size() < tree.max_depth() + 1) touched_by_depth_.resize(tree.max_depth() + 1);
  if (histories_.size() < tree.max_depth() + 1) histories_.resize(tree.max_depth() + 1, PercentileHistory(cfg_.history_capacity));

  auto touch = [&](Topology::NodeIndex i) {
    if (!touched_[i]) {
      touched_[i] = 1;
      touched_by_depth_[tree.node(i).depth].push_back(i);
    }
  };
  for (std::size_t k = 0; k < selected.size(); ++k) {
    double v = selected[k].score * tree.leaf_weight(leaves[k]);
    if (v <= 0.0) continue;
    raw_[leaves[k]] = std::max(raw_[leaves[k]], v);
    touch(leaves[k]);
  }

  // Accumulate sum(w * s^p) into parents depth by depth; raw_ of an internal
  // node holds that sum until its own depth is finalized.
  for (std::size_t d = touched_by_depth_.size(); d-- > 1;) {
    auto& level = touched_by_depth_[d];
    std::sort(level.begin(), level.end());
    for (auto i : level) {
      const auto& n = tree.node(i);
      if (!n.children.empty()) raw_[i] = raw_[i] > 0.0 ? std::pow(raw_[i], 1.0 / p) : 0.0;
    }
    for (auto i : level) {
      if (raw_[i] <= 0.0) continue;
      auto parent = *tree.node(i).parent;
      double contribution = tree.aggregation_weight(i) * std::pow(raw_[i], p);
      if (contribution <= 0.0) continue;
      raw_[parent] += contribution;
      touch(parent);
    }
  }
  auto& top = touched_by_depth_[0];
  for (auto i : top) raw_[i] = raw_[i] > 0.0 ? std::pow(raw_[i], 1.0 / p) : 0.0;

  WindowResult result;
  result.window_end = window_end;
  auto make_score = [&](Topology::NodeIndex i) {
    const auto& n = tree.node(i);
    NodeScore s;
    s.node = i;
    s.node_id = n.id;
    s.depth = n.depth;
    s.window_end = window_end;
    s.raw = touched_[i] ? raw_[i] : 0.0;
    if (s.raw > 0.0) {
      s.rank = histories_[n.depth].rank(s.raw);
      s.normalized = normalize_rank(s.rank, cfg_.percentile_threshold);
      for (auto c : n.children)
        if (touched_[c] && raw_[c] > 0.0) s.contributors.push_back({tree.node(c).id, raw_[c]});
      std::sort(s.contributors.begin(), s.contributors.end(), [](const Contributor& a, const Contributor& b) {
        if (a.raw != b.raw) return a.raw > b.raw;
        return a.node_id < b.node_id;
      });
      if (s.contributors.size() > 5) s.contributors.resize(5);
    }
    return s;
  };
  result.scores.push_back(make_score(Topology::kRoot));
  for (std::size_t d = 1; d < touched_by_depth_.size(); ++d)
    for (auto i : touched_by_depth_[d])
      if (raw_[i] > 0.0) result.scores.push_back(make_score(i));

  // Rank against history before this window, then append.
  for (const auto& s : result.scores)
    if (s.raw > 0.0) histories_[s.depth].push(s.raw);

  const NodeScore& root = result.scores.front();
  if (root.raw > 0.0 && root.normalized >= cfg_.alert_threshold) {
    Alert a;
    a.window_end = window_end;
    a.datacenter = datacenter_;
    a.normalized_root = root.normalized;
    a.contributor_path.push_back({root.node_id, root.raw});
    Topology::NodeIndex cur = Topology::kRoot;
    for (;;) {
      std::optional<Topology::NodeIndex> best;
      for (auto c : tree.node(cur).children) {
        if (!touched_[c] || raw_[c] <= 0.0) continue;
        if (!best || raw_[c] > raw_[*best] || (raw_[c] == raw_[*best] && tree.node(c).id < tree.node(*best).id))
          best = c;
      }
      if (!best) break;
      a.contributor_path.push_back({tree.node(*best).id, raw_[*best]});
      cur = *best;
    }
    result.alert = std::move(a);
  }

  for (auto& level : touched_by_depth_) {
    for (auto i : level) {
      raw_[i] = 0.0;
      touched_[i] = 0;
    }
    level.clear();
  }
  return result;
}

std::size_t WindowEvaluator::memory_bytes() const {
  std::size_t bytes = raw_.capacity() * sizeof(double) + touched_.capacity();
  for (const auto& h : histories_) bytes += h.memory_bytes();
  return bytes;
}

// ---------------------------------------------------------------------------

HierarchicalDetector::HierarchicalDetector(Topology tree, WindowConfig cfg, std::string datacenter)
    : tree_(std::move(tree)), cfg_(cfg), evaluator_(cfg, std::move(datacenter)) {}

void HierarchicalDetector::set_origin(Timestamp origin) {
  if (!next_boundary_) next_boundary_ = align_down(origin, cfg_.step) + cfg_.step;
}

void HierarchicalDetector::add(std::span<const AnomalousPoint> points) {
  for (const auto& p : points) {
    if (!tree_.keep(p)) {
      ++filtered_;
      continue;
    }
    set_origin(p.timestamp);
    if (last_point_ && p.timestamp < *last_point_) throw OrderError("anomalous points must arrive in timestamp order");
    last_point_ = p.timestamp;
    points_.push_back(p);
  }
}

std::vector<WindowResult> HierarchicalDetector::advance(Timestamp frontier) {
  std::vector<WindowResult> out;
  if (!next_boundary_) return out;
  std::vector<AnomalousPoint> in_window;
  while (*next_boundary_ <= frontier) {
    const Timestamp end = *next_boundary_;
    const Timestamp start = end - cfg_.size;
    while (!points_.empty() && points_.front().timestamp < start) points_.pop_front();
    in_window.clear();
    for (const auto& p : points_) {
      if (p.timestamp >= end) break;
      in_window.push_back(p);
    }
    auto selected = select_max(in_window);
    out.push_back(evaluator_.evaluate(selected, tree_, end));
    ++windows_;
    next_boundary_ = end + cfg_.step;
  }
  return out;
}

std::size_t HierarchicalDetector::memory_bytes() const {
  return tree_.memory_bytes() + evaluator_.memory_bytes() + points_.size() * sizeof(AnomalousPoint);
}

}  // namespace loghier
