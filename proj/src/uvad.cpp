#include "loghier/uvad.hpp"

#include <algorithm>
#include <cmath>

namespace loghier {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Positive: return "positive";
    case Direction::Negative: return "negative";
    case Direction::Both: return "both";
  }
  return "positive";
}

Direction direction_from_string(std::string_view s) {
  if (s == "positive") return Direction::Positive;
  if (s == "negative") return Direction::Negative;
  if (s == "both") return Direction::Both;
  throw std::invalid_argument("unknown direction: " + std::string(s));
}

void SignalConfig::validate() const {
  auto in_unit = [](double a) { return a > 0.0 && a <= 1.0; };
  if (!in_unit(alpha_short)) throw std::invalid_argument("uvad.alpha_short must be in (0, 1]");
  if (!in_unit(alpha_recent)) throw std::invalid_argument("uvad.alpha_recent must be in (0, 1]");
  if (alpha_background && !in_unit(*alpha_background))
    throw std::invalid_argument("uvad.alpha_background must be in (0, 1]");
  if (!(sigma_min > 0.0)) throw std::invalid_argument("uvad.sigma_min must be > 0");
  if (!(z_emit > 0.0)) throw std::invalid_argument("uvad.z_emit must be > 0");
  if (continuity_gain < 0.0) throw std::invalid_argument("uvad.continuity_gain must be >= 0");
  if (continuity_cap < 1) throw std::invalid_argument("uvad.continuity_cap must be >= 1");
  if (warmup_buckets < 0) throw std::invalid_argument("uvad.warmup_buckets must be >= 0");
  if (bounds && bounds->lo > bounds->hi) throw std::invalid_argument("uvad.bounds lo must be <= hi");
}

double SignalConfig::background_alpha(Duration bucket_width) const {
  if (alpha_background) return *alpha_background;
  double n = static_cast<double>(std::chrono::hours{24} / bucket_width);
  return std::min(1.0, 2.0 / (std::max(n, 1.0) + 1.0));
}

bool SignalOverride::matches(const SignalKey& key) const {
  if (template_id && *template_id != key.template_id) return false;
  if (!device.empty() && device.back() == '*')
    return key.device.compare(0, device.size() - 1, device, 0, device.size() - 1) == 0;
  return device == key.device;
}

double update_ewma(double m, double x, double alpha) { return alpha * x + (1.0 - alpha) * m; }

double update_ewm_variance(double v, double m, double x, double alpha) {
  double d = x - m;
  return (1.0 - alpha) * (v + alpha * d * d);
}

double standard_normal_cdf(double g) { return 0.5 * std::erfc(-g / std::sqrt(2.0)); }

double raw_zscore(double x, double mean, double var, double sigma_min, Direction direction,
                  const std::optional<ValueBounds>& bounds) {
  if (bounds && bounds->contains(x)) return 0.0;
  double z = (x - mean) / std::max(std::sqrt(std::max(var, 0.0)), sigma_min);
  switch (direction) {
    case Direction::Positive: return std::max(z, 0.0);
    case Direction::Negative: return std::max(-z, 0.0);
    case Direction::Both: return std::abs(z);
  }
  return 0.0;
}

double tail_context(double recent, double background_mean, double background_var, double sigma_min) {
  double scale = std::max(std::sqrt(std::max(background_var, 0.0)), 0.1 * sigma_min);
  return standard_normal_cdf((recent - background_mean) / scale);
}

double continuity_boost(double score, int consecutive, double gain, int cap) {
  return score * (1.0 + gain * static_cast<double>(std::min(consecutive, cap)));
}

SignalState SignalState::fresh(SignalKey key, Timestamp first_bucket) {
  SignalState s;
  s.key = std::move(key);
  s.first_seen = first_bucket;
  return s;
}

std::optional<AnomalousPoint> score_point(SignalState& s, const ResolvedSignalConfig& rc, Timestamp bucket,
                                          double x) {
  const SignalConfig& cfg = rc.base;
  if (s.last_bucket && bucket != *s.last_bucket + rc.bucket_width)
    throw OrderError("out-of-order bucket " + format_iso8601(bucket) + " for " + to_string(s.key));

  double z = raw_zscore(x, s.mean, s.var, cfg.sigma_min, cfg.direction, cfg.bounds);
  s.recent = update_ewma(s.recent, z, cfg.alpha_recent);
  bool background_warm = s.background_samples >= static_cast<std::uint64_t>(cfg.warmup_buckets);
  double tail = background_warm ? 2.0 * tail_context(s.recent, s.background_mean, s.background_var, cfg.sigma_min)
                                : 1.0;
  s.consecutive = z >= cfg.z_emit ? s.consecutive + 1 : 0;
  double score = continuity_boost(z * tail, s.consecutive, cfg.continuity_gain, cfg.continuity_cap);

  s.var = update_ewm_variance(s.var, s.mean, x, cfg.alpha_short);
  s.mean = update_ewma(s.mean, x, cfg.alpha_short);
  // Background residual stats: running mean until the EWMA memory is filled.
  double ab = std::max(rc.alpha_background, 1.0 / static_cast<double>(s.background_samples + 1));
  s.background_var = update_ewm_variance(s.background_var, s.background_mean, z, ab);
  s.background_mean = update_ewma(s.background_mean, z, ab);
  ++s.background_samples;
  ++s.processed;
  s.last_bucket = bucket;

  if (score >= cfg.z_emit) return AnomalousPoint{bucket, score, s.key};
  return std::nullopt;
}

UnivariateDetector::UnivariateDetector(SignalConfig cfg, Duration bucket_width, std::vector<SignalOverride> overrides)
    : base_(std::move(cfg)), bucket_width_(bucket_width), overrides_(std::move(overrides)) {
  base_.validate();
  if (bucket_width_.count() <= 0) throw std::invalid_argument("bucket width must be > 0");
  configs_.push_back({base_, base_.background_alpha(bucket_width_), bucket_width_});
  for (const auto& o : overrides_) {
    SignalConfig c = base_;
    if (o.direction) c.direction = *o.direction;
    if (o.bounds) c.bounds = *o.bounds;
    if (o.z_emit) c.z_emit = *o.z_emit;
    if (o.sigma_min) c.sigma_min = *o.sigma_min;
    c.validate();
    configs_.push_back({c, c.background_alpha(bucket_width_), bucket_width_});
  }
}

std::uint32_t UnivariateDetector::resolve_config(const SignalKey& key) {
  for (std::size_t i = 0; i < overrides_.size(); ++i)
    if (overrides_[i].matches(key)) return static_cast<std::uint32_t>(i + 1);
  return 0;
}

std::optional<Timestamp> UnivariateDetector::processed_until() const { return next_bucket_; }

std::vector<AnomalousPoint> UnivariateDetector::advance(const std::vector<CountPoint>& points, Timestamp frontier) {
  for (const auto& p : points) {
    if (next_bucket_ && p.bucket_start < *next_bucket_)
      throw OrderError("point for already processed bucket " + format_iso8601(p.bucket_start) + " (" +
                       to_string(p.key) + ")");
    if (!pending_.empty() &&
        std::tie(p.bucket_start, p.key) < std::tie(pending_.back().bucket_start, pending_.back().key))
      throw OrderError("points must be ordered by (bucket, key)");
    pending_.push_back(p);
  }
  std::vector<AnomalousPoint> out;
  if (!next_bucket_) {
    if (pending_.empty()) return out;
    next_bucket_ = pending_.front().bucket_start;
  }
  std::size_t cursor = 0;
  std::vector<SignalState> merged;
  while (*next_bucket_ + bucket_width_ <= frontier) {
    const Timestamp bucket = *next_bucket_;
    std::size_t begin = cursor;
    while (cursor < pending_.size() && pending_[cursor].bucket_start == bucket) ++cursor;
    if (begin == cursor && states_.empty()) {
      // Nothing known yet: jump to the next bucket carrying data.
      if (cursor < pending_.size() && pending_[cursor].bucket_start + bucket_width_ <= frontier) {
        next_bucket_ = pending_[cursor].bucket_start;
        continue;
      }
      next_bucket_ = align_down(frontier, bucket_width_);
      break;
    }

    // Register signals first seen in this bucket, keeping states_ sorted.
    bool any_new = false;
    for (std::size_t i = begin; i < cursor; ++i) {
      auto it = std::lower_bound(states_.begin(), states_.end(), pending_[i].key,
                                 [](const SignalState& s, const SignalKey& k) { return s.key < k; });
      if (it == states_.end() || it->key != pending_[i].key) {
        any_new = true;
        break;
      }
    }
    if (any_new) {
      merged.clear();
      merged.reserve(states_.size() + (cursor - begin));
      std::size_t a = 0;
      for (std::size_t i = begin; i < cursor; ++i) {
        const auto& key = pending_[i].key;
        while (a < states_.size() && states_[a].key < key) merged.push_back(std::move(states_[a++]));
        if (a < states_.size() && states_[a].key == key) {
          merged.push_back(std::move(states_[a++]));
        } else {
          auto fresh = SignalState::fresh(key, bucket);
          fresh.config_index = resolve_config(key);
          merged.push_back(std::move(fresh));
        }
      }
      while (a < states_.size()) merged.push_back(std::move(states_[a++]));
      states_.swap(merged);
    }

    std::size_t j = begin;
    for (auto& s : states_) {
      double x = 0.0;
      if (j < cursor && pending_[j].key == s.key) x = static_cast<double>(pending_[j++].count);
      if (auto ap = score_point(s, configs_[s.config_index], bucket, x)) out.push_back(std::move(*ap));
    }
    points_processed_ += states_.size();
    next_bucket_ = bucket + bucket_width_;
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(cursor));
  return out;
}

std::size_t UnivariateDetector::memory_bytes() const {
  std::size_t bytes = states_.capacity() * sizeof(SignalState);
  for (const auto& s : states_) {
    if (s.key.device.capacity() > 15) bytes += s.key.device.capacity() + 1;
    if (s.key.datacenter.capacity() > 15) bytes += s.key.datacenter.capacity() + 1;
  }
  return bytes;
}

}  // namespace loghier
