#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "loghier/aggregate.hpp"
#include "loghier/time.hpp"

namespace loghier {

enum class Direction { Positive, Negative, Both };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct ValueBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const ValueBounds&) const = default;
};

struct SignalConfig {
  double alpha_short = 0.3;
  double alpha_recent = 0.3;
  // Unset means 2 / (N + 1) with N = buckets per 24 hours.
  std::optional<double> alpha_background;
  double sigma_min = 1.0;
  Direction direction = Direction::Positive;
  std::optional<ValueBounds> bounds;
  double z_emit = 3.0;
  double continuity_gain = 0.1;
  int continuity_cap = 10;
  int warmup_buckets = 30;

  void validate() const;
  double background_alpha(Duration bucket_width) const;
  bool operator==(const SignalConfig&) const = default;
};

/// Per-signal adjustments selected by device pattern (literal or `prefix*`)
/// and optionally a template id. First matching override wins.
struct SignalOverride {
  std::string device = "*";
  std::optional<TemplateId> template_id;
  std::optional<Direction> direction;
  std::optional<ValueBounds> bounds;
  std::optional<double> z_emit;
  std::optional<double> sigma_min;

  bool matches(const SignalKey& key) const;
  bool operator==(const SignalOverride&) const = default;
};

struct AnomalousPoint {
  Timestamp timestamp{};
  double score = 0.0;
  SignalKey dimensions;

  bool operator==(const AnomalousPoint&) const = default;
};

// EWMA primitives --------------------------------------------------------------

/// alpha * x + (1 - alpha) * m
double update_ewma(double m, double x, double alpha);
/// Exponentially weighted variance update around the previous mean `m`:
/// (1 - alpha) * (v + alpha * (x - m)^2).
double update_ewm_variance(double v, double m, double x, double alpha);

double standard_normal_cdf(double g);

/// Direction-clamped z-score of `x`; zero when `x` falls inside `bounds`.
double raw_zscore(double x, double mean, double var, double sigma_min, Direction direction,
                  const std::optional<ValueBounds>& bounds = std::nullopt);

/// Standard normal CDF of the recent residual level measured against the
/// background residual distribution.
double tail_context(double recent, double background_mean, double background_var, double sigma_min);

double continuity_boost(double score, int consecutive, double gain, int cap);

// Per-signal state -------------------------------------------------------------

struct SignalState {
  SignalKey key;
  double mean = 0.0;
  double var = 0.0;
  double recent = 0.0;
  double background_mean = 0.0;
  double background_var = 0.0;
  std::uint64_t background_samples = 0;
  int consecutive = 0;
  std::uint64_t processed = 0;
  Timestamp first_seen{};
  std::optional<Timestamp> last_bucket;
  std::uint32_t config_index = 0;

  /// Zero-history state: statistics seeded as if the signal had always been 0.
  static SignalState fresh(SignalKey key, Timestamp first_bucket);
};

class OrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ResolvedSignalConfig {
  SignalConfig base;
  double alpha_background = 0.0;
  Duration bucket_width{};
};

/// Scores one bucket of one signal and advances its state. `bucket` must be
/// exactly one bucket after the state's last bucket (or any bucket for a
/// fresh state). Throws OrderError otherwise.
std::optional<AnomalousPoint> score_point(SignalState& state, const ResolvedSignalConfig& cfg, Timestamp bucket,
                                          double count);

// Detector ---------------------------------------------------------------------

/// Runs every known signal forward one bucket at a time, synthesizing zero
/// counts for buckets in which a signal was silent.
class UnivariateDetector {
 public:
  UnivariateDetector(SignalConfig cfg, Duration bucket_width, std::vector<SignalOverride> overrides = {});

  /// Consumes flushed points (ordered by bucket, then key) and processes
  /// every bucket that ends at or before `frontier`. Returns emissions ordered
  /// by (timestamp, key).
  std::vector<AnomalousPoint> advance(const std::vector<CountPoint>& points, Timestamp frontier);

  /// End of the last processed bucket (or nullopt before the first).
  std::optional<Timestamp> processed_until() const;
  std::size_t signal_count() const { return states_.size(); }
  std::uint64_t points_processed() const { return points_processed_; }
  const std::vector<SignalState>& states() const { return states_; }
  /// Approximate heap + inline bytes held by per-signal state.
  std::size_t memory_bytes() const;

 private:
  std::uint32_t resolve_config(const SignalKey& key);

  SignalConfig base_;
  Duration bucket_width_;
  std::vector<SignalOverride> overrides_;
  std::vector<ResolvedSignalConfig> configs_;
  std::vector<SignalState> states_;  // sorted by key
  std::optional<Timestamp> next_bucket_;
  std::vector<CountPoint> pending_;
  std::uint64_t points_processed_ = 0;
};

}  // namespace loghier
