#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "loghier/aggregate.hpp"
#include "loghier/eval.hpp"
#include "loghier/ingest.hpp"

namespace loghier {

struct SynthConfig {
  std::string datacenter = "dc";
  int n_devices = 50;
  int n_templates = 20;
  Duration duration = std::chrono::hours{24 * 7};
  Duration bucket_width = std::chrono::seconds{60};
  // Poisson mean per (device, template, bucket).
  double baseline_rate = 0.75;
  int incidents = 20;
  double burst_multiplier = 10.0;
  Duration burst_duration = std::chrono::minutes{10};
  int devices_per_incident = 3;
  std::uint64_t seed = 1;
  Timestamp start = Timestamp{std::chrono::sys_days{std::chrono::year{2021} / 1 / 4}};

  void validate() const;
  std::size_t buckets() const { return static_cast<std::size_t>(duration / bucket_width); }
};

struct PlannedIncident {
  IncidentTicket ticket;
  std::vector<int> device_indices;
  Timestamp end{};
};

std::string synth_device_name(int index);
/// Message text for one occurrence of template `k`; variable tokens drawn from `rng`.
std::string synth_message(int k, std::mt19937_64& rng);

/// Streams structured log lines bucket by bucket, time-ordered. Usable
/// directly as a pipeline source without materializing a file.
class SyntheticLogSource final : public LineSource {
 public:
  explicit SyntheticLogSource(SynthConfig cfg);

  bool next(std::string& line) override;
  std::uint64_t position() const override { return seq_; }
  void seek(std::uint64_t pos) override;

  const std::vector<PlannedIncident>& incidents() const { return incidents_; }
  std::vector<IncidentTicket> tickets() const;
  const SynthConfig& config() const { return cfg_; }
  bool burst_active(int device, std::size_t bucket) const;

 private:
  void fill_bucket();

  SynthConfig cfg_;
  std::mt19937_64 rate_rng_;
  std::mt19937_64 text_rng_;
  std::vector<PlannedIncident> incidents_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> bursts_by_device_;  // bucket ranges
  std::size_t bucket_ = 0;
  std::vector<std::pair<std::int64_t, std::string>> lines_;
  std::size_t line_pos_ = 0;
  std::uint64_t seq_ = 0;
};

struct GenerateSummary {
  std::uint64_t lines = 0;
  std::size_t incidents = 0;
};

/// Writes the log lines and the matching incident tickets. Deterministic given the seed.
GenerateSummary generate(const SynthConfig& cfg, std::ostream& logs, std::ostream& tickets);

/// Count series for throughput experiments: Poisson counts per (device,
/// template, bucket), nonzero buckets only, ordered by (bucket, key).
struct CountSeries {
  std::vector<CountPoint> points;
  std::size_t signals = 0;
  std::size_t buckets = 0;
  std::size_t grid_points() const { return signals * buckets; }
};

CountSeries generate_counts(const SynthConfig& cfg);
/// Every signal duplicated under a dummy host id, doubling points per unit time.
CountSeries double_with_dummy_hosts(const CountSeries& series);

}  // namespace loghier
