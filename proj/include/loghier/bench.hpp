#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loghier/hmvad.hpp"
#include "loghier/synth.hpp"
#include "loghier/uvad.hpp"

namespace loghier {

struct StageRun {
  double seconds = 0.0;  // best of the repeats
  std::size_t memory_bytes = 0;
  std::uint64_t points = 0;  // points consumed by the stage
};

struct BenchScale {
  int factor = 1;
  std::size_t signals = 0;
  std::size_t count_points = 0;  // nonzero counts fed to uvad
  std::uint64_t grid_points = 0;  // signal-buckets scored, zeros included
  std::size_t anomalies = 0;
  StageRun uvad;
  StageRun hmvad;
};

struct BenchReport {
  std::vector<BenchScale> scales;  // factor 1 then 2
  double uvad_ratio() const;
  double hmvad_ratio() const;
  double uvad_memory_ratio() const;
  double hmvad_memory_ratio() const;
};

struct BenchOptions {
  SynthConfig synth;
  SignalConfig signal;
  WindowConfig window;
  int repeats = 3;
};

/// Default workload: 50 devices x 20 templates over 2 days of 60 s buckets.
BenchOptions default_bench_options();

/// Times the uvad and hmvad stages on a count series and on its exact
/// doubling under dummy host ids.
BenchReport run_bench(const BenchOptions& opts);

std::string format_bench(const BenchReport& r);
nlohmann::json bench_to_json(const BenchReport& r);

}  // namespace loghier
