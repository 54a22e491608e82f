#include "loghier/bench.hpp"

#include <chrono>
#include <cstdio>
#include <limits>

namespace loghier {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Feed bucket by bucket, as the streaming pipeline does.
std::vector<AnomalousPoint> run_uvad(const CountSeries& s, const BenchOptions& o, StageRun& stage,
                                     std::uint64_t& grid) {
  UnivariateDetector det(o.signal, o.synth.bucket_width);
  std::vector<AnomalousPoint> out;
  std::vector<CountPoint> batch;
  auto t0 = Clock::now();
  std::size_t i = 0;
  while (i < s.points.size()) {
    Timestamp b = s.points[i].bucket_start;
    batch.clear();
    while (i < s.points.size() && s.points[i].bucket_start == b) batch.push_back(s.points[i++]);
    auto e = det.advance(batch, b + o.synth.bucket_width);
    out.insert(out.end(), e.begin(), e.end());
  }
  double t = since(t0);
  stage.seconds = std::min(stage.seconds, t);
  stage.memory_bytes = det.memory_bytes();
  stage.points = s.points.size();
  grid = det.points_processed();
  return out;
}

void run_hmvad(const std::vector<AnomalousPoint>& anomalies, const CountSeries& s, const BenchOptions& o,
               StageRun& stage) {
  HierarchicalDetector det(Topology::root_only(), o.window, o.synth.datacenter);
  det.set_origin(o.synth.start);
  const Timestamp end = o.synth.start + o.synth.bucket_width * static_cast<long>(s.buckets);
  auto t0 = Clock::now();
  std::size_t i = 0;
  for (Timestamp t = o.synth.start + o.window.step; t <= end; t += o.window.step) {
    std::size_t j = i;
    while (j < anomalies.size() && anomalies[j].timestamp < t) ++j;
    det.add(std::span<const AnomalousPoint>(anomalies.data() + i, j - i));
    i = j;
    det.advance(t);
  }
  double secs = since(t0);
  stage.seconds = std::min(stage.seconds, secs);
  stage.memory_bytes = det.memory_bytes();
  stage.points = anomalies.size();
}

double ratio(double a, double b) { return b > 0 ? a / b : 0.0; }

}  // namespace

BenchOptions default_bench_options() {
  BenchOptions o;
  o.synth.datacenter = "bench";
  o.synth.n_devices = 50;
  o.synth.n_templates = 20;
  o.synth.duration = std::chrono::hours{48};
  o.synth.incidents = 0;
  o.synth.seed = 7;
  return o;
}

BenchReport run_bench(const BenchOptions& opts) {
  opts.signal.validate();
  opts.window.validate();
  const CountSeries base = generate_counts(opts.synth);
  const CountSeries doubled = double_with_dummy_hosts(base);
  BenchReport r;
  int factor = 1;
  for (const CountSeries* s : {&base, &doubled}) {
    BenchScale scale;
    scale.factor = factor;
    factor *= 2;
    scale.signals = s->signals;
    scale.count_points = s->points.size();
    scale.uvad.seconds = scale.hmvad.seconds = std::numeric_limits<double>::infinity();
    std::vector<AnomalousPoint> anomalies;
    for (int rep = 0; rep < std::max(1, opts.repeats); ++rep) {
      anomalies = run_uvad(*s, opts, scale.uvad, scale.grid_points);
      run_hmvad(anomalies, *s, opts, scale.hmvad);
    }
    scale.anomalies = anomalies.size();
    r.scales.push_back(scale);
  }
  return r;
}

double BenchReport::uvad_ratio() const { return ratio(scales.at(1).uvad.seconds, scales.at(0).uvad.seconds); }
double BenchReport::hmvad_ratio() const { return ratio(scales.at(1).hmvad.seconds, scales.at(0).hmvad.seconds); }
double BenchReport::uvad_memory_ratio() const {
  return ratio(static_cast<double>(scales.at(1).uvad.memory_bytes), static_cast<double>(scales.at(0).uvad.memory_bytes));
}
double BenchReport::hmvad_memory_ratio() const {
  return ratio(static_cast<double>(scales.at(1).hmvad.memory_bytes),
               static_cast<double>(scales.at(0).hmvad.memory_bytes));
}

std::string format_bench(const BenchReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-6s %9s %12s %12s %10s %14s %12s\n", "scale", "stage", "signals", "N",
                "grid", "seconds", "us/1000 pts", "memory KiB");
  out += line;
  for (const auto& s : r.scales) {
    auto row = [&](const char* name, const StageRun& st, std::uint64_t n) {
      double per_k = n ? st.seconds * 1e6 / (static_cast<double>(n) / 1000.0) : 0.0;
      std::snprintf(line, sizeof line, "%-6s %-6s %9zu %12llu %12llu %10.4f %14.3f %12.1f\n",
                    (std::to_string(s.factor) + "x").c_str(), name, s.signals, static_cast<unsigned long long>(n),
                    static_cast<unsigned long long>(s.grid_points), st.seconds, per_k,
                    static_cast<double>(st.memory_bytes) / 1024.0);
      out += line;
    };
    row("uvad", s.uvad, s.count_points);
    row("hmvad", s.hmvad, s.count_points);
  }
  std::snprintf(line, sizeof line, "T(2N)/T(N): uvad %.3f  hmvad %.3f\nmemory(2N)/memory(N): uvad %.3f  hmvad %.3f\n",
                r.uvad_ratio(), r.hmvad_ratio(), r.uvad_memory_ratio(), r.hmvad_memory_ratio());
  out += line;
  return out;
}

nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& s : r.scales) {
    auto stage = [](const StageRun& st) {
      return nlohmann::json{{"seconds", st.seconds}, {"memory_bytes", st.memory_bytes}, {"points", st.points}};
    };
    scales.push_back({{"factor", s.factor},
                      {"signals", s.signals},
                      {"count_points", s.count_points},
                      {"grid_points", s.grid_points},
                      {"anomalies", s.anomalies},
                      {"uvad", stage(s.uvad)},
                      {"hmvad", stage(s.hmvad)}});
  }
  return {{"scales", scales},
          {"ratio", {{"uvad", r.uvad_ratio()}, {"hmvad", r.hmvad_ratio()}}},
          {"memory_ratio", {{"uvad", r.uvad_memory_ratio()}, {"hmvad", r.hmvad_memory_ratio()}}}};
}

}  // namespace loghier
