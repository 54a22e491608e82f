#include "loghier/detect.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace loghier {

Topology load_run_topology(const RunConfig& cfg) {
  if (!cfg.topology) return Topology::root_only();
  return Topology::load(read_topology_config(*cfg.topology));
}

namespace {

struct Buffers {
  std::ostringstream anomalies, scores, alerts;
};

}  // namespace

DetectResult run_detect(const RunConfig& cfg, std::vector<std::unique_ptr<LineSource>> sources) {
  cfg.validate();
  if (sources.size() != cfg.sources.size()) throw std::invalid_argument("one line source per configured source");
  const Topology tree = load_run_topology(cfg);
  const std::size_t n = sources.size();
  std::vector<Buffers> buffers(n);
  std::vector<PipelineSummary> summaries(n);
  std::vector<std::vector<Alert>> alerts(n);

  const bool parallel = cfg.parallel && n > 1;
  auto open = [](const std::optional<std::string>& path) {
    std::unique_ptr<std::ofstream> out;
    if (!path) return out;
    out = std::make_unique<std::ofstream>(*path, std::ios::binary | std::ios::trunc);
    if (!*out) throw std::runtime_error("cannot write " + *path);
    return out;
  };
  auto anomalies_out = open(cfg.output.anomalies);
  auto scores_out = open(cfg.output.scores);
  auto alerts_out = open(cfg.output.alerts);

  // Sequential runs stream straight to the files; parallel runs buffer per
  // datacenter and concatenate in source order.
  auto run_one = [&](std::size_t i) {
    const auto& sc = cfg.sources[i];
    PipelineSinks sinks;
    if (anomalies_out) sinks.anomalies = parallel ? &buffers[i].anomalies : static_cast<std::ostream*>(anomalies_out.get());
    if (scores_out) sinks.scores = parallel ? &buffers[i].scores : static_cast<std::ostream*>(scores_out.get());
    if (alerts_out) sinks.alerts = parallel ? &buffers[i].alerts : static_cast<std::ostream*>(alerts_out.get());
    DatacenterPipeline pipe(sc.datacenter, cfg.pipeline, tree, sinks);
    RecordStream stream(std::move(sources[i]), sc, resolve_year(sc));
    run_stream(stream, pipe, cfg.threaded_ingest);
    summaries[i] = pipe.summary();
    alerts[i] = pipe.alerts();
  };

  if (parallel) {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n);
    for (std::size_t i = 0; i < n; ++i)
      workers.emplace_back([&, i] {
        try {
          run_one(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  }

  if (parallel) {
    for (auto& b : buffers) {
      if (anomalies_out) *anomalies_out << b.anomalies.str();
      if (scores_out) *scores_out << b.scores.str();
      if (alerts_out) *alerts_out << b.alerts.str();
    }
  }

  DetectResult result;
  result.summaries = std::move(summaries);
  for (auto& a : alerts) result.alerts.insert(result.alerts.end(), a.begin(), a.end());
  return result;
}

DetectResult run_detect(const RunConfig& cfg) {
  cfg.check_paths();
  std::vector<std::unique_ptr<LineSource>> sources;
  for (const auto& sc : cfg.sources) sources.push_back(open_source(sc));
  return run_detect(cfg, std::move(sources));
}

}  // namespace loghier
