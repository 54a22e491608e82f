#pragma once

#include <functional>
#include <vector>

#include "loghier/config.hpp"
#include "loghier/pipeline.hpp"

namespace loghier {

struct DetectResult {
  std::vector<PipelineSummary> summaries;
  std::vector<Alert> alerts;  // per datacenter in source order, then by window_end
};

/// Topology named by the config, or a root-only tree when none is set.
Topology load_run_topology(const RunConfig& cfg);

/// Runs every configured source through its own pipeline and writes the
/// configured output streams. Datacenters run one after another unless
/// `cfg.parallel` is set; output order is the same either way.
DetectResult run_detect(const RunConfig& cfg);

/// Same pipeline over caller-provided line sources, one per SourceConfig.
DetectResult run_detect(const RunConfig& cfg, std::vector<std::unique_ptr<LineSource>> sources);

}  // namespace loghier
