#pragma once

#include <ostream>
#include <vector>

#include "loghier/aggregate.hpp"
#include "loghier/hmvad.hpp"
#include "loghier/ingest.hpp"
#include "loghier/templatemine.hpp"
#include "loghier/topology.hpp"
#include "loghier/uvad.hpp"

namespace loghier {

struct PipelineConfig {
  MinerConfig miner;
  AggregatorConfig aggregator;
  SignalConfig signal;
  std::vector<SignalOverride> overrides;
  WindowConfig window;
};

/// Optional JSONL outputs. Null streams are skipped.
struct PipelineSinks {
  std::ostream* anomalies = nullptr;
  std::ostream* scores = nullptr;
  std::ostream* alerts = nullptr;
};

struct PipelineSummary {
  std::string datacenter;
  StreamCounters counters;
  std::size_t templates = 0;
  std::size_t signals = 0;
  std::uint64_t anomalies = 0;
  std::uint64_t alerts = 0;
  std::uint64_t windows = 0;
  std::uint64_t filtered = 0;
};

/// ingest -> templatemine -> aggregate -> uvad -> hmvad for one datacenter.
class DatacenterPipeline {
 public:
  DatacenterPipeline(std::string datacenter, const PipelineConfig& cfg, Topology tree, PipelineSinks sinks = {});

  /// Feeds one on-time record along with the stream watermark after it.
  void push(const LogRecord& record, std::optional<Timestamp> watermark);
  /// Closes every bucket and evaluates the windows that still hold data.
  void finish();

  PipelineSummary summary() const;
  const std::vector<Alert>& alerts() const { return alerts_; }
  const TemplateMiner& miner() const { return miner_; }
  const UnivariateDetector& univariate() const { return uvad_; }
  const HierarchicalDetector& hierarchical() const { return hmvad_; }
  /// Counters of the stream that fed this pipeline; set by run_stream.
  void set_counters(const StreamCounters& c) { counters_ = c; }

 private:
  void advance(Timestamp frontier, std::vector<CountPoint> closed);
  void emit(const std::vector<AnomalousPoint>& points);
  void emit(const std::vector<WindowResult>& results);

  std::string datacenter_;
  TemplateMiner miner_;
  Aggregator aggregator_;
  UnivariateDetector uvad_;
  HierarchicalDetector hmvad_;
  PipelineSinks sinks_;
  std::optional<Timestamp> next_close_;
  std::vector<Alert> alerts_;
  std::uint64_t anomalies_ = 0;
  StreamCounters counters_;
  bool finished_ = false;
};

/// Drains `stream` into `pipeline`. With `threaded`, a reader thread parses
/// lines and hands records over an ordered bounded queue.
void run_stream(RecordStream& stream, DatacenterPipeline& pipeline, bool threaded = true,
                std::size_t queue_capacity = 4096);

std::string anomaly_json(const AnomalousPoint& p);
std::string score_json(const NodeScore& s);
std::string alert_json(const Alert& a);

}  // namespace loghier
