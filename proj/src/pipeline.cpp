#include "loghier/pipeline.hpp"

#include <thread>

#include <nlohmann/json.hpp>

#include "loghier/bounded_queue.hpp"

namespace loghier {

using nlohmann::json;

std::string anomaly_json(const AnomalousPoint& p) {
  json j = {{"ts", format_iso8601(p.timestamp)},
            {"score", p.score},
            {"dc", p.dimensions.datacenter},
            {"device", p.dimensions.device},
            {"template_id", p.dimensions.template_id}};
  return j.dump();
}

std::string score_json(const NodeScore& s) {
  json j = {{"window_end", format_iso8601(s.window_end)},
            {"node_id", s.node_id},
            {"depth", s.depth},
            {"raw", s.raw},
            {"rank", s.rank},
            {"normalized", s.normalized}};
  return j.dump();
}

std::string alert_json(const Alert& a) {
  json path = json::array();
  for (const auto& c : a.contributor_path) path.push_back({{"node_id", c.node_id}, {"raw", c.raw}});
  json j = {{"window_end", format_iso8601(a.window_end)},
            {"dc", a.datacenter},
            {"normalized_root", a.normalized_root},
            {"contributor_path", path}};
  return j.dump();
}

DatacenterPipeline::DatacenterPipeline(std::string datacenter, const PipelineConfig& cfg, Topology tree,
                                       PipelineSinks sinks)
    : datacenter_(std::move(datacenter)),
      miner_(cfg.miner),
      aggregator_(cfg.aggregator),
      uvad_(cfg.signal, cfg.aggregator.bucket_width, cfg.overrides),
      hmvad_(std::move(tree), cfg.window, datacenter_),
      sinks_(sinks) {
  cfg.window.validate();
  if (cfg.window.step % cfg.aggregator.bucket_width != Duration::zero())
    throw std::invalid_argument("aggregator.bucket_width must divide window.step");
}

void DatacenterPipeline::push(const LogRecord& record, std::optional<Timestamp> watermark) {
  auto m = miner_.add_message(record.message);
  hmvad_.set_origin(record.event_time);
  LogRecord r = record;
  r.datacenter = datacenter_;
  aggregator_.add(r, m.id);
  const Duration width = aggregator_.config().bucket_width;
  if (!next_close_) next_close_ = align_down(record.event_time, width) + width;
  if (watermark && *watermark >= *next_close_) {
    advance(*watermark, aggregator_.flush(*watermark));
    next_close_ = align_down(*watermark, width) + width;
  }
}

void DatacenterPipeline::advance(Timestamp frontier, std::vector<CountPoint> closed) {
  emit(uvad_.advance(closed, frontier));
  if (auto until = uvad_.processed_until()) emit(hmvad_.advance(*until));
}

void DatacenterPipeline::finish() {
  if (finished_) return;
  finished_ = true;
  auto closed = aggregator_.flush_all();
  if (closed.empty() && !uvad_.processed_until()) return;
  Timestamp frontier = closed.empty() ? *uvad_.processed_until()
                                      : closed.back().bucket_start + aggregator_.config().bucket_width;
  emit(uvad_.advance(closed, frontier));
  // Evaluate through the first step boundary at or past the end of the data.
  if (auto until = uvad_.processed_until()) {
    const Duration step = hmvad_.config().step;
    Timestamp last = align_down(*until, step);
    if (last < *until) last += step;
    emit(hmvad_.advance(last));
  }
}

void DatacenterPipeline::emit(const std::vector<AnomalousPoint>& points) {
  anomalies_ += points.size();
  if (sinks_.anomalies)
    for (const auto& p : points) *sinks_.anomalies << anomaly_json(p) << '\n';
  hmvad_.add(points);
}

void DatacenterPipeline::emit(const std::vector<WindowResult>& results) {
  for (const auto& w : results) {
    if (sinks_.scores)
      for (const auto& s : w.scores) *sinks_.scores << score_json(s) << '\n';
    if (w.alert) {
      if (sinks_.alerts) *sinks_.alerts << alert_json(*w.alert) << '\n';
      alerts_.push_back(*w.alert);
    }
  }
}

PipelineSummary DatacenterPipeline::summary() const {
  PipelineSummary s;
  s.datacenter = datacenter_;
  s.counters = counters_;
  s.templates = miner_.size();
  s.signals = uvad_.signal_count();
  s.anomalies = anomalies_;
  s.alerts = alerts_.size();
  s.windows = hmvad_.windows_evaluated();
  s.filtered = hmvad_.filtered_out();
  return s;
}

void run_stream(RecordStream& stream, DatacenterPipeline& pipeline, bool threaded, std::size_t queue_capacity) {
  auto consume = [&](const StreamItem& item) {
    if (!item.late) pipeline.push(item.record, item.watermark);
  };
  if (!threaded) {
    while (auto item = stream.next()) consume(*item);
  } else {
    BoundedQueue<StreamItem> queue(queue_capacity);
    std::exception_ptr reader_error;
    std::thread reader([&] {
      try {
        while (auto item = stream.next())
          if (!queue.push(std::move(*item))) break;
      } catch (...) {
        reader_error = std::current_exception();
      }
      queue.close();
    });
    try {
      while (auto item = queue.pop()) consume(*item);
    } catch (...) {
      queue.close();
      reader.join();
      throw;
    }
    reader.join();
    if (reader_error) std::rethrow_exception(reader_error);
  }
  pipeline.finish();
  pipeline.set_counters(stream.counters());
}

}  // namespace loghier
