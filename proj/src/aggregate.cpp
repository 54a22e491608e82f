#include "loghier/aggregate.hpp"

#include <stdexcept>

namespace loghier {

std::string to_string(const SignalKey& key) {
  return key.datacenter + "/" + key.device + "/" + std::to_string(key.template_id);
}

void AggregatorConfig::validate() const {
  if (bucket_width.count() <= 0) throw std::invalid_argument("aggregator.bucket_width must be > 0");
}

Aggregator::Aggregator(AggregatorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Aggregator::add(const LogRecord& record, TemplateId template_id) {
  auto bucket = align_down(record.event_time, cfg_.bucket_width);
  auto& per_key = open_[bucket];
  SignalKey key{record.datacenter, record.device, template_id};
  auto it = per_key.find(key);
  if (it == per_key.end())
    per_key.emplace(std::move(key), 1);
  else
    ++it->second;
}

std::vector<CountPoint> Aggregator::flush(Timestamp watermark) {
  std::vector<CountPoint> out;
  while (!open_.empty()) {
    auto it = open_.begin();
    if (it->first + cfg_.bucket_width > watermark) break;
    for (auto& [key, count] : it->second) out.push_back(CountPoint{key, it->first, count});
    open_.erase(it);
  }
  return out;
}

std::vector<CountPoint> Aggregator::flush_all() {
  std::vector<CountPoint> out;
  for (auto& [bucket, per_key] : open_)
    for (auto& [key, count] : per_key) out.push_back(CountPoint{key, bucket, count});
  open_.clear();
  return out;
}

std::size_t Aggregator::open_buckets() const {
  std::size_t n = 0;
  for (const auto& [b, m] : open_) n += m.size();
  return n;
}

}  // namespace loghier
