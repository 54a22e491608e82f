#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "loghier/ingest.hpp"
#include "loghier/templatemine.hpp"
#include "loghier/time.hpp"

namespace loghier {

struct SignalKey {
  std::string datacenter;
  std::string device;
  TemplateId template_id = 0;

  auto operator<=>(const SignalKey&) const = default;
  bool operator==(const SignalKey&) const = default;
};

std::string to_string(const SignalKey& key);

struct SignalKeyHash {
  std::size_t operator()(const SignalKey& k) const noexcept {
    std::size_t h = std::hash<std::string>{}(k.datacenter);
    h ^= std::hash<std::string>{}(k.device) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<TemplateId>{}(k.template_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

struct CountPoint {
  SignalKey key;
  Timestamp bucket_start{};
  std::uint64_t count = 0;

  bool operator==(const CountPoint&) const = default;
};

struct AggregatorConfig {
  Duration bucket_width = std::chrono::seconds{60};

  void validate() const;
};

/// Tumbling-bucket event counter keyed by (datacenter, device, template).
class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig cfg = {});

  void add(const LogRecord& record, TemplateId template_id);
  /// Emits and removes every bucket with bucket_start + width <= watermark,
  /// ordered by (bucket_start, key).
  std::vector<CountPoint> flush(Timestamp watermark);
  std::vector<CountPoint> flush_all();

  std::size_t open_buckets() const;
  const AggregatorConfig& config() const { return cfg_; }

 private:
  AggregatorConfig cfg_;
  std::map<Timestamp, std::map<SignalKey, std::uint64_t>> open_;
};

}  // namespace loghier
