#include "loghier/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace loghier {
namespace {

constexpr std::array<std::string_view, 24> kHeads = {
    "LINK-UPDOWN",    "LINEPROTO-UPDOWN", "BGP-ADJCHANGE",  "OSPF-ADJCHG",     "SYS-RESTART",   "ENVMON-FAN",
    "ENVMON-TEMP",    "POWER-SUPPLY",     "STP-TOPOCHANGE", "LACP-MEMBER",     "DOT-AUTHFAIL",  "SNMP-AUTHFAIL",
    "NTP-UNSYNC",     "ACL-DENY",         "PORT-SECURITY",  "MAC-FLAP",        "CDP-DUPLEX",    "HSRP-STATECHG",
    "VRRP-STATECHG",  "LLDP-NEIGHBOR",    "ISIS-ADJCHANGE", "CRC-ERRORS",      "FABRIC-ALARM",  "CONFIG-CHANGE"};

constexpr std::array<std::string_view, 16> kWords = {"interface", "neighbor", "state",  "changed", "to",    "down",
                                                     "up",        "detected", "module", "reason",  "peer",  "session",
                                                     "threshold", "exceeded", "port",   "channel"};

std::string head_for(int k) {
  if (k < static_cast<int>(kHeads.size())) return std::string(kHeads[static_cast<std::size_t>(k)]);
  std::string s = "EVENT-";
  int v = k;
  do {
    s += static_cast<char>('A' + v % 26);
    v /= 26;
  } while (v > 0);
  return s;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_devices < 1 || n_templates < 1) throw std::invalid_argument("gen: n_devices and n_templates must be >= 1");
  if (bucket_width.count() <= 0 || duration < bucket_width) throw std::invalid_argument("gen: duration must span a bucket");
  if (!(baseline_rate > 0.0)) throw std::invalid_argument("gen: baseline_rate must be > 0");
  if (incidents < 0) throw std::invalid_argument("gen: incidents must be >= 0");
  if (!(burst_multiplier > 1.0)) throw std::invalid_argument("gen: burst_multiplier must be > 1");
  if (burst_duration < bucket_width) throw std::invalid_argument("gen: burst_duration must be >= one bucket");
  if (devices_per_incident < 1 || devices_per_incident > n_devices)
    throw std::invalid_argument("gen: devices_per_incident must be in [1, n_devices]");
  if (incidents > 0 && duration / incidents < burst_duration * 3)
    throw std::invalid_argument("gen: too many incidents for the duration");
}

std::string synth_device_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sw-%03d", index);
  return buf;
}

std::string synth_message(int k, std::mt19937_64 & rng) {
  // Fixed per-template skeleton, with two variable slots.
  std::mt19937_64 shape(0x5eedULL + static_cast<std::uint64_t>(k) * 7919ULL);
  std::size_t n_words = 3 + shape() % 4;
  std::string msg = head_for(k) + ":";
  std::uniform_int_distribution<int> port(0, 47), slot(0, 7), value(0, 99999);
  for (std::size_t i = 0; i < n_words; ++i) {
    msg += ' ';
    msg += kWords[shape() % kWords.size()];
    if (i == 0) msg += " Gi" + std::to_string(slot(rng)) + "/" + std::to_string(port(rng));
  }
  msg += " value=" + std::to_string(value(rng));
  return msg;
}

SyntheticLogSource::SyntheticLogSource(SynthConfig cfg)
    : cfg_(std::move(cfg)), rate_rng_(cfg_.seed), text_rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.validate();
  bursts_by_device_.resize(static_cast<std::size_t>(cfg_.n_devices));
  std::mt19937_64 plan_rng(cfg_.seed * 0x2545F4914F6CDD1DULL + 17);
  const std::size_t total = cfg_.buckets();
  const std::size_t burst = static_cast<std::size_t>(cfg_.burst_duration / cfg_.bucket_width);
  for (int i = 0; i < cfg_.incidents; ++i) {
    // One incident per equal slot, kept away from the slot edges.
    std::size_t slot_lo = total * static_cast<std::size_t>(i) / static_cast<std::size_t>(cfg_.incidents);
    std::size_t slot_hi = total * static_cast<std::size_t>(i + 1) / static_cast<std::size_t>(cfg_.incidents);
    std::size_t margin = std::min<std::size_t>(60, (slot_hi - slot_lo) / 4);
    std::size_t lo = slot_lo + margin;
    std::size_t hi = slot_hi > burst + margin ? slot_hi - burst - margin : lo;
    if (hi < lo) hi = lo;
    std::size_t start = std::uniform_int_distribution<std::size_t>(lo, hi)(plan_rng);

    std::vector<int> devices(static_cast<std::size_t>(cfg_.n_devices));
    std::iota(devices.begin(), devices.end(), 0);
    std::shuffle(devices.begin(), devices.end(), plan_rng);
    devices.resize(static_cast<std::size_t>(cfg_.devices_per_incident));
    std::sort(devices.begin(), devices.end());

    PlannedIncident p;
    p.ticket.datacenter = cfg_.datacenter;
    p.ticket.start_time = cfg_.start + cfg_.bucket_width * static_cast<long>(start);
    p.end = p.ticket.start_time + cfg_.bucket_width * static_cast<long>(burst);
    p.ticket.description = "synthetic burst x" + std::to_string(cfg_.burst_multiplier) + " on " +
                           std::to_string(devices.size()) + " devices";
    for (int d : devices) {
      p.ticket.devices.push_back(synth_device_name(d));
      bursts_by_device_[static_cast<std::size_t>(d)].emplace_back(start, start + burst);
    }
    p.device_indices = std::move(devices);
    incidents_.push_back(std::move(p));
  }
}

bool SyntheticLogSource::burst_active(int device, std::size_t bucket) const {
  for (const auto& [lo, hi] : bursts_by_device_[static_cast<std::size_t>(device)])
    if (bucket >= lo && bucket < hi) return true;
  return false;
}

std::vector<IncidentTicket> SyntheticLogSource::tickets() const {
  std::vector<IncidentTicket> out;
  for (const auto& p : incidents_) out.push_back(p.ticket);
  return out;
}

void SyntheticLogSource::fill_bucket() {
  lines_.clear();
  line_pos_ = 0;
  const Timestamp bucket_start = cfg_.start + cfg_.bucket_width * static_cast<long>(bucket_);
  std::uniform_int_distribution<std::int64_t> offset(0, cfg_.bucket_width.count() - 1);
  for (int d = 0; d < cfg_.n_devices; ++d) {
    double rate = cfg_.baseline_rate * (burst_active(d, bucket_) ? cfg_.burst_multiplier : 1.0);
    std::poisson_distribution<int> draw(rate);
    std::string host = synth_device_name(d);
    for (int k = 0; k < cfg_.n_templates; ++k) {
      int n = draw(rate_rng_);
      for (int i = 0; i < n; ++i) {
        auto ts = bucket_start + Duration{offset(text_rng_)};
        std::string line = "{\"ts\":\"" + format_iso8601(ts) + "\",\"host\":\"" + host + "\",\"msg\":\"" +
                           json_escape(synth_message(k, text_rng_)) + "\"}";
        lines_.emplace_back(to_epoch_ms(ts), std::move(line));
      }
    }
  }
  std::stable_sort(lines_.begin(), lines_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  ++bucket_;
}

bool SyntheticLogSource::next(std::string& line) {
  while (line_pos_ >= lines_.size()) {
    if (bucket_ >= cfg_.buckets()) return false;
    fill_bucket();
  }
  line = std::move(lines_[line_pos_++].second);
  ++seq_;
  return true;
}

void SyntheticLogSource::seek(std::uint64_t pos) {
  std::string skip;
  while (seq_ < pos && next(skip)) {
  }
}

GenerateSummary generate(const SynthConfig& cfg, std::ostream& logs, std::ostream& tickets) {
  SyntheticLogSource src(cfg);
  GenerateSummary s;
  std::string line;
  while (src.next(line)) {
    logs << line << '\n';
    ++s.lines;
  }
  for (const auto& t : src.tickets()) write_incident(tickets, t);
  s.incidents = src.incidents().size();
  return s;
}

CountSeries generate_counts(const SynthConfig& cfg) {
  cfg.validate();
  CountSeries out;
  out.signals = static_cast<std::size_t>(cfg.n_devices) * static_cast<std::size_t>(cfg.n_templates);
  out.buckets = cfg.buckets();
  std::mt19937_64 rng(cfg.seed);
  std::poisson_distribution<int> draw(cfg.baseline_rate);
  std::vector<std::string> hosts;
  for (int d = 0; d < cfg.n_devices; ++d) hosts.push_back(synth_device_name(d));
  for (std::size_t b = 0; b < out.buckets; ++b) {
    Timestamp ts = cfg.start + cfg.bucket_width * static_cast<long>(b);
    for (int d = 0; d < cfg.n_devices; ++d) {
      for (int k = 0; k < cfg.n_templates; ++k) {
        int n = draw(rng);
        if (n > 0)
          out.points.push_back(CountPoint{SignalKey{cfg.datacenter, hosts[static_cast<std::size_t>(d)], k + 1}, ts,
                                          static_cast<std::uint64_t>(n)});
      }
    }
  }
  return out;
}

CountSeries double_with_dummy_hosts(const CountSeries& series) {
  CountSeries out;
  out.signals = series.signals * 2;
  out.buckets = series.buckets;
  out.points.reserve(series.points.size() * 2);
  for (const auto& p : series.points) {
    out.points.push_back(p);
    CountPoint dup = p;
    dup.key.device = "dummy-" + p.key.device;
    out.points.push_back(std::move(dup));
  }
  std::stable_sort(out.points.begin(), out.points.end(), [](const CountPoint& a, const CountPoint& b) {
    return std::tie(a.bucket_start, a.key) < std::tie(b.bucket_start, b.key);
  });
  return out;
}

}  // namespace loghier
