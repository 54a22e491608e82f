#include "loghier/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace loghier {
namespace {

using json = nlohmann::json;

Timestamp required_time(const json& j, const char* key, const std::string& where) {
  auto ts = parse_iso8601(j.at(key).get<std::string>());
  if (!ts) throw std::runtime_error(std::string("bad timestamp in '") + key + "' at " + where);
  return *ts;
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": not a JSON object");
    try {
      f(j, path.string() + ":" + std::to_string(n));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<AlertEvent> deduplicate_alerts(std::vector<AlertEvent> alerts, Duration step, std::size_t* dropped) {
  std::sort(alerts.begin(), alerts.end(), [](const AlertEvent& a, const AlertEvent& b) {
    return std::tie(a.datacenter, a.window_end) < std::tie(b.datacenter, b.window_end);
  });
  // Keep the earliest alert of each (datacenter, step window), at its own time.
  std::vector<AlertEvent> kept;
  for (auto& a : alerts)
    if (kept.empty() || kept.back().datacenter != a.datacenter ||
        align_down(kept.back().window_end, step) != align_down(a.window_end, step))
      kept.push_back(std::move(a));
  if (dropped) *dropped = alerts.size() - kept.size();
  return kept;
}

std::vector<IncidentTicket> merge_incidents(std::vector<IncidentTicket> incidents, Duration tolerance,
                                            std::size_t* merged) {
  std::stable_sort(incidents.begin(), incidents.end(), [](const IncidentTicket& a, const IncidentTicket& b) {
    return std::tie(a.datacenter, a.start_time) < std::tie(b.datacenter, b.start_time);
  });
  std::vector<IncidentTicket> out;
  std::size_t n_merged = 0;
  Timestamp chain_end{};
  for (auto& t : incidents) {
    if (!out.empty() && out.back().datacenter == t.datacenter && t.start_time - chain_end <= tolerance) {
      chain_end = t.start_time;
      auto& kept = out.back();
      for (auto& d : t.devices)
        if (std::find(kept.devices.begin(), kept.devices.end(), d) == kept.devices.end()) kept.devices.push_back(d);
      if (!t.description.empty()) kept.description += (kept.description.empty() ? "" : " | ") + t.description;
      ++n_merged;
      continue;
    }
    chain_end = t.start_time;
    out.push_back(std::move(t));
  }
  if (merged) *merged = n_merged;
  return out;
}

MatchReport match(std::vector<AlertEvent> alerts, std::vector<IncidentTicket> incidents, const MatchOptions& opts) {
  MatchReport r;
  r.alerts = deduplicate_alerts(std::move(alerts), opts.dedup_step, &r.duplicate_alerts);
  r.incidents = merge_incidents(std::move(incidents), opts.tolerance, &r.merged_incidents);
  r.alert_matched.assign(r.alerts.size(), false);
  r.incident_detected.assign(r.incidents.size(), false);

  // Both lists are sorted by (datacenter, time): sweep a window of alerts.
  std::size_t lo = 0;
  for (std::size_t i = 0; i < r.incidents.size(); ++i) {
    const auto& inc = r.incidents[i];
    auto before = [&](const AlertEvent& a) {
      return a.datacenter < inc.datacenter ||
             (a.datacenter == inc.datacenter && a.window_end < inc.start_time - opts.tolerance);
    };
    while (lo < r.alerts.size() && before(r.alerts[lo])) ++lo;
    for (std::size_t j = lo; j < r.alerts.size(); ++j) {
      const auto& a = r.alerts[j];
      if (a.datacenter != inc.datacenter || a.window_end > inc.start_time + opts.tolerance) break;
      r.alert_matched[j] = true;
      r.incident_detected[i] = true;
    }
  }
  for (bool d : r.incident_detected) (d ? r.counts.true_positives : r.counts.false_negatives)++;
  for (bool m : r.alert_matched)
    if (!m) ++r.counts.false_positives;
  return r;
}

EvalMetrics f1_from(double precision, double recall) {
  EvalMetrics m{precision, recall, 0.0};
  if (precision + recall > 0.0) m.f1 = 2.0 * precision * recall / (precision + recall);
  return m;
}

EvalMetrics metrics(const EvalCounts& c) {
  double tp = static_cast<double>(c.true_positives);
  double p = c.true_positives + c.false_positives == 0 ? 0.0 : tp / static_cast<double>(c.true_positives + c.false_positives);
  double r = c.true_positives + c.false_negatives == 0 ? 0.0 : tp / static_cast<double>(c.true_positives + c.false_negatives);
  return f1_from(p, r);
}

EvalMetrics weighted_mean(const std::vector<WeightedMetrics>& per_dc) {
  double total = 0.0;
  EvalMetrics out;
  for (const auto& [m, w] : per_dc) {
    if (w < 0.0) throw std::invalid_argument("negative incident weight");
    total += w;
    out.precision += m.precision * w;
    out.recall += m.recall * w;
    out.f1 += m.f1 * w;
  }
  if (total <= 0.0) throw std::invalid_argument("weighted_mean needs at least one non-zero incident count");
  out.precision /= total;
  out.recall /= total;
  out.f1 /= total;
  return out;
}

EvalReport report_from_precomputed(const std::vector<ReportRow>& rows) {
  EvalReport rep;
  std::vector<WeightedMetrics> w;
  for (auto row : rows) {
    row.metrics = f1_from(row.metrics.precision, row.metrics.recall);
    w.push_back({row.metrics, static_cast<double>(row.incidents)});
    rep.rows.push_back(std::move(row));
  }
  rep.weighted = weighted_mean(w);
  return rep;
}

EvalReport evaluate(const std::vector<AlertEvent>& alerts, const std::vector<IncidentTicket>& incidents,
                    const EvalOptions& opts) {
  std::map<std::string, std::pair<std::vector<AlertEvent>, std::vector<IncidentTicket>>> by_dc;
  for (const auto& a : alerts)
    if (!opts.test_from || a.window_end >= *opts.test_from) by_dc[a.datacenter].first.push_back(a);
  for (const auto& t : incidents)
    if (!opts.test_from || t.start_time >= *opts.test_from) by_dc[t.datacenter].second.push_back(t);

  EvalReport rep;
  std::vector<WeightedMetrics> w;
  for (auto& [dc, pair] : by_dc) {
    auto r = match(pair.first, pair.second, opts.match);
    ReportRow row{dc, metrics(r.counts), r.incidents.size(), r.counts};
    w.push_back({row.metrics, static_cast<double>(row.incidents)});
    rep.rows.push_back(std::move(row));
  }
  if (std::any_of(w.begin(), w.end(), [](const auto& x) { return x.weight > 0.0; }))
    rep.weighted = weighted_mean(w);
  return rep;
}

std::optional<Timestamp> split_point(const std::vector<AlertEvent>& alerts, const std::vector<IncidentTicket>& incidents,
                                     double fraction) {
  std::optional<Timestamp> lo, hi;
  auto see = [&](Timestamp t) {
    if (!lo || t < *lo) lo = t;
    if (!hi || t > *hi) hi = t;
  };
  for (const auto& a : alerts) see(a.window_end);
  for (const auto& t : incidents) see(t.start_time);
  if (!lo) return std::nullopt;
  auto span = std::chrono::duration_cast<Duration>((*hi - *lo) * fraction);
  return *lo + span;
}

std::string format_report(const EvalReport& rep) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %10s\n", "datacenter", "F1 %", "P %", "R %", "incidents");
  os << buf;
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %8.1f %8.1f %8.1f %10zu\n", r.datacenter.c_str(), 100 * r.metrics.f1,
                  100 * r.metrics.precision, 100 * r.metrics.recall, r.incidents);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-16s %8.1f %8.1f %8.1f\n", "WM", 100 * rep.weighted.f1, 100 * rep.weighted.precision,
                100 * rep.weighted.recall);
  os << buf;
  return os.str();
}

nlohmann::json report_to_json(const EvalReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    json row = {{"dc", r.datacenter},
                {"f1", 100 * r.metrics.f1},
                {"precision", 100 * r.metrics.precision},
                {"recall", 100 * r.metrics.recall},
                {"incidents", r.incidents}};
    if (r.counts)
      row["counts"] = {{"tp", r.counts->true_positives}, {"fp", r.counts->false_positives}, {"fn", r.counts->false_negatives}};
    rows.push_back(std::move(row));
  }
  return {{"rows", rows},
          {"wm", {{"f1", 100 * rep.weighted.f1}, {"precision", 100 * rep.weighted.precision}, {"recall", 100 * rep.weighted.recall}}}};
}

std::vector<IncidentTicket> read_incidents(const std::filesystem::path& path) {
  std::vector<IncidentTicket> out;
  for_each_json_line(path, [&](const json& j, const std::string& where) {
    IncidentTicket t;
    t.datacenter = j.at("dc").get<std::string>();
    if (t.datacenter.empty()) throw std::runtime_error("empty dc at " + where);
    t.start_time = required_time(j, "start_time", where);
    t.description = j.value("description", std::string{});
    if (j.contains("devices") && !j.at("devices").is_null()) t.devices = j.at("devices").get<std::vector<std::string>>();
    out.push_back(std::move(t));
  });
  return out;
}

void write_incident(std::ostream& out, const IncidentTicket& t) {
  json j = {{"dc", t.datacenter}, {"start_time", format_iso8601(t.start_time)}, {"description", t.description}};
  if (!t.devices.empty()) j["devices"] = t.devices;
  out << j.dump() << '\n';
}

std::vector<AlertEvent> read_alerts(const std::filesystem::path& path) {
  std::vector<AlertEvent> out;
  for_each_json_line(path, [&](const json& j, const std::string& where) {
    out.push_back(AlertEvent{j.at("dc").get<std::string>(), required_time(j, "window_end", where)});
  });
  return out;
}

std::vector<ReportRow> read_precomputed(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error(path.string() + " is not valid JSON");
  std::vector<ReportRow> rows;
  try {
    for (const auto& r : doc.at("rows")) {
      ReportRow row;
      row.datacenter = r.at("dc").get<std::string>();
      row.metrics.precision = r.at("precision").get<double>() / 100.0;
      row.metrics.recall = r.at("recall").get<double>() / 100.0;
      row.incidents = r.at("incidents").get<std::size_t>();
      rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return rows;
}

}  // namespace loghier
