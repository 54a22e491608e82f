#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "loghier/time.hpp"

namespace loghier {

struct IncidentTicket {
  std::string datacenter;
  Timestamp start_time{};
  std::string description;
  std::vector<std::string> devices;

  bool operator==(const IncidentTicket&) const = default;
};

/// Alert reduced to what matching needs.
struct AlertEvent {
  std::string datacenter;
  Timestamp window_end{};

  bool operator==(const AlertEvent&) const = default;
};

struct EvalCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  bool operator==(const EvalCounts&) const = default;
};

struct EvalMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MatchOptions {
  Duration tolerance = std::chrono::minutes{5};
  // Alerts are collapsed to one per (datacenter, step window) of this width.
  Duration dedup_step = std::chrono::minutes{5};
};

struct MatchReport {
  EvalCounts counts;
  std::vector<AlertEvent> alerts;          // after deduplication, sorted
  std::vector<bool> alert_matched;
  std::vector<IncidentTicket> incidents;   // after merging, sorted
  std::vector<bool> incident_detected;
  std::size_t merged_incidents = 0;
  std::size_t duplicate_alerts = 0;
};

std::vector<AlertEvent> deduplicate_alerts(std::vector<AlertEvent> alerts, Duration step, std::size_t* dropped = nullptr);
/// Merges same-datacenter tickets whose start times chain within `tolerance`.
std::vector<IncidentTicket> merge_incidents(std::vector<IncidentTicket> incidents, Duration tolerance,
                                            std::size_t* merged = nullptr);

/// An incident is detected iff some alert in its datacenter lies within
/// `tolerance` of its start; each alert matching no incident is one false
/// positive; each undetected incident is one false negative.
MatchReport match(std::vector<AlertEvent> alerts, std::vector<IncidentTicket> incidents, const MatchOptions& opts = {});

EvalMetrics metrics(const EvalCounts& counts);
EvalMetrics f1_from(double precision, double recall);

struct WeightedMetrics {
  EvalMetrics metrics;
  double weight = 0.0;
};

/// Incident-weighted mean of each metric. Throws when all weights are zero.
EvalMetrics weighted_mean(const std::vector<WeightedMetrics>& per_dc);

// Report -----------------------------------------------------------------------

struct ReportRow {
  std::string datacenter;
  EvalMetrics metrics;
  std::size_t incidents = 0;
  std::optional<EvalCounts> counts;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  EvalMetrics weighted;
};

struct EvalOptions {
  MatchOptions match;
  // Only alerts/incidents at or after this instant are scored.
  std::optional<Timestamp> test_from;
};

EvalReport evaluate(const std::vector<AlertEvent>& alerts, const std::vector<IncidentTicket>& incidents,
                    const EvalOptions& opts = {});
/// Report from precomputed per-datacenter precision/recall (fractions) and incident counts.
EvalReport report_from_precomputed(const std::vector<ReportRow>& rows);

/// Midpoint of the span covered by the inputs, for a 50-50 train/test split.
std::optional<Timestamp> split_point(const std::vector<AlertEvent>& alerts, const std::vector<IncidentTicket>& incidents,
                                     double fraction = 0.5);

std::string format_report(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

// I/O ----------------------------------------------------------------------------

std::vector<IncidentTicket> read_incidents(const std::filesystem::path& path);
void write_incident(std::ostream& out, const IncidentTicket& t);
/// Reads alert records `{window_end, dc, ...}`, one per line.
std::vector<AlertEvent> read_alerts(const std::filesystem::path& path);
/// Reads `{"rows":[{"dc", "precision", "recall", "incidents"}]}` with percentages.
std::vector<ReportRow> read_precomputed(const std::filesystem::path& path);

}  // namespace loghier
