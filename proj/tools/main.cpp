#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "loghier/bench.hpp"
#include "loghier/config.hpp"
#include "loghier/detect.hpp"
#include "loghier/eval.hpp"
#include "loghier/synth.hpp"

using namespace loghier;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

Duration duration_arg(const std::string& text, const char* flag) {
  auto d = parse_duration(text);
  if (!d) throw ConfigError(flag, "expected a duration such as 60s or 15min, got '" + text + "'");
  return *d;
}

// `--a.b=v` and `--a.b v` pairs left over after the named flags.
std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw ConfigError(tok, "unexpected argument");
    std::string name = tok.substr(2);
    std::string value;
    if (auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      throw ConfigError(name, "missing value");
    }
    out.emplace_back(name, value);
  }
  return out;
}

void set_log_level(const std::string& level) {
  spdlog::set_level(spdlog::level::from_str(level));
}

struct DetectArgs {
  std::string config;
  std::string input;
  std::string format;
  std::string datacenter;
  std::string topology;
  std::string anomalies, scores, alerts, summary;
  bool print_config = false;
};

int cmd_detect(const DetectArgs& a, const std::vector<std::string>& extras) {
  json doc = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError("config", "cannot read " + a.config);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", a.config + ": " + e.what());
    }
  }
  if (!a.input.empty()) apply_override(doc, "sources.0.path", json(a.input).dump());
  if (!a.format.empty()) apply_override(doc, "sources.0.format", json(a.format).dump());
  if (!a.datacenter.empty()) apply_override(doc, "sources.0.datacenter", json(a.datacenter).dump());
  if (!a.topology.empty()) apply_override(doc, "topology", json(a.topology).dump());
  if (!a.anomalies.empty()) apply_override(doc, "output.anomalies", json(a.anomalies).dump());
  if (!a.scores.empty()) apply_override(doc, "output.scores", json(a.scores).dump());
  if (!a.alerts.empty()) apply_override(doc, "output.alerts", json(a.alerts).dump());
  if (!a.summary.empty()) apply_override(doc, "output.summary", json(a.summary).dump());
  for (const auto& [k, v] : dotted_overrides(extras)) apply_override(doc, k, v);

  RunConfig cfg = run_config_from_json(doc);
  if (cfg.sources.empty()) throw ConfigError("sources", "no input configured (use --input or a config file)");
  set_log_level(cfg.log_level);
  const std::string effective = to_json(cfg).dump(2);
  if (a.print_config) std::cout << effective << '\n';
  spdlog::debug("effective config:\n{}", effective);
  cfg.check_paths();

  auto result = run_detect(cfg);
  json summary = json::array();
  for (const auto& s : result.summaries) {
    std::printf("dc=%s records=%llu malformed=%llu late=%llu templates=%zu signals=%zu anomalies=%llu windows=%llu "
                "alerts=%llu\n",
                s.datacenter.c_str(), static_cast<unsigned long long>(s.counters.parsed),
                static_cast<unsigned long long>(s.counters.malformed), static_cast<unsigned long long>(s.counters.late),
                s.templates, s.signals, static_cast<unsigned long long>(s.anomalies),
                static_cast<unsigned long long>(s.windows), static_cast<unsigned long long>(s.alerts));
    summary.push_back({{"dc", s.datacenter},
                       {"lines", s.counters.total_lines},
                       {"records", s.counters.parsed},
                       {"malformed", s.counters.malformed},
                       {"late", s.counters.late},
                       {"templates", s.templates},
                       {"signals", s.signals},
                       {"anomalies", s.anomalies},
                       {"windows", s.windows},
                       {"filtered", s.filtered},
                       {"alerts", s.alerts}});
  }
  if (cfg.output.summary) {
    std::ofstream out(*cfg.output.summary);
    out << summary.dump(2) << '\n';
  }
  return 0;
}

struct MineArgs {
  std::string input;
  std::string format = "structured-lines";
  int year = 0;
  std::string import_path;
  std::string export_path;
  std::string assignments;
  int tree_depth = 4;
  double similarity = 0.5;
  int max_children = 100;
};

int cmd_mine(const MineArgs& a) {
  SourceConfig sc;
  sc.path = a.input;
  sc.format = input_format_from_string(a.format);
  sc.year = a.year;
  sc.allowed_lateness = Duration::max() / 4;  // keep everything, order is irrelevant here
  if (!std::filesystem::exists(a.input)) throw ConfigError("input", "input file not found: " + a.input);
  MinerConfig mc;
  mc.tree_depth = a.tree_depth;
  mc.similarity_threshold = a.similarity;
  mc.max_children = a.max_children;
  mc.validate();

  TemplateMiner miner(mc);
  if (!a.import_path.empty()) {
    std::ifstream in(a.import_path);
    if (!in) throw ConfigError("import", "cannot read " + a.import_path);
    miner = TemplateMiner::import_templates(templates_from_json(json::parse(in)), mc);
  }
  std::ofstream assign;
  if (!a.assignments.empty()) assign.open(a.assignments);
  RecordStream stream(open_source(sc), sc, resolve_year(sc));
  while (auto item = stream.next()) {
    auto m = miner.add_message(item->record.message);
    if (assign) assign << m.id << '\t' << item->record.message << '\n';
  }
  auto templates = miner.export_templates();
  if (!a.export_path.empty()) {
    std::ofstream out(a.export_path);
    out << templates_to_json(templates).dump(2) << '\n';
  }
  for (const auto& t : templates) std::printf("%lld\t%llu\t%s\n", static_cast<long long>(t.id),
                                              static_cast<unsigned long long>(t.match_count), t.text().c_str());
  spdlog::info("{} lines, {} malformed, {} templates", stream.counters().total_lines, stream.counters().malformed,
               templates.size());
  return 0;
}

struct GenArgs {
  SynthConfig synth;
  std::string duration = "7d";
  std::string bucket = "60s";
  std::string burst = "10min";
  std::string start = "2021-01-04T00:00:00Z";
  std::string logs = "synthetic.log";
  std::string tickets = "incidents.jsonl";
};

Duration long_duration(const std::string& text, const char* flag) {
  if (!text.empty() && text.back() == 'd') {
    auto d = parse_duration(text.substr(0, text.size() - 1) + "h");
    if (d) return *d * 24;
  }
  return duration_arg(text, flag);
}

int cmd_gen(GenArgs a) {
  a.synth.duration = long_duration(a.duration, "duration");
  a.synth.bucket_width = duration_arg(a.bucket, "bucket-width");
  a.synth.burst_duration = duration_arg(a.burst, "burst-duration");
  auto start = parse_iso8601(a.start);
  if (!start) throw ConfigError("start", "expected an ISO-8601 timestamp");
  a.synth.start = *start;
  try {
    a.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("gen", e.what());
  }
  std::ofstream logs(a.logs, std::ios::binary), tickets(a.tickets, std::ios::binary);
  if (!logs) throw ConfigError("logs", "cannot write " + a.logs);
  if (!tickets) throw ConfigError("tickets", "cannot write " + a.tickets);
  auto s = generate(a.synth, logs, tickets);
  std::printf("lines=%llu incidents=%zu\n", static_cast<unsigned long long>(s.lines), s.incidents);
  return 0;
}

struct EvalArgs {
  std::string alerts, incidents, precomputed, report_json;
  std::string tau = "5min";
  std::string dedup_step = "5min";
  double split = 0.0;
};

int cmd_eval(const EvalArgs& a) {
  EvalReport report;
  if (!a.precomputed.empty()) {
    report = report_from_precomputed(read_precomputed(a.precomputed));
  } else {
    if (a.alerts.empty() || a.incidents.empty())
      throw ConfigError("eval", "--alerts and --incidents are required unless --precomputed is given");
    auto alerts = read_alerts(a.alerts);
    auto incidents = read_incidents(a.incidents);
    EvalOptions opts;
    opts.match.tolerance = duration_arg(a.tau, "tau");
    opts.match.dedup_step = duration_arg(a.dedup_step, "dedup-step");
    if (a.split > 0.0) {
      if (a.split >= 1.0) throw ConfigError("split", "must be in (0, 1)");
      opts.test_from = split_point(alerts, incidents, a.split);
    }
    report = evaluate(alerts, incidents, opts);
  }
  std::cout << format_report(report);
  if (!a.report_json.empty()) {
    std::ofstream out(a.report_json);
    if (!out) throw ConfigError("report-json", "cannot write " + a.report_json);
    out << report_to_json(report).dump(2) << '\n';
  }
  return 0;
}

struct BenchArgs {
  BenchOptions opts = default_bench_options();
  std::string duration = "48h";
  std::string json_path;
};

int cmd_bench(BenchArgs a) {
  a.opts.synth.duration = long_duration(a.duration, "duration");
  auto r = run_bench(a.opts);
  std::cout << format_bench(r);
  if (!a.json_path.empty()) {
    std::ofstream out(a.json_path);
    out << bench_to_json(r).dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("loghier"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");

  CLI::App app{"Streaming log anomaly detection with hierarchical aggregation"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Run the detection pipeline over a replay file or socket");
  d->allow_extras();
  d->add_option("--config", detect.config, "Run configuration (JSON)");
  d->add_option("--input", detect.input, "Shortcut for --sources.0.path");
  d->add_option("--format", detect.format, "classic-syslog or structured-lines");
  d->add_option("--dc", detect.datacenter, "Datacenter label for the input");
  d->add_option("--topology", detect.topology, "Topology document (JSON)");
  d->add_option("--anomalies", detect.anomalies, "Anomaly stream output (JSONL)");
  d->add_option("--scores", detect.scores, "Score stream output (JSONL)");
  d->add_option("--alerts", detect.alerts, "Alert stream output (JSONL)");
  d->add_option("--summary", detect.summary, "Run summary output (JSON)");
  d->add_flag("--print-config", detect.print_config, "Print the effective configuration");
  d->footer("Any configuration field can be set with a flag of its dotted name, e.g. --window.size=10min");

  MineArgs mine;
  auto* m = app.add_subcommand("mine", "Mine log templates from a file");
  m->add_option("--input", mine.input, "Log file")->required();
  m->add_option("--format", mine.format, "classic-syslog or structured-lines");
  m->add_option("--year", mine.year, "Year for classic syslog timestamps");
  m->add_option("--import", mine.import_path, "Start from an exported template document");
  m->add_option("--export", mine.export_path, "Write the template document here");
  m->add_option("--assignments", mine.assignments, "Write `id<TAB>message` per line here");
  m->add_option("--tree-depth", mine.tree_depth);
  m->add_option("--similarity", mine.similarity);
  m->add_option("--max-children", mine.max_children);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic log workload with incident tickets");
  g->add_option("--seed", gen.synth.seed);
  g->add_option("--dc", gen.synth.datacenter);
  g->add_option("--devices", gen.synth.n_devices);
  g->add_option("--templates", gen.synth.n_templates);
  g->add_option("--duration", gen.duration, "e.g. 7d, 24h");
  g->add_option("--bucket-width", gen.bucket);
  g->add_option("--rate", gen.synth.baseline_rate, "Poisson mean per device, template and bucket");
  g->add_option("--incidents", gen.synth.incidents);
  g->add_option("--burst-multiplier", gen.synth.burst_multiplier);
  g->add_option("--burst-duration", gen.burst);
  g->add_option("--devices-per-incident", gen.synth.devices_per_incident);
  g->add_option("--start", gen.start);
  g->add_option("--logs", gen.logs, "Log output path");
  g->add_option("--tickets", gen.tickets, "Incident ticket output path");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score alerts against incident tickets");
  e->add_option("--alerts", ev.alerts);
  e->add_option("--incidents", ev.incidents);
  e->add_option("--tau", ev.tau, "Matching tolerance");
  e->add_option("--dedup-step", ev.dedup_step);
  e->add_option("--split", ev.split, "Score only the part after this fraction of the time span");
  e->add_option("--precomputed", ev.precomputed, "Per-datacenter precision/recall document");
  e->add_option("--report-json", ev.report_json);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time the uvad and hmvad stages at N and 2N points");
  b->add_option("--seed", bench.opts.synth.seed);
  b->add_option("--devices", bench.opts.synth.n_devices);
  b->add_option("--templates", bench.opts.synth.n_templates);
  b->add_option("--duration", bench.duration);
  b->add_option("--rate", bench.opts.synth.baseline_rate);
  b->add_option("--repeats", bench.opts.repeats);
  b->add_option("--json", bench.json_path);

  CLI11_PARSE(app, argc, argv);
  set_log_level(log_level);

  try {
    if (*d) return cmd_detect(detect, d->remaining());
    if (*m) return cmd_mine(mine);
    if (*g) return cmd_gen(gen);
    if (*e) return cmd_eval(ev);
    if (*b) return cmd_bench(bench);
  } catch (const ConfigError& err) {
    spdlog::error("{}", err.what());
    return kExitConfig;
  } catch (const TopologyError& err) {
    spdlog::error("topology: {}", err.what());
    return kExitConfig;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return kExitRuntime;
  }
  return 0;
}
