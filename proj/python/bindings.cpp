#include <fstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "loghier/detect.hpp"
#include "loghier/eval.hpp"
#include "loghier/hmvad.hpp"
#include "loghier/synth.hpp"
#include "loghier/templatemine.hpp"

namespace py = pybind11;
using namespace loghier;

namespace {

using Metrics = std::tuple<double, double, double>;

Metrics as_tuple(const EvalMetrics& m) { return {m.precision, m.recall, m.f1}; }

py::dict parse(const std::string& line, const std::string& format, int year, const std::string& dc) {
  LogRecord r = parse_line(line, input_format_from_string(format), ParseContext{year, dc});
  py::dict d;
  d["event_time"] = format_iso8601(r.event_time);
  d["device"] = r.device;
  d["message"] = r.message;
  d["datacenter"] = r.datacenter;
  return d;
}

std::string detect(const std::string& config_json) {
  auto cfg = run_config_from_json(nlohmann::json::parse(config_json));
  DetectResult res;
  {
    py::gil_scoped_release nogil;
    res = run_detect(cfg);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : res.summaries)
    out.push_back({{"dc", s.datacenter},
                   {"records", s.counters.parsed},
                   {"malformed", s.counters.malformed},
                   {"late", s.counters.late},
                   {"templates", s.templates},
                   {"signals", s.signals},
                   {"anomalies", s.anomalies},
                   {"windows", s.windows},
                   {"alerts", s.alerts}});
  return out.dump();
}

std::pair<std::uint64_t, std::size_t> gen(const std::string& logs, const std::string& tickets, std::uint64_t seed,
                                           int devices, int templates, double hours, int incidents, double rate) {
  SynthConfig c;
  c.seed = seed;
  c.n_devices = devices;
  c.n_templates = templates;
  c.duration = std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::ratio<3600>>(hours));
  c.incidents = incidents;
  c.baseline_rate = rate;
  py::gil_scoped_release nogil;
  std::ofstream l(logs), t(tickets);
  if (!l || !t) throw std::runtime_error("cannot write generator output");
  auto s = generate(c, l, t);
  return {s.lines, s.incidents};
}

std::string eval(const std::string& alerts, const std::string& incidents, double tau_minutes) {
  EvalOptions opts;
  opts.match.tolerance = std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::ratio<60>>(tau_minutes));
  return report_to_json(evaluate(read_alerts(alerts), read_incidents(incidents), opts)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Streaming log anomaly detection core";

  py::register_exception<MalformedError>(m, "MalformedError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TopologyError>(m, "TopologyError", PyExc_ValueError);

  m.def("parse_line", &parse, py::arg("line"), py::arg("format") = "structured-lines", py::arg("year") = 1970,
        py::arg("datacenter") = "dc");

  py::class_<TemplateMiner>(m, "TemplateMiner")
      .def(py::init([](int depth, double sim, int max_children) {
             MinerConfig c;
             c.tree_depth = depth;
             c.similarity_threshold = sim;
             c.max_children = max_children;
             c.validate();
             return TemplateMiner(c);
           }),
           py::arg("tree_depth") = 4, py::arg("similarity_threshold") = 0.5, py::arg("max_children") = 100)
      .def("add_message",
           [](TemplateMiner& t, const std::string& msg) {
             auto r = t.add_message(msg);
             return std::make_pair(r.id, r.is_new);
           })
      .def("template", [](const TemplateMiner& t, TemplateId id) { return t.get(id).text(); })
      .def("templates",
           [](const TemplateMiner& t) {
             std::vector<std::tuple<TemplateId, std::string, std::uint64_t>> out;
             for (const auto& tpl : t.export_templates()) out.emplace_back(tpl.id, tpl.text(), tpl.match_count);
             return out;
           })
      .def("__len__", &TemplateMiner::size);

  m.def("wpm", [](const std::vector<std::pair<double, double>>& sw, double p) { return wpm(sw, p); },
        py::arg("score_weight"), py::arg("p") = 2.0);
  m.def("implicit_weights", &implicit_weights);
  m.def("effective_weight", &effective_weight);
  m.def("normalize_rank", &normalize_rank, py::arg("rank"), py::arg("threshold") = 90.0);
  m.def("percentile_rank", [](double raw, const std::vector<double>& history) {
    PercentileHistory h(std::max<std::size_t>(history.size(), 1));
    for (double v : history) h.push(v);
    return h.rank(raw);
  });

  m.def("metrics", [](std::size_t tp, std::size_t fp, std::size_t fn) { return as_tuple(metrics({tp, fp, fn})); });
  m.def("f1", [](double p, double r) { return f1_from(p, r).f1; });
  m.def("weighted_mean", [](const std::vector<std::pair<Metrics, double>>& rows) {
    std::vector<WeightedMetrics> in;
    for (const auto& [mt, w] : rows) in.push_back({{std::get<0>(mt), std::get<1>(mt), std::get<2>(mt)}, w});
    return as_tuple(weighted_mean(in));
  });

  m.def("generate", &gen, py::arg("logs"), py::arg("tickets"), py::arg("seed") = 1, py::arg("devices") = 50,
        py::arg("templates") = 20, py::arg("hours") = 168.0, py::arg("incidents") = 20, py::arg("rate") = 0.75);
  m.def("run_detect_json", &detect);
  m.def("evaluate_json", &eval, py::arg("alerts"), py::arg("incidents"), py::arg("tau_minutes") = 5.0);
}
