#include "loghier/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace loghier {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) throw ConfigError(join(where, k), "unknown key");
}

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(join(where, key), "wrong type");
  }
}

template <typename T>
void read_opt(const json& obj, const std::string& where, const char* key, std::optional<T>& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(obj, where, key, v);
  out = v;
}

void read_duration(const json& obj, const std::string& where, const char* key, Duration& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  std::optional<Duration> d;
  if (it->is_number()) d = from_seconds(it->get<double>());
  else if (it->is_string()) d = parse_duration(it->get<std::string>());
  if (!d) throw ConfigError(join(where, key), "expected a duration such as 60s or 15min");
  out = *d;
}

template <typename Fn>
auto convert(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

json bounds_json(const std::optional<ValueBounds>& b) {
  if (!b) return nullptr;
  return json::array({b->lo, b->hi});
}

std::optional<ValueBounds> read_bounds(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
    throw ConfigError(join(where, key), "expected [lo, hi]");
  ValueBounds b{(*it)[0].get<double>(), (*it)[1].get<double>()};
  if (b.lo > b.hi) throw ConfigError(join(where, key), "lo must be <= hi");
  return b;
}

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

SourceConfig source_from_json(const json& j, const std::string& where) {
  only_keys(j, where, {"kind", "path", "format", "datacenter", "allowed_lateness", "replay_speed", "year", "emit_late"});
  SourceConfig s;
  std::string text;
  if (j.contains("kind")) {
    read(j, where, "kind", text);
    s.kind = convert(join(where, "kind"), [&] { return source_kind_from_string(text); });
  }
  if (j.contains("format")) {
    read(j, where, "format", text);
    s.format = convert(join(where, "format"), [&] { return input_format_from_string(text); });
  }
  if (j.contains("replay_speed")) {
    read(j, where, "replay_speed", text);
    s.replay_speed = convert(join(where, "replay_speed"), [&] { return replay_speed_from_string(text); });
  }
  read(j, where, "path", s.path);
  read(j, where, "datacenter", s.datacenter);
  read_duration(j, where, "allowed_lateness", s.allowed_lateness);
  read(j, where, "year", s.year);
  read(j, where, "emit_late", s.emit_late);
  convert(where, [&] {
    s.validate();
    return 0;
  });
  return s;
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json sources = json::array();
  for (const auto& s : cfg.sources)
    sources.push_back({{"kind", to_string(s.kind)},
                       {"path", s.path},
                       {"format", to_string(s.format)},
                       {"datacenter", s.datacenter},
                       {"allowed_lateness", format_duration(s.allowed_lateness)},
                       {"replay_speed", to_string(s.replay_speed)},
                       {"year", s.year},
                       {"emit_late", s.emit_late}});
  const auto& p = cfg.pipeline;
  json masks = json::array();
  for (const auto& m : p.miner.masks) masks.push_back({{"pattern", m.pattern}, {"placeholder", m.placeholder}});
  json overrides = json::array();
  for (const auto& o : p.overrides) {
    json e = {{"device", o.device}};
    e["template_id"] = o.template_id ? json(*o.template_id) : json(nullptr);
    e["direction"] = o.direction ? json(std::string(to_string(*o.direction))) : json(nullptr);
    e["bounds"] = bounds_json(o.bounds);
    e["z_emit"] = o.z_emit ? json(*o.z_emit) : json(nullptr);
    e["sigma_min"] = o.sigma_min ? json(*o.sigma_min) : json(nullptr);
    overrides.push_back(std::move(e));
  }
  const auto& u = p.signal;
  json uvad = {{"alpha_short", u.alpha_short},
               {"alpha_recent", u.alpha_recent},
               {"alpha_background", u.alpha_background ? json(*u.alpha_background) : json(nullptr)},
               {"sigma_min", u.sigma_min},
               {"direction", to_string(u.direction)},
               {"bounds", bounds_json(u.bounds)},
               {"z_emit", u.z_emit},
               {"continuity_gain", u.continuity_gain},
               {"continuity_cap", u.continuity_cap},
               {"warmup_buckets", u.warmup_buckets},
               {"overrides", overrides}};
  const auto& w = p.window;
  return {{"sources", sources},
          {"miner",
           {{"tree_depth", p.miner.tree_depth},
            {"similarity_threshold", p.miner.similarity_threshold},
            {"max_children", p.miner.max_children},
            {"masks", masks}}},
          {"aggregator", {{"bucket_width", format_duration(p.aggregator.bucket_width)}}},
          {"uvad", uvad},
          {"topology", opt(cfg.topology)},
          {"window",
           {{"size", format_duration(w.size)},
            {"step", format_duration(w.step)},
            {"percentile_threshold", w.percentile_threshold},
            {"wpm_exponent", w.wpm_exponent},
            {"alert_threshold", w.alert_threshold},
            {"history_capacity", w.history_capacity}}},
          {"output",
           {{"anomalies", opt(cfg.output.anomalies)},
            {"scores", opt(cfg.output.scores)},
            {"alerts", opt(cfg.output.alerts)},
            {"summary", opt(cfg.output.summary)}}},
          {"log_level", cfg.log_level},
          {"parallel", cfg.parallel},
          {"threaded_ingest", cfg.threaded_ingest}};
}

RunConfig run_config_from_json(const json& doc) {
  only_keys(doc, "", {"sources", "miner", "aggregator", "uvad", "topology", "window", "output", "log_level", "parallel",
                      "threaded_ingest"});
  RunConfig cfg;
  if (auto it = doc.find("sources"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw ConfigError("sources", "expected a list");
    for (std::size_t i = 0; i < it->size(); ++i)
      cfg.sources.push_back(source_from_json((*it)[i], "sources." + std::to_string(i)));
  }
  auto& p = cfg.pipeline;
  if (auto it = doc.find("miner"); it != doc.end() && !it->is_null()) {
    only_keys(*it, "miner", {"tree_depth", "similarity_threshold", "max_children", "masks"});
    read(*it, "miner", "tree_depth", p.miner.tree_depth);
    read(*it, "miner", "similarity_threshold", p.miner.similarity_threshold);
    read(*it, "miner", "max_children", p.miner.max_children);
    if (auto m = it->find("masks"); m != it->end() && !m->is_null()) {
      if (!m->is_array()) throw ConfigError("miner.masks", "expected a list");
      for (std::size_t i = 0; i < m->size(); ++i) {
        std::string where = "miner.masks." + std::to_string(i);
        only_keys((*m)[i], where, {"pattern", "placeholder"});
        MaskRule r;
        read((*m)[i], where, "pattern", r.pattern);
        read((*m)[i], where, "placeholder", r.placeholder);
        p.miner.masks.push_back(std::move(r));
      }
    }
    convert("miner", [&] {
      p.miner.validate();
      Tokenizer check(p.miner.masks);  // surfaces malformed regexes
      return 0;
    });
  }
  if (auto it = doc.find("aggregator"); it != doc.end() && !it->is_null()) {
    only_keys(*it, "aggregator", {"bucket_width"});
    read_duration(*it, "aggregator", "bucket_width", p.aggregator.bucket_width);
    convert("aggregator.bucket_width", [&] {
      p.aggregator.validate();
      return 0;
    });
  }
  if (auto it = doc.find("uvad"); it != doc.end() && !it->is_null()) {
    const std::string w = "uvad";
    only_keys(*it, w, {"alpha_short", "alpha_recent", "alpha_background", "sigma_min", "direction", "bounds", "z_emit",
                       "continuity_gain", "continuity_cap", "warmup_buckets", "overrides"});
    auto& u = p.signal;
    read(*it, w, "alpha_short", u.alpha_short);
    read(*it, w, "alpha_recent", u.alpha_recent);
    read_opt(*it, w, "alpha_background", u.alpha_background);
    read(*it, w, "sigma_min", u.sigma_min);
    if (it->contains("direction")) {
      std::string d;
      read(*it, w, "direction", d);
      u.direction = convert("uvad.direction", [&] { return direction_from_string(d); });
    }
    u.bounds = read_bounds(*it, w, "bounds");
    read(*it, w, "z_emit", u.z_emit);
    read(*it, w, "continuity_gain", u.continuity_gain);
    read(*it, w, "continuity_cap", u.continuity_cap);
    read(*it, w, "warmup_buckets", u.warmup_buckets);
    convert("uvad", [&] {
      u.validate();
      return 0;
    });
    if (auto o = it->find("overrides"); o != it->end() && !o->is_null()) {
      if (!o->is_array()) throw ConfigError("uvad.overrides", "expected a list");
      for (std::size_t i = 0; i < o->size(); ++i) {
        std::string where = "uvad.overrides." + std::to_string(i);
        const auto& e = (*o)[i];
        only_keys(e, where, {"device", "template_id", "direction", "bounds", "z_emit", "sigma_min"});
        SignalOverride so;
        read(e, where, "device", so.device);
        read_opt(e, where, "template_id", so.template_id);
        if (e.contains("direction") && !e["direction"].is_null()) {
          std::string d;
          read(e, where, "direction", d);
          so.direction = convert(where + ".direction", [&] { return direction_from_string(d); });
        }
        so.bounds = read_bounds(e, where, "bounds");
        read_opt(e, where, "z_emit", so.z_emit);
        read_opt(e, where, "sigma_min", so.sigma_min);
        if (so.z_emit && !(*so.z_emit > 0)) throw ConfigError(where + ".z_emit", "must be > 0");
        if (so.sigma_min && !(*so.sigma_min > 0)) throw ConfigError(where + ".sigma_min", "must be > 0");
        p.overrides.push_back(std::move(so));
      }
    }
  }
  read_opt(doc, "", "topology", cfg.topology);
  if (auto it = doc.find("window"); it != doc.end() && !it->is_null()) {
    only_keys(*it, "window",
              {"size", "step", "percentile_threshold", "wpm_exponent", "alert_threshold", "history_capacity"});
    auto& w = p.window;
    read_duration(*it, "window", "size", w.size);
    read_duration(*it, "window", "step", w.step);
    read(*it, "window", "percentile_threshold", w.percentile_threshold);
    read(*it, "window", "wpm_exponent", w.wpm_exponent);
    read(*it, "window", "alert_threshold", w.alert_threshold);
    read(*it, "window", "history_capacity", w.history_capacity);
    convert("window", [&] {
      w.validate();
      return 0;
    });
  }
  if (auto it = doc.find("output"); it != doc.end() && !it->is_null()) {
    only_keys(*it, "output", {"anomalies", "scores", "alerts", "summary"});
    read_opt(*it, "output", "anomalies", cfg.output.anomalies);
    read_opt(*it, "output", "scores", cfg.output.scores);
    read_opt(*it, "output", "alerts", cfg.output.alerts);
    read_opt(*it, "output", "summary", cfg.output.summary);
  }
  read(doc, "", "log_level", cfg.log_level);
  read(doc, "", "parallel", cfg.parallel);
  read(doc, "", "threaded_ingest", cfg.threaded_ingest);
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  static const std::set<std::string> levels = {"trace", "debug", "info", "warn", "error", "off"};
  if (!levels.count(log_level)) throw ConfigError("log_level", "expected one of trace/debug/info/warn/error/off");
  if (pipeline.window.step % pipeline.aggregator.bucket_width != Duration::zero())
    throw ConfigError("aggregator.bucket_width", "must divide window.step (" + format_duration(pipeline.window.step) +
                                                     ")");
  std::set<std::string> dcs;
  for (std::size_t i = 0; i < sources.size(); ++i)
    if (!dcs.insert(sources[i].datacenter).second)
      throw ConfigError("sources." + std::to_string(i) + ".datacenter",
                        "duplicate datacenter '" + sources[i].datacenter + "'");
}

void RunConfig::check_paths() const {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    if (s.kind == SourceKind::FileReplay && !std::filesystem::exists(s.path))
      throw ConfigError("sources." + std::to_string(i) + ".path", "input file not found: " + s.path);
  }
  if (topology && !std::filesystem::exists(*topology))
    throw ConfigError("topology", "topology file not found: " + *topology);
  auto creatable = [](const std::optional<std::string>& p, const char* field) {
    if (!p) return;
    auto dir = std::filesystem::path(*p).parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir))
      throw ConfigError(field, "output directory does not exist: " + dir.string());
  };
  creatable(output.anomalies, "output.anomalies");
  creatable(output.scores, "output.scores");
  creatable(output.alerts, "output.alerts");
  creatable(output.summary, "output.summary");
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

void apply_override(json& doc, const std::string& dotted, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = dotted.find('.', start);
    std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(dotted, "empty path component");
    bool is_index = std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (is_index && (cur->is_array() || cur->is_null())) {
      std::size_t idx = std::stoul(part);
      if (cur->is_null()) *cur = json::array();
      while (cur->size() <= idx) cur->push_back(json::object());
      cur = &(*cur)[idx];
    } else {
      if (cur->is_null()) *cur = json::object();
      if (!cur->is_object()) throw ConfigError(dotted, "'" + part + "' does not name an object field");
      cur = &(*cur)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *cur = std::move(parsed);
}

}  // namespace loghier
