#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loghier/ingest.hpp"
#include "loghier/pipeline.hpp"

namespace loghier {

/// Invalid configuration. `field()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct OutputPaths {
  std::optional<std::string> anomalies;
  std::optional<std::string> scores;
  std::optional<std::string> alerts;
  std::optional<std::string> summary;
};

struct RunConfig {
  std::vector<SourceConfig> sources;
  PipelineConfig pipeline;
  std::optional<std::string> topology;
  OutputPaths output;
  std::string log_level = "info";
  bool parallel = false;
  bool threaded_ingest = true;

  /// Cross-field checks. Existence of input paths is checked separately.
  void validate() const;
  void check_paths() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict: unknown keys and wrong types raise ConfigError naming the field.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig read_run_config(const std::filesystem::path& path);

/// Applies `a.b.0.c=value` to the document. The value is read as JSON when it
/// parses as JSON, otherwise as a string. Intermediate objects and list slots
/// are created as needed.
void apply_override(nlohmann::json& doc, const std::string& dotted, const std::string& value);

}  // namespace loghier
