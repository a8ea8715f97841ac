#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfl/analysis.hpp"
#include "dfl/engine.hpp"

namespace dfl {

using json = nlohmann::json;

struct SweepSettings {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  Metric metric = Metric::kTestAccuracy;
  double threshold = 0.8;
};

/// Everything a config file can hold: the run itself plus the settings used
/// by `sweep` and `analyze --stability`.
struct ExperimentConfig {
  RunConfig run;
  SweepSettings sweep;
  StabilityProbeConfig stability;

  ExperimentConfig();
};

/// The full default document. It doubles as the schema: keys absent from it
/// are rejected, and value types must match.
json default_config_json();

json to_json(const ExperimentConfig& cfg);
/// Merges `doc` over the defaults and converts. Throws ConfigError on unknown
/// keys, type mismatches and invalid values.
ExperimentConfig experiment_from_json(const json& doc);

/// Applies "a.b=value" to doc. The value is parsed as JSON when possible,
/// otherwise taken as a string. The key path must exist in the defaults.
void apply_override(json& doc, const std::string& assignment);

/// Reads a config file or a summary.json (its "config" member is used),
/// then applies the overrides. Throws ConfigError naming the path on failure.
ExperimentConfig load_experiment(const std::string& path, const std::vector<std::string>& overrides = {});

/// Help text listing every key with its default.
std::string describe_defaults();

}  // namespace dfl
