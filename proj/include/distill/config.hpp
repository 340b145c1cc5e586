#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "distill/synthbench.hpp"

namespace distill {

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string doc;
};

/// Every config key with its default and one-line description (--help).
std::vector<ConfigKeyDoc> config_key_docs();

/// Defaults, optionally overlaid with a key = value file, then with
/// command-line overrides (file < overrides). Unknown keys are usage errors;
/// bad values are config errors.
ExperimentConfig load_experiment_config(
    const std::optional<std::filesystem::path>& file,
    const std::vector<std::string>& overrides);

/// The resolved flat key = value form; reparsing it reproduces the config.
std::string serialize_experiment_config(const ExperimentConfig& config);

}  // namespace distill
