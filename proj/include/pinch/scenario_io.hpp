#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pinch/scenario.hpp"

namespace pinch {

/// Malformed or non-conforming configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario documents use snake_case keys mirroring ScenarioConfig. Points are
// [x, y, z] arrays in meters. Unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

}  // namespace pinch
