#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "vecquad/scenario.hpp"

namespace vecquad {

// Bad or unreadable configuration. The message names the file and key.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// VECQUAD_CONFIG_DIR if set, else the source tree's config/ directory
std::filesystem::path default_config_dir();

// Angles in the files are degrees, rates in rad/s, everything else SI.
// Unknown keys are rejected so typos do not silently fall back to defaults.
RobotDescription load_robot(const std::filesystem::path& file);
void apply_gains(ScenarioConfig& cfg, const std::filesystem::path& file);

ScenarioConfig load_scenario_config(ScenarioKind kind, const std::filesystem::path& robot_file,
                                    const std::filesystem::path& gains_file);

}  // namespace vecquad
