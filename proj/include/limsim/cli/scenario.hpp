#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "limsim/eval/metrics.hpp"
#include "limsim/traffic/world.hpp"

namespace limsim {

struct EgoConfig {
  std::vector<LaneId> route;
  double s = 5.0;
  double l = 0.0;
  double speed = 10.0;
  bool external = false;
  std::string host = "127.0.0.1";
  int port = 7766;
  double timeout = 30.0;       // per exchange, s
  double connect_timeout = 60.0;
  int neighbors = 8;
};

struct ScenarioConfig {
  std::string name;
  std::filesystem::path map_path;
  double duration = 60.0;
  std::uint64_t seed = 1;
  SimConfig sim;
  std::vector<FlowSpec> flows;
  std::optional<EgoConfig> ego;
  MetricConfig metrics;
  std::optional<std::filesystem::path> replay_tracks;
};

// Parses a TOML scenario; relative paths resolve against the file's folder.
// `overrides` are `section.key=value` strings applied before validation.
// Throws ConfigError naming the offending field.
ScenarioConfig load_scenario(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});
ScenarioConfig parse_scenario(const std::string& toml_text, const std::filesystem::path& base_dir,
                              const std::vector<std::string>& overrides = {});

// Map-dependent checks (lanes exist, routes connect). Throws ConfigError.
void validate_scenario(const ScenarioConfig& cfg, const RoadNetwork& network);

}  // namespace limsim
