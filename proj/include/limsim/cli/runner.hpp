#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>

#include "limsim/cli/scenario.hpp"
#include "limsim/eval/metrics.hpp"

namespace limsim {

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // nothing written when empty
  std::shared_ptr<ExternalController> external;  // overrides the socket for an external ego
  std::function<void(World&)> on_start;          // after spawning, before the first step
  std::function<void(const World&)> on_tick;     // after each step
};

struct RunOutcome {
  EpisodeLog log;
  std::optional<EpisodeResult> result;  // empty without an ego
  std::int64_t ticks = 0;
  double wall_time = 0.0;
  std::string end_reason;
};

RunOutcome run_episode(const ScenarioConfig& cfg, std::shared_ptr<const RoadNetwork> network, const RunOptions& opts = {});

// Episodes with seeds seed..seed+n-1 into <root>/<scenario>/<seed>/, plus
// <root>/<scenario>/aggregate.csv. `jobs` episodes run at once.
std::vector<EpisodeResult> run_batch(const ScenarioConfig& cfg, std::shared_ptr<const RoadNetwork> network,
                                     const std::filesystem::path& root, int n, int jobs = 1);

std::filesystem::path output_root(const std::optional<std::filesystem::path>& flag);

std::string summary_line(const EpisodeResult& r);

}  // namespace limsim
