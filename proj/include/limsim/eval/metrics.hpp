#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "limsim/eval/log_io.hpp"

namespace limsim {

struct MetricConfig {
  double w_safety = 0.5;
  double w_efficiency = 0.25;
  double w_comfort = 0.25;
  double jerk_max = 2.0;     // m/s^3
  double lat_acc_max = 3.0;  // m/s^2
  double ttc_min = 2.0;      // s
  std::optional<double> time_budget;  // default: 2x free-flow route time
  double emergency_decel = 8.0;
  bool valid() const;
};

// Route geometry needed to score completion without the map.
struct RouteInfo {
  struct Step {
    std::vector<LaneId> lanes;
    std::vector<double> lane_lengths;
    double length = 0.0;  // along the planned lane
  };
  std::vector<Step> steps;
  double total_length = 0.0;
  double free_flow_time = 0.0;  // at the planned lanes' speed limits
};

RouteInfo route_info(const RoadNetwork& network, const std::vector<LaneId>& route);
nlohmann::json to_json(const RouteInfo& r);
RouteInfo route_info_from_json(const nlohmann::json& j);

struct ComponentScores {
  double comfort = 0.0;
  double efficiency = 0.0;
  double safety = 0.0;
};

struct CornerCase {
  std::int64_t tick = 0;
  std::string kind;  // ttc, emergency_braking, planner_fallback, agent_fallback, override
  double x = 0.0, y = 0.0;
  std::int64_t window_begin = 0, window_end = 0;
  nlohmann::json payload;
};

struct EpisodeResult {
  double route_completion = 0.0;
  double driving_score = 0.0;
  double avg_decision_time = 0.0;
  bool success = false;
  ComponentScores components;
  std::vector<CornerCase> events;
  std::string end_reason;
  double duration = 0.0;
  double time_budget = 0.0;
  double min_ttc = 0.0;
  std::size_t decisions = 0;
};

// Rows of one vehicle, in tick order.
std::vector<TrajectoryRow> rows_of(const std::vector<TrajectoryRow>& rows, int vehicle_id);

double route_completion(const std::vector<TrajectoryRow>& ego, const RouteInfo& route);
ComponentScores component_scores(const std::vector<TrajectoryRow>& ego, bool ego_collided, const MetricConfig& cfg);
double driving_score(const ComponentScores& c, const MetricConfig& cfg);
std::vector<CornerCase> flag_corner_cases(const std::vector<TrajectoryRow>& ego, const std::vector<Event>& events,
                                          int ego_id, const MetricConfig& cfg);

// Ego id, route and budget come from the episode_start event.
EpisodeResult episode_result(const EpisodeLog& log, const MetricConfig& cfg);
EpisodeResult episode_result(const EpisodeLog& log, int ego_id, const RouteInfo& route, const MetricConfig& cfg);

nlohmann::json to_json(const EpisodeResult& r);
nlohmann::json to_json(const MetricConfig& c);
MetricConfig metric_config_from_json(const nlohmann::json& j);

struct Aggregate {
  std::size_t episodes = 0;
  double rc_mean = 0, rc_std = 0;
  double ds_mean = 0, ds_std = 0;
  double dt_mean = 0, dt_std = 0;
  double sr_mean = 0, sr_std = 0;
};
// Population standard deviation, as in mean +- std tables.
Aggregate aggregate(const std::vector<EpisodeResult>& results);
std::string aggregate_csv(const std::string& scenario, const Aggregate& a);

}  // namespace limsim
