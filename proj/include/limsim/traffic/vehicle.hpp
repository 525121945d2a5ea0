#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "limsim/behavior/idm.hpp"
#include "limsim/frenet/frenet.hpp"
#include "limsim/planning/meta_action.hpp"
#include "limsim/planning/quintic.hpp"
#include "limsim/replay/track.hpp"
#include "limsim/road/lane_chain.hpp"
#include "limsim/road/route_corridor.hpp"

namespace limsim {

enum class ControlMode { Fine, Coarse, Replay, External };
const char* to_string(ControlMode m);

// Plan being executed; times relative to t0. Lateral offsets are relative to
// the chain, whose first lane is the vehicle's lane at adoption time.
struct ActivePlan {
  FrenetPlan plan;
  double t0 = 0.0;
  bool track_longitudinal = true;  // false: lateral-only settling
  MetaActionKind action = MetaActionKind::keep_lane_cruise;
  std::shared_ptr<const LaneChain> chain;
};

struct ReplayBinding {
  std::shared_ptr<const ReplayTrack> track;
  OverrideState state;
};

struct VehicleState {
  int id = 0;
  CartesianPose pose;
  FrenetPose frenet;  // on lane_id
  double lat_dot = 0.0;
  double lat_ddot = 0.0;
  LaneId lane_id;
  std::vector<LaneId> route;
  std::shared_ptr<const RouteCorridor> corridor;
  std::size_t route_step = 0;
  double length = 4.5;
  double width = 1.8;
  ControlMode control_mode = ControlMode::Coarse;
  std::optional<Trajectory> active_trajectory;

  IdmParams idm;
  double speed_factor = 1.0;
  bool is_ego = false;
  std::string flow;
  double spawn_time = 0.0;

  std::optional<ActivePlan> plan;
  std::optional<LaneId> origin_lane;  // still occupied during a lane change
  double last_lane_change = -std::numeric_limits<double>::infinity();
  std::int64_t next_decision_tick = 0;
  std::optional<ReplayBinding> replay;
  std::size_t trajectory_cursor = 0;  // External trajectory following

  double speed() const { return pose.speed; }
  Vec2 position() const { return {pose.x, pose.y}; }
  OrientedBox footprint() const { return {{pose.x, pose.y}, pose.heading, length, width}; }
};

}  // namespace limsim
