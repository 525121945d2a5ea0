#pragma once

#include <array>
#include <vector>

#include "limsim/common/math.hpp"
#include "limsim/planning/meta_action.hpp"
#include "limsim/planning/quintic.hpp"

namespace limsim {

struct CostWeights {
  double safety = 1.0;
  double efficiency = 0.3;
  double comfort = 0.2;
  double deviation = 0.1;
};

struct CandidateRequest {
  FrenetPose start;  // in the planning frame (target lane for lane changes)
  MetaActionKind action = MetaActionKind::keep_lane_cruise;
  double desired_speed = 13.89;
  double horizon = 5.0;
  double dt = 0.1;
  double lateral_duration = 3.0;
  std::vector<double> lateral_offsets{-0.6, -0.3, 0.0, 0.3, 0.6};
};

struct Candidate {
  FrenetPlan plan;
  Trajectory trajectory;
  double terminal_speed = 0.0;
  double terminal_l = 0.0;
};

// Terminal speeds for an action, each clamped to [0, desired].
std::array<double, 3> terminal_speeds(MetaActionKind action, double speed, double desired);

// Offsets x speeds lattice in enumeration order (offset-major). Plans that
// would drive backwards are dropped.
std::vector<Candidate> generate_candidates(const ReferenceLine& frame, const CandidateRequest& req);

// Predicted motion of another vehicle, one pose per trajectory sample.
struct PredictedVehicle {
  int id = 0;
  double length = 4.5;
  double width = 1.8;
  std::vector<Vec2> positions;
  std::vector<double> headings;
  std::vector<double> speeds;
};

struct ScoringContext {
  std::vector<PredictedVehicle> others;
  double speed_limit = 13.89;
  double ego_length = 4.5;
  double ego_width = 1.8;
  double lane_half_width = 1.75;
  CostWeights weights;
  double ttc_ref = 4.0;
  double jerk_ref = 2.0;
  double length_margin = 1.0;  // footprint inflation
  double width_margin = 0.4;
  double ttc_lateral_band = 0.3;
  int threads = 1;
};

struct ScoreResult {
  std::vector<double> costs;
  std::size_t best_index = 0;
};

// Infinite when the trajectory overlaps a predicted footprint.
double trajectory_cost(const Trajectory& traj, const ScoringContext& ctx);

// Costs land in each candidate's own slot; argmin keeps the lowest index on
// ties. Throws AllInfeasible when every cost is infinite.
ScoreResult score_candidates(const std::vector<Trajectory>& candidates, const ScoringContext& ctx);

}  // namespace limsim
