#pragma once

#include <optional>
#include <string>
#include <vector>

#include "limsim/planning/candidates.hpp"
#include "limsim/planning/driving_model.hpp"
#include "limsim/traffic/world.hpp"

namespace limsim {

// Abstract search state around `v` (the planner is vehicle 0).
DrivingState build_abstract_state(const World& w, const VehicleState& v, const std::vector<MetaActionKind>& legal);

// Constant-IDM prediction of nearby vehicles over the planning horizon,
// skipping vehicles behind `v` in its own lane.
std::vector<PredictedVehicle> predict_neighbors(const World& w, const VehicleState& v);

struct PlannedAction {
  MetaActionKind action = MetaActionKind::keep_lane_cruise;
  LaneId lane;       // lane the plan lives on
  FrenetPose start;  // on `lane`
  ActivePlan plan;
  double cost = 0.0;
};

// Candidate lattice for one meta-action, scored against `predicted`.
// nullopt when the action has no feasible candidate.
std::optional<PlannedAction> plan_action(const World& w, const VehicleState& v, MetaActionKind action,
                                         const std::vector<PredictedVehicle>& predicted);

struct FineDecision {
  int id = 0;
  std::vector<MetaActionKind> ranked;
  std::optional<PlannedAction> chosen;  // empty: emergency IDM for this epoch
  std::vector<std::pair<MetaActionKind, std::string>> fallbacks;
  double wall_time = 0.0;
};

// Upper layer (MCTS over meta-actions) then lower layer (quintic lattice),
// walking down the visit ranking while an action has no feasible trajectory.
// `forced` skips the search (external meta-actions).
FineDecision decide_fine(const World& w, const VehicleState& v, std::optional<MetaActionKind> forced = {});

}  // namespace limsim
