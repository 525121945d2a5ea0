#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "limsim/behavior/idm.hpp"
#include "limsim/planning/mcts.hpp"
#include "limsim/planning/meta_action.hpp"

namespace limsim {

struct SvoWeights {
  double self_weight = 1.0;
  double group_weight = 0.0;
  std::vector<int> group;  // vehicle ids sharing the reward pool

  bool valid() const {
    return self_weight >= 0 && self_weight <= 1 && group_weight >= 0 && group_weight <= 1 &&
           std::abs(self_weight + group_weight - 1.0) < 1e-9;
  }
};

// Abstract multi-vehicle state on a set of parallel lanes (index 0 = rightmost).
struct AbstractVehicle {
  int id = 0;
  int lane = 0;
  double s = 0.0;  // center position along the lanes
  double v = 0.0;
  double length = 4.5;
  IdmParams idm;
};

struct AbstractLane {
  bool left_ok = false;   // ego may change left from this lane
  bool right_ok = false;
  std::optional<double> stop_s;  // stop line binding the ego in this lane
};

struct DrivingState {
  std::vector<AbstractVehicle> vehicles;
  std::vector<AbstractLane> lanes;
  std::size_t ego = 0;  // index into vehicles
  bool ego_collided = false;
};

struct DrivingTransition {
  DrivingState next;
  double reward = 0.0;
  std::vector<std::int64_t> key;
};

struct DrivingModelConfig {
  double epoch = 1.0;
  double substep = 0.25;
  double accel_boost = 1.0;    // keep_lane_accelerate adds this to the IDM command
  double hard_decel = -2.0;    // keep_lane_decelerate commands at most this
  double ttc_ref = 4.0;        // TTC at which the safety term saturates
  double accel_ref = 3.0;      // |accel| at which the comfort accel penalty saturates
  double change_penalty = 0.3;
  double s_bin = 2.0;
  double v_bin = 1.0;
};

// Meta-action kinematics over one epoch; the other vehicles follow IDM.
class DrivingModel {
 public:
  using State = DrivingState;
  using Action = MetaActionKind;
  using Transition = DrivingTransition;

  explicit DrivingModel(SvoWeights svo = {}, DrivingModelConfig cfg = {}) : svo_(std::move(svo)), cfg_(cfg) {}

  std::vector<Action> legal_actions(const State& s) const;
  Transition step(const State& s, Action a, Rng& rng) const;
  Action rollout_action(const State&) const { return MetaActionKind::keep_lane_cruise; }

  const DrivingModelConfig& config() const { return cfg_; }

 private:
  SvoWeights svo_;
  DrivingModelConfig cfg_;
};

// Runs the search over the driving model and returns the most visited root
// action. Throws NoLegalAction on an empty root action set.
MetaActionKind mcts_decide(const DrivingState& root, const MctsConfig& cfg, const SvoWeights& svo,
                           std::uint64_t rng_seed, const DrivingModelConfig& model_cfg = {});

// All root actions ranked by visit count (best first).
std::vector<MetaActionKind> mcts_rank(const DrivingState& root, const MctsConfig& cfg, const SvoWeights& svo,
                                      std::uint64_t rng_seed, const DrivingModelConfig& model_cfg = {});

}  // namespace limsim
