#pragma once

#include <map>
#include <vector>

#include "limsim/behavior/idm.hpp"
#include "limsim/behavior/mobil.hpp"
#include "limsim/planning/candidates.hpp"
#include "limsim/planning/driving_model.hpp"
#include "limsim/planning/mcts.hpp"

namespace limsim {

struct AoiConfig {
  double radius = 50.0;
  double hysteresis_factor = 1.1;  // exit radius = radius * factor
  bool valid() const { return radius > 0.0 && hysteresis_factor >= 1.0; }
};

struct BehaviorConfig {
  IdmParams idm;  // desired_speed is replaced by speed limit * per-vehicle factor
  MobilParams mobil;
  bool coarse_mobil = false;
  double lane_change_cooldown = 3.0;  // s
  double speed_jitter = 0.1;          // desired-speed factor in 1 +- jitter
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double lookahead = 150.0;  // leader search distance, m
};

struct PlanningConfig {
  MctsConfig mcts;
  DrivingModelConfig model;
  CostWeights weights;
  double epoch = 1.0;
  double horizon = 5.0;
  double lane_change_duration = 3.0;
  std::vector<double> lateral_offsets{-0.6, -0.3, 0.0, 0.3, 0.6};
  double ttc_ref = 4.0;
  double jerk_ref = 2.0;
  double perception_radius = 60.0;
  int max_neighbors = 8;  // vehicles in the abstract search state besides the planner
  int threads = 1;
  SvoWeights svo;                     // applied to every vehicle without its own group
  std::map<int, SvoWeights> groups;   // per vehicle id
};

struct ReplayConfig {
  double ttc_threshold = 3.0;
  double horizon = 5.0;
  double max_deviation = 2.0;
  double conflict_clear = 3.0;
  double blend_duration = 2.0;
};

struct JunctionConfig {
  double conflict_distance = 2.5;  // lanes closer than this conflict
  double request_distance = 60.0;
  double grant_margin = 15.0;  // grants within braking distance + margin
};

struct SimConfig {
  double dt = 0.1;
  AoiConfig aoi;
  BehaviorConfig behavior;
  PlanningConfig planning;
  ReplayConfig replay;
  JunctionConfig junction;
};

}  // namespace limsim
