#pragma once

#include "limsim/behavior/idm.hpp"

namespace limsim {

struct MobilParams {
  double politeness = 0.25;      // [0, 1]
  double change_threshold = 0.1; // m/s^2
  double safe_decel = 4.0;       // maximum braking imposed on the new follower, m/s^2
  double bias_right = 0.2;       // keep-right bias, m/s^2

  bool valid() const {
    return politeness >= 0 && politeness <= 1 && change_threshold > 0 && safe_decel > 0 && bias_right >= 0;
  }
};

// Gap is bumper to bumper from the ego (kNoLeader when absent).
struct NeighborVehicle {
  double gap = kNoLeader;
  double speed = 0.0;
  bool present() const { return gap != kNoLeader; }
};

struct AdjacentLane {
  bool available = false;  // neighbor exists and the lane permits the change
  NeighborVehicle leader;
  NeighborVehicle follower;
};

struct MobilContext {
  double speed = 0.0;
  double length = 4.5;
  NeighborVehicle leader;
  NeighborVehicle follower;
  AdjacentLane left;
  AdjacentLane right;
};

enum class LaneChoice { stay, change_left, change_right };

struct MobilEvaluation {
  bool safe = false;
  double incentive = 0.0;  // bias already applied
};

// Safety and incentive criteria for moving into `target`. A non-positive gap
// anywhere makes the change unsafe.
MobilEvaluation evaluate_lane_change(const MobilContext& ctx, const AdjacentLane& target, bool to_right,
                                     const IdmParams& idm, const MobilParams& mobil);

// Both criteria must hold; when left and right both qualify the larger
// incentive wins and exact ties go right.
LaneChoice mobil_decide(const MobilContext& ctx, const IdmParams& idm, const MobilParams& mobil);

}  // namespace limsim
