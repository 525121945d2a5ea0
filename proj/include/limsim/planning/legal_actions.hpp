#pragma once

#include <vector>

#include "limsim/planning/meta_action.hpp"
#include "limsim/road/road_network.hpp"
#include "limsim/traffic/vehicle.hpp"

namespace limsim {

// Keep-lane actions are always legal. A change needs a neighbor and lane
// permission, no change in progress, and within `prune_distance` of the lane
// end it must not move further (in lateral hops) from a lane continuing the
// route.
std::vector<MetaAction> legal_actions(const VehicleState& vehicle, const RoadNetwork& network,
                                      double prune_distance = 100.0, double epoch = 1.0);

}  // namespace limsim
