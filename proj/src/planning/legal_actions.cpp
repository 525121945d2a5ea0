#include "limsim/planning/legal_actions.hpp"

namespace limsim {

std::vector<MetaAction> legal_actions(const VehicleState& v, const RoadNetwork& network, double prune_distance,
                                      double epoch) {
  std::vector<MetaAction> out{{MetaActionKind::keep_lane_cruise, epoch},
                              {MetaActionKind::keep_lane_accelerate, epoch},
                              {MetaActionKind::keep_lane_decelerate, epoch}};
  if (v.lane_id.empty() || v.origin_lane) return out;
  const Lane& lane = network.lane(v.lane_id);

  auto route_allows = [&](const LaneId& target) {
    if (!v.corridor) return true;
    const RouteCorridor& c = *v.corridor;
    if (!c.contains(v.route_step, v.lane_id)) return true;
    if (!c.contains(v.route_step, target)) return false;
    if (lane.length() - v.frenet.s >= prune_distance) return true;
    return c.hops_to_exit(network, v.route_step, target) <= c.hops_to_exit(network, v.route_step, v.lane_id);
  };

  if (lane.can_change_left() && lane.left_neighbor && route_allows(*lane.left_neighbor)) {
    out.push_back({MetaActionKind::change_left, epoch});
  }
  if (lane.can_change_right() && lane.right_neighbor && route_allows(*lane.right_neighbor)) {
    out.push_back({MetaActionKind::change_right, epoch});
  }
  return out;
}

}  // namespace limsim
