#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "limsim/road/road_network.hpp"
#include "limsim/traffic/config.hpp"

namespace limsim {

struct JunctionRequest {
  int id = 0;
  LaneId lane;  // managed junction lane ahead of (or holding) the vehicle
  double distance = 0.0;  // to the start of `lane`; 0 when inside
  double speed = 0.0;
  bool inside = false;
  bool unconditional = false;  // vehicles that will not yield (replay, external)
};

// First-come-first-served right of way over conflicting junction lanes.
// Grants persist until the vehicle leaves the managed lane; a request is
// granted when no earlier-ranked or holding vehicle claims a conflicting lane.
class JunctionManager {
 public:
  JunctionManager(const RoadNetwork& network, const JunctionConfig& cfg);

  bool managed(const LaneId& lane) const { return conflicts_.count(lane) != 0; }
  bool conflict(const LaneId& a, const LaneId& b) const;
  const std::map<LaneId, std::set<LaneId>>& conflicts() const { return conflicts_; }

  void update(const std::vector<JunctionRequest>& requests, double comfort_decel);
  bool granted(int id) const { return grants_.count(id) != 0; }
  // Distance to the stop line for vehicles that must yield.
  std::optional<double> stop_distance(int id) const;

 private:
  JunctionConfig cfg_;
  std::map<LaneId, std::set<LaneId>> conflicts_;
  std::map<int, LaneId> grants_;
  std::map<int, double> stops_;
};

}  // namespace limsim
