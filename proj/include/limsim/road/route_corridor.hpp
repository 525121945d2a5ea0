#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "limsim/road/road_network.hpp"

namespace limsim {

// A lane path grouped into longitudinal steps. Each step holds every lane
// laterally reachable from the path lane at that step; exit lanes are the ones
// with a successor in the next step.
struct RouteStep {
  LaneId path_lane;
  std::vector<LaneId> lanes;  // rightmost to leftmost
  std::vector<LaneId> exit_lanes;
  double length = 0.0;  // of path_lane
};

class RouteCorridor {
 public:
  RouteCorridor() = default;
  // `path` is a lane path as returned by route(); consecutive lateral hops
  // collapse into one step.
  RouteCorridor(const RoadNetwork& network, const std::vector<LaneId>& path);

  const std::vector<RouteStep>& steps() const { return steps_; }
  const std::vector<LaneId>& path() const { return path_; }
  std::size_t size() const { return steps_.size(); }
  double total_length() const { return total_length_; }
  double offset(std::size_t step) const { return offsets_[step]; }

  bool contains(std::size_t step, const LaneId& lane) const;
  bool is_exit(std::size_t step, const LaneId& lane) const;
  // First step at or after `from` that contains `lane`.
  std::optional<std::size_t> find_step(const LaneId& lane, std::size_t from = 0) const;
  // Lateral hops from `lane` to the nearest exit lane of `step` (-1 if none).
  int hops_to_exit(const RoadNetwork& network, std::size_t step, const LaneId& lane) const;
  // Successor of `lane` inside step + 1, preferring exit lanes then lower ids.
  std::optional<LaneId> next_lane(const RoadNetwork& network, std::size_t step, const LaneId& lane) const;
  // Route arc length covered at (step, lane, s), scaled to the path lane.
  double progress(const RoadNetwork& network, std::size_t step, const LaneId& lane, double s) const;

 private:
  std::vector<LaneId> path_;
  std::vector<RouteStep> steps_;
  std::vector<double> offsets_;
  double total_length_ = 0.0;
};

// Route made of successors only, following the lowest-id successor, until
// `max_length` meters or a dead end.
std::vector<LaneId> follow_successors(const RoadNetwork& network, const LaneId& start, double max_length);

}  // namespace limsim
