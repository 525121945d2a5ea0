#pragma once

#include <utility>
#include <vector>

#include "limsim/road/road_network.hpp"

namespace limsim {

// A run of consecutive lanes (each a successor of the previous one) viewed as
// a single reference line. Planning frames and replay blends live on these.
class LaneChain {
 public:
  LaneChain() = default;
  LaneChain(const RoadNetwork& network, std::vector<LaneId> lanes);

  const ReferenceLine& line() const { return line_; }
  const std::vector<LaneId>& lanes() const { return lanes_; }
  double length() const { return line_.length(); }
  double offset(std::size_t i) const { return offsets_[i]; }

  // Chain arc length -> (lane index, lane arc length). Clamped to the chain.
  std::pair<std::size_t, double> to_lane(double s) const;
  double to_chain(std::size_t lane_index, double lane_s) const { return offsets_[lane_index] + lane_s; }
  // Index of `lane` in the chain, or -1.
  int index_of(const LaneId& lane) const;

 private:
  std::vector<LaneId> lanes_;
  std::vector<double> offsets_;
  ReferenceLine line_;
};

}  // namespace limsim
