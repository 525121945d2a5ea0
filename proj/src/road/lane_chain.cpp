#include "limsim/road/lane_chain.hpp"

#include <algorithm>
#include <stdexcept>

namespace limsim {

LaneChain::LaneChain(const RoadNetwork& network, std::vector<LaneId> lanes) : lanes_(std::move(lanes)) {
  if (lanes_.empty()) throw std::invalid_argument("empty lane chain");
  std::vector<const ReferenceLine*> parts;
  double s = 0.0;
  for (const LaneId& id : lanes_) {
    const Lane& lane = network.lane(id);
    parts.push_back(&lane.reference_line);
    offsets_.push_back(s);
    s += lane.length();
  }
  line_ = ReferenceLine::concatenate(parts);
}

std::pair<std::size_t, double> LaneChain::to_lane(double s) const {
  s = std::clamp(s, 0.0, line_.length());
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), s);
  std::size_t idx = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
  return {idx, s - offsets_[idx]};
}

int LaneChain::index_of(const LaneId& lane) const {
  auto it = std::find(lanes_.begin(), lanes_.end(), lane);
  return it == lanes_.end() ? -1 : static_cast<int>(std::distance(lanes_.begin(), it));
}

}  // namespace limsim
