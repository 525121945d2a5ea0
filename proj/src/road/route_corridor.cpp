#include "limsim/road/route_corridor.hpp"

#include <algorithm>
#include <cstdlib>

namespace limsim {

RouteCorridor::RouteCorridor(const RoadNetwork& network, const std::vector<LaneId>& path) : path_(path) {
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Lane& lane = network.lane(path[i]);
    if (!steps_.empty()) {
      const auto& prev = steps_.back().lanes;
      if (std::find(prev.begin(), prev.end(), lane.id) != prev.end()) continue;  // lateral hop
    }
    RouteStep step;
    step.path_lane = lane.id;
    step.lanes = network.lateral_lanes(lane.id);
    step.length = lane.length();
    steps_.push_back(std::move(step));
  }
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    RouteStep& step = steps_[k];
    if (k + 1 == steps_.size()) {
      step.exit_lanes = step.lanes;
      continue;
    }
    const auto& next = steps_[k + 1].lanes;
    for (const LaneId& id : step.lanes) {
      for (const LaneId& succ : network.lane(id).successors) {
        if (std::find(next.begin(), next.end(), succ) != next.end()) {
          step.exit_lanes.push_back(id);
          break;
        }
      }
    }
  }
  double s = 0.0;
  for (const RouteStep& step : steps_) {
    offsets_.push_back(s);
    s += step.length;
  }
  total_length_ = s;
}

bool RouteCorridor::contains(std::size_t step, const LaneId& lane) const {
  if (step >= steps_.size()) return false;
  const auto& v = steps_[step].lanes;
  return std::find(v.begin(), v.end(), lane) != v.end();
}

bool RouteCorridor::is_exit(std::size_t step, const LaneId& lane) const {
  if (step >= steps_.size()) return false;
  const auto& v = steps_[step].exit_lanes;
  return std::find(v.begin(), v.end(), lane) != v.end();
}

std::optional<std::size_t> RouteCorridor::find_step(const LaneId& lane, std::size_t from) const {
  for (std::size_t k = from; k < steps_.size(); ++k) {
    if (contains(k, lane)) return k;
  }
  return std::nullopt;
}

int RouteCorridor::hops_to_exit(const RoadNetwork& network, std::size_t step, const LaneId& lane) const {
  if (!contains(step, lane)) return -1;
  const auto& lanes = steps_[step].lanes;
  const auto pos = std::find(lanes.begin(), lanes.end(), lane) - lanes.begin();
  int best = -1;
  for (const LaneId& e : steps_[step].exit_lanes) {
    const auto q = std::find(lanes.begin(), lanes.end(), e) - lanes.begin();
    const int d = static_cast<int>(std::abs(q - pos));
    if (best < 0 || d < best) best = d;
  }
  (void)network;
  return best;
}

std::optional<LaneId> RouteCorridor::next_lane(const RoadNetwork& network, std::size_t step,
                                               const LaneId& lane) const {
  if (step + 1 >= steps_.size()) return std::nullopt;
  std::optional<LaneId> fallback;
  for (const LaneId& succ : network.lane(lane).successors) {  // ascending ids
    if (!contains(step + 1, succ)) continue;
    if (is_exit(step + 1, succ)) return succ;
    if (!fallback) fallback = succ;
  }
  return fallback;
}

double RouteCorridor::progress(const RoadNetwork& network, std::size_t step, const LaneId& lane, double s) const {
  if (step >= steps_.size()) return total_length_;
  const double len = network.lane(lane).length();
  const double frac = len > 0.0 ? std::clamp(s / len, 0.0, 1.0) : 0.0;
  return offsets_[step] + frac * steps_[step].length;
}

std::vector<LaneId> follow_successors(const RoadNetwork& network, const LaneId& start, double max_length) {
  std::vector<LaneId> out{start};
  double total = network.lane(start).length();
  while (total < max_length) {
    const Lane& cur = network.lane(out.back());
    if (cur.successors.empty()) break;
    const LaneId& nxt = cur.successors.front();
    if (std::find(out.begin(), out.end(), nxt) != out.end()) break;  // loop
    out.push_back(nxt);
    total += network.lane(nxt).length();
  }
  return out;
}

}  // namespace limsim
