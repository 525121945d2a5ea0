#include "limsim/traffic/junction.hpp"

#include <algorithm>
#include <tuple>

namespace limsim {

namespace {

bool share(const std::vector<LaneId>& a, const std::vector<LaneId>& b) {
  for (const LaneId& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  }
  return false;
}

bool polylines_close(const ReferenceLine& a, const ReferenceLine& b, double d) {
  for (const Vec2& p : a.samples()) {
    for (const Vec2& q : b.samples()) {
      if ((p - q).norm() < d) return true;
    }
  }
  return false;
}

}  // namespace

JunctionManager::JunctionManager(const RoadNetwork& network, const JunctionConfig& cfg) : cfg_(cfg) {
  std::vector<const Lane*> inner;
  for (const auto& [id, lane] : network.lanes()) {
    if (lane.in_junction) inner.push_back(&lane);
  }
  for (std::size_t i = 0; i < inner.size(); ++i) {
    for (std::size_t j = i + 1; j < inner.size(); ++j) {
      const Lane& a = *inner[i];
      const Lane& b = *inner[j];
      if (share(a.predecessors, b.predecessors)) continue;  // diverging pair
      if (share(a.successors, b.successors) ||
          polylines_close(a.reference_line, b.reference_line, cfg.conflict_distance)) {
        conflicts_[a.id].insert(b.id);
        conflicts_[b.id].insert(a.id);
      }
    }
  }
}

bool JunctionManager::conflict(const LaneId& a, const LaneId& b) const {
  auto it = conflicts_.find(a);
  return it != conflicts_.end() && it->second.count(b) != 0;
}

std::optional<double> JunctionManager::stop_distance(int id) const {
  auto it = stops_.find(id);
  if (it == stops_.end()) return std::nullopt;
  return it->second;
}

void JunctionManager::update(const std::vector<JunctionRequest>& requests, double comfort_decel) {
  std::map<int, LaneId> grants;
  std::vector<LaneId> claimed;
  auto blocked = [&](const LaneId& lane) {
    return std::any_of(claimed.begin(), claimed.end(), [&](const LaneId& c) { return conflict(lane, c); });
  };

  // Holders, standing grants and vehicles that will not yield come first.
  std::vector<const JunctionRequest*> queue;
  for (const JunctionRequest& r : requests) {
    auto prior = grants_.find(r.id);
    const bool keeps = prior != grants_.end() && prior->second == r.lane;
    if (r.inside || r.unconditional || keeps) {
      grants[r.id] = r.lane;
      claimed.push_back(r.lane);
    } else {
      queue.push_back(&r);
    }
  }
  std::sort(queue.begin(), queue.end(), [](const JunctionRequest* a, const JunctionRequest* b) {
    const double ea = a->distance / std::max(a->speed, 1.0);
    const double eb = b->distance / std::max(b->speed, 1.0);
    return std::tie(ea, a->id) < std::tie(eb, b->id);
  });

  stops_.clear();
  for (const JunctionRequest* r : queue) {
    const double braking = r->speed * r->speed / (2.0 * comfort_decel);
    const bool in_zone = r->distance <= braking + cfg_.grant_margin;
    if (in_zone && !blocked(r->lane)) {
      grants[r->id] = r->lane;
      claimed.push_back(r->lane);
      continue;
    }
    stops_[r->id] = r->distance;
    // a waiting vehicle holds its place in the queue
    if (in_zone) claimed.push_back(r->lane);
  }
  grants_ = std::move(grants);
}

}  // namespace limsim
