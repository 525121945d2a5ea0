#include "limsim/road/road_network.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "limsim/common/error.hpp"

namespace limsim {

const char* to_string(ChangePermission p) {
  switch (p) {
    case ChangePermission::none: return "none";
    case ChangePermission::left: return "left";
    case ChangePermission::right: return "right";
    case ChangePermission::both: return "both";
  }
  return "none";
}

namespace {

ChangePermission permission_from_string(const std::string& s) {
  if (s == "left") return ChangePermission::left;
  if (s == "right") return ChangePermission::right;
  if (s == "both") return ChangePermission::both;
  return ChangePermission::none;
}

ChangePermission permission_from_neighbors(const Lane& lane) {
  if (lane.in_junction) return ChangePermission::none;
  if (lane.left_neighbor && lane.right_neighbor) return ChangePermission::both;
  if (lane.left_neighbor) return ChangePermission::left;
  if (lane.right_neighbor) return ChangePermission::right;
  return ChangePermission::none;
}

}  // namespace

RoadNetwork RoadNetwork::from_lanes(std::vector<Lane> lanes, std::vector<JunctionConnection> junctions,
                                    std::string name) {
  RoadNetwork net;
  net.name_ = std::move(name);
  net.junctions_ = std::move(junctions);
  for (Lane& lane : lanes) {
    if (!(lane.length() > 0.0)) throw MalformedDocument("lane " + lane.id + " has zero length");
    if (!(lane.width > 0.0)) throw MalformedDocument("lane " + lane.id + " has non-positive width");
    if (!(lane.speed_limit > 0.0)) throw MalformedDocument("lane " + lane.id + " has non-positive speed limit");
    lane.predecessors.clear();
    const LaneId id = lane.id;
    if (!net.lanes_.emplace(id, std::move(lane)).second) {
      throw MalformedDocument("duplicate lane id " + id);
    }
  }

  auto require = [&](const LaneId& from, const LaneId& to) {
    if (!net.lanes_.count(to)) throw DanglingLink("lane " + from + " references missing lane " + to);
  };
  for (auto& [id, lane] : net.lanes_) {
    std::sort(lane.successors.begin(), lane.successors.end());
    lane.successors.erase(std::unique(lane.successors.begin(), lane.successors.end()), lane.successors.end());
    for (const LaneId& succ : lane.successors) require(id, succ);
    if (lane.left_neighbor) require(id, *lane.left_neighbor);
    if (lane.right_neighbor) require(id, *lane.right_neighbor);
  }
  for (auto& [id, lane] : net.lanes_) {
    for (const LaneId& succ : lane.successors) net.lanes_.at(succ).predecessors.push_back(id);
  }
  for (auto& [id, lane] : net.lanes_) {
    std::sort(lane.predecessors.begin(), lane.predecessors.end());
    if (lane.left_neighbor) {
      const Lane& other = net.lanes_.at(*lane.left_neighbor);
      if (other.right_neighbor != id) throw DanglingLink("neighbor relation " + id + " <-> " + other.id + " is not mutual");
    }
    if (lane.right_neighbor) {
      const Lane& other = net.lanes_.at(*lane.right_neighbor);
      if (other.left_neighbor != id) throw DanglingLink("neighbor relation " + id + " <-> " + other.id + " is not mutual");
    }
    lane.change_permission = permission_from_neighbors(lane);
  }

  bool first = true;
  for (const auto& [id, lane] : net.lanes_) {
    const double half = 0.5 * lane.width;
    for (const Vec2& p : lane.reference_line.samples()) {
      if (first) {
        net.bounds_ = {p.x - half, p.y - half, p.x + half, p.y + half};
        first = false;
      }
      net.bounds_.min_x = std::min(net.bounds_.min_x, p.x - half);
      net.bounds_.min_y = std::min(net.bounds_.min_y, p.y - half);
      net.bounds_.max_x = std::max(net.bounds_.max_x, p.x + half);
      net.bounds_.max_y = std::max(net.bounds_.max_y, p.y + half);
    }
  }
  return net;
}

const Lane& RoadNetwork::lane(const LaneId& id) const {
  auto it = lanes_.find(id);
  if (it == lanes_.end()) throw UnknownLane("unknown lane " + id);
  return it->second;
}

std::vector<LaneId> RoadNetwork::lateral_lanes(const LaneId& id) const {
  const Lane* rightmost = &lane(id);
  while (rightmost->right_neighbor) rightmost = &lane(*rightmost->right_neighbor);
  std::vector<LaneId> out{rightmost->id};
  const Lane* cur = rightmost;
  while (cur->left_neighbor) {
    cur = &lane(*cur->left_neighbor);
    out.push_back(cur->id);
  }
  return out;
}

int RoadNetwork::lateral_index(const LaneId& id) const {
  int idx = 0;
  const Lane* cur = &lane(id);
  while (cur->right_neighbor) {
    cur = &lane(*cur->right_neighbor);
    ++idx;
  }
  return idx;
}

namespace {

std::vector<LaneId> out_edges(const Lane& lane) {
  std::vector<LaneId> out = lane.successors;
  if (lane.left_neighbor) out.push_back(*lane.left_neighbor);
  if (lane.right_neighbor) out.push_back(*lane.right_neighbor);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<LaneId> route(const RoadNetwork& network, const LaneId& from, const LaneId& to) {
  network.lane(from);
  network.lane(to);
  if (from == to) return {from};

  std::map<LaneId, std::vector<LaneId>> reverse;
  for (const auto& [id, lane] : network.lanes()) {
    for (const LaneId& nxt : out_edges(lane)) reverse[nxt].push_back(id);
  }
  // Hop distance to `to`, then a greedy walk that always takes the smallest
  // id still on a shortest path.
  std::map<LaneId, int> dist{{to, 0}};
  std::deque<LaneId> queue{to};
  while (!queue.empty()) {
    const LaneId cur = queue.front();
    queue.pop_front();
    for (const LaneId& prev : reverse[cur]) {
      if (dist.emplace(prev, dist[cur] + 1).second) queue.push_back(prev);
    }
  }
  auto it = dist.find(from);
  if (it == dist.end()) throw NoRoute("no route from " + from + " to " + to);

  std::vector<LaneId> path{from};
  LaneId cur = from;
  int d = it->second;
  while (cur != to) {
    for (const LaneId& nxt : out_edges(network.lane(cur))) {
      auto nd = dist.find(nxt);
      if (nd != dist.end() && nd->second == d - 1) {
        cur = nxt;
        break;
      }
    }
    --d;
    path.push_back(cur);
  }
  return path;
}

LaneTopology topology_of(const RoadNetwork& network) {
  LaneTopology topo;
  for (const auto& [id, lane] : network.lanes()) {
    topo[id] = {lane.successors, lane.predecessors, lane.left_neighbor, lane.right_neighbor,
                lane.change_permission};
  }
  return topo;
}

std::string serialize_topology(const RoadNetwork& network) {
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& [id, links] : topology_of(network)) {
    nlohmann::json j = {{"id", id},
                        {"successors", links.successors},
                        {"predecessors", links.predecessors},
                        {"permission", to_string(links.permission)}};
    j["left"] = links.left ? nlohmann::json(*links.left) : nlohmann::json(nullptr);
    j["right"] = links.right ? nlohmann::json(*links.right) : nlohmann::json(nullptr);
    lanes.push_back(std::move(j));
  }
  return nlohmann::json{{"lanes", lanes}}.dump(2);
}

LaneTopology parse_topology(const std::string& json_text) {
  LaneTopology topo;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& j : doc.at("lanes")) {
      LaneLinks links;
      links.successors = j.at("successors").get<std::vector<LaneId>>();
      links.predecessors = j.at("predecessors").get<std::vector<LaneId>>();
      if (!j.at("left").is_null()) links.left = j.at("left").get<LaneId>();
      if (!j.at("right").is_null()) links.right = j.at("right").get<LaneId>();
      links.permission = permission_from_string(j.at("permission").get<std::string>());
      topo[j.at("id").get<LaneId>()] = std::move(links);
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocument(std::string("topology document: ") + e.what());
  }
  return topo;
}

std::optional<LaneLocation> locate(const RoadNetwork& network, Vec2 p, std::optional<double> heading,
                                   const std::vector<LaneId>& hints, double margin) {
  auto try_lanes = [&](auto&& lane_range) -> std::optional<LaneLocation> {
    std::optional<LaneLocation> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (const Lane* lane : lane_range) {
      const auto& samples = lane->reference_line.samples();
      // cheap reject against the lane's sampled extent
      bool near = false;
      const double reach = 0.5 * lane->width + margin + ReferenceLine::kSampleStep;
      for (std::size_t i = 0; i < samples.size(); i += 8) {
        if ((samples[i] - p).norm() <= reach + 8 * ReferenceLine::kSampleStep) {
          near = true;
          break;
        }
      }
      if (!near && (samples.back() - p).norm() > reach) continue;
      Projection proj;
      try {
        ProjectionOptions opts;
        opts.corridor_half_width = 0.5 * lane->width + margin;
        proj = lane->reference_line.project(p, opts);
      } catch (const Error&) {
        continue;
      }
      const ReferencePoint rp = lane->reference_line.evaluate(proj.s);
      // foot points clamped to an end are only accepted if really on the lane
      if ((proj.s <= 0.0 || proj.s >= lane->length()) &&
          std::abs((p - rp.pos).dot(unit(rp.heading))) > 1e-6) {
        continue;
      }
      double score = std::abs(proj.l);
      if (heading) {
        const double dh = std::abs(angle_diff(*heading, rp.heading));
        if (dh > kPi / 2) continue;
        score += dh;
      }
      if (score < best_score) {
        best_score = score;
        best = LaneLocation{lane->id, proj.s, proj.l};
      }
    }
    return best;
  };

  std::vector<const Lane*> hinted;
  for (const LaneId& id : hints) {
    if (network.has_lane(id)) hinted.push_back(&network.lane(id));
  }
  if (auto found = try_lanes(hinted)) return found;
  std::vector<const Lane*> all;
  all.reserve(network.lanes().size());
  for (const auto& [id, lane] : network.lanes()) all.push_back(&lane);
  return try_lanes(all);
}

}  // namespace limsim
