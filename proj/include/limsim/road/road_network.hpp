#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limsim/road/reference_line.hpp"

namespace limsim {

using LaneId = std::string;

enum class ChangePermission { none, left, right, both };

const char* to_string(ChangePermission p);

struct Lane {
  LaneId id;
  std::string road_id;
  int section_lane = 0;  // signed OpenDRIVE lane id within its road
  bool in_junction = false;
  ReferenceLine reference_line;  // lane center, oriented along the driving direction
  double width = 3.5;
  double speed_limit = 13.89;
  std::vector<LaneId> successors;
  std::vector<LaneId> predecessors;
  std::optional<LaneId> left_neighbor;
  std::optional<LaneId> right_neighbor;
  ChangePermission change_permission = ChangePermission::none;

  double length() const { return reference_line.length(); }
  bool can_change_left() const {
    return change_permission == ChangePermission::left || change_permission == ChangePermission::both;
  }
  bool can_change_right() const {
    return change_permission == ChangePermission::right || change_permission == ChangePermission::both;
  }
  bool operator==(const Lane&) const = default;
};

struct JunctionConnection {
  std::string junction_id;
  std::string connection_id;
  std::string incoming_road;
  std::string connecting_road;
  std::vector<std::pair<int, int>> lane_links;  // from -> to
  bool operator==(const JunctionConnection&) const = default;
};

struct Bounds {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  bool operator==(const Bounds&) const = default;
};

// Lane-level graph. Immutable once built; lanes are kept in id order so every
// iteration over the network is deterministic.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  // Builds predecessor lists from successors, derives change permissions from
  // neighbors and computes bounds. Throws DanglingLink / MalformedDocument when
  // an invariant does not hold.
  static RoadNetwork from_lanes(std::vector<Lane> lanes, std::vector<JunctionConnection> junctions = {},
                                std::string name = {});

  const std::map<LaneId, Lane>& lanes() const { return lanes_; }
  const std::vector<JunctionConnection>& junctions() const { return junctions_; }
  const Bounds& bounds() const { return bounds_; }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  bool has_lane(const LaneId& id) const { return lanes_.count(id) != 0; }
  // Throws UnknownLane.
  const Lane& lane(const LaneId& id) const;

  // Lanes reachable through neighbor links, ordered rightmost to leftmost.
  std::vector<LaneId> lateral_lanes(const LaneId& id) const;
  // Lateral index of `id` within lateral_lanes(id) (0 = rightmost).
  int lateral_index(const LaneId& id) const;

  bool operator==(const RoadNetwork& o) const {
    return lanes_ == o.lanes_ && junctions_ == o.junctions_ && bounds_ == o.bounds_;
  }

 private:
  std::map<LaneId, Lane> lanes_;
  std::vector<JunctionConnection> junctions_;
  Bounds bounds_;
  std::string name_;
  std::vector<std::string> warnings_;
};

// Minimal-hop path over successor and lateral-neighbor edges; the
// lexicographically smallest among equal-length paths. Throws NoRoute.
std::vector<LaneId> route(const RoadNetwork& network, const LaneId& from, const LaneId& to);

// Lane topology (links only) as JSON text, and its inverse.
struct LaneLinks {
  std::vector<LaneId> successors;
  std::vector<LaneId> predecessors;
  std::optional<LaneId> left;
  std::optional<LaneId> right;
  ChangePermission permission = ChangePermission::none;
  bool operator==(const LaneLinks&) const = default;
};
using LaneTopology = std::map<LaneId, LaneLinks>;

LaneTopology topology_of(const RoadNetwork& network);
std::string serialize_topology(const RoadNetwork& network);
LaneTopology parse_topology(const std::string& json_text);

struct LaneLocation {
  LaneId lane;
  double s = 0.0;
  double l = 0.0;
};

// Lane whose center line is laterally closest to `p` (within half a lane
// width plus `margin`), preferring lanes whose heading agrees with `heading`.
// `hints` are tried first; the whole network is scanned when none match.
std::optional<LaneLocation> locate(const RoadNetwork& network, Vec2 p, std::optional<double> heading = {},
                                   const std::vector<LaneId>& hints = {}, double margin = 0.5);

}  // namespace limsim
