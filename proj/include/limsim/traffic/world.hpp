#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "limsim/common/rng.hpp"
#include "limsim/road/road_network.hpp"
#include "limsim/traffic/config.hpp"
#include "limsim/traffic/events.hpp"
#include "limsim/traffic/junction.hpp"
#include "limsim/traffic/vehicle.hpp"

namespace limsim {

class World;

struct VehicleSpec {
  std::vector<LaneId> route;  // lane path; the vehicle starts on route.front()
  double s = 0.0;             // on route.front()
  double l = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 1.8;
  ControlMode mode = ControlMode::Coarse;
  bool ego = false;
  std::optional<double> speed_factor;  // default: seeded jitter
  std::string flow;
};

struct FlowSpec {
  std::string name;
  std::vector<std::vector<LaneId>> routes;
  double vehicles_per_hour = 0.0;
  double speed_min = 10.0;
  double speed_max = 14.0;
  double begin = 0.0;
  double end = std::numeric_limits<double>::infinity();
  int prefill = 0;  // vehicles placed along the routes at t = 0
};

// Command from an external ego controller for one decision epoch.
struct ExternalCommand {
  enum class Kind { meta_action, trajectory, fallback, disconnected };
  Kind kind = Kind::fallback;
  MetaActionKind action = MetaActionKind::keep_lane_cruise;
  Trajectory trajectory;  // t relative to the exchange time, sampled at dt
  std::string reason;
  double decision_time = 0.0;
};

class ExternalController {
 public:
  virtual ~ExternalController() = default;
  virtual ExternalCommand exchange(const World& world) = 0;
};

struct LeaderInfo {
  double gap = kNoLeader;  // bumper to bumper
  double speed = 0.0;
  int id = -1;  // -1 for a stop line or no leader
  bool present() const { return gap != kNoLeader; }
};

struct DecisionRecord {
  std::int64_t tick = 0;
  double time = 0.0;
  double decision_time = 0.0;  // wall seconds
  std::string action;
};

// Vehicle registry and fixed-step loop. Vehicles are kept in ascending id
// order and every phase visits them in that order.
class World {
 public:
  World(std::shared_ptr<const RoadNetwork> network, SimConfig cfg, std::uint64_t seed);

  const RoadNetwork& network() const { return *network_; }
  std::shared_ptr<const RoadNetwork> network_ptr() const { return network_; }
  const SimConfig& config() const { return cfg_; }
  SimConfig& mutable_config() { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  double dt() const { return cfg_.dt; }
  std::int64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * cfg_.dt; }

  const std::map<int, VehicleState>& vehicles() const { return vehicles_; }
  const VehicleState* find(int id) const;
  VehicleState* find_mutable(int id);
  std::optional<int> ego_id() const { return ego_id_; }
  const VehicleState* ego() const { return ego_id_ ? find(*ego_id_) : nullptr; }

  // Registers a vehicle (ids are never reused). Throws UnknownLane / NoRoute.
  int add_vehicle(const VehicleSpec& spec);
  // Entry check used by spawning: no footprint overlap and a free gap ahead
  // and behind on the lane.
  bool can_place(const LaneId& lane, double s, double length, double speed) const;
  void remove_vehicle(int id, const std::string& reason);

  void add_flow(FlowSpec flow);
  const std::vector<FlowSpec>& flows() const { return flows_; }
  // Adds a replay-driven vehicle appearing at the track's first sample.
  void add_replay_track(std::shared_ptr<const ReplayTrack> track);
  void set_external_controller(std::shared_ptr<ExternalController> c) { external_ = std::move(c); }

  void log_event(const std::string& kind, nlohmann::json payload);
  const std::vector<Event>& events() const { return events_; }
  void set_event_sink(std::function<void(const Event&)> sink) { event_sink_ = std::move(sink); }
  // Called in phase 8 with the post-step world.
  void set_sample_sink(std::function<void(const World&)> sink) { sample_sink_ = std::move(sink); }
  const std::vector<DecisionRecord>& decisions() const { return decisions_; }

  void step();
  bool done() const { return end_reason_.has_value(); }
  const std::optional<std::string>& end_reason() const { return end_reason_; }
  bool ego_collided() const { return ego_collided_; }
  // Ends the episode (idempotent); logs episode_end.
  void finish(const std::string& reason);

  // Queries over the current state.
  LeaderInfo leader_of(const VehicleState& v) const;
  std::optional<double> stop_distance(int id) const;  // junction yield, along the lane
  double desired_speed(const VehicleState& v) const;
  IdmParams idm_for(const VehicleState& v) const;
  double ttc_of(const VehicleState& v) const;  // to the leader, inf when not closing
  std::vector<int> neighbors_within(Vec2 center, double radius, int exclude = -1) const;
  std::shared_ptr<const LaneChain> chain_from(const VehicleState& v, const LaneId& start, double min_length) const;
  const JunctionManager& junctions() const { return *junction_; }
  std::uint64_t decision_seed(int id) const;

  // Phase helpers, public for tests.
  std::map<int, ControlMode> update_aoi(const AoiConfig& cfg);
  void spawn_flows();

 private:
  friend class StepRunner;
  struct Occupant {
    double s;
    int id;
  };

  void rebuild_lane_index();
  double lane_s_on(const LaneId& lane, const VehicleState& v) const;
  void refresh_pose(VehicleState& v) const;
  void detect_collisions();
  void prefill_flow(std::size_t index);
  double desired_factor(int id) const;

  std::shared_ptr<const RoadNetwork> network_;
  SimConfig cfg_;
  std::uint64_t seed_;
  std::int64_t tick_ = 0;
  std::map<int, VehicleState> vehicles_;
  std::optional<int> ego_id_;
  int next_id_ = 0;
  std::vector<Event> events_;
  std::function<void(const Event&)> event_sink_;
  std::function<void(const World&)> sample_sink_;
  std::vector<DecisionRecord> decisions_;
  std::optional<std::string> end_reason_;
  bool ego_collided_ = false;

  struct FlowState {
    Rng rng{0};
    double next_arrival = 0.0;
    std::deque<std::pair<std::size_t, double>> pending;  // route index, speed
    bool blocked_logged = false;
  };
  std::vector<FlowSpec> flows_;
  std::vector<FlowState> flow_state_;
  std::vector<std::shared_ptr<const ReplayTrack>> pending_tracks_;
  std::shared_ptr<ExternalController> external_;
  std::unique_ptr<JunctionManager> junction_;

  std::map<LaneId, std::vector<Occupant>> lane_index_;
  mutable std::map<std::vector<LaneId>, std::shared_ptr<const LaneChain>> chain_cache_;
  std::set<int> finished_route_;  // vehicles past their route end this tick
};

inline void step(World& world) { world.step(); }

}  // namespace limsim
