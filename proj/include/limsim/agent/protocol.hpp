#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "limsim/planning/meta_action.hpp"
#include "limsim/traffic/world.hpp"

namespace limsim {

inline constexpr const char* kProtocolVersion = "1";
inline constexpr double kMaxActionHorizon = 5.0;

struct EgoObservation {
  int id = 0;
  double x = 0.0, y = 0.0, heading = 0.0;
  double s = 0.0, l = 0.0;
  double speed = 0.0, accel = 0.0;
  LaneId lane;
  double route_remaining = 0.0;  // m
};

struct NeighborObservation {
  int id = 0;
  double x = 0.0, y = 0.0, heading = 0.0;
  double rel_x = 0.0, rel_y = 0.0;  // ego frame, x forward
  double distance = 0.0;
  double speed = 0.0;
  LaneId lane;
};

struct LaneObservation {
  LaneId id;
  double speed_limit = 0.0;
  bool change_left = false;
  bool change_right = false;
};

struct Observation {
  std::int64_t tick = 0;
  double time = 0.0;
  EgoObservation ego;
  std::vector<NeighborObservation> neighbors;
  LaneObservation current;
  std::optional<LaneObservation> left;
  std::optional<LaneObservation> right;
  double goal_fraction = 0.0;
};

// Throws NoEgo.
Observation build_observation(const World& world, int k = 8);
nlohmann::json to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& j);

struct TrajectoryPoint {
  double t = 0.0;  // relative to the observation time
  double x = 0.0, y = 0.0, speed = 0.0;
  bool operator==(const TrajectoryPoint&) const = default;
};

struct AgentAction {
  std::variant<MetaActionKind, std::vector<TrajectoryPoint>> value;

  bool is_meta() const { return std::holds_alternative<MetaActionKind>(value); }
  MetaActionKind meta() const { return std::get<MetaActionKind>(value); }
  const std::vector<TrajectoryPoint>& points() const { return std::get<std::vector<TrajectoryPoint>>(value); }
  bool operator==(const AgentAction&) const = default;
};

// Action payload text. Throws BadMessage, BadTrajectory, UnknownMetaAction.
AgentAction parse_action(const std::string& payload);
AgentAction parse_action(const nlohmann::json& payload);
inline AgentAction parse_action(const char* payload) { return parse_action(std::string(payload)); }
std::string serialize_action(const AgentAction& a);

// Linear resampling onto t = k*dt covering [t_first, t_last]. Endpoints kept.
std::vector<TrajectoryPoint> resample(const std::vector<TrajectoryPoint>& pts, double dt);
// Cartesian trajectory for the engine; heading and derivatives by differences.
Trajectory to_trajectory(const std::vector<TrajectoryPoint>& pts, double dt);

struct Envelope {
  std::string type;
  nlohmann::json payload;
  std::optional<std::int64_t> tick;
};
// Throws BadMessage.
Envelope parse_envelope(const std::string& line);
std::string make_envelope(const std::string& type, const nlohmann::json& payload,
                          std::optional<std::int64_t> tick = {});

// Line-oriented duplex channel.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send(const std::string& line) = 0;
  // nullopt on timeout. Throws ConnectionClosed.
  virtual std::optional<std::string> receive(std::chrono::duration<double> timeout) = 0;
  virtual void close() = 0;
};

// In-process pair, used by tests and scripted agents on a thread.
std::pair<std::shared_ptr<Connection>, std::shared_ptr<Connection>> make_memory_pipe();

// Local stream socket. listen_tcp accepts one client.
std::shared_ptr<Connection> listen_tcp(const std::string& host, int port, std::chrono::duration<double> timeout);
std::shared_ptr<Connection> connect_tcp(const std::string& host, int port);

// Engine side. Throws BadMessage on a refused handshake, ConnectionClosed.
void engine_handshake(Connection& conn, const std::string& map_name, double dt,
                      std::chrono::duration<double> timeout);
// Agent side reply; answers a version mismatch with bye and returns false.
bool agent_handshake(Connection& conn, const std::string& version = kProtocolVersion,
                     std::chrono::duration<double> timeout = std::chrono::seconds(30));

struct ExchangeResult {
  std::optional<AgentAction> action;
  std::string fallback_reason;  // set when action is empty
  double decision_time = 0.0;
};

// One observation out, one action back. Never advances the world.
// Throws ConnectionClosed.
ExchangeResult tick_exchange(Connection& conn, const Observation& obs, std::chrono::duration<double> timeout);

// ExternalController backed by a connection.
class AgentController : public ExternalController {
 public:
  AgentController(std::shared_ptr<Connection> conn, double timeout, int k = 8);
  ExternalCommand exchange(const World& world) override;

  struct Exchange {
    std::int64_t tick_sent = 0;
    std::int64_t tick_received = 0;
    double decision_time = 0.0;
    bool fallback = false;
  };
  const std::vector<Exchange>& transcript() const { return transcript_; }
  void say_bye(const std::string& reason);

 private:
  std::shared_ptr<Connection> conn_;
  double timeout_;
  int k_;
  std::vector<Exchange> transcript_;
};

}  // namespace limsim
