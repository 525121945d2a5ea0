#include "limsim/agent/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "limsim/common/error.hpp"

namespace limsim {

using nlohmann::json;

namespace {

LaneObservation lane_obs(const Lane& l) {
  return {l.id, l.speed_limit, l.can_change_left(), l.can_change_right()};
}

json lane_json(const LaneObservation& l) {
  return {{"id", l.id}, {"speed_limit", l.speed_limit}, {"change_left", l.change_left}, {"change_right", l.change_right}};
}

LaneObservation lane_from(const json& j) {
  return {j.at("id").get<std::string>(), j.at("speed_limit").get<double>(), j.at("change_left").get<bool>(),
          j.at("change_right").get<bool>()};
}

}  // namespace

Observation build_observation(const World& world, int k) {
  const VehicleState* ego = world.ego();
  if (!ego) throw NoEgo("no ego vehicle in the world");
  const RoadNetwork& net = world.network();
  Observation obs;
  obs.tick = world.tick();
  obs.time = world.time();
  EgoObservation& e = obs.ego;
  e.id = ego->id;
  e.x = ego->pose.x;
  e.y = ego->pose.y;
  e.heading = ego->pose.heading;
  e.s = ego->frenet.s;
  e.l = ego->frenet.l;
  e.speed = ego->pose.speed;
  e.accel = ego->pose.accel;
  e.lane = ego->lane_id;
  if (ego->corridor && !ego->lane_id.empty()) {
    const double done = ego->corridor->progress(net, ego->route_step, ego->lane_id, ego->frenet.s);
    e.route_remaining = std::max(0.0, ego->corridor->total_length() - done);
    obs.goal_fraction = std::clamp(done / ego->corridor->total_length(), 0.0, 1.0);
  }

  const double radius = world.config().aoi.radius;
  std::vector<NeighborObservation> all;
  const Vec2 ep = ego->position();
  const double c = std::cos(ego->pose.heading), s = std::sin(ego->pose.heading);
  for (int id : world.neighbors_within(ep, radius, ego->id)) {
    const VehicleState& v = *world.find(id);
    NeighborObservation n;
    n.id = id;
    n.x = v.pose.x;
    n.y = v.pose.y;
    n.heading = v.pose.heading;
    const Vec2 d = v.position() - ep;
    n.rel_x = c * d.x + s * d.y;
    n.rel_y = -s * d.x + c * d.y;
    n.distance = d.norm();
    n.speed = v.pose.speed;
    n.lane = v.lane_id;
    if (n.distance <= radius) all.push_back(n);
  }
  std::sort(all.begin(), all.end(), [](const NeighborObservation& a, const NeighborObservation& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  });
  if (static_cast<int>(all.size()) > k) all.resize(static_cast<std::size_t>(std::max(0, k)));
  obs.neighbors = std::move(all);

  if (!ego->lane_id.empty()) {
    const Lane& cur = net.lane(ego->lane_id);
    obs.current = lane_obs(cur);
    if (cur.left_neighbor) obs.left = lane_obs(net.lane(*cur.left_neighbor));
    if (cur.right_neighbor) obs.right = lane_obs(net.lane(*cur.right_neighbor));
  }
  return obs;
}

json to_json(const Observation& o) {
  json n = json::array();
  for (const auto& v : o.neighbors) {
    n.push_back({{"id", v.id}, {"x", v.x}, {"y", v.y}, {"heading", v.heading}, {"rel_x", v.rel_x}, {"rel_y", v.rel_y},
                 {"distance", v.distance}, {"speed", v.speed}, {"lane", v.lane}});
  }
  json lanes = {{"current", lane_json(o.current)},
                {"left", o.left ? lane_json(*o.left) : json(nullptr)},
                {"right", o.right ? lane_json(*o.right) : json(nullptr)}};
  const EgoObservation& e = o.ego;
  return {{"tick", o.tick},
          {"time", o.time},
          {"ego",
           {{"id", e.id}, {"x", e.x}, {"y", e.y}, {"heading", e.heading}, {"s", e.s}, {"l", e.l}, {"speed", e.speed},
            {"accel", e.accel}, {"lane", e.lane}, {"route_remaining", e.route_remaining}}},
          {"neighbors", n},
          {"lanes", lanes},
          {"goal", {{"route_fraction", o.goal_fraction}}},
          {"image_ref", nullptr}};
}

Observation observation_from_json(const json& j) {
  try {
    Observation o;
    o.tick = j.at("tick").get<std::int64_t>();
    o.time = j.at("time").get<double>();
    const json& e = j.at("ego");
    o.ego = {e.at("id").get<int>(),      e.at("x").get<double>(),     e.at("y").get<double>(),
             e.at("heading").get<double>(), e.at("s").get<double>(),  e.at("l").get<double>(),
             e.at("speed").get<double>(),   e.at("accel").get<double>(), e.at("lane").get<std::string>(),
             e.at("route_remaining").get<double>()};
    for (const json& n : j.at("neighbors")) {
      o.neighbors.push_back({n.at("id").get<int>(), n.at("x").get<double>(), n.at("y").get<double>(),
                             n.at("heading").get<double>(), n.at("rel_x").get<double>(), n.at("rel_y").get<double>(),
                             n.at("distance").get<double>(), n.at("speed").get<double>(),
                             n.at("lane").get<std::string>()});
    }
    const json& l = j.at("lanes");
    o.current = lane_from(l.at("current"));
    if (!l.at("left").is_null()) o.left = lane_from(l.at("left"));
    if (!l.at("right").is_null()) o.right = lane_from(l.at("right"));
    o.goal_fraction = j.at("goal").at("route_fraction").get<double>();
    return o;
  } catch (const json::exception& ex) {
    throw BadMessage(std::string("observation: ") + ex.what());
  }
}

AgentAction parse_action(const std::string& payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& ex) {
    throw BadMessage(std::string("malformed JSON: ") + ex.what());
  }
  return parse_action(j);
}

AgentAction parse_action(const json& j) {
  if (!j.is_object()) throw BadMessage("action must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "meta_action" && key != "trajectory") throw BadMessage("unknown key '" + key + "'");
  }
  const bool meta = j.contains("meta_action"), traj = j.contains("trajectory");
  if (meta == traj) throw BadMessage("exactly one of meta_action / trajectory is required");
  if (meta) {
    if (!j["meta_action"].is_string()) throw BadMessage("meta_action must be a string");
    const std::string name = j["meta_action"].get<std::string>();
    auto k = meta_action_from_string(name);
    if (!k) throw UnknownMetaAction("unknown meta-action '" + name + "'");
    return {*k};
  }
  const json& arr = j["trajectory"];
  if (!arr.is_array()) throw BadMessage("trajectory must be an array");
  std::vector<TrajectoryPoint> pts;
  for (const json& p : arr) {
    if (!p.is_object()) throw BadMessage("trajectory point must be an object");
    for (const auto& [key, _] : p.items()) {
      if (key != "t" && key != "x" && key != "y" && key != "speed") throw BadMessage("unknown point key '" + key + "'");
    }
    TrajectoryPoint tp;
    for (auto [key, dst] : {std::pair{"t", &tp.t}, {"x", &tp.x}, {"y", &tp.y}, {"speed", &tp.speed}}) {
      if (!p.contains(key) || !p[key].is_number()) throw BadMessage(std::string("trajectory point needs numeric ") + key);
      *dst = p[key].get<double>();
    }
    pts.push_back(tp);
  }
  if (pts.size() < 2) throw BadTrajectory("trajectory needs at least two points");
  if (pts.front().t < 0.0) throw BadTrajectory("first t must be >= 0");
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].t > pts[i - 1].t)) throw BadTrajectory("timestamps must be strictly increasing");
  }
  if (pts.back().t > kMaxActionHorizon + 1e-9) throw BadTrajectory("trajectory horizon exceeds 5 s");
  return {std::move(pts)};
}

std::string serialize_action(const AgentAction& a) {
  if (a.is_meta()) return json{{"meta_action", std::string(to_string(a.meta()))}}.dump();
  json arr = json::array();
  for (const auto& p : a.points()) arr.push_back({{"t", p.t}, {"x", p.x}, {"y", p.y}, {"speed", p.speed}});
  return json{{"trajectory", arr}}.dump();
}

std::vector<TrajectoryPoint> resample(const std::vector<TrajectoryPoint>& pts, double dt) {
  if (pts.size() < 2 || !(dt > 0.0)) throw BadTrajectory("cannot resample");
  const double t0 = pts.front().t, t1 = pts.back().t;
  const auto k0 = static_cast<std::int64_t>(std::ceil(t0 / dt - 1e-9));
  const auto k1 = static_cast<std::int64_t>(std::floor(t1 / dt + 1e-9));
  std::vector<TrajectoryPoint> out;
  std::size_t seg = 0;
  for (std::int64_t k = k0; k <= k1; ++k) {
    double t = static_cast<double>(k) * dt;
    if (k == k0 && std::abs(t - t0) <= 1e-9 * std::max(1.0, dt)) t = t0;
    if (k == k1 && std::abs(t - t1) <= 1e-9 * std::max(1.0, dt)) t = t1;
    t = std::clamp(t, t0, t1);
    while (seg + 2 < pts.size() && pts[seg + 1].t < t) ++seg;
    const TrajectoryPoint& a = pts[seg];
    const TrajectoryPoint& b = pts[seg + 1];
    const double u = (t - a.t) / (b.t - a.t);
    if (t == a.t) {
      out.push_back({t, a.x, a.y, a.speed});
    } else if (t == b.t) {
      out.push_back({t, b.x, b.y, b.speed});
    } else {
      out.push_back({t, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.speed + u * (b.speed - a.speed)});
    }
  }
  return out;
}

Trajectory to_trajectory(const std::vector<TrajectoryPoint>& pts, double dt) {
  const auto grid = resample(pts, dt);
  Trajectory tr;
  tr.dt = dt;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    TrajectorySample s;
    s.t = grid[i].t;
    s.x = grid[i].x;
    s.y = grid[i].y;
    s.speed = grid[i].speed;
    const std::size_t a = i > 0 ? i - 1 : 0, b = i + 1 < grid.size() ? i + 1 : i;
    if (b > a) {
      s.heading = std::atan2(grid[b].y - grid[a].y, grid[b].x - grid[a].x);
      s.accel = (grid[b].speed - grid[a].speed) / (grid[b].t - grid[a].t);
    }
    tr.samples.push_back(s);
  }
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    tr.samples[i].jerk = (tr.samples[i].accel - tr.samples[i - 1].accel) / dt;
  }
  return tr;
}

Envelope parse_envelope(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    throw BadMessage(std::string("malformed JSON: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw BadMessage("message without a type");
  Envelope e;
  e.type = j["type"].get<std::string>();
  static const std::set<std::string> kTypes{"observation", "action", "hello", "bye"};
  if (!kTypes.count(e.type)) throw BadMessage("unknown message type '" + e.type + "'");
  e.payload = j.contains("payload") ? j["payload"] : json::object();
  if (j.contains("tick")) {
    if (!j["tick"].is_number_integer()) throw BadMessage("tick must be an integer");
    e.tick = j["tick"].get<std::int64_t>();
  }
  return e;
}

std::string make_envelope(const std::string& type, const json& payload, std::optional<std::int64_t> tick) {
  json j = {{"type", type}, {"payload", payload}};
  if (tick) j["tick"] = *tick;
  return j.dump();
}

void engine_handshake(Connection& conn, const std::string& map_name, double dt, std::chrono::duration<double> timeout) {
  conn.send(make_envelope("hello", {{"version", kProtocolVersion}, {"map", map_name}, {"dt", dt}}));
  const auto line = conn.receive(timeout);
  if (!line) throw BadMessage("handshake timed out");
  const Envelope e = parse_envelope(*line);
  if (e.type == "bye") throw ConnectionClosed("agent refused the session");
  if (e.type != "hello") throw BadMessage("expected hello, got " + e.type);
  const json v = e.payload.contains("version") ? e.payload["version"] : json();
  if (!v.is_string() || v.get<std::string>() != kProtocolVersion) {
    conn.send(make_envelope("bye", {{"reason", "version mismatch"}}));
    throw BadMessage("protocol version mismatch");
  }
}

bool agent_handshake(Connection& conn, const std::string& version, std::chrono::duration<double> timeout) {
  const auto line = conn.receive(timeout);
  if (!line) throw BadMessage("no hello from the engine");
  const Envelope e = parse_envelope(*line);
  if (e.type != "hello") throw BadMessage("expected hello, got " + e.type);
  const json v = e.payload.contains("version") ? e.payload["version"] : json();
  if (!v.is_string() || v.get<std::string>() != version) {
    conn.send(make_envelope("bye", {{"reason", "version mismatch"}}));
    return false;
  }
  conn.send(make_envelope("hello", {{"version", version}}));
  return true;
}

ExchangeResult tick_exchange(Connection& conn, const Observation& obs, std::chrono::duration<double> timeout) {
  using clock = std::chrono::steady_clock;
  ExchangeResult r;
  const auto t0 = clock::now();
  conn.send(make_envelope("observation", to_json(obs), obs.tick));
  const auto deadline = t0 + std::chrono::duration_cast<clock::duration>(timeout);
  while (true) {
    const auto left = std::chrono::duration<double>(deadline - clock::now());
    const auto line = left.count() > 0 ? conn.receive(left) : std::nullopt;
    r.decision_time = std::chrono::duration<double>(clock::now() - t0).count();
    if (!line) {
      r.fallback_reason = "timeout";
      return r;
    }
    try {
      const Envelope e = parse_envelope(*line);
      if (e.type == "bye") throw ConnectionClosed("agent said bye");
      if (e.type != "action") throw BadMessage("expected action, got " + e.type);
      // late answer to an observation that already timed out
      if (e.tick && *e.tick != obs.tick) continue;
      r.action = parse_action(e.payload);
      return r;
    } catch (const ConnectionClosed&) {
      throw;
    } catch (const Error& ex) {
      r.fallback_reason = std::string("bad_message: ") + ex.what();
      return r;
    }
  }
}

AgentController::AgentController(std::shared_ptr<Connection> conn, double timeout, int k)
    : conn_(std::move(conn)), timeout_(timeout), k_(k) {}

ExternalCommand AgentController::exchange(const World& world) {
  ExternalCommand cmd;
  Exchange rec;
  rec.tick_sent = world.tick();
  try {
    const Observation obs = build_observation(world, k_);
    const ExchangeResult r = tick_exchange(*conn_, obs, std::chrono::duration<double>(timeout_));
    cmd.decision_time = r.decision_time;
    if (!r.action) {
      cmd.kind = ExternalCommand::Kind::fallback;
      cmd.reason = r.fallback_reason;
    } else if (r.action->is_meta()) {
      cmd.kind = ExternalCommand::Kind::meta_action;
      cmd.action = r.action->meta();
    } else {
      cmd.kind = ExternalCommand::Kind::trajectory;
      cmd.trajectory = to_trajectory(r.action->points(), world.dt());
    }
  } catch (const ConnectionClosed& ex) {
    cmd.kind = ExternalCommand::Kind::disconnected;
    cmd.reason = ex.what();
  }
  rec.tick_received = world.tick();
  rec.decision_time = cmd.decision_time;
  rec.fallback = cmd.kind == ExternalCommand::Kind::fallback;
  transcript_.push_back(rec);
  return cmd;
}

void AgentController::say_bye(const std::string& reason) {
  try {
    conn_->send(make_envelope("bye", {{"reason", reason}}));
  } catch (const ConnectionClosed&) {
  }
}

}  // namespace limsim
