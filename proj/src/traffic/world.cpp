#include "limsim/traffic/world.hpp"

#include <algorithm>
#include <cmath>

#include "limsim/common/error.hpp"

namespace limsim {

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::Fine: return "Fine";
    case ControlMode::Coarse: return "Coarse";
    case ControlMode::Replay: return "Replay";
    case ControlMode::External: return "External";
  }
  return "Coarse";
}

nlohmann::json to_json(const Event& e) {
  return {{"tick", e.tick}, {"time", e.time}, {"kind", e.kind}, {"payload", e.payload}};
}

Event event_from_json(const nlohmann::json& j) {
  Event e;
  e.tick = j.at("tick").get<std::int64_t>();
  e.time = j.at("time").get<double>();
  e.kind = j.at("kind").get<std::string>();
  e.payload = j.value("payload", nlohmann::json::object());
  return e;
}

World::World(std::shared_ptr<const RoadNetwork> network, SimConfig cfg, std::uint64_t seed)
    : network_(std::move(network)), cfg_(std::move(cfg)), seed_(seed) {
  if (!(cfg_.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  junction_ = std::make_unique<JunctionManager>(*network_, cfg_.junction);
}

const VehicleState* World::find(int id) const {
  auto it = vehicles_.find(id);
  return it == vehicles_.end() ? nullptr : &it->second;
}

VehicleState* World::find_mutable(int id) {
  auto it = vehicles_.find(id);
  return it == vehicles_.end() ? nullptr : &it->second;
}

double World::desired_factor(int id) const {
  Rng r(mix_seed(seed_, 0x5eed000000ULL + static_cast<std::uint64_t>(id)));
  return 1.0 + cfg_.behavior.speed_jitter * (2.0 * r.uniform() - 1.0);
}

double World::desired_speed(const VehicleState& v) const {
  if (v.lane_id.empty()) return cfg_.behavior.idm.desired_speed * v.speed_factor;
  return network_->lane(v.lane_id).speed_limit * v.speed_factor;
}

IdmParams World::idm_for(const VehicleState& v) const {
  IdmParams p = v.idm;
  p.desired_speed = desired_speed(v);
  return p;
}

void World::refresh_pose(VehicleState& v) const {
  const Lane& lane = network_->lane(v.lane_id);
  v.frenet = from_temporal(v.frenet.s, v.frenet.s_dot, v.frenet.s_ddot, {v.frenet.l, v.lat_dot, v.lat_ddot});
  const double accel = v.frenet.s_ddot;
  v.pose = frenet_to_cartesian_extended(lane.reference_line, v.frenet);
  v.pose.accel = accel;
}

int World::add_vehicle(const VehicleSpec& spec) {
  if (spec.route.empty()) throw NoRoute("vehicle spec has an empty route");
  for (const LaneId& id : spec.route) network_->lane(id);
  VehicleState v;
  v.id = next_id_++;
  v.route = spec.route;
  v.corridor = std::make_shared<RouteCorridor>(*network_, spec.route);
  v.lane_id = spec.route.front();
  v.route_step = 0;
  v.frenet.s = spec.s;
  v.frenet.l = spec.l;
  v.frenet.s_dot = std::max(0.0, spec.speed);
  v.length = spec.length;
  v.width = spec.width;
  v.control_mode = spec.mode;
  v.is_ego = spec.ego;
  v.idm = cfg_.behavior.idm;
  v.speed_factor = spec.speed_factor.value_or(desired_factor(v.id));
  v.flow = spec.flow;
  v.spawn_time = time();
  v.next_decision_tick = tick_;
  refresh_pose(v);
  if (spec.ego) ego_id_ = v.id;
  nlohmann::json payload = {{"id", v.id},          {"lane", v.lane_id}, {"s", v.frenet.s},
                            {"speed", spec.speed}, {"mode", to_string(v.control_mode)}};
  if (!spec.flow.empty()) payload["flow"] = spec.flow;
  if (spec.ego) payload["ego"] = true;
  const int id = v.id;
  vehicles_.emplace(id, std::move(v));
  log_event("spawn", std::move(payload));
  return id;
}

bool World::can_place(const LaneId& lane, double s, double length, double speed) const {
  const Lane& ln = network_->lane(lane);
  const Vec2 p = ln.reference_line.evaluate(s).pos;
  const OrientedBox box{p, ln.reference_line.evaluate(s).heading, length + 1.0, ln.width};
  const double min_gap = cfg_.behavior.idm.min_gap;
  for (const auto& [id, o] : vehicles_) {
    if ((o.position() - p).norm() > 60.0) continue;
    if (overlaps(box, o.footprint())) return false;
    const bool same = o.lane_id == lane || (o.origin_lane && *o.origin_lane == lane);
    double ds = 0.0;
    if (same) {
      ds = o.frenet.s - s;
    } else if (std::find(ln.predecessors.begin(), ln.predecessors.end(), o.lane_id) != ln.predecessors.end()) {
      ds = o.frenet.s - network_->lane(o.lane_id).length() - s;
    } else if (std::find(ln.successors.begin(), ln.successors.end(), o.lane_id) != ln.successors.end()) {
      ds = ln.length() - s + o.frenet.s;
    } else {
      continue;
    }
    const double gap = std::abs(ds) - 0.5 * (length + o.length);
    const double follower_speed = ds >= 0.0 ? speed : o.speed();
    if (gap < min_gap + follower_speed) return false;
  }
  return true;
}

void World::remove_vehicle(int id, const std::string& reason) {
  auto it = vehicles_.find(id);
  if (it == vehicles_.end()) return;
  log_event("despawn", {{"id", id}, {"reason", reason}});
  if (ego_id_ && *ego_id_ == id) ego_id_.reset();
  vehicles_.erase(it);
}

void World::log_event(const std::string& kind, nlohmann::json payload) {
  Event e{tick_, time(), kind, std::move(payload)};
  if (event_sink_) event_sink_(e);
  events_.push_back(std::move(e));
}

void World::finish(const std::string& reason) {
  if (end_reason_) return;
  end_reason_ = reason;
  nlohmann::json payload = {{"reason", reason}};
  if (ego_id_) payload["ego"] = *ego_id_;
  log_event("episode_end", std::move(payload));
}

std::uint64_t World::decision_seed(int id) const {
  return mix_seed(seed_, (static_cast<std::uint64_t>(id) << 32) ^ static_cast<std::uint64_t>(tick_));
}

// ---------------------------------------------------------------- flows

void World::add_flow(FlowSpec flow) {
  for (const auto& r : flow.routes) {
    if (r.empty()) throw NoRoute("flow " + flow.name + " has an empty route");
    for (const LaneId& id : r) network_->lane(id);
  }
  const std::size_t index = flows_.size();
  FlowState st;
  st.rng = Rng(mix_seed(seed_, 0xF10A000000ULL + index));
  const double rate = flow.vehicles_per_hour / 3600.0;
  st.next_arrival = rate > 0.0 && !flow.routes.empty() ? flow.begin + st.rng.exponential(rate)
                                                       : std::numeric_limits<double>::infinity();
  flows_.push_back(std::move(flow));
  flow_state_.push_back(std::move(st));
  prefill_flow(index);
}

void World::prefill_flow(std::size_t index) {
  const FlowSpec& flow = flows_[index];
  if (flow.prefill <= 0 || flow.routes.empty()) return;
  Rng rng(mix_seed(seed_, 0x9E3F000000ULL + index));
  const double length = cfg_.behavior.vehicle_length;
  int placed = 0;
  for (int attempt = 0; attempt < 50 * flow.prefill && placed < flow.prefill; ++attempt) {
    const auto& route = flow.routes[rng.below(flow.routes.size())];
    double total = 0.0;
    for (const LaneId& id : route) total += network_->lane(id).length();
    double pos = rng.uniform(length, std::max(length, total - length));
    const double speed = rng.uniform(flow.speed_min, flow.speed_max);
    std::size_t k = 0;
    while (k + 1 < route.size() && pos > network_->lane(route[k]).length()) {
      pos -= network_->lane(route[k]).length();
      ++k;
    }
    pos = std::min(pos, network_->lane(route[k]).length() - 0.5 * length);
    if (pos < 0.5 * length || !can_place(route[k], pos, length, speed)) continue;
    VehicleSpec spec;
    spec.route.assign(route.begin() + static_cast<std::ptrdiff_t>(k), route.end());
    spec.s = pos;
    spec.speed = speed;
    spec.length = length;
    spec.width = cfg_.behavior.vehicle_width;
    spec.flow = flow.name;
    add_vehicle(spec);
    ++placed;
  }
}

void World::spawn_flows() {
  const double now = time();
  for (std::size_t i = 0; i < flows_.size(); ++i) {
    FlowSpec& flow = flows_[i];
    FlowState& st = flow_state_[i];
    const double rate = flow.vehicles_per_hour / 3600.0;
    while (st.next_arrival <= now + 1e-12) {
      if (st.next_arrival < flow.end) {
        const std::size_t route = st.rng.below(flow.routes.size());
        st.pending.emplace_back(route, st.rng.uniform(flow.speed_min, flow.speed_max));
      }
      st.next_arrival += st.rng.exponential(rate);
    }
    while (!st.pending.empty()) {
      const auto [route_index, speed] = st.pending.front();
      const auto& route = flow.routes[route_index];
      const double length = cfg_.behavior.vehicle_length;
      const double s = 0.5 * length;
      if (!can_place(route.front(), s, length, speed)) {
        if (!st.blocked_logged) {
          log_event("spawn_blocked", {{"flow", flow.name}, {"lane", route.front()}});
          st.blocked_logged = true;
        }
        break;
      }
      VehicleSpec spec;
      spec.route = route;
      spec.s = s;
      spec.speed = speed;
      spec.length = length;
      spec.width = cfg_.behavior.vehicle_width;
      spec.flow = flow.name;
      add_vehicle(spec);
      st.pending.pop_front();
      st.blocked_logged = false;
    }
  }
}

void World::add_replay_track(std::shared_ptr<const ReplayTrack> track) {
  pending_tracks_.push_back(std::move(track));
}

// ---------------------------------------------------------------- AoI

std::map<int, ControlMode> World::update_aoi(const AoiConfig& cfg) {
  std::map<int, ControlMode> out;
  const VehicleState* e = ego();
  for (auto& [id, v] : vehicles_) {
    if (v.control_mode == ControlMode::Replay || v.control_mode == ControlMode::External) {
      out[id] = v.control_mode;
      continue;
    }
    if (!e) {
      v.control_mode = ControlMode::Coarse;
    } else if (v.is_ego) {
      v.control_mode = ControlMode::Fine;
    } else {
      const double d = (v.position() - e->position()).norm();
      if (v.control_mode == ControlMode::Coarse && d <= cfg.radius) {
        v.control_mode = ControlMode::Fine;
        v.next_decision_tick = tick_;
      } else if (v.control_mode == ControlMode::Fine && d > cfg.radius * cfg.hysteresis_factor) {
        v.control_mode = ControlMode::Coarse;
        if (v.plan) v.plan->track_longitudinal = false;
      }
    }
    out[id] = v.control_mode;
  }
  return out;
}

// ---------------------------------------------------------------- queries

double World::lane_s_on(const LaneId& lane, const VehicleState& v) const {
  const Lane& target = network_->lane(lane);
  const double own = network_->lane(v.lane_id).length();
  const double guess = own > 0.0 ? v.frenet.s * target.length() / own : v.frenet.s;
  ProjectionOptions opts;
  opts.s_min = guess - 8.0;
  opts.s_max = guess + 8.0;
  try {
    return target.reference_line.project(v.position(), opts).s;
  } catch (const Error&) {
    return guess;
  }
}

void World::rebuild_lane_index() {
  lane_index_.clear();
  for (const auto& [id, v] : vehicles_) {
    if (v.lane_id.empty()) continue;
    lane_index_[v.lane_id].push_back({v.frenet.s, id});
    if (v.origin_lane) lane_index_[*v.origin_lane].push_back({lane_s_on(*v.origin_lane, v), id});
  }
  for (auto& [lane, occ] : lane_index_) {
    std::sort(occ.begin(), occ.end(), [](const Occupant& a, const Occupant& b) {
      return a.s < b.s || (a.s == b.s && a.id < b.id);
    });
  }
}

std::optional<double> World::stop_distance(int id) const { return junction_->stop_distance(id); }

LeaderInfo World::leader_of(const VehicleState& v) const {
  LeaderInfo best;
  auto consider = [&](double gap, double speed, int id) {
    if (gap < best.gap) best = {gap, speed, id};
  };
  auto half = [&](int id) { return 0.5 * (v.length + vehicles_.at(id).length); };

  auto scan = [&](const LaneId& lane, double s, std::size_t step) {
    auto it = lane_index_.find(lane);
    if (it != lane_index_.end()) {
      for (const Occupant& o : it->second) {
        if (o.id == v.id) continue;
        if (o.s > s || (o.s == s && o.id > v.id)) {
          consider(o.s - s - half(o.id), vehicles_.at(o.id).speed(), o.id);
          break;
        }
      }
    }
    double acc = network_->lane(lane).length() - s;
    LaneId cur = lane;
    for (int hop = 0; hop < 8 && acc < cfg_.behavior.lookahead; ++hop) {
      if (best.gap < acc) break;
      std::optional<LaneId> nxt;
      if (v.corridor && v.corridor->contains(step, cur)) nxt = v.corridor->next_lane(*network_, step, cur);
      const Lane& cur_lane = network_->lane(cur);
      if (!nxt && !cur_lane.successors.empty()) nxt = cur_lane.successors.front();
      if (!nxt) break;
      const Lane& next_lane = network_->lane(*nxt);
      // vehicles converging onto the same lane that are closer to the merge point
      if (acc < 80.0) {
        for (const LaneId& pred : next_lane.predecessors) {
          if (pred == cur) continue;
          auto pit = lane_index_.find(pred);
          if (pit == lane_index_.end()) continue;
          const double len = network_->lane(pred).length();
          for (const Occupant& o : pit->second) {
            const double rem = len - o.s;
            if (rem < acc || (rem == acc && o.id < v.id)) consider(acc - rem - half(o.id), vehicles_.at(o.id).speed(), o.id);
          }
        }
      }
      // vehicles just past a diverge on a sibling branch still block the fork
      for (const LaneId& sib : cur_lane.successors) {
        if (sib == *nxt) continue;
        auto sit = lane_index_.find(sib);
        if (sit == lane_index_.end()) continue;
        for (const Occupant& o : sit->second) {
          if (o.s > 10.0) break;
          consider(acc + o.s - half(o.id), vehicles_.at(o.id).speed(), o.id);
        }
      }
      auto nit = lane_index_.find(*nxt);
      if (nit != lane_index_.end()) {
        for (const Occupant& o : nit->second) {
          if (o.id == v.id) continue;
          consider(acc + o.s - half(o.id), vehicles_.at(o.id).speed(), o.id);
          break;
        }
      }
      acc += next_lane.length();
      cur = *nxt;
      if (v.corridor && v.corridor->contains(step + 1, cur)) ++step;
    }
  };

  if (v.lane_id.empty()) return best;
  scan(v.lane_id, v.frenet.s, v.route_step);
  if (v.origin_lane) {
    std::size_t step = v.route_step;
    if (v.corridor) step = v.corridor->find_step(*v.origin_lane, v.route_step > 0 ? v.route_step - 1 : 0).value_or(step);
    scan(*v.origin_lane, lane_s_on(*v.origin_lane, v), step);
  }
  if (auto stop = junction_->stop_distance(v.id)) consider(*stop - 0.5 * v.length, 0.0, -1);
  return best;
}

double World::ttc_of(const VehicleState& v) const {
  const LeaderInfo lead = leader_of(v);
  if (!lead.present() || lead.id < 0) return std::numeric_limits<double>::infinity();
  const double closing = v.frenet.s_dot - lead.speed;
  if (closing <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, lead.gap) / closing;
}

std::vector<int> World::neighbors_within(Vec2 center, double radius, int exclude) const {
  std::vector<int> out;
  for (const auto& [id, v] : vehicles_) {
    if (id == exclude) continue;
    if ((v.position() - center).norm() <= radius) out.push_back(id);
  }
  return out;
}

std::shared_ptr<const LaneChain> World::chain_from(const VehicleState& v, const LaneId& start,
                                                   double min_length) const {
  std::vector<LaneId> lanes{start};
  double total = network_->lane(start).length();
  std::size_t step = v.corridor ? v.corridor->find_step(start, v.route_step > 0 ? v.route_step - 1 : 0)
                                      .value_or(v.route_step)
                                : 0;
  while (total < min_length && lanes.size() < 32) {
    const LaneId& cur = lanes.back();
    std::optional<LaneId> nxt;
    if (v.corridor && v.corridor->contains(step, cur)) nxt = v.corridor->next_lane(*network_, step, cur);
    if (!nxt) {
      const Lane& l = network_->lane(cur);
      if (l.successors.empty()) break;
      nxt = l.successors.front();
    }
    if (std::find(lanes.begin(), lanes.end(), *nxt) != lanes.end()) break;
    lanes.push_back(*nxt);
    total += network_->lane(*nxt).length();
    ++step;
  }
  auto it = chain_cache_.find(lanes);
  if (it != chain_cache_.end()) return it->second;
  auto chain = std::make_shared<const LaneChain>(*network_, lanes);
  chain_cache_.emplace(lanes, chain);
  return chain;
}

void World::detect_collisions() {
  std::vector<const VehicleState*> order;
  for (const auto& [id, v] : vehicles_) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](const VehicleState* a, const VehicleState* b) {
    return a->pose.x < b->pose.x || (a->pose.x == b->pose.x && a->id < b->id);
  });
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const VehicleState& a = *order[i];
    const double ra = 0.5 * std::hypot(a.length, a.width);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const VehicleState& b = *order[j];
      const double rb = 0.5 * std::hypot(b.length, b.width);
      if (b.pose.x - a.pose.x > ra + rb) break;
      if (overlaps(a.footprint(), b.footprint())) pairs.emplace_back(std::min(a.id, b.id), std::max(a.id, b.id));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::set<int> removed;
  for (const auto& [a, b] : pairs) {
    if (removed.count(a) || removed.count(b)) continue;
    const bool ego_hit = ego_id_ && (*ego_id_ == a || *ego_id_ == b);
    log_event("collision", {{"a", a}, {"b", b}, {"ego", ego_hit}});
    if (ego_hit) {
      ego_collided_ = true;
      finish("collision");
      continue;
    }
    remove_vehicle(a, "collision");
    remove_vehicle(b, "collision");
    removed.insert(a);
    removed.insert(b);
  }
}

}  // namespace limsim
