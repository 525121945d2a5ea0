#include <algorithm>
#include <cmath>

#include "limsim/common/error.hpp"
#include "limsim/planning/legal_actions.hpp"
#include "limsim/replay/replay_control.hpp"
#include "limsim/traffic/fine_control.hpp"
#include "limsim/traffic/world.hpp"

namespace limsim {

// Per-tick machinery with access to World internals.
class StepRunner {
 public:
  explicit StepRunner(World& w) : w_(w) {}

  void run();

 private:
  std::int64_t epoch_ticks() const {
    return std::max<std::int64_t>(1, std::llround(w_.cfg_.planning.epoch / w_.cfg_.dt));
  }
  void spawn_replays();
  void update_junctions();
  void replay_phase();
  void external_phase();
  void fine_phase();
  void coarse_mobil_phase();
  void adopt(VehicleState& v, const FineDecision& d);
  bool target_clear(const VehicleState& v, const LaneId& lane, double s) const;
  void change_lane(VehicleState& v, const LaneId& target, double s, double l, MetaActionKind action);
  double command(const VehicleState& v) const;
  void integrate(VehicleState& v, double accel);
  void integrate_replay(VehicleState& v);
  void integrate_external(VehicleState& v);
  void relocalize(VehicleState& v);
  std::optional<LaneId> next_lane(const VehicleState& v, const LaneId& lane, std::size_t step) const;
  NeighborVehicle follower_on(const LaneId& lane, double s, const VehicleState& v) const;

  World& w_;
};

void World::step() {
  if (done()) return;
  StepRunner(*this).run();
}

void StepRunner::run() {
  World& w = w_;
  w.finished_route_.clear();
  w.spawn_flows();
  spawn_replays();
  w.rebuild_lane_index();

  // (1) granularity, then right of way at junctions
  w.update_aoi(w.cfg_.aoi);
  update_junctions();
  // (2) replay conflicts
  replay_phase();
  // (3) external agent
  external_phase();
  if (w.done()) return;
  // (4) fine decisions on the frozen snapshot, adopted in id order
  fine_phase();
  // (5) coarse lane changes
  if (w.cfg_.behavior.coarse_mobil) coarse_mobil_phase();
  w.rebuild_lane_index();

  std::map<int, double> accel;
  for (const auto& [id, v] : w.vehicles_) accel[id] = command(v);
  // (6) integrate
  for (auto& [id, v] : w.vehicles_) {
    if (v.control_mode == ControlMode::Replay && v.replay && v.replay->state.mode == ReplayMode::Following) {
      integrate_replay(v);
    } else if (v.control_mode == ControlMode::External && v.active_trajectory) {
      integrate_external(v);
    } else {
      integrate(v, accel[id]);
    }
  }
  w.tick_ += 1;
  w.detect_collisions();
  // (7) route ends
  for (int id : w.finished_route_) {
    const VehicleState* v = w.find(id);
    if (!v) continue;
    if (v->is_ego) {
      w.finish("route_complete");
    } else {
      w.remove_vehicle(id, v->replay ? "replay_end" : "route_end");
    }
  }
  w.rebuild_lane_index();
  // (8) samples
  if (w.sample_sink_) w.sample_sink_(w);
}

void StepRunner::spawn_replays() {
  World& w = w_;
  const double now = w.time();
  auto it = w.pending_tracks_.begin();
  while (it != w.pending_tracks_.end()) {
    const auto track = *it;
    if (track->t_start() > now + 1e-9) {
      ++it;
      continue;
    }
    it = w.pending_tracks_.erase(it);
    if (!track->covers(now)) continue;
    const CartesianPose p = track->at(now);
    const auto loc = locate(*w.network_, {p.x, p.y}, p.heading);
    if (!loc) {
      w.log_event("replay_unmapped", {{"track", track->vehicle_id()}});
      continue;
    }
    VehicleSpec spec;
    spec.route = follow_successors(*w.network_, loc->lane, 1e4);
    spec.s = loc->s;
    spec.l = loc->l;
    spec.speed = p.speed;
    spec.length = w.cfg_.behavior.vehicle_length;
    spec.width = w.cfg_.behavior.vehicle_width;
    spec.mode = ControlMode::Replay;
    spec.flow = "replay:" + std::to_string(track->vehicle_id());
    const int id = w.add_vehicle(spec);
    VehicleState& v = *w.find_mutable(id);
    v.replay = ReplayBinding{track, {}};
    v.pose = p;
  }
}

std::optional<LaneId> StepRunner::next_lane(const VehicleState& v, const LaneId& lane, std::size_t step) const {
  const RoadNetwork& net = *w_.network_;
  if (v.corridor && v.corridor->contains(step, lane)) {
    if (auto n = v.corridor->next_lane(net, step, lane)) return n;
    if (step + 1 >= v.corridor->size()) return std::nullopt;  // route end
    if (v.is_ego) return std::nullopt;                         // off route
  }
  const Lane& l = net.lane(lane);
  if (l.successors.empty()) return std::nullopt;
  return l.successors.front();
}

void StepRunner::update_junctions() {
  World& w = w_;
  const JunctionManager& jm = *w.junction_;
  std::vector<JunctionRequest> requests;
  for (const auto& [id, v] : w.vehicles_) {
    if (v.lane_id.empty()) continue;
    const bool stubborn = v.control_mode == ControlMode::External ||
                          (v.replay && v.replay->state.mode == ReplayMode::Following);
    if (jm.managed(v.lane_id)) {
      requests.push_back({id, v.lane_id, 0.0, v.speed(), true, stubborn});
      continue;
    }
    double acc = w.network_->lane(v.lane_id).length() - v.frenet.s;
    LaneId cur = v.lane_id;
    std::size_t step = v.route_step;
    for (int hop = 0; hop < 4 && acc <= w.cfg_.junction.request_distance; ++hop) {
      const auto nxt = next_lane(v, cur, step);
      if (!nxt) break;
      if (jm.managed(*nxt)) {
        requests.push_back({id, *nxt, std::max(0.0, acc - 0.5 * v.length), v.speed(), false, stubborn});
        break;
      }
      acc += w.network_->lane(*nxt).length();
      cur = *nxt;
      if (v.corridor && v.corridor->contains(step + 1, cur)) ++step;
    }
  }
  w.junction_->update(requests, w.cfg_.behavior.idm.comfort_decel);
}

void StepRunner::replay_phase() {
  World& w = w_;
  for (auto& [id, v] : w.vehicles_) {
    if (!v.replay || v.control_mode != ControlMode::Replay) continue;
    if (v.replay->state.mode == ReplayMode::Following) {
      const VehicleState* e = w.ego();
      if (!e) continue;
      const double d = (v.position() - e->position()).norm();
      if (d > w.cfg_.aoi.radius * w.cfg_.aoi.hysteresis_factor) continue;
      if (auto c = detect_conflict(v, w, w.cfg_.replay.horizon)) apply_override(w, v, *c);
    } else {
      try_restore(w, v, w.cfg_.replay);
    }
  }
}

void StepRunner::external_phase() {
  World& w = w_;
  if (!w.ego_id_ || !w.external_) return;
  VehicleState* ego = w.find_mutable(*w.ego_id_);
  if (!ego || ego->control_mode != ControlMode::External || w.tick_ < ego->next_decision_tick) return;
  const ExternalCommand cmd = w.external_->exchange(w);
  ego->next_decision_tick = w.tick_ + epoch_ticks();
  const char* kinds[] = {"meta_action", "trajectory", "fallback", "disconnected"};
  std::string label = kinds[static_cast<int>(cmd.kind)];
  if (cmd.kind == ExternalCommand::Kind::meta_action) label = std::string(to_string(cmd.action));
  w.decisions_.push_back({w.tick_, w.time(), cmd.decision_time, label});
  switch (cmd.kind) {
    case ExternalCommand::Kind::meta_action: {
      ego->active_trajectory.reset();
      const FineDecision d = decide_fine(w, *ego, cmd.action);
      if (!d.chosen) {
        w.log_event("fallback", {{"id", ego->id}, {"source", "agent"}, {"reason", "infeasible_action"},
                                 {"action", to_string(cmd.action)}});
        ego->plan.reset();
      } else {
        adopt(*ego, d);
      }
      break;
    }
    case ExternalCommand::Kind::trajectory:
      ego->plan.reset();
      ego->active_trajectory = cmd.trajectory;
      ego->trajectory_cursor = static_cast<std::size_t>(w.tick_);
      break;
    case ExternalCommand::Kind::fallback:
      ego->plan.reset();
      ego->active_trajectory.reset();
      w.log_event("fallback", {{"id", ego->id}, {"source", "agent"}, {"reason", cmd.reason}});
      break;
    case ExternalCommand::Kind::disconnected:
      w.finish("agent_disconnected");
      break;
  }
}

void StepRunner::fine_phase() {
  World& w = w_;
  std::vector<FineDecision> decisions;
  for (const auto& [id, v] : w.vehicles_) {
    if (v.control_mode != ControlMode::Fine || w.tick_ < v.next_decision_tick || v.lane_id.empty()) continue;
    decisions.push_back(decide_fine(w, v));
  }
  for (const FineDecision& d : decisions) {
    VehicleState& v = *w.find_mutable(d.id);
    v.next_decision_tick = w.tick_ + epoch_ticks();
    if (v.is_ego) {
      w.decisions_.push_back({w.tick_, w.time(), d.wall_time,
                              d.chosen ? std::string(to_string(d.chosen->action)) : std::string("emergency")});
    }
    adopt(v, d);
  }
}

bool StepRunner::target_clear(const VehicleState& v, const LaneId& lane, double s) const {
  auto it = w_.lane_index_.find(lane);
  if (it == w_.lane_index_.end()) return true;
  for (const auto& o : it->second) {
    if (o.id == v.id) continue;
    const VehicleState& other = w_.vehicles_.at(o.id);
    const double gap = std::abs(o.s - s) - 0.5 * (v.length + other.length);
    if (gap < 1.0) return false;
  }
  return true;
}

void StepRunner::change_lane(VehicleState& v, const LaneId& target, double s, double l, MetaActionKind action) {
  World& w = w_;
  w.log_event("lane_change", {{"id", v.id}, {"from", v.lane_id}, {"to", target}, {"action", to_string(action)}});
  v.origin_lane = v.lane_id;
  v.lane_id = target;
  v.frenet.s = s;
  v.frenet.l = l;
  if (v.corridor) {
    v.route_step = v.corridor->find_step(target, v.route_step > 0 ? v.route_step - 1 : 0).value_or(v.route_step);
  }
  v.last_lane_change = w.time();
  w.rebuild_lane_index();
}

void StepRunner::adopt(VehicleState& v, const FineDecision& d) {
  World& w = w_;
  for (const auto& [action, reason] : d.fallbacks) {
    w.log_event("fallback", {{"id", v.id}, {"source", "planner"}, {"action", to_string(action)}, {"reason", reason}});
  }
  std::optional<PlannedAction> chosen = d.chosen;
  if (chosen && is_lane_change(chosen->action) && !target_clear(v, chosen->lane, chosen->start.s)) {
    w.log_event("fallback",
                {{"id", v.id}, {"source", "planner"}, {"action", to_string(chosen->action)}, {"reason", "lane_change_rejected"}});
    chosen = plan_action(w, v, MetaActionKind::keep_lane_cruise, predict_neighbors(w, v));
  }
  if (!chosen) {
    w.log_event("fallback", {{"id", v.id}, {"source", "planner"}, {"reason", "all_infeasible"}});
    v.plan.reset();
    return;
  }
  if (is_lane_change(chosen->action)) change_lane(v, chosen->lane, chosen->start.s, chosen->start.l, chosen->action);
  v.plan = chosen->plan;
}

NeighborVehicle StepRunner::follower_on(const LaneId& lane, double s, const VehicleState& v) const {
  NeighborVehicle out;
  auto it = w_.lane_index_.find(lane);
  if (it == w_.lane_index_.end()) return out;
  for (const auto& o : it->second) {
    if (o.id == v.id || o.s >= s) continue;
    const VehicleState& other = w_.vehicles_.at(o.id);
    out = {s - o.s - 0.5 * (v.length + other.length), other.speed()};  // keeps the nearest (last below s)
  }
  return out;
}

void StepRunner::coarse_mobil_phase() {
  World& w = w_;
  const RoadNetwork& net = *w.network_;
  for (auto& [id, v] : w.vehicles_) {
    if (v.control_mode != ControlMode::Coarse || v.lane_id.empty() || v.origin_lane) continue;
    if (w.tick_ < v.next_decision_tick) continue;
    v.next_decision_tick = w.tick_ + epoch_ticks();
    if (w.time() - v.last_lane_change < w.cfg_.behavior.lane_change_cooldown) continue;
    const Lane& lane = net.lane(v.lane_id);
    if (lane.in_junction) continue;
    const auto legal = legal_actions(v, net);
    auto allowed = [&](MetaActionKind k) {
      return std::any_of(legal.begin(), legal.end(), [&](const MetaAction& a) { return a.kind == k; });
    };
    MobilContext ctx;
    ctx.speed = v.frenet.s_dot;
    ctx.length = v.length;
    const LeaderInfo lead = w.leader_of(v);
    ctx.leader = {lead.gap, lead.speed};
    ctx.follower = follower_on(v.lane_id, v.frenet.s, v);
    auto side = [&](const std::optional<LaneId>& nb, MetaActionKind k, AdjacentLane& out, double& s_out) {
      if (!nb || !allowed(k)) return;
      s_out = v.frenet.s * net.lane(*nb).length() / lane.length();
      VehicleState probe = v;
      probe.lane_id = *nb;
      probe.frenet.s = s_out;
      const LeaderInfo nl = w.leader_of(probe);
      out.available = true;
      out.leader = {nl.gap, nl.speed};
      out.follower = follower_on(*nb, s_out, v);
    };
    double s_left = 0.0, s_right = 0.0;
    side(lane.left_neighbor, MetaActionKind::change_left, ctx.left, s_left);
    side(lane.right_neighbor, MetaActionKind::change_right, ctx.right, s_right);
    const LaneChoice choice = mobil_decide(ctx, w.idm_for(v), w.cfg_.behavior.mobil);
    if (choice == LaneChoice::stay) continue;
    const bool left = choice == LaneChoice::change_left;
    const LaneId target = left ? *lane.left_neighbor : *lane.right_neighbor;
    const double s = left ? s_left : s_right;
    if (!target_clear(v, target, s)) continue;
    const Lane& t = net.lane(target);
    double l = left ? -0.5 * (lane.width + t.width) : 0.5 * (lane.width + t.width);
    l += v.frenet.l;
    change_lane(v, target, s, l, left ? MetaActionKind::change_left : MetaActionKind::change_right);
    v.plan.reset();
  }
}

double StepRunner::command(const VehicleState& v) const {
  const World& w = w_;
  if (v.lane_id.empty()) return 0.0;
  const IdmParams idm = w.idm_for(v);
  const LeaderInfo lead = w.leader_of(v);
  const double speed = v.frenet.s_dot;
  auto free_or_follow = [&] {
    if (!lead.present()) return idm_acceleration(speed, kNoLeader, 0.0, idm);
    if (lead.gap <= 0.0) return -idm.emergency_decel;
    return idm_acceleration(speed, lead.gap, speed - lead.speed, idm);
  };
  if (!v.plan || !v.plan->track_longitudinal) return free_or_follow();

  const double tau = w.time() + w.dt() - v.plan->t0;
  const double target = eval_extended(v.plan->plan.lon, tau, true).v;
  double a = std::clamp((target - speed) / w.dt(), -idm.emergency_decel, idm.max_accel);
  if (lead.present()) {
    double cap = -idm.emergency_decel;
    if (lead.gap > 0.0) {
      const double ratio = idm_desired_gap(speed, speed - lead.speed, idm) / lead.gap;
      cap = std::max(-idm.emergency_decel, idm.max_accel * (1.0 - ratio * ratio));
    }
    a = std::min(a, cap);
  }
  return a;
}

void StepRunner::integrate(VehicleState& v, double accel) {
  World& w = w_;
  if (v.lane_id.empty()) return;
  const RoadNetwork& net = *w.network_;
  const double dt = w.dt();
  const double t_next = w.time() + dt;

  const double v_new = std::max(0.0, v.frenet.s_dot + accel * dt);
  v.frenet.s_ddot = (v_new - v.frenet.s_dot) / dt;
  v.frenet.s_dot = v_new;
  v.frenet.s += v_new * dt;

  if (!v.plan && std::abs(v.frenet.l) > 1e-3) {
    ActivePlan settle;
    settle.plan.lat = QuinticPolynomial(v.frenet.l, v.lat_dot, v.lat_ddot, 0.0, 0.0, 0.0, w.cfg_.planning.lane_change_duration);
    settle.plan.lon = QuinticPolynomial(0, 0, 0, 0, 0, 0, 1.0);
    settle.t0 = w.time();
    settle.track_longitudinal = false;
    v.plan = settle;
  }
  if (v.plan) {
    const Kinematics1D lat = eval_extended(v.plan->plan.lat, t_next - v.plan->t0, false);
    v.frenet.l = lat.x;
    v.lat_dot = lat.v;
    v.lat_ddot = lat.a;
  } else {
    v.lat_dot = 0.0;
    v.lat_ddot = 0.0;
  }

  while (v.frenet.s > net.lane(v.lane_id).length()) {
    const double len = net.lane(v.lane_id).length();
    const auto nxt = next_lane(v, v.lane_id, v.route_step);
    if (!nxt) {
      w.finished_route_.insert(v.id);
      if (v.is_ego) v.frenet.s = len;
      break;
    }
    v.frenet.s -= len;
    v.lane_id = *nxt;
    v.origin_lane.reset();
    if (v.corridor && v.corridor->contains(v.route_step + 1, v.lane_id)) ++v.route_step;
  }
  if (v.origin_lane && std::abs(v.frenet.l) < 0.5) v.origin_lane.reset();
  if (v.is_ego && v.corridor && !w.finished_route_.count(v.id) && !v.corridor->contains(v.route_step, v.lane_id)) {
    w.finish("off_route");
  }
  w.refresh_pose(v);
}

void StepRunner::relocalize(VehicleState& v) {
  const RoadNetwork& net = *w_.network_;
  std::vector<LaneId> hints;
  if (!v.lane_id.empty()) {
    const Lane& cur = net.lane(v.lane_id);
    hints.push_back(v.lane_id);
    for (const LaneId& s : cur.successors) hints.push_back(s);
    if (cur.left_neighbor) hints.push_back(*cur.left_neighbor);
    if (cur.right_neighbor) hints.push_back(*cur.right_neighbor);
  }
  const auto loc = locate(net, v.position(), v.pose.heading, hints);
  if (!loc) return;
  if (loc->lane != v.lane_id) {
    v.lane_id = loc->lane;
    if (!v.corridor || !v.corridor->find_step(v.lane_id, v.route_step)) {
      v.route = follow_successors(net, v.lane_id, 1e4);
      v.corridor = std::make_shared<RouteCorridor>(net, v.route);
      v.route_step = 0;
    } else {
      v.route_step = *v.corridor->find_step(v.lane_id, v.route_step);
    }
  }
  v.frenet.s = loc->s;
  v.frenet.l = loc->l;
}

void StepRunner::integrate_replay(VehicleState& v) {
  const double t_next = w_.time() + w_.dt();
  const ReplayTrack& track = *v.replay->track;
  if (t_next > track.t_end() + 1e-9) {
    w_.finished_route_.insert(v.id);
    return;
  }
  v.pose = track.at(t_next);
  v.frenet.s_dot = v.pose.speed;
  v.frenet.s_ddot = v.pose.accel;
  v.lat_dot = 0.0;
  v.lat_ddot = 0.0;
  relocalize(v);
}

void StepRunner::integrate_external(VehicleState& v) {
  const Trajectory& traj = *v.active_trajectory;
  const double dt = w_.dt();
  // sample times are relative to the exchange tick stored in trajectory_cursor
  const auto elapsed = w_.tick_ + 1 - static_cast<std::int64_t>(v.trajectory_cursor);
  const auto k = elapsed - std::llround(traj.samples.front().t / dt);
  if (k < 0 || k >= static_cast<std::int64_t>(traj.samples.size())) {
    if (k >= 0) v.active_trajectory.reset();
    integrate(v, command(v));
    return;
  }
  const TrajectorySample& s = traj.samples[static_cast<std::size_t>(k)];
  const double prev_speed = v.pose.speed;
  const double moved = std::hypot(s.x - v.pose.x, s.y - v.pose.y);
  if (moved > 1e-9) v.pose.heading = std::atan2(s.y - v.pose.y, s.x - v.pose.x);
  v.pose.x = s.x;
  v.pose.y = s.y;
  v.pose.speed = s.speed;
  v.pose.accel = (s.speed - prev_speed) / dt;
  v.frenet.s_dot = s.speed;
  v.frenet.s_ddot = v.pose.accel;
  v.lat_dot = 0.0;
  v.lat_ddot = 0.0;
  relocalize(v);
  if (v.is_ego && v.corridor && v.route_step + 1 == v.corridor->size() &&
      v.frenet.s >= w_.network_->lane(v.lane_id).length() - 0.5) {
    w_.finished_route_.insert(v.id);
  }
}

}  // namespace limsim
