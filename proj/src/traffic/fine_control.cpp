#include "limsim/traffic/fine_control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "limsim/common/error.hpp"
#include "limsim/planning/legal_actions.hpp"

namespace limsim {

namespace {

int lateral_slot(const RoadNetwork& net, const std::vector<LaneId>& lanes, const LaneId& lane) {
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (lanes[i] == lane) return static_cast<int>(i);
  }
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Lane& l = net.lane(lanes[i]);
    if (std::find(l.successors.begin(), l.successors.end(), lane) != l.successors.end() ||
        std::find(l.predecessors.begin(), l.predecessors.end(), lane) != l.predecessors.end()) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

DrivingState build_abstract_state(const World& w, const VehicleState& v, const std::vector<MetaActionKind>& legal) {
  const RoadNetwork& net = w.network();
  const PlanningConfig& cfg = w.config().planning;
  DrivingState st;
  const std::vector<LaneId> lanes = net.lateral_lanes(v.lane_id);
  const int own = lateral_slot(net, lanes, v.lane_id);
  st.lanes.resize(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Lane& lane = net.lane(lanes[i]);
    st.lanes[i].left_ok = lane.can_change_left();
    st.lanes[i].right_ok = lane.can_change_right();
    if (v.corridor && v.corridor->contains(v.route_step, lanes[i]) && !v.corridor->is_exit(v.route_step, lanes[i])) {
      const double remaining = lane.length() - v.frenet.s;
      if (remaining < 150.0) st.lanes[i].stop_s = remaining;
    }
  }
  auto has = [&](MetaActionKind k) { return std::find(legal.begin(), legal.end(), k) != legal.end(); };
  st.lanes[own].left_ok = has(MetaActionKind::change_left);
  st.lanes[own].right_ok = has(MetaActionKind::change_right);
  if (auto stop = w.stop_distance(v.id)) {
    st.lanes[own].stop_s = std::min(st.lanes[own].stop_s.value_or(*stop), *stop);
  }

  st.vehicles.push_back({v.id, own, 0.0, v.frenet.s_dot, v.length, w.idm_for(v)});
  st.ego = 0;

  const Vec2 fwd = unit(net.lane(v.lane_id).reference_line.evaluate(v.frenet.s).heading);
  std::vector<std::pair<double, int>> near;
  for (int id : w.neighbors_within(v.position(), cfg.perception_radius, v.id)) {
    near.emplace_back((w.find(id)->position() - v.position()).norm(), id);
  }
  std::sort(near.begin(), near.end());
  for (const auto& [d, id] : near) {
    if (static_cast<int>(st.vehicles.size()) > cfg.max_neighbors) break;
    const VehicleState& o = *w.find(id);
    if (o.lane_id.empty()) continue;
    const int slot = lateral_slot(net, lanes, o.lane_id);
    if (slot < 0) continue;
    const double rel = (o.position() - v.position()).dot(fwd);
    st.vehicles.push_back({o.id, slot, rel, o.speed(), o.length, w.idm_for(o)});
  }
  return st;
}

std::vector<PredictedVehicle> predict_neighbors(const World& w, const VehicleState& v) {
  const PlanningConfig& cfg = w.config().planning;
  const double dt = w.dt();
  const auto n = static_cast<std::size_t>(std::floor(cfg.horizon / dt + 1e-9)) + 1;
  std::vector<PredictedVehicle> out;
  for (int id : w.neighbors_within(v.position(), cfg.perception_radius, v.id)) {
    const VehicleState& o = *w.find(id);
    const bool same_lane = !o.lane_id.empty() && (o.lane_id == v.lane_id || (v.origin_lane && o.lane_id == *v.origin_lane));
    if (same_lane && o.frenet.s < v.frenet.s) continue;

    PredictedVehicle p;
    p.id = o.id;
    p.length = o.length;
    p.width = o.width;
    p.positions.reserve(n);
    const bool on_lane = !o.lane_id.empty() &&
                         !(o.control_mode == ControlMode::Replay && o.replay &&
                           o.replay->state.mode == ReplayMode::Following) &&
                         o.control_mode != ControlMode::External;
    if (!on_lane) {
      const Vec2 vel = unit(o.pose.heading) * o.speed();
      for (std::size_t k = 0; k < n; ++k) {
        p.positions.push_back(o.position() + vel * (static_cast<double>(k) * dt));
        p.headings.push_back(o.pose.heading);
        p.speeds.push_back(o.speed());
      }
      out.push_back(std::move(p));
      continue;
    }
    const IdmParams idm = w.idm_for(o);
    const LeaderInfo lead = w.leader_of(o);
    const double reach = o.frenet.s + o.speed() * cfg.horizon + 0.5 * idm.max_accel * cfg.horizon * cfg.horizon + 10.0;
    const auto chain = w.chain_from(o, o.lane_id, reach);
    double s = o.frenet.s, sv = o.frenet.s_dot, gap = lead.gap;
    const double lead_speed = lead.id == v.id ? v.speed() : lead.speed;
    for (std::size_t k = 0; k < n; ++k) {
      const CartesianPose c = frenet_to_cartesian_extended(chain->line(), FrenetPose{s, o.frenet.l, sv, 0.0, 0.0, 0.0});
      p.positions.push_back({c.x, c.y});
      p.headings.push_back(c.heading);
      p.speeds.push_back(sv);
      double a = 0.0;
      if (gap == kNoLeader) a = idm_acceleration(sv, kNoLeader, 0.0, idm);
      else if (gap <= 0.0) a = -idm.emergency_decel;
      else a = idm_acceleration(sv, gap, sv - lead_speed, idm);
      const double next = std::max(0.0, sv + a * dt);
      if (gap != kNoLeader) gap += (lead_speed - next) * dt;
      sv = next;
      s += sv * dt;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::optional<PlannedAction> plan_action(const World& w, const VehicleState& v, MetaActionKind action,
                                         const std::vector<PredictedVehicle>& predicted) {
  const RoadNetwork& net = w.network();
  const PlanningConfig& cfg = w.config().planning;
  const Lane& lane = net.lane(v.lane_id);
  LaneId target = v.lane_id;
  double s = v.frenet.s, l = v.frenet.l;
  if (is_lane_change(action)) {
    const auto& nb = action == MetaActionKind::change_left ? lane.left_neighbor : lane.right_neighbor;
    if (!nb) return std::nullopt;
    target = *nb;
    const Lane& t = net.lane(target);
    const double guess = v.frenet.s * t.length() / lane.length();
    ProjectionOptions opts;
    opts.s_min = guess - 8.0;
    opts.s_max = guess + 8.0;
    try {
      const Projection pr = t.reference_line.project(v.position(), opts);
      s = pr.s;
      l = pr.l;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  const Lane& tl = net.lane(target);
  const double speed = v.frenet.s_dot;
  const auto chain =
      w.chain_from(v, target, s + std::max(speed, 1.0) * cfg.horizon + 0.5 * 3.0 * cfg.horizon * cfg.horizon + 20.0);

  CandidateRequest req;
  req.start = from_temporal(s, speed, v.frenet.s_ddot, {l, v.lat_dot, v.lat_ddot});
  req.action = action;
  req.desired_speed = tl.speed_limit * v.speed_factor;
  req.horizon = cfg.horizon;
  req.dt = w.dt();
  req.lateral_duration = cfg.lane_change_duration;
  req.lateral_offsets = cfg.lateral_offsets;
  std::vector<Candidate> cands;
  try {
    cands = generate_candidates(chain->line(), req);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (cands.empty()) return std::nullopt;

  ScoringContext ctx;
  ctx.others = predicted;
  ctx.speed_limit = tl.speed_limit;
  ctx.ego_length = v.length;
  ctx.ego_width = v.width;
  ctx.lane_half_width = 0.5 * tl.width;
  ctx.weights = cfg.weights;
  ctx.ttc_ref = cfg.ttc_ref;
  ctx.jerk_ref = cfg.jerk_ref;
  ctx.threads = cfg.threads;
  std::vector<Trajectory> trajs;
  trajs.reserve(cands.size());
  for (const Candidate& c : cands) trajs.push_back(c.trajectory);
  ScoreResult res;
  try {
    res = score_candidates(trajs, ctx);
  } catch (const AllInfeasible&) {
    return std::nullopt;
  }
  PlannedAction out;
  out.action = action;
  out.lane = target;
  out.start = req.start;
  out.plan = ActivePlan{cands[res.best_index].plan, w.time(), true, action, chain};
  out.cost = res.costs[res.best_index];
  return out;
}

FineDecision decide_fine(const World& w, const VehicleState& v, std::optional<MetaActionKind> forced) {
  const auto t_start = std::chrono::steady_clock::now();
  const PlanningConfig& cfg = w.config().planning;
  FineDecision d;
  d.id = v.id;
  std::vector<MetaActionKind> legal;
  for (const MetaAction& a : legal_actions(v, w.network(), 100.0, cfg.epoch)) legal.push_back(a.kind);

  if (forced) {
    d.ranked = {*forced};
  } else {
    auto it = cfg.groups.find(v.id);
    const SvoWeights& svo = it != cfg.groups.end() ? it->second : cfg.svo;
    const DrivingState root = build_abstract_state(w, v, legal);
    d.ranked = mcts_rank(root, cfg.mcts, svo, w.decision_seed(v.id), cfg.model);
  }
  const auto predicted = predict_neighbors(w, v);
  for (MetaActionKind a : d.ranked) {
    if (std::find(legal.begin(), legal.end(), a) == legal.end()) {
      d.fallbacks.emplace_back(a, "illegal_action");
      continue;
    }
    if (auto p = plan_action(w, v, a, predicted)) {
      d.chosen = std::move(p);
      break;
    }
    d.fallbacks.emplace_back(a, "no_feasible_trajectory");
  }
  d.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return d;
}

}  // namespace limsim
