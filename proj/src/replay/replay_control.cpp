#include "limsim/replay/replay_control.hpp"

#include <cmath>

#include "limsim/common/error.hpp"

namespace limsim {

namespace {

bool in_aoi(const World& w, const VehicleState& v) {
  const VehicleState* e = w.ego();
  if (!e) return false;
  const AoiConfig& aoi = w.config().aoi;
  return (v.position() - e->position()).norm() <= aoi.radius * aoi.hysteresis_factor;
}

}  // namespace

std::optional<Conflict> detect_conflict(const VehicleState& v, const World& w, double horizon) {
  const double threshold = w.config().replay.ttc_threshold;
  const VehicleState* e = w.ego();
  const AoiConfig& aoi = w.config().aoi;
  std::vector<const VehicleState*> others;
  for (const auto& [id, o] : w.vehicles()) {
    if (id == v.id) continue;
    if (e && id != e->id && (o.position() - e->position()).norm() > aoi.radius * aoi.hysteresis_factor) continue;
    others.push_back(&o);
  }

  std::optional<Conflict> best;
  const Vec2 u = unit(v.pose.heading);
  for (const VehicleState* o : others) {
    const Vec2 rel = o->position() - v.position();
    const double along = rel.dot(u);
    if (along <= 0.0) continue;
    if (std::abs(u.cross(rel)) > 0.5 * (v.width + o->width) + 0.5) continue;
    const double gap = along - 0.5 * (v.length + o->length);
    const double closing = v.speed() - o->speed() * std::cos(angle_diff(o->pose.heading, v.pose.heading));
    if (closing <= 0.0) continue;
    const double ttc = std::max(0.0, gap) / closing;
    if (ttc < threshold && (!best || ttc < best->ttc)) best = Conflict{ConflictReason::rear_end_ttc, ttc, o->id};
  }
  if (best) return best;

  const bool following = v.replay && v.replay->state.mode == ReplayMode::Following;
  const double dt = w.dt();
  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  for (int k = 1; k <= steps; ++k) {
    const double tau = k * dt;
    OrientedBox me = v.footprint();
    if (following && v.replay->track->covers(w.time() + tau)) {
      const CartesianPose p = v.replay->track->at(w.time() + tau);
      me.center = {p.x, p.y};
      me.heading = p.heading;
    } else {
      me.center = v.position() + u * (v.speed() * tau);
    }
    for (const VehicleState* o : others) {
      OrientedBox them = o->footprint();
      them.center = o->position() + unit(o->pose.heading) * (o->speed() * tau);
      if (overlaps(me, them)) return Conflict{ConflictReason::footprint_overlap, tau, o->id};
    }
  }
  return std::nullopt;
}

void apply_override(World& w, VehicleState& v, const Conflict& c) {
  if (!v.replay) return;
  OverrideState& st = v.replay->state;
  st.mode = ReplayMode::Overridden;
  st.since = w.time();
  st.reason = c.reason;
  st.last_conflict = w.time();
  v.plan.reset();
  v.frenet.s_dot = v.speed();
  nlohmann::json payload = {{"id", v.id}, {"reason", to_string(c.reason)}, {"other", c.other_id}};
  payload["ttc"] = std::isfinite(c.ttc) ? nlohmann::json(c.ttc) : nlohmann::json(nullptr);
  w.log_event("override", std::move(payload));
}

ReplayMode try_restore(World& w, VehicleState& v, const ReplayConfig& tol) {
  if (!v.replay) return ReplayMode::Following;
  OverrideState& st = v.replay->state;
  if (st.mode == ReplayMode::Following) return st.mode;
  const ReplayTrack& track = *v.replay->track;
  const double now = w.time();
  if (!track.covers(now)) return st.mode;

  const CartesianPose log = track.at(now);
  st.deviation = (v.position() - Vec2{log.x, log.y}).norm();
  if (!in_aoi(w, v) || !detect_conflict(v, w, tol.horizon)) {
    if (now - st.last_conflict >= tol.conflict_clear - 1e-9 && st.deviation <= tol.max_deviation) {
      st.mode = ReplayMode::Following;
      st.reason.reset();
      v.plan.reset();
      w.log_event("restore", {{"id", v.id}, {"deviation", st.deviation}});
      return st.mode;
    }
    // re-issue the blend once per planning epoch
    const bool stale = !v.plan || now - v.plan->t0 >= w.config().planning.epoch - 1e-9;
    if (stale && !v.lane_id.empty() && track.covers(now + tol.blend_duration)) {
      const CartesianPose goal = track.at(now + tol.blend_duration);
      const auto chain = w.chain_from(v, v.lane_id, v.frenet.s + 2.0 * (v.speed() + goal.speed) * tol.blend_duration + 20.0);
      try {
        const FrenetPose g = cartesian_to_frenet(chain->line(), {goal.x, goal.y, goal.heading, goal.speed, 0.0, 0.0});
        const FrenetPose start =
            from_temporal(v.frenet.s, v.frenet.s_dot, v.frenet.s_ddot, {v.frenet.l, v.lat_dot, v.lat_ddot});
        const FrenetPlan plan = make_frenet_plan(start, g, tol.blend_duration, tol.blend_duration);
        v.plan = ActivePlan{plan, now, true, MetaActionKind::keep_lane_cruise, chain};
      } catch (const Error&) {
        v.plan.reset();
      }
    }
  } else {
    st.last_conflict = now;
    v.plan.reset();
  }
  return st.mode;
}

}  // namespace limsim
