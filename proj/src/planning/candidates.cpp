#include "limsim/planning/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "limsim/common/error.hpp"

namespace limsim {

std::array<double, 3> terminal_speeds(MetaActionKind action, double v, double desired) {
  std::array<double, 3> out{};
  switch (action) {
    case MetaActionKind::keep_lane_accelerate: out = {v + 2.0, v + 4.0, v + 6.0}; break;
    case MetaActionKind::keep_lane_decelerate: out = {v - 3.0, v - 6.0, 0.0}; break;
    default: out = {v - 1.0, v, v + 1.0}; break;
  }
  for (double& x : out) x = std::clamp(x, 0.0, std::max(desired, 0.0));
  return out;
}

std::vector<Candidate> generate_candidates(const ReferenceLine& frame, const CandidateRequest& req) {
  const double T = req.horizon;
  const TemporalLateral lat0 = to_temporal(req.start);
  std::vector<Candidate> out;
  out.reserve(req.lateral_offsets.size() * 3);
  const auto speeds = terminal_speeds(req.action, req.start.s_dot, req.desired_speed);
  for (double offset : req.lateral_offsets) {
    for (double vT : speeds) {
      Candidate c;
      c.terminal_speed = vT;
      c.terminal_l = offset;
      const double s_end = req.start.s + 0.5 * (req.start.s_dot + vT) * T;
      c.plan.lon = QuinticPolynomial(req.start.s, req.start.s_dot, req.start.s_ddot, s_end, vT, 0.0, T);
      c.plan.lat = QuinticPolynomial(lat0.l, lat0.l_dot, lat0.l_ddot, offset, 0.0, 0.0,
                                     std::min(req.lateral_duration, T));
      bool backwards = false;
      for (int k = 0; k <= 50 && !backwards; ++k) backwards = c.plan.lon.eval(T * k / 50.0, 1) < -1e-3;
      if (backwards) continue;
      c.trajectory = sample_plan(frame, c.plan, T, req.dt);
      out.push_back(std::move(c));
    }
  }
  return out;
}

double trajectory_cost(const Trajectory& traj, const ScoringContext& ctx) {
  const auto& samples = traj.samples;
  if (samples.empty()) return std::numeric_limits<double>::infinity();
  double ttc_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const TrajectorySample& e = samples[k];
    const OrientedBox me{{e.x, e.y}, e.heading, ctx.ego_length, ctx.ego_width};
    const Vec2 ue = unit(e.heading);
    for (const PredictedVehicle& o : ctx.others) {
      if (k >= o.positions.size()) continue;
      const Vec2 po = o.positions[k];
      const OrientedBox them{po, o.headings[k], o.length + ctx.length_margin, o.width + ctx.width_margin};
      if (overlaps(me, them)) return std::numeric_limits<double>::infinity();
      const Vec2 rel = po - Vec2{e.x, e.y};
      const double along = rel.dot(ue);
      const double across = std::abs(ue.cross(rel));
      if (across > 0.5 * (ctx.ego_width + o.width) + ctx.ttc_lateral_band) continue;
      const double gap = std::abs(along) - 0.5 * (ctx.ego_length + o.length);
      const double v_other = o.speeds[k] * std::cos(angle_diff(o.headings[k], e.heading));
      const double closing = along >= 0.0 ? e.speed - v_other : v_other - e.speed;
      if (closing > 1e-9) ttc_min = std::min(ttc_min, std::max(0.0, gap) / closing);
    }
  }

  const double safety = std::isinf(ttc_min) ? 0.0 : std::clamp(1.0 - ttc_min / ctx.ttc_ref, 0.0, 1.0);
  double speed_sum = 0.0, jerk2 = 0.0;
  for (const TrajectorySample& s : samples) {
    speed_sum += s.speed;
    jerk2 += s.jerk * s.jerk;
  }
  const double mean_speed = speed_sum / static_cast<double>(samples.size());
  const double efficiency = std::clamp(1.0 - mean_speed / ctx.speed_limit, 0.0, 1.0);
  const double duration = std::max(traj.duration(), traj.dt);
  const double comfort = std::clamp(jerk2 * traj.dt / (ctx.jerk_ref * ctx.jerk_ref * duration), 0.0, 1.0);
  const double deviation = std::clamp(std::abs(samples.back().l) / ctx.lane_half_width, 0.0, 1.0);
  const CostWeights& w = ctx.weights;
  return w.safety * safety + w.efficiency * efficiency + w.comfort * comfort + w.deviation * deviation;
}

ScoreResult score_candidates(const std::vector<Trajectory>& candidates, const ScoringContext& ctx) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates needs at least one candidate");
  ScoreResult res;
  res.costs.assign(candidates.size(), 0.0);
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(ctx.threads, 1)), 1,
                                                      candidates.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) res.costs[i] = trajectory_cost(candidates[i], ctx);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < candidates.size(); i += workers) res.costs[i] = trajectory_cost(candidates[i], ctx);
      });
    }
  }
  res.best_index = 0;
  for (std::size_t i = 1; i < res.costs.size(); ++i) {
    if (res.costs[i] < res.costs[res.best_index]) res.best_index = i;
  }
  if (std::isinf(res.costs[res.best_index])) throw AllInfeasible("every candidate trajectory is infeasible");
  return res;
}

}  // namespace limsim
