#include "limsim/behavior/mobil.hpp"

#include "limsim/common/error.hpp"

namespace limsim {

namespace {

double joined_gap(const NeighborVehicle& follower, double ego_length, const NeighborVehicle& leader) {
  if (!follower.present() || !leader.present()) return kNoLeader;
  return follower.gap + ego_length + leader.gap;
}

}  // namespace

MobilEvaluation evaluate_lane_change(const MobilContext& ctx, const AdjacentLane& target, bool to_right,
                                     const IdmParams& idm, const MobilParams& mobil) {
  MobilEvaluation eval;
  if (!target.available) return eval;
  try {
    const double v = ctx.speed;
    const double a_ego = idm_acceleration(v, ctx.leader.gap, v - ctx.leader.speed, idm);
    const double a_ego_new = idm_acceleration(v, target.leader.gap, v - target.leader.speed, idm);

    double new_follower_gain = 0.0;
    double new_follower_after = 0.0;
    if (target.follower.present()) {
      const double vf = target.follower.speed;
      const double before =
          idm_acceleration(vf, joined_gap(target.follower, ctx.length, target.leader), vf - target.leader.speed, idm);
      new_follower_after = idm_acceleration(vf, target.follower.gap, vf - v, idm);
      new_follower_gain = new_follower_after - before;
    }
    double old_follower_gain = 0.0;
    if (ctx.follower.present()) {
      const double vo = ctx.follower.speed;
      const double before = idm_acceleration(vo, ctx.follower.gap, vo - v, idm);
      const double after = idm_acceleration(vo, joined_gap(ctx.follower, ctx.length, ctx.leader), vo - ctx.leader.speed, idm);
      old_follower_gain = after - before;
    }

    eval.safe = new_follower_after >= -mobil.safe_decel;
    eval.incentive = a_ego_new - a_ego + mobil.politeness * (new_follower_gain + old_follower_gain);
    if (to_right) eval.incentive += mobil.bias_right;
  } catch (const NonPositiveGap&) {
    eval = {};
  }
  return eval;
}

LaneChoice mobil_decide(const MobilContext& ctx, const IdmParams& idm, const MobilParams& mobil) {
  const MobilEvaluation left = evaluate_lane_change(ctx, ctx.left, false, idm, mobil);
  const MobilEvaluation right = evaluate_lane_change(ctx, ctx.right, true, idm, mobil);
  const bool left_ok = left.safe && left.incentive > mobil.change_threshold;
  const bool right_ok = right.safe && right.incentive > mobil.change_threshold;
  if (left_ok && right_ok) return left.incentive > right.incentive ? LaneChoice::change_left : LaneChoice::change_right;
  if (right_ok) return LaneChoice::change_right;
  if (left_ok) return LaneChoice::change_left;
  return LaneChoice::stay;
}

}  // namespace limsim
