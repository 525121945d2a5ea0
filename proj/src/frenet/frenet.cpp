#include "limsim/frenet/frenet.hpp"

#include <cmath>
#include <string>

#include "limsim/common/error.hpp"

namespace limsim {

FrenetPose from_temporal(double s, double s_dot, double s_ddot, const TemporalLateral& lat, double min_speed) {
  FrenetPose f{s, lat.l, s_dot, 0.0, s_ddot, 0.0};
  if (std::abs(s_dot) >= min_speed) {
    f.l_prime = lat.l_dot / s_dot;
    f.l_pprime = (lat.l_ddot - f.l_prime * s_ddot) / (s_dot * s_dot);
  }
  return f;
}

// Curvature-corrected kinematic relations for piecewise-constant reference
// curvature (dk/ds = 0 inside every segment).
FrenetPose cartesian_to_frenet(const ReferenceLine& ref, const CartesianPose& pose,
                               const ProjectionOptions& opts) {
  const Projection proj = ref.project({pose.x, pose.y}, opts);
  const ReferencePoint rp = ref.evaluate(proj.s);
  const double kr = rp.curvature;
  const double l = proj.l;
  const double one_minus_kl = 1.0 - kr * l;
  const double dtheta = angle_diff(pose.heading, rp.heading);
  const double cos_dt = std::cos(dtheta);
  const double tan_dt = std::tan(dtheta);

  FrenetPose f;
  f.s = proj.s;
  f.l = l;
  f.l_prime = one_minus_kl * tan_dt;
  f.l_pprime = -(kr * f.l_prime) * tan_dt +
               one_minus_kl / (cos_dt * cos_dt) * (pose.curvature * one_minus_kl / cos_dt - kr);
  f.s_dot = pose.speed * cos_dt / one_minus_kl;
  const double dtheta_prime = one_minus_kl / cos_dt * pose.curvature - kr;
  f.s_ddot = (pose.accel * cos_dt - f.s_dot * f.s_dot * (f.l_prime * dtheta_prime - kr * f.l_prime)) / one_minus_kl;
  return f;
}

CartesianPose frenet_to_cartesian(const ReferenceLine& ref, const FrenetPose& f) {
  const ReferencePoint rp = ref.evaluate(f.s);
  const double kr = rp.curvature;
  const double one_minus_kl = 1.0 - kr * f.l;
  if (one_minus_kl <= 0.0) {
    throw CurvatureSingularity("lateral offset " + std::to_string(f.l) + " reaches the center of curvature at s=" +
                               std::to_string(f.s));
  }
  const double sin_r = std::sin(rp.heading), cos_r = std::cos(rp.heading);
  CartesianPose c;
  c.x = rp.pos.x - f.l * sin_r;
  c.y = rp.pos.y + f.l * cos_r;
  const double dtheta = std::atan2(f.l_prime, one_minus_kl);
  c.heading = normalize_angle(rp.heading + dtheta);
  const double tan_dt = f.l_prime / one_minus_kl;
  const double cos_dt = std::cos(dtheta);
  const double kr_lp = kr * f.l_prime;
  c.curvature = ((f.l_pprime + kr_lp * tan_dt) * cos_dt * cos_dt / one_minus_kl + kr) * cos_dt / one_minus_kl;
  const double d_dot = f.l_prime * f.s_dot;
  c.speed = std::sqrt(one_minus_kl * one_minus_kl * f.s_dot * f.s_dot + d_dot * d_dot);
  const double dtheta_prime = one_minus_kl / cos_dt * c.curvature - kr;
  c.accel = f.s_ddot * one_minus_kl / cos_dt + f.s_dot * f.s_dot / cos_dt * (f.l_prime * dtheta_prime - kr_lp);
  return c;
}

}  // namespace limsim
