#include "limsim/planning/quintic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "limsim/common/error.hpp"

namespace limsim {

QuinticPolynomial::QuinticPolynomial(double x0, double v0, double a0, double x1, double v1, double a1,
                                     double duration)
    : duration_(duration) {
  if (!(duration >= kMinDuration)) {
    throw SingularBoundary("quintic duration " + std::to_string(duration) + " s is below 1e-3 s");
  }
  const double T = duration, T2 = T * T, T3 = T2 * T;
  c_[0] = x0;
  c_[1] = v0;
  c_[2] = 0.5 * a0;
  // residuals of the cubic part at t = T
  const double h0 = x1 - x0 - v0 * T - 0.5 * a0 * T2;
  const double h1 = v1 - v0 - a0 * T;
  const double h2 = a1 - a0;
  c_[3] = (10.0 * h0 - 4.0 * h1 * T + 0.5 * h2 * T2) / T3;
  c_[4] = (-15.0 * h0 + 7.0 * h1 * T - h2 * T2) / (T3 * T);
  c_[5] = (6.0 * h0 - 3.0 * h1 * T + 0.5 * h2 * T2) / (T3 * T2);
}

double QuinticPolynomial::eval(double t, int order) const {
  const auto& c = c_;
  switch (order) {
    case 0: return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
    case 1: return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
    case 2: return 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
    case 3: return 6 * c[3] + t * (24 * c[4] + t * 60 * c[5]);
    default: throw std::invalid_argument("derivative order must be 0..3");
  }
}

Kinematics1D eval_extended(const QuinticPolynomial& p, double t, bool hold_velocity) {
  if (t <= p.duration()) return {p.eval(t, 0), p.eval(t, 1), p.eval(t, 2), p.eval(t, 3)};
  const double T = p.duration();
  const double x = p.eval(T, 0), v = p.eval(T, 1);
  if (hold_velocity) return {x + v * (t - T), v, 0.0, 0.0};
  return {x, 0.0, 0.0, 0.0};
}

FrenetPlan make_frenet_plan(const FrenetPose& start, const FrenetPose& end, double lon_duration,
                            double lat_duration) {
  const TemporalLateral a = to_temporal(start), b = to_temporal(end);
  return {QuinticPolynomial(start.s, start.s_dot, start.s_ddot, end.s, end.s_dot, end.s_ddot, lon_duration),
          QuinticPolynomial(a.l, a.l_dot, a.l_ddot, b.l, b.l_dot, b.l_ddot, lat_duration)};
}

CartesianPose frenet_to_cartesian_extended(const ReferenceLine& ref, const FrenetPose& f) {
  const double L = ref.length();
  if (f.s >= 0.0 && f.s <= L) return frenet_to_cartesian(ref, f);
  const double edge = f.s < 0.0 ? 0.0 : L;
  FrenetPose clamped = f;
  clamped.s = edge;
  CartesianPose c = frenet_to_cartesian(ref, clamped);
  // straight continuation: the reference curvature no longer applies
  const ReferencePoint rp = ref.evaluate(edge);
  const Vec2 t = unit(rp.heading);
  const double extra = f.s - edge;
  c.x += extra * t.x;
  c.y += extra * t.y;
  return c;
}

Trajectory sample_plan(const ReferenceLine& ref, const FrenetPlan& plan, double horizon, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto n = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9)) + 1;
  Trajectory traj;
  traj.dt = dt;
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Kinematics1D lon = eval_extended(plan.lon, t, true);
    const Kinematics1D lat = eval_extended(plan.lat, t, false);
    const FrenetPose f = from_temporal(lon.x, lon.v, lon.a, {lat.x, lat.v, lat.a});
    const CartesianPose c = frenet_to_cartesian_extended(ref, f);

    // Speed, tangential acceleration and jerk from the time derivatives of
    // u = (1 - k l) s_dot and w = l_dot, with k constant along each segment.
    const double k_r = (lon.x >= 0.0 && lon.x <= ref.length()) ? ref.evaluate(lon.x).curvature : 0.0;
    const double m = 1.0 - k_r * lat.x;
    const double u = m * lon.v;
    const double du = -k_r * lat.v * lon.v + m * lon.a;
    const double ddu = -k_r * lat.a * lon.v - 2.0 * k_r * lat.v * lon.a + m * lon.j;
    const double w = lat.v, dw = lat.a, ddw = lat.j;
    const double v = std::hypot(u, w);

    TrajectorySample smp;
    smp.t = t;
    smp.x = c.x;
    smp.y = c.y;
    smp.heading = c.heading;
    smp.speed = v;
    if (v > 1e-9) {
      smp.accel = (u * du + w * dw) / v;
      smp.jerk = (du * du + u * ddu + dw * dw + w * ddw - smp.accel * smp.accel) / v;
    } else {
      smp.accel = m * lon.a;
      smp.jerk = m * lon.j;
    }
    smp.s = lon.x;
    smp.l = lat.x;
    traj.samples.push_back(smp);
  }
  return traj;
}

Trajectory plan_quintic(const ReferenceLine& ref, const FrenetPose& start, const FrenetPose& end, double duration,
                        double dt) {
  if (duration < QuinticPolynomial::kMinDuration) {
    throw SingularBoundary("quintic duration " + std::to_string(duration) + " s is below 1e-3 s");
  }
  if (!(dt > 0.0) || duration / dt < 2.0) throw std::invalid_argument("plan_quintic needs dt > 0 and duration/dt >= 2");
  return sample_plan(ref, make_frenet_plan(start, end, duration, duration), duration, dt);
}

}  // namespace limsim
