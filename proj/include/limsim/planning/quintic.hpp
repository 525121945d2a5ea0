#pragma once

#include <array>
#include <vector>

#include "limsim/frenet/frenet.hpp"

namespace limsim {

// Degree-5 polynomial matching position, velocity and acceleration at t = 0
// and t = duration. Throws SingularBoundary when duration < 1e-3 s.
class QuinticPolynomial {
 public:
  static constexpr double kMinDuration = 1e-3;

  QuinticPolynomial() = default;
  QuinticPolynomial(double x0, double v0, double a0, double x1, double v1, double a1, double duration);

  // order-th time derivative (0..3) at t.
  double eval(double t, int order = 0) const;
  double duration() const { return duration_; }
  const std::array<double, 6>& coefficients() const { return c_; }

 private:
  std::array<double, 6> c_{};
  double duration_ = 0.0;
};

// Derivatives of a polynomial that holds its end state after `duration`
// (constant velocity for longitudinal, constant value for lateral).
struct Kinematics1D {
  double x = 0.0, v = 0.0, a = 0.0, j = 0.0;
};
Kinematics1D eval_extended(const QuinticPolynomial& p, double t, bool hold_velocity);

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double jerk = 0.0;
  double s = 0.0, l = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double dt = 0.1;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
};

// Longitudinal s(t) and lateral l(t) quintics, each with its own duration;
// past their durations s continues at constant speed and l holds.
struct FrenetPlan {
  QuinticPolynomial lon;
  QuinticPolynomial lat;
};

FrenetPlan make_frenet_plan(const FrenetPose& start, const FrenetPose& end, double lon_duration,
                            double lat_duration);

// Samples at t = 0, dt, ..., horizon. Poses beyond the reference line end are
// extrapolated along its final tangent.
Trajectory sample_plan(const ReferenceLine& ref, const FrenetPlan& plan, double horizon, double dt);

// Joint quintic between two Frenet states over `duration`. Throws
// SingularBoundary (duration < 1e-3 s) or std::invalid_argument (dt <= 0 or
// fewer than two steps).
Trajectory plan_quintic(const ReferenceLine& ref, const FrenetPose& start, const FrenetPose& end, double duration,
                        double dt);

// frenet_to_cartesian that extrapolates linearly past either end of the line.
CartesianPose frenet_to_cartesian_extended(const ReferenceLine& ref, const FrenetPose& f);

}  // namespace limsim
