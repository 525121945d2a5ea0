#pragma once

#include <limits>

namespace limsim {

inline constexpr double kNoLeader = std::numeric_limits<double>::infinity();

struct IdmParams {
  double desired_speed = 13.89;  // m/s
  double time_headway = 1.5;     // s
  double min_gap = 2.0;          // m
  double max_accel = 2.0;        // m/s^2
  double comfort_decel = 3.0;    // m/s^2, positive
  double accel_exponent = 4.0;
  double emergency_decel = 8.0;  // output clamp, m/s^2 positive

  bool valid() const;
};

// Desired dynamic gap s*(v, dv).
double idm_desired_gap(double speed, double closing_speed, const IdmParams& p);

// Intelligent Driver Model acceleration, clamped to [-emergency_decel, max_accel].
// `gap` is bumper to bumper (kNoLeader for free road), `closing_speed` is
// v - v_leader. Throws NonPositiveGap when gap <= 0.
double idm_acceleration(double speed, double gap, double closing_speed, const IdmParams& p);

}  // namespace limsim
