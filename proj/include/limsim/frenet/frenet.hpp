#pragma once

#include "limsim/road/reference_line.hpp"

namespace limsim {

struct CartesianPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;
  double accel = 0.0;
  double curvature = 0.0;  // path curvature; needed for a lossless l_pprime
};

// Lateral derivatives are spatial (with respect to s). Use to_temporal /
// from_temporal when a time-domain lateral state is needed.
struct FrenetPose {
  double s = 0.0;
  double l = 0.0;
  double s_dot = 0.0;
  double l_prime = 0.0;
  double s_ddot = 0.0;
  double l_pprime = 0.0;
};

struct TemporalLateral {
  double l = 0.0;
  double l_dot = 0.0;
  double l_ddot = 0.0;
};

inline TemporalLateral to_temporal(const FrenetPose& f) {
  return {f.l, f.l_prime * f.s_dot, f.l_pprime * f.s_dot * f.s_dot + f.l_prime * f.s_ddot};
}

// Inverse of to_temporal. Below `min_speed` the spatial derivatives are
// undefined and set to zero.
FrenetPose from_temporal(double s, double s_dot, double s_ddot, const TemporalLateral& lat,
                         double min_speed = 1e-6);

// Throws ProjectionAmbiguous / OutOfCorridor from the foot-point search.
FrenetPose cartesian_to_frenet(const ReferenceLine& ref, const CartesianPose& pose,
                               const ProjectionOptions& opts = {});

// Throws CurvatureSingularity when l * curvature(s) >= 1.
CartesianPose frenet_to_cartesian(const ReferenceLine& ref, const FrenetPose& pose);

}  // namespace limsim
