#include "limsim/behavior/idm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "limsim/common/error.hpp"

namespace limsim {

bool IdmParams::valid() const {
  return desired_speed > 0 && time_headway > 0 && min_gap > 0 && max_accel > 0 && comfort_decel > 0 &&
         accel_exponent >= 1 && emergency_decel > 0;
}

double idm_desired_gap(double speed, double closing_speed, const IdmParams& p) {
  const double dynamic =
      speed * p.time_headway + speed * closing_speed / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  return p.min_gap + std::max(0.0, dynamic);
}

double idm_acceleration(double speed, double gap, double closing_speed, const IdmParams& p) {
  if (!(gap > 0.0)) throw NonPositiveGap("IDM gap " + std::to_string(gap) + " <= 0");
  const double free_term = std::pow(speed / p.desired_speed, p.accel_exponent);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double ratio = idm_desired_gap(speed, closing_speed, p) / gap;
    interaction = ratio * ratio;
  }
  const double a = p.max_accel * (1.0 - free_term - interaction);
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

}  // namespace limsim
