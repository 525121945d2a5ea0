#pragma once

#include <optional>

#include "limsim/replay/track.hpp"
#include "limsim/traffic/world.hpp"

namespace limsim {

// Current time-to-collision along the vehicle's heading first, then a
// footprint sweep over `horizon`: the replay vehicle moves along its log while
// Following (constant velocity otherwise), everyone else at constant velocity.
std::optional<Conflict> detect_conflict(const VehicleState& vehicle, const World& world, double horizon);

// Following -> Overridden; the vehicle falls back to IDM from its current
// kinematic state. Logs an `override` event.
void apply_override(World& world, VehicleState& vehicle, const Conflict& conflict);

// Overridden -> Following once the conflict has been clear for
// `conflict_clear` s and the vehicle is within `max_deviation` of the
// time-aligned log pose; otherwise a quintic blend toward the log is issued.
ReplayMode try_restore(World& world, VehicleState& vehicle, const ReplayConfig& tolerances);

}  // namespace limsim
