#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "limsim/common/rng.hpp"
#include "limsim/traffic/world.hpp"
#include "support.hpp"

namespace limsim::test {

// Rear-end geometry: a slow simulated lead (the ego, IDM-driven) and a replay
// log closing on it from behind at constant speed. The lead is faster than
// the log in the long run, so the log becomes reachable again.
struct RearEndOutcome {
  std::optional<std::int64_t> first_ttc_below;  // first tick with measured ttc < 3 s
  std::optional<std::int64_t> override_tick;
  std::optional<double> restore_deviation;
  std::optional<std::int64_t> restore_tick;
  double min_gap = std::numeric_limits<double>::infinity();
  bool ego_collided = false;
  int overrides = 0;
};

inline std::shared_ptr<const ReplayTrack> constant_speed_track(int id, double x0, double y, double speed, double t_end) {
  std::vector<TrackSample> samples;
  for (int k = 0; k * 0.1 <= t_end + 1e-9; ++k) {
    const double t = 0.1 * k;
    samples.push_back({t, x0 + speed * t, y, 0.0, speed});
  }
  return std::make_shared<const ReplayTrack>(id, samples);
}

inline RearEndOutcome run_rear_end_fixture(std::uint64_t index) {
  Rng rng(mix_seed(0x5eed, index));
  const double lead_v = rng.uniform(2, 3), factor = rng.uniform(1.05, 1.2);
  // Closing speed stays below 16 m/s, so ttc 3 s is reached inside the AoI.
  const double log_v = rng.uniform(16, 18);
  const double accel = 0.8;  // sluggish lead so the log catches it
  // Gap as a fraction of the distance the log gains before the lead matches its speed.
  const double reach = (log_v - lead_v) * (log_v - lead_v) / (2 * accel);
  const double lead_s = 5.0 + 4.5 + rng.uniform(0.4, 0.7) * reach;
  const double duration = 90.0;

  SimConfig cfg;
  cfg.behavior.idm.max_accel = accel;
  World w(straight_network(1, {4000}, 25.0), cfg, index);
  VehicleSpec lead;
  lead.route = {"r0_0"};
  lead.s = lead_s;
  lead.speed = lead_v;
  lead.speed_factor = factor;
  lead.mode = ControlMode::External;  // no controller attached: plain IDM
  lead.ego = true;
  const int lead_id = w.add_vehicle(lead);
  w.add_replay_track(constant_speed_track(1, 5.0, 0.0, log_v, duration));

  RearEndOutcome out;
  int replay_id = -1;
  std::size_t seen = 0;
  const auto ticks = static_cast<std::int64_t>(duration / cfg.dt) - 1;
  for (std::int64_t k = 0; k < ticks && !w.done(); ++k) {
    w.step();
    for (; seen < w.events().size(); ++seen) {
      const Event& e = w.events()[seen];
      if (e.kind == "spawn" && e.payload.contains("flow")) replay_id = e.payload["id"].get<int>();
      if (e.kind == "override") {
        ++out.overrides;
        if (!out.override_tick) out.override_tick = e.tick;
      }
      if (e.kind == "restore" && !out.restore_tick) {
        out.restore_tick = e.tick;
        out.restore_deviation = e.payload["deviation"].get<double>();
      }
    }
    const VehicleState* a = w.find(replay_id);
    const VehicleState* b = w.find(lead_id);
    if (!a || !b) continue;
    const double gap = b->pose.x - a->pose.x - 0.5 * (a->length + b->length);
    out.min_gap = std::min(out.min_gap, gap);
    const double closing = a->speed() - b->speed();
    if (!out.first_ttc_below && closing > 0 && gap / closing < 3.0) out.first_ttc_below = w.tick();
  }
  out.ego_collided = w.ego_collided();
  return out;
}

}  // namespace limsim::test
