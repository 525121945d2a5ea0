#include <gtest/gtest.h>

#include <sstream>

#include "limsim/common/error.hpp"
#include "limsim/replay/replay_control.hpp"
#include "replay_fixture.hpp"

using namespace limsim;

TEST(ReplayTrack, LinearInterpolationAndClamp) {
  const ReplayTrack t(3, {{0.0, 0, 0, 0, 10}, {1.0, 10, 2, 0.2, 12}});
  const CartesianPose p = t.at(0.25);
  EXPECT_NEAR(p.x, 2.5, 1e-12);
  EXPECT_NEAR(p.y, 0.5, 1e-12);
  EXPECT_NEAR(p.heading, 0.05, 1e-12);
  EXPECT_NEAR(p.speed, 10.5, 1e-12);
  EXPECT_NEAR(t.at(-1).x, 0.0, 1e-12);
  EXPECT_NEAR(t.at(5).x, 10.0, 1e-12);
  EXPECT_TRUE(t.covers(0.5));
  EXPECT_FALSE(t.covers(1.5));
}

TEST(ReplayTrack, HeadingBlendsAlongTheShortArc) {
  const double a = kPi - 0.1, b = -kPi + 0.1;
  const ReplayTrack t(1, {{0.0, 0, 0, a, 1}, {1.0, 1, 0, b, 1}});
  EXPECT_NEAR(std::abs(angle_diff(t.at(0.5).heading, kPi)), 0.0, 1e-12);
}

TEST(ReplayTrack, RejectsBadTimestamps) {
  EXPECT_THROW(ReplayTrack(1, {{0.0, 0, 0, 0, 1}, {0.0, 1, 0, 0, 1}}), BadLog);
  EXPECT_THROW(ReplayTrack(1, {{1.0, 0, 0, 0, 1}, {0.5, 1, 0, 0, 1}}), BadLog);
  EXPECT_THROW(ReplayTrack(1, {{0.0, 0, 0, 0, 1}, {1.5, 1, 0, 0, 1}}), BadLog);
}

TEST(ReplayTrack, CsvWithInterleavedRowsAndExtraColumns) {
  std::istringstream in(
      "vehicle_id,t,x,y,heading,speed,lane\n"
      "2,0.0,0,0,0,5,a\n"
      "7,0.0,100,3.5,0,8,b\n"
      "2,0.5,2.5,0,0,5,a\n"
      "7,0.5,104,3.5,0,8,b\n");
  const auto tracks = read_tracks(in);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks.at(2).samples().size(), 2u);
  EXPECT_NEAR(tracks.at(7).at(0.25).x, 102.0, 1e-12);
  std::istringstream missing("vehicle_id,t,x,y\n1,0,0,0\n");
  EXPECT_THROW(read_tracks(missing), BadLog);
  std::istringstream junk("vehicle_id,t,x,y,heading,speed\n1,zero,0,0,0,0\n");
  EXPECT_THROW(read_tracks(junk), BadLog);
}

namespace {

VehicleSpec coarse(double s, double v) {
  VehicleSpec spec;
  spec.route = {"r0_0"};
  spec.s = s;
  spec.speed = v;
  spec.speed_factor = 1.0;
  return spec;
}

}  // namespace

TEST(DetectConflict, ClosedFormRearEndTtc) {
  World w(test::straight_network(1, {1000}, 25.0), SimConfig{}, 1);
  const int back = w.add_vehicle(coarse(100, 20));
  w.add_vehicle(coarse(100 + 15 + 4.5, 10));  // 15 m bumper gap
  const auto c = detect_conflict(*w.find(back), w, 5.0);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->reason, ConflictReason::rear_end_ttc);
  EXPECT_NEAR(c->ttc, 1.5, 1e-9);
}

TEST(DetectConflict, DistantTrafficIsIgnored) {
  World w(test::straight_network(1, {1000}, 30.0), SimConfig{}, 1);
  const int back = w.add_vehicle(coarse(100, 30));
  w.add_vehicle(coarse(300 + 4.5, 30));
  EXPECT_FALSE(detect_conflict(*w.find(back), w, 5.0));
  const int front = w.add_vehicle(coarse(600, 0));
  (void)front;
  // 200 m behind a stopped vehicle at 30 m/s: ttc 6.5 s, no overlap in 5 s.
  World w2(test::straight_network(1, {1000}, 30.0), SimConfig{}, 1);
  const int a = w2.add_vehicle(coarse(100, 30));
  w2.add_vehicle(coarse(100 + 200 + 4.5, 0));
  EXPECT_FALSE(detect_conflict(*w2.find(a), w2, 5.0));
}

TEST(DetectConflict, FootprintSweepCatchesCrossingTraffic) {
  World w(test::straight_network(2, {1000}, 25.0), SimConfig{}, 1);
  const int a = w.add_vehicle(coarse(100, 10));
  VehicleState& other = *w.find_mutable(w.add_vehicle(coarse(300, 0)));
  // Teleport a vehicle so it crosses the path ahead, heading +y.
  other.pose.x = 130;
  other.pose.y = -10;
  other.pose.heading = kPi / 2;
  other.pose.speed = 4;
  const auto c = detect_conflict(*w.find(a), w, 5.0);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->reason, ConflictReason::footprint_overlap);
  EXPECT_GT(c->ttc, 0.0);
  EXPECT_LE(c->ttc, 5.0);
}

TEST(Replay, FollowingVehicleIsExactlyOnTheLog) {
  SimConfig cfg;
  World w(test::straight_network(2, {2000}, 25.0), cfg, 1);
  VehicleSpec ego = coarse(20, 10);
  ego.route = {"r0_1"};
  ego.ego = true;
  ego.mode = ControlMode::External;
  w.add_vehicle(ego);
  std::vector<TrackSample> samples;
  for (int k = 0; k <= 70; ++k) {
    const double t = 0.3 * k;
    samples.push_back({t, 10 + 12 * t + 0.05 * t * t, 0.01 * t, 0.0, 12 + 0.1 * t});
  }
  const auto track = std::make_shared<const ReplayTrack>(4, samples);
  w.add_replay_track(track);
  double worst = 0.0;
  int checked = 0;
  for (int k = 0; k < 200; ++k) {
    w.step();
    for (const auto& [id, v] : w.vehicles()) {
      if (v.control_mode != ControlMode::Replay) continue;
      ASSERT_EQ(v.replay->state.mode, ReplayMode::Following);
      const CartesianPose p = track->at(w.time());
      worst = std::max(worst, std::hypot(v.pose.x - p.x, v.pose.y - p.y));
      ++checked;
    }
  }
  EXPECT_GT(checked, 150);
  EXPECT_LT(worst, 1e-9);
}

TEST(Replay, OutsideTheAoiStaysFollowing) {
  SimConfig cfg;
  World w(test::straight_network(1, {3000}, 25.0), cfg, 1);
  VehicleSpec ego = coarse(2000, 5);
  ego.ego = true;
  ego.mode = ControlMode::External;
  w.add_vehicle(ego);
  w.add_vehicle(coarse(300, 0));  // stopped car the log drives through
  w.add_replay_track(test::constant_speed_track(1, 100.0, 0.0, 20.0, 12.0));
  for (int k = 0; k < 100; ++k) w.step();
  for (const Event& e : w.events()) EXPECT_NE(e.kind, "override");
}

TEST(Replay, RestoreConditions) {
  SimConfig cfg;
  World w(test::straight_network(1, {3000}, 25.0), cfg, 1);
  VehicleSpec ego = coarse(400, 20);
  ego.ego = true;
  ego.mode = ControlMode::External;
  w.add_vehicle(ego);
  const auto track = test::constant_speed_track(1, 100.0, 0.0, 20.0, 30.0);
  w.add_replay_track(track);
  w.step();
  int rid = -1;
  for (const auto& [id, v] : w.vehicles()) {
    if (v.replay) rid = id;
  }
  ASSERT_GE(rid, 0);
  VehicleState& v = *w.find_mutable(rid);
  apply_override(w, v, Conflict{ConflictReason::rear_end_ttc, 1.0, 0});
  EXPECT_EQ(v.replay->state.mode, ReplayMode::Overridden);
  EXPECT_EQ(w.events().back().kind, "override");
  // Conflict just happened: not yet clear even though deviation is 0.
  EXPECT_EQ(try_restore(w, v, cfg.replay), ReplayMode::Overridden);
  // Clear for 5 s with zero deviation.
  v.replay->state.last_conflict = w.time() - 5.0;
  EXPECT_EQ(try_restore(w, v, cfg.replay), ReplayMode::Following);
  EXPECT_EQ(w.events().back().kind, "restore");
  // Deviation 10 m: stays overridden and a blend plan is issued.
  apply_override(w, v, Conflict{ConflictReason::rear_end_ttc, 1.0, 0});
  v.replay->state.last_conflict = w.time() - 5.0;
  v.frenet.s -= 10.0;
  v.pose.x -= 10.0;
  v.plan.reset();
  EXPECT_EQ(try_restore(w, v, cfg.replay), ReplayMode::Overridden);
  EXPECT_NEAR(v.replay->state.deviation, 10.0, 1e-9);
  ASSERT_TRUE(v.plan.has_value());
  EXPECT_EQ(v.plan->plan.lon.duration(), cfg.replay.blend_duration);
}

TEST(Replay, OverrideOutlivesTheLogAndDespawnsAtRouteEnd) {
  SimConfig cfg;
  World w(test::straight_network(2, {300}, 25.0), cfg, 1);
  VehicleSpec ego = coarse(60, 2);
  ego.route = {"r0_1"};
  ego.ego = true;
  ego.mode = ControlMode::External;
  ego.speed_factor = 0.1;  // crawls, so the episode outlasts the replay vehicle
  w.add_vehicle(ego);
  w.add_vehicle(coarse(60, 2));
  w.add_replay_track(test::constant_speed_track(1, 5.0, 0.0, 20.0, 4.0));
  bool overridden_after_end = false;
  std::int64_t despawn_tick = -1;
  for (int k = 0; k < 600 && !w.done() && despawn_tick < 0; ++k) {
    w.step();
    for (const auto& [id, v] : w.vehicles()) {
      if (v.replay && w.time() > 4.5 && v.replay->state.mode == ReplayMode::Overridden) overridden_after_end = true;
    }
    for (const Event& e : w.events()) {
      if (e.kind == "despawn" && e.payload.value("reason", "") == "replay_end") despawn_tick = e.tick;
    }
  }
  EXPECT_TRUE(overridden_after_end);
  EXPECT_GT(despawn_tick, 45);
  EXPECT_FALSE(w.done());
}

TEST(Replay, EngineeredRearEndFixtures) {
  int on_time = 0, restored = 0, safe = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto r = test::run_rear_end_fixture(i);
    ASSERT_TRUE(r.first_ttc_below || r.override_tick) << i;
    on_time += r.override_tick && (!r.first_ttc_below || *r.override_tick <= *r.first_ttc_below);
    restored += r.restore_deviation && *r.restore_deviation <= 2.0;
    safe += r.min_gap > 0.0 && !r.ego_collided;
  }
  EXPECT_EQ(on_time, 100);
  EXPECT_EQ(safe, 100);
  EXPECT_GE(restored, 95);
}

TEST(Replay, ModeTransitionsAlternate) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    SimConfig cfg;
    World w(test::straight_network(1, {4000}, 25.0), cfg, i);
    VehicleSpec lead = coarse(70, 7);
    lead.ego = true;
    lead.mode = ControlMode::External;
    lead.speed_factor = 1.1;
    w.add_vehicle(lead);
    w.add_replay_track(test::constant_speed_track(1, 5.0, 0.0, 18.0 + 0.3 * i, 50.0));
    ReplayMode prev = ReplayMode::Following;
    std::size_t seen = 0;
    for (int k = 0; k < 450; ++k) {
      w.step();
      std::string last;
      for (; seen < w.events().size(); ++seen) {
        const std::string& kind = w.events()[seen].kind;
        if (kind == "override" || kind == "restore") last = kind;
      }
      for (const auto& [id, v] : w.vehicles()) {
        if (!v.replay) continue;
        const ReplayMode m = v.replay->state.mode;
        if (m != prev) EXPECT_EQ(last, m == ReplayMode::Overridden ? "override" : "restore") << i << " " << k;
        if (m == ReplayMode::Following && prev == ReplayMode::Overridden) {
          EXPECT_LE(v.replay->state.deviation, cfg.replay.max_deviation);
        }
        prev = m;
      }
    }
  }
}
