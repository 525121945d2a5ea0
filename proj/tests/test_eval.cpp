#include <gtest/gtest.h>

#include <fstream>

#include "limsim/cli/runner.hpp"
#include "limsim/common/error.hpp"
#include "limsim/common/rng.hpp"
#include "support.hpp"

using namespace limsim;
namespace fs = std::filesystem;

namespace {

RouteInfo single_lane(double length, double limit = 10.0) {
  RouteInfo r;
  r.steps.push_back({{"a"}, {length}, length});
  r.total_length = length;
  r.free_flow_time = length / limit;
  return r;
}

// Ego rows along lane "a" at constant speed, dt 0.1.
std::vector<TrajectoryRow> cruise(int n, double speed, double limit, double s0 = 0.0) {
  std::vector<TrajectoryRow> rows;
  for (int k = 0; k < n; ++k) {
    TrajectoryRow r;
    r.tick = k;
    r.t = 0.1 * k;
    r.s = s0 + speed * r.t;
    r.x = r.s;
    r.speed = speed;
    r.speed_limit = limit;
    r.lane_id = "a";
    r.ttc = std::numeric_limits<double>::infinity();
    r.mode = "Fine";
    rows.push_back(r);
  }
  return rows;
}

EpisodeLog with_start(std::vector<TrajectoryRow> rows, const RouteInfo& route, const MetricConfig& cfg) {
  EpisodeLog log;
  log.rows = std::move(rows);
  log.events.push_back({0, 0.0, "episode_start", {{"ego", 0}, {"route_info", to_json(route)}, {"metrics", to_json(cfg)}}});
  return log;
}

void write_run(const fs::path& dir, const EpisodeLog& log, const MetricConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream t(dir / "trajectory.csv"), e(dir / "events.jsonl"), d(dir / "decisions.csv"), r(dir / "result.json");
  write_trajectory_header(t);
  for (const auto& row : log.rows) write_trajectory_row(t, row);
  for (const auto& ev : log.events) write_event(e, ev);
  write_decisions_header(d);
  for (const auto& dec : log.decisions) write_decision(d, dec);
  r << to_json(episode_result(log, cfg)).dump(2) << '\n';
}

}  // namespace

TEST(RouteCompletion, HalfwayFullAndNone) {
  const RouteInfo route = single_lane(200.0);
  EXPECT_NEAR(route_completion(cruise(101, 1.0, 10.0), route), 5.0, 1e-9);
  auto half = cruise(2, 0.0, 10.0);
  half[1].s = 100.0;
  EXPECT_NEAR(route_completion(half, route), 50.0, 0.1);
  auto full = cruise(2, 0.0, 10.0);
  full[1].s = 200.0;
  EXPECT_EQ(route_completion(full, route), 100.0);
  EXPECT_EQ(route_completion(cruise(50, 0.0, 10.0), route), 0.0);
  EXPECT_EQ(route_completion({}, route), 0.0);
}

TEST(RouteCompletion, MultiStepRouteWithAlternativeLanes) {
  RouteInfo r;
  r.steps.push_back({{"a", "a2"}, {100, 102}, 100});
  r.steps.push_back({{"b"}, {50}, 50});
  r.total_length = 150;
  auto rows = cruise(3, 0.0, 10.0);
  rows[1].lane_id = "a2";
  rows[1].s = 51;  // half of the alternative lane
  rows[2].lane_id = "b";
  rows[2].s = 25;
  EXPECT_NEAR(route_completion(rows, r), 100.0 * 125.0 / 150.0, 1e-9);
  rows[2].lane_id = "elsewhere";
  EXPECT_NEAR(route_completion(rows, r), 100.0 * 50.0 / 150.0, 1e-9);
}

TEST(ComponentScores, CleanCruiseIsPerfect) {
  const auto c = component_scores(cruise(100, 10.0, 10.0), false, MetricConfig{});
  EXPECT_EQ(c.comfort, 100.0);
  EXPECT_EQ(c.efficiency, 100.0);
  EXPECT_EQ(c.safety, 100.0);
}

TEST(ComponentScores, EfficiencyIsCappedAndComfortCountsSpikes) {
  auto rows = cruise(100, 5.0, 10.0);
  for (int k = 0; k < 100; k += 5) rows[k].jerk = (k % 10 ? 3.0 : -3.5);  // 20 spikes
  rows[3].speed = 25.0;  // over the limit counts as 1
  const auto c = component_scores(rows, false, MetricConfig{});
  EXPECT_NEAR(c.comfort, 80.0, 1e-9);
  EXPECT_NEAR(c.efficiency, 100.0 * (99 * 0.5 + 1.0) / 100.0, 1e-9);
}

TEST(ComponentScores, SafetyDegradesLinearlyAndZeroOnCollision) {
  auto rows = cruise(10, 5.0, 10.0);
  rows[4].ttc = 0.5;
  EXPECT_NEAR(component_scores(rows, false, MetricConfig{}).safety, 25.0, 1e-12);
  rows[4].ttc = 2.0;
  EXPECT_EQ(component_scores(rows, false, MetricConfig{}).safety, 100.0);
  EXPECT_EQ(component_scores(rows, true, MetricConfig{}).safety, 0.0);
}

TEST(DrivingScore, WeightedSum) {
  const MetricConfig cfg;
  EXPECT_NEAR(driving_score({100, 100, 0}, cfg), 50.0, 1e-12);  // {comfort, efficiency, safety}
  EXPECT_NEAR(driving_score({100, 100, 100}, cfg), 100.0, 1e-12);
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    MetricConfig w;
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    w.w_safety = a;
    w.w_efficiency = b;
    w.w_comfort = 1 - a - b;
    const ComponentScores c{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0, 100)};
    const double want = a * c.safety + b * c.efficiency + (1 - a - b) * c.comfort;
    EXPECT_NEAR(driving_score(c, w), want, 1e-12);
    ComponentScores up = c;
    up.comfort = std::min(100.0, up.comfort + 1);
    EXPECT_GE(driving_score(up, w), driving_score(c, w));
    EXPECT_GE(driving_score(c, w), 0.0);
    EXPECT_LE(driving_score(c, w), 100.0 + 1e-12);
  }
}

TEST(EpisodeResultTest, CollisionAndBudget) {
  const RouteInfo route = single_lane(100.0);
  auto rows = cruise(101, 10.0, 10.0);  // 100 m in 10 s; budget 2 * 10 s
  EpisodeLog ok = with_start(rows, route, MetricConfig{});
  EXPECT_TRUE(episode_result(ok, MetricConfig{}).success);

  EpisodeLog crash = ok;
  crash.events.push_back({50, 5.0, "collision", {{"a", 0}, {"b", 3}, {"ego", true}}});
  const auto rc = episode_result(crash, MetricConfig{});
  EXPECT_FALSE(rc.success);
  EXPECT_EQ(rc.components.safety, 0.0);

  EpisodeLog other = ok;
  other.events.push_back({50, 5.0, "collision", {{"a", 2}, {"b", 3}, {"ego", false}}});
  EXPECT_TRUE(episode_result(other, MetricConfig{}).success);

  // Budget exceeded at 90 %.
  MetricConfig tight;
  tight.time_budget = 5.0;
  auto slow = cruise(91, 10.0, 10.0);
  const auto r = episode_result(with_start(slow, route, tight), tight);
  EXPECT_FALSE(r.success);
  EXPECT_NEAR(r.route_completion, 90.0, 1e-9);
  EXPECT_EQ(r.time_budget, 5.0);
  EXPECT_THROW(episode_result(EpisodeLog{}, MetricConfig{}), BadLog);
}

TEST(CornerCases, ScriptedNearMissBrakingAndFallbacks) {
  auto rows = cruise(200, 5.0, 10.0);
  EXPECT_TRUE(flag_corner_cases(rows, {}, 0, MetricConfig{}).empty());
  rows[120].ttc = 0.8;
  rows[121].ttc = 1.2;
  rows[30].accel = -7.0;
  rows[31].accel = -7.5;
  std::vector<Event> events{
      {60, 6.0, "fallback", {{"id", 0}, {"source", "planner"}, {"reason", "all_infeasible"}}},
      {70, 7.0, "fallback", {{"id", 4}, {"source", "planner"}}},  // not the ego
      {80, 8.0, "fallback", {{"id", 0}, {"source", "agent"}, {"reason", "timeout"}}},
      {10, 1.0, "override", {{"id", 9}}},
  };
  const auto c = flag_corner_cases(rows, events, 0, MetricConfig{});
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].kind, "override");
  EXPECT_EQ(c[0].window_begin, 0);
  EXPECT_EQ(c[1].kind, "emergency_braking");
  EXPECT_EQ(c[1].tick, 30);
  EXPECT_EQ(c[2].kind, "planner_fallback");
  EXPECT_EQ(c[2].tick, 60);
  EXPECT_EQ(c[3].kind, "agent_fallback");
  EXPECT_EQ(c[4].kind, "ttc");
  EXPECT_EQ(c[4].tick, 120);
  EXPECT_EQ(c[4].window_begin, 70);
  EXPECT_EQ(c[4].window_end, 170);
  EXPECT_NEAR(c[4].x, rows[120].x, 1e-12);
}

TEST(Aggregate, PopulationStatistics) {
  std::vector<EpisodeResult> rs(4);
  for (int i = 0; i < 4; ++i) {
    rs[i].driving_score = 10.0 * i;
    rs[i].success = i % 2;
  }
  const Aggregate a = aggregate(rs);
  EXPECT_NEAR(a.ds_mean, 15.0, 1e-12);
  EXPECT_NEAR(a.ds_std, std::sqrt(125.0), 1e-12);
  EXPECT_NEAR(a.sr_mean, 0.5, 1e-12);
  EXPECT_NEAR(a.sr_std, 0.5, 1e-12);
  EXPECT_NE(aggregate_csv("x", a).find("x,4,"), std::string::npos);
}

TEST(MetricOracle, SyntheticLogsAgreeWithIndependentScript) {
  const fs::path root = test::temp_dir("eval_synthetic");
  Rng rng(12);
  std::string args;
  for (int i = 0; i < 6; ++i) {
    const RouteInfo route = single_lane(150.0, 12.0);
    auto rows = cruise(150, rng.uniform(3, 14), 12.0);
    for (auto& r : rows) {
      if (rng.uniform() < 0.2) r.jerk = rng.uniform(-6, 6);
      if (rng.uniform() < 0.05) r.lat_acc = rng.uniform(-5, 5);
      if (rng.uniform() < 0.03) r.ttc = rng.uniform(0.1, 4);
      if (rng.uniform() < 0.02) r.accel = rng.uniform(-8, 0);
    }
    MetricConfig cfg;
    if (i % 2) cfg.time_budget = 10.0;
    EpisodeLog log = with_start(rows, route, cfg);
    log.events.push_back({40, 4.0, "fallback", {{"id", 0}, {"source", i % 3 ? "planner" : "agent"}}});
    if (i == 5) log.events.push_back({90, 9.0, "collision", {{"a", 0}, {"b", 1}, {"ego", true}}});
    log.events.push_back({149, 14.9, "episode_end", {{"reason", "timeout"}}});
    for (int k = 0; k < 15; ++k) log.decisions.push_back({10 * k, 1.0 * k, rng.uniform(0.001, 0.5), "keep_lane_cruise"});
    write_run(root / std::to_string(i), log, cfg);
    args += " " + (root / std::to_string(i)).string();
  }
  EXPECT_EQ(test::run_python(test::oracle("episode_metrics.py"), args), 0);
}

TEST(MetricOracle, PersistedRunsRescoreIdentically) {
  const fs::path root = test::temp_dir("eval_runs");
  std::string args;
  for (const std::string name : {"highway", "intersection"}) {
    ScenarioConfig cfg = load_scenario(test::scenario_path(name));
    cfg.duration = 15.0;
    RunOptions opts;
    opts.out_dir = root / name;
    const RunOutcome out = run_episode(cfg, test::load_map(name), opts);
    ASSERT_TRUE(out.result);
    const EpisodeLog back = read_episode(root / name);
    EXPECT_EQ(to_json(episode_result(back, cfg.metrics)).dump(), to_json(*out.result).dump());
    args += " " + (root / name).string();
  }
  EXPECT_EQ(test::run_python(test::oracle("episode_metrics.py"), args), 0);
}
