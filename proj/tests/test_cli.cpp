#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "limsim/cli/render.hpp"
#include "limsim/cli/runner.hpp"
#include "limsim/cli/scenario.hpp"
#include "limsim/common/error.hpp"
#include "limsim/eval/log_io.hpp"
#include "limsim/eval/metrics.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace limsim;
using namespace limsim::test;

namespace {

const char* kMinimal = R"(
[scenario]
name = "mini"
map = "highway.xodr"
duration = 5.0

[ego]
route = ["1_-2", "2_-2", "3_-2"]
s = 40.0
)";

ScenarioConfig parse(const std::string& text, const std::vector<std::string>& sets = {}) {
  return parse_scenario(text, source_dir() / "maps", sets);
}

std::string config_error(const std::string& text, const std::vector<std::string>& sets = {}) {
  try {
    ScenarioConfig cfg = parse(text, sets);
    validate_scenario(cfg, *load_map("highway"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string simrun() {
  const char* p = std::getenv("SIMRUN");
  return p ? p : "";
}

int sh(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> head;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) head = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < head.size() && i < cells.size(); ++i) row[head[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST(Scenario, MinimalDefaults) {
  const ScenarioConfig cfg = parse(kMinimal);
  EXPECT_EQ(cfg.name, "mini");
  EXPECT_EQ(cfg.map_path, (source_dir() / "maps" / "highway.xodr").lexically_normal());
  EXPECT_DOUBLE_EQ(cfg.duration, 5.0);
  EXPECT_EQ(cfg.seed, 1u);
  ASSERT_TRUE(cfg.ego);
  EXPECT_EQ(cfg.ego->route.size(), 3u);
  EXPECT_FALSE(cfg.ego->external);
  EXPECT_TRUE(cfg.flows.empty());
  EXPECT_NO_THROW(validate_scenario(cfg, *load_map("highway")));
}

TEST(Scenario, FixturesLoadAndValidate) {
  for (const auto& name : fixture_names()) {
    SCOPED_TRACE(name);
    const ScenarioConfig cfg = load_scenario(scenario_path(name));
    EXPECT_EQ(cfg.name, name);
    ASSERT_TRUE(cfg.ego);
    const RoadNetwork net = load_opendrive(cfg.map_path);
    EXPECT_NO_THROW(validate_scenario(cfg, net));
  }
}

TEST(Scenario, SetOverridesApplyBeforeValidation) {
  const ScenarioConfig cfg =
      parse(kMinimal, {"scenario.duration=12.5", "aoi.radius=80", "ego.controller=external", "scenario.name=x"});
  EXPECT_DOUBLE_EQ(cfg.duration, 12.5);
  EXPECT_DOUBLE_EQ(cfg.sim.aoi.radius, 80.0);
  EXPECT_TRUE(cfg.ego->external);
  EXPECT_EQ(cfg.name, "x");

  const ScenarioConfig hw = load_scenario(scenario_path("highway"), {"flows.1.vehicles_per_hour=0"});
  ASSERT_EQ(hw.flows.size(), 3u);
  EXPECT_DOUBLE_EQ(hw.flows[1].vehicles_per_hour, 0.0);
  EXPECT_DOUBLE_EQ(hw.flows[0].vehicles_per_hour, 500.0);
}

TEST(Scenario, ErrorsNameTheField) {
  const std::string base = kMinimal;
  EXPECT_NE(config_error(base + "[aoi]\nradios = 3\n").find("aoi.radios: unknown field"), std::string::npos);
  EXPECT_NE(config_error(base + "[weather]\nrain = 1\n").find("weather: unknown section"), std::string::npos);
  EXPECT_NE(config_error(base + "[aoi]\nradius = -1\n").find("aoi.radius"), std::string::npos);
  EXPECT_NE(config_error(base + "[aoi]\nradius = \"far\"\n").find("aoi.radius: expected a number"),
            std::string::npos);
  EXPECT_NE(config_error(base, {"duration"}).find("expected section.key=value"), std::string::npos);
  EXPECT_NE(config_error(base, {"scenario.duration=0"}).find("scenario.duration"), std::string::npos);
  EXPECT_NE(config_error(base, {"flows.0.vehicles_per_hour=3"}).find("flows"), std::string::npos);
  try {
    load_scenario(scenario_path("highway"), {"flows.5.vehicles_per_hour=3"});
    ADD_FAILURE() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("index 5 out of range"), std::string::npos) << e.what();
  }

  std::string bad_lane = base;
  bad_lane.replace(bad_lane.find("\"2_-2\""), 6, "\"9_-9\"");
  EXPECT_NE(config_error(bad_lane).find("unknown lane '9_-9'"), std::string::npos);
  std::string jump = base;
  jump.replace(jump.find("\"2_-2\""), 6, "\"2_-1\"");
  EXPECT_NE(config_error(jump).find("does not follow"), std::string::npos);
  EXPECT_NE(config_error(base, {"ego.s=1e6"}).find("ego.s: outside lane"), std::string::npos);
}

TEST(Simrun, ExitCodes) {
  const std::string bin = simrun();
  ASSERT_FALSE(bin.empty());
  const fs::path dir = temp_dir("exit");
  const std::string out = " --out \"" + dir.string() + "\"";
  EXPECT_EQ(sh(bin + " run --config " + scenario_path("highway").string() + " --set scenario.duration=2" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "highway" / "1" / "result.json"));
  EXPECT_EQ(sh(bin + " run --config " + scenario_path("highway").string() + " --set aoi.radiuz=1" + out), 2);
  EXPECT_EQ(sh(bin + " run --config /nonexistent.toml" + out), 2);
  EXPECT_EQ(sh(bin + " run" + out), 2);
  EXPECT_EQ(sh(bin + " frobnicate"), 2);

  const fs::path bad_map = dir / "bad.xodr";
  std::ofstream(bad_map) << "<OpenDRIVE><road";
  const fs::path cfg = dir / "bad.toml";
  std::ofstream(cfg) << "[scenario]\nmap = \"bad.xodr\"\n";
  EXPECT_EQ(sh(bin + " run --config " + cfg.string() + out), 2);

  EXPECT_EQ(sh(bin + " eval " + (dir / "missing").string()), 3);
  EXPECT_EQ(sh(bin + " render " + (dir / "missing").string()), 3);
  fs::remove_all(dir);
}

TEST(Simrun, BatchWritesAggregate) {
  const fs::path dir = temp_dir("batch");
  ASSERT_EQ(sh(simrun() + " run --config " + scenario_path("highway").string() +
               " --set scenario.duration=3 --batch 3 --jobs 2 --seed 4 --out " + dir.string()),
            0);
  std::vector<EpisodeResult> results;
  for (int seed : {4, 5, 6}) {
    const fs::path run = dir / "highway" / std::to_string(seed);
    ASSERT_TRUE(fs::exists(run / "result.json")) << run;
    const auto j = nlohmann::json::parse(read_file(run / "result.json"));
    EpisodeResult r;
    r.route_completion = j["route_completion"].get<double>();
    r.driving_score = j["driving_score"].get<double>();
    r.avg_decision_time = j["avg_decision_time"].get<double>();
    r.success = j["success"].get<bool>();
    results.push_back(r);
  }
  EXPECT_FALSE(fs::exists(dir / "highway" / "7"));
  const auto rows = read_csv(dir / "highway" / "aggregate.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].at("episodes"), "3");
  double mean = 0, var = 0;
  for (const auto& r : results) mean += r.driving_score / 3;
  for (const auto& r : results) var += (r.driving_score - mean) * (r.driving_score - mean) / 3;
  EXPECT_NEAR(std::stod(rows[0].at("driving_score_mean")), mean, 1e-9);
  EXPECT_NEAR(std::stod(rows[0].at("driving_score_std")), std::sqrt(var), 1e-9);
  EXPECT_EQ(read_file(dir / "highway" / "aggregate.csv"), aggregate_csv("highway", aggregate(results)));
  fs::remove_all(dir);
}

TEST(Simrun, SameSeedSameBytes) {
  const fs::path dir = temp_dir("det");
  for (const char* tag : {"a", "b"}) {
    ASSERT_EQ(sh(simrun() + " run --config " + scenario_path("intersection").string() +
                 " --set scenario.duration=8 --seed 3 --out " + (dir / tag).string()),
              0);
  }
  for (const char* f : {"trajectory.csv", "events.jsonl"}) {
    const std::string a = read_file(dir / "a" / "intersection" / "3" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, read_file(dir / "b" / "intersection" / "3" / f)) << f;
  }
  // decision_time is wall clock; the chosen actions must still agree
  const auto da = read_csv(dir / "a" / "intersection" / "3" / "decisions.csv");
  const auto db = read_csv(dir / "b" / "intersection" / "3" / "decisions.csv");
  ASSERT_EQ(da.size(), db.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    EXPECT_EQ(da[i].at("tick"), db[i].at("tick"));
    EXPECT_EQ(da[i].at("action"), db[i].at("action"));
  }
  fs::remove_all(dir);
}

TEST(Render, EgoPixelMatchesLoggedPose) {
  const fs::path dir = temp_dir("render");
  // ticks 0..99 at dt 0.1
  ASSERT_EQ(sh(simrun() + " run --config " + scenario_path("roundabout").string() +
               " --set scenario.duration=9.9 --out " + dir.string()),
            0);
  const fs::path run = dir / "roundabout" / "1";
  ASSERT_EQ(sh(simrun() + " render " + run.string() + " --out " + (dir / "r").string()), 0);

  const EpisodeLog log = read_episode(run);
  int ego = -1;
  for (const Event& e : log.events) {
    if (e.kind == "episode_start") ego = e.payload["ego"].get<int>();
  }
  std::map<std::int64_t, const TrajectoryRow*> ego_rows;
  std::set<std::int64_t> ticks;
  for (const TrajectoryRow& r : log.rows) {
    ticks.insert(r.tick);
    if (r.vehicle_id == ego) ego_rows[r.tick] = &r;
  }
  EXPECT_EQ(ticks.size(), 100u);

  const auto index = read_csv(dir / "r" / "frames" / "index.csv");
  ASSERT_EQ(index.size(), ticks.size());
  int checked = 0;
  for (const auto& row : index) {
    const std::int64_t tick = std::stoll(row.at("tick"));
    ASSERT_TRUE(ego_rows.count(tick));
    const TrajectoryRow& r = *ego_rows[tick];
    const double ox = std::stod(row.at("origin_x")), oy = std::stod(row.at("origin_y"));
    const double scale = std::stod(row.at("scale"));
    const Canvas c = Canvas::load_png(dir / "r" / "frames" / row.at("file"));
    const int px = static_cast<int>(std::floor((r.x - ox) * scale));
    const int py = static_cast<int>(std::floor((oy - r.y) * scale));
    bool hit = false;
    for (int dy = -1; dy <= 1 && !hit; ++dy) {
      for (int dx = -1; dx <= 1 && !hit; ++dx) {
        const int x = px + dx, y = py + dy;
        hit = x >= 0 && y >= 0 && x < c.width() && y < c.height() && c.at(x, y) == kEgoColor;
      }
    }
    EXPECT_TRUE(hit) << "tick " << tick;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
  EXPECT_TRUE(fs::exists(dir / "r" / "plots"));
  fs::remove_all(dir);
}

TEST(Render, PlotsOnlySkipsFrames) {
  const fs::path dir = temp_dir("plots");
  ASSERT_EQ(sh(simrun() + " run --config " + scenario_path("highway").string() +
               " --set scenario.duration=3 --out " + dir.string()),
            0);
  const fs::path run = dir / "highway" / "1";
  const RenderSummary s = render(run, dir / "p", [] {
    RenderOptions o;
    o.plots_only = true;
    return o;
  }());
  EXPECT_EQ(s.frames, 0u);
  EXPECT_FALSE(fs::exists(dir / "p" / "frames"));
  ASSERT_FALSE(s.plots.empty());
  for (const auto& p : s.plots) {
    EXPECT_TRUE(fs::exists(p)) << p;
    EXPECT_GT(Canvas::load_png(p).width(), 0);
  }
  fs::remove_all(dir);
}

TEST(Simrun, EvalWriteReproducesResult) {
  const fs::path dir = temp_dir("eval");
  ASSERT_EQ(sh(simrun() + " run --config " + scenario_path("ramp").string() +
               " --set scenario.duration=6 --out " + dir.string()),
            0);
  const fs::path run = dir / "ramp" / "1";
  const std::string before = read_file(run / "result.json");
  fs::remove(run / "result.json");
  ASSERT_EQ(sh(simrun() + " eval --write " + run.string()), 0);
  EXPECT_EQ(read_file(run / "result.json"), before);
  fs::remove_all(dir);
}

namespace {

std::string capture(const std::string& cmd, int& status) {
  std::string out;
  FILE* p = ::popen((cmd + " 2>&1").c_str(), "r");
  char buf[4096];
  while (p && std::fgets(buf, sizeof buf, p)) out += buf;
  const int st = p ? ::pclose(p) : -1;
  status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return out;
}

}  // namespace

TEST(Simrun, DeclaredArtifactsExistAndParse) {
  const fs::path dir = temp_dir("artifacts");
  int status = 0;
  const std::string out = capture(simrun() + " run --config " + scenario_path("highway").string() +
                                      " --set scenario.duration=4 --out " + dir.string(),
                                  status);
  ASSERT_EQ(status, 0) << out;
  EXPECT_NE(out.find("route_completion="), std::string::npos);
  EXPECT_NE(out.find("driving_score="), std::string::npos);
  EXPECT_NE(out.find("avg_decision_time="), std::string::npos);
  EXPECT_NE(out.find("success="), std::string::npos);
  const auto pos = out.find("artifacts:");
  ASSERT_NE(pos, std::string::npos);
  std::stringstream ss(out.substr(pos + 10, out.find('\n', pos) - pos - 10));
  int files = 0;
  for (std::string f; ss >> f; ++files) {
    ASSERT_TRUE(fs::exists(f)) << f;
    const fs::path p = f;
    if (p.extension() == ".json") {
      EXPECT_TRUE(nlohmann::json::accept(read_file(p))) << f;
    } else if (p.extension() == ".jsonl") {
      std::ifstream in(p);
      for (std::string line; std::getline(in, line);) EXPECT_TRUE(nlohmann::json::accept(line)) << f;
    } else {
      const auto rows = read_csv(p);
      EXPECT_FALSE(rows.empty()) << f;
    }
  }
  EXPECT_EQ(files, 4);
  EXPECT_NO_THROW(read_episode(dir / "highway" / "1"));
  fs::remove_all(dir);
}

TEST(Simrun, MissingLaneExitsTwoNamingTheLane) {
  const fs::path dir = temp_dir("lane");
  int status = 0;
  const std::string out =
      capture(simrun() + " run --config " + scenario_path("highway").string() + " --set 'ego.route=[\"1_-2\", \"zz_9\"]' --out " +
                  dir.string(),
              status);
  EXPECT_EQ(status, 2);
  EXPECT_NE(out.find("zz_9"), std::string::npos) << out;
  EXPECT_NE(out.find("ego.route"), std::string::npos) << out;
  fs::remove_all(dir);
}
