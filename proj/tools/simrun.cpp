#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "limsim/cli/render.hpp"
#include "limsim/cli/runner.hpp"
#include "limsim/common/error.hpp"
#include "limsim/road/opendrive.hpp"

namespace fs = std::filesystem;
using namespace limsim;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int cmd_run(const fs::path& config, std::optional<std::uint64_t> seed, int batch, int jobs,
            const std::vector<std::string>& sets, const std::optional<fs::path>& out_flag) {
  ScenarioConfig cfg;
  std::shared_ptr<const RoadNetwork> net;
  try {
    cfg = load_scenario(config, sets);
    if (seed) cfg.seed = *seed;
    try {
      net = std::make_shared<const RoadNetwork>(load_opendrive(cfg.map_path));
    } catch (const Error& e) {
      throw ConfigError(std::string("scenario.map: ") + e.what());
    }
    validate_scenario(cfg, *net);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const fs::path root = output_root(out_flag);
  try {
    if (batch > 0) {
      const auto results = run_batch(cfg, net, root, batch, jobs);
      for (std::size_t i = 0; i < results.size(); ++i) {
        std::cout << "seed=" << cfg.seed + i << " " << summary_line(results[i]) << "\n";
      }
      const Aggregate a = aggregate(results);
      std::printf("batch %s episodes=%zu route_completion=%.2f+-%.2f driving_score=%.2f+-%.2f "
                  "avg_decision_time=%.4f+-%.4f success_rate=%.2f+-%.2f\n",
                  cfg.name.c_str(), a.episodes, a.rc_mean, a.rc_std, a.ds_mean, a.ds_std, a.dt_mean, a.dt_std,
                  a.sr_mean, a.sr_std);
      std::cout << "artifacts: " << (root / cfg.name / "aggregate.csv").string() << "\n";
      return 0;
    }
    RunOptions opts;
    opts.out_dir = root / cfg.name / std::to_string(cfg.seed);
    const RunOutcome out = run_episode(cfg, net, opts);
    std::cout << "end_reason=" << out.end_reason << " ticks=" << out.ticks << "\n";
    if (out.result) std::cout << summary_line(*out.result) << "\n";
    std::cout << "artifacts:";
    for (const char* f : {"trajectory.csv", "events.jsonl", "decisions.csv", "result.json"}) {
      if (fs::exists(*opts.out_dir / f)) std::cout << " " << (*opts.out_dir / f).string();
    }
    std::cout << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int cmd_render(const fs::path& log, const std::optional<fs::path>& out, const RenderOptions& opts) {
  try {
    const RenderSummary s = render(log, out.value_or(log), opts);
    std::cout << "frames=" << s.frames << " plots=" << s.plots.size() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "render error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int cmd_eval(const fs::path& log, bool write) {
  try {
    const EpisodeLog ep = read_episode(log);
    MetricConfig m;
    for (const Event& e : ep.events) {
      if (e.kind == "episode_start" && e.payload.contains("metrics")) m = metric_config_from_json(e.payload["metrics"]);
    }
    const EpisodeResult r = episode_result(ep, m);
    std::cout << summary_line(r) << "\n";
    if (write) {
      std::ofstream res(log / "result.json", std::ios::binary);
      res << to_json(r).dump(2) << '\n';
    } else {
      std::cout << to_json(r).dump(2) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "eval error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simrun: closed-loop traffic simulation runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one episode or a seeded batch");
  fs::path config;
  std::optional<std::uint64_t> seed;
  int batch = 0, jobs = 1;
  std::vector<std::string> sets;
  std::optional<fs::path> out;
  run->add_option("--config", config, "scenario TOML")->required();
  run->add_option("--seed", seed, "seed (batch: first seed)");
  run->add_option("--batch", batch, "episodes with seeds seed..seed+N-1")->check(CLI::NonNegativeNumber);
  run->add_option("--jobs", jobs, "episodes in parallel")->check(CLI::PositiveNumber);
  run->add_option("--set", sets, "override section.key=value")->allow_extra_args(false);
  run->add_option("--out", out, "output root (default $SIM_OUT_DIR or ./out)");

  auto* rend = app.add_subcommand("render", "draw frames and plots from a run directory");
  fs::path log;
  std::optional<fs::path> rout;
  RenderOptions ropts;
  std::optional<fs::path> map;
  rend->add_option("log", log, "run directory")->required();
  rend->add_option("--out", rout, "output directory (default: the run directory)");
  rend->add_option("--scale", ropts.scale, "pixels per meter")->check(CLI::PositiveNumber);
  rend->add_option("--window", ropts.window, "view size in meters")->check(CLI::PositiveNumber);
  rend->add_flag("--plots-only", ropts.plots_only, "only time-series plots");
  rend->add_option("--map", map, "map file (default: from the log)");

  auto* ev = app.add_subcommand("eval", "re-score a run directory");
  fs::path elog;
  bool write = false;
  ev->add_option("log", elog, "run directory")->required();
  ev->add_flag("--write", write, "rewrite result.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (*run) return cmd_run(config, seed, batch, jobs, sets, out);
  if (*rend) {
    ropts.map_path = map;
    return cmd_render(log, rout, ropts);
  }
  return cmd_eval(elog, write);
}
