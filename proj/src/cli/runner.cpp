#include "limsim/cli/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "limsim/agent/protocol.hpp"
#include "limsim/common/error.hpp"
#include "limsim/replay/track.hpp"

namespace limsim {

namespace fs = std::filesystem;

RunOutcome run_episode(const ScenarioConfig& cfg, std::shared_ptr<const RoadNetwork> network, const RunOptions& opts) {
  const auto wall0 = std::chrono::steady_clock::now();
  std::ofstream traj_out, events_out, decisions_out;
  if (opts.out_dir) {
    fs::create_directories(*opts.out_dir);
    traj_out.open(*opts.out_dir / "trajectory.csv", std::ios::binary);
    events_out.open(*opts.out_dir / "events.jsonl", std::ios::binary);
    decisions_out.open(*opts.out_dir / "decisions.csv", std::ios::binary);
    if (!traj_out || !events_out || !decisions_out) throw std::runtime_error("cannot write into " + opts.out_dir->string());
  }

  World world(network, cfg.sim, cfg.seed);
  if (opts.out_dir) world.set_event_sink([&](const Event& e) { write_event(events_out, e); });
  TrajectoryRecorder recorder(opts.out_dir ? &traj_out : nullptr);

  std::optional<int> ego;
  RouteInfo route;
  std::shared_ptr<AgentController> agent;
  if (cfg.ego) {
    route = route_info(*network, cfg.ego->route);
    VehicleSpec spec;
    spec.route = cfg.ego->route;
    spec.s = cfg.ego->s;
    spec.l = cfg.ego->l;
    spec.speed = cfg.ego->speed;
    spec.length = cfg.sim.behavior.vehicle_length;
    spec.width = cfg.sim.behavior.vehicle_width;
    spec.mode = cfg.ego->external ? ControlMode::External : ControlMode::Fine;
    spec.ego = true;
    spec.speed_factor = 1.0;
    spec.flow = "ego";
    ego = world.add_vehicle(spec);
    if (cfg.ego->external) {
      if (opts.external) {
        world.set_external_controller(opts.external);
      } else {
        auto conn = listen_tcp(cfg.ego->host, cfg.ego->port, std::chrono::duration<double>(cfg.ego->connect_timeout));
        engine_handshake(*conn, network->name(), cfg.sim.dt, std::chrono::duration<double>(cfg.ego->timeout));
        agent = std::make_shared<AgentController>(conn, cfg.ego->timeout, cfg.ego->neighbors);
        world.set_external_controller(agent);
      }
    }
  }
  for (const FlowSpec& f : cfg.flows) world.add_flow(f);
  if (cfg.replay_tracks) {
    for (auto& [id, track] : read_tracks_file(cfg.replay_tracks->string())) {
      world.add_replay_track(std::make_shared<const ReplayTrack>(std::move(track)));
    }
  }

  nlohmann::json start = {{"scenario", cfg.name},
                          {"map", cfg.map_path.generic_string()},
                          {"seed", cfg.seed},
                          {"dt", cfg.sim.dt},
                          {"duration", cfg.duration},
                          {"metrics", to_json(cfg.metrics)},
                          {"vehicle_length", cfg.sim.behavior.vehicle_length},
                          {"vehicle_width", cfg.sim.behavior.vehicle_width}};
  if (ego) {
    start["ego"] = *ego;
    start["route"] = cfg.ego->route;
    start["route_info"] = to_json(route);
    start["aoi_radius"] = cfg.sim.aoi.radius;
  }
  world.log_event("episode_start", start);
  if (opts.on_start) opts.on_start(world);

  recorder.record(world);
  world.set_sample_sink([&](const World& w) { recorder.record(w); });
  const auto last_tick = static_cast<std::int64_t>(std::llround(cfg.duration / cfg.sim.dt));
  while (!world.done()) {
    if (world.tick() >= last_tick) {
      world.finish("timeout");
      break;
    }
    world.step();
    if (opts.on_tick) opts.on_tick(world);
  }
  if (agent) agent->say_bye(world.end_reason().value_or("done"));

  RunOutcome out;
  out.ticks = world.tick();
  out.end_reason = world.end_reason().value_or("");
  out.log.rows = recorder.rows();
  out.log.events = world.events();
  for (const DecisionRecord& d : world.decisions()) out.log.decisions.push_back(d);
  if (opts.out_dir) {
    write_decisions_header(decisions_out);
    for (const DecisionRecord& d : out.log.decisions) write_decision(decisions_out, d);
  }
  if (ego) {
    out.result = episode_result(out.log, *ego, route, cfg.metrics);
    if (opts.out_dir) {
      std::ofstream res(*opts.out_dir / "result.json", std::ios::binary);
      res << to_json(*out.result).dump(2) << '\n';
    }
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return out;
}

std::vector<EpisodeResult> run_batch(const ScenarioConfig& cfg, std::shared_ptr<const RoadNetwork> network,
                                     const fs::path& root, int n, int jobs) {
  std::vector<std::optional<EpisodeResult>> results(static_cast<std::size_t>(std::max(0, n)));
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      const int i = next++;
      if (i >= n) return;
      try {
        ScenarioConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(i);
        RunOptions opts;
        opts.out_dir = root / cfg.name / std::to_string(c.seed);
        results[static_cast<std::size_t>(i)] = run_episode(c, network, opts).result;
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  std::vector<EpisodeResult> out;
  for (auto& r : results) {
    if (r) out.push_back(*r);
  }
  fs::create_directories(root / cfg.name);
  std::ofstream agg(root / cfg.name / "aggregate.csv", std::ios::binary);
  agg << aggregate_csv(cfg.name, aggregate(out));
  return out;
}

fs::path output_root(const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SIM_OUT_DIR"); env && *env) return env;
  return "out";
}

std::string summary_line(const EpisodeResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "route_completion=%.2f driving_score=%.2f avg_decision_time=%.4f success=%s",
                r.route_completion, r.driving_score, r.avg_decision_time, r.success ? "true" : "false");
  return buf;
}

}  // namespace limsim
