#include "limsim/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "limsim/common/error.hpp"
#include "limsim/road/route_corridor.hpp"

namespace limsim {

using nlohmann::json;

bool MetricConfig::valid() const {
  const double sum = w_safety + w_efficiency + w_comfort;
  return w_safety >= 0 && w_efficiency >= 0 && w_comfort >= 0 && std::abs(sum - 1.0) < 1e-9 && jerk_max > 0 &&
         lat_acc_max > 0 && ttc_min > 0 && (!time_budget || *time_budget > 0);
}

RouteInfo route_info(const RoadNetwork& network, const std::vector<LaneId>& route) {
  const RouteCorridor corridor(network, route);
  RouteInfo info;
  for (const RouteStep& s : corridor.steps()) {
    RouteInfo::Step step;
    step.lanes = s.lanes;
    for (const LaneId& id : s.lanes) step.lane_lengths.push_back(network.lane(id).length());
    step.length = s.length;
    info.free_flow_time += s.length / network.lane(s.path_lane).speed_limit;
    info.total_length += s.length;
    info.steps.push_back(std::move(step));
  }
  return info;
}

json to_json(const RouteInfo& r) {
  json steps = json::array();
  for (const auto& s : r.steps) steps.push_back({{"lanes", s.lanes}, {"lane_lengths", s.lane_lengths}, {"length", s.length}});
  return {{"steps", steps}, {"total_length", r.total_length}, {"free_flow_time", r.free_flow_time}};
}

RouteInfo route_info_from_json(const json& j) {
  try {
    RouteInfo r;
    for (const json& s : j.at("steps")) {
      r.steps.push_back({s.at("lanes").get<std::vector<LaneId>>(), s.at("lane_lengths").get<std::vector<double>>(),
                         s.at("length").get<double>()});
    }
    r.total_length = j.at("total_length").get<double>();
    r.free_flow_time = j.at("free_flow_time").get<double>();
    return r;
  } catch (const json::exception& ex) {
    throw BadLog(std::string("route info: ") + ex.what());
  }
}

std::vector<TrajectoryRow> rows_of(const std::vector<TrajectoryRow>& rows, int vehicle_id) {
  std::vector<TrajectoryRow> out;
  for (const auto& r : rows) {
    if (r.vehicle_id == vehicle_id) out.push_back(r);
  }
  return out;
}

namespace {

// Arc length along the route at a sample, or nothing when off the route.
std::optional<double> route_position(const RouteInfo& route, std::size_t& step, const TrajectoryRow& r) {
  double offset = 0.0;
  for (std::size_t k = 0; k < step; ++k) offset += route.steps[k].length;
  for (std::size_t k = step; k < route.steps.size(); ++k) {
    const auto& st = route.steps[k];
    for (std::size_t i = 0; i < st.lanes.size(); ++i) {
      if (st.lanes[i] != r.lane_id) continue;
      step = k;
      const double len = st.lane_lengths[i];
      const double frac = len > 0.0 ? std::clamp(r.s / len, 0.0, 1.0) : 0.0;
      return offset + frac * st.length;
    }
    offset += st.length;
  }
  return std::nullopt;
}

}  // namespace

double route_completion(const std::vector<TrajectoryRow>& ego, const RouteInfo& route) {
  if (ego.empty() || route.steps.empty()) return 0.0;
  std::size_t step = 0;
  std::optional<double> first, last;
  for (const auto& r : ego) {
    if (auto p = route_position(route, step, r)) {
      if (!first) first = p;
      last = p;
    }
  }
  if (!first) return 0.0;
  const double remaining = route.total_length - *first;
  if (remaining <= 0.0) return 100.0;
  if (route.total_length - *last < 1e-6) return 100.0;
  return std::clamp(100.0 * (*last - *first) / remaining, 0.0, 100.0);
}

ComponentScores component_scores(const std::vector<TrajectoryRow>& ego, bool ego_collided, const MetricConfig& cfg) {
  ComponentScores c;
  if (ego.empty()) return c;
  std::size_t comfortable = 0;
  double eff = 0.0;
  double min_ttc = std::numeric_limits<double>::infinity();
  for (const auto& r : ego) {
    if (std::abs(r.jerk) <= cfg.jerk_max && std::abs(r.lat_acc) <= cfg.lat_acc_max) ++comfortable;
    eff += r.speed_limit > 0.0 ? std::min(r.speed / r.speed_limit, 1.0) : 1.0;
    min_ttc = std::min(min_ttc, r.ttc);
  }
  const double n = static_cast<double>(ego.size());
  c.comfort = 100.0 * static_cast<double>(comfortable) / n;
  c.efficiency = std::clamp(100.0 * eff / n, 0.0, 100.0);
  if (ego_collided) {
    c.safety = 0.0;
  } else if (min_ttc >= cfg.ttc_min) {
    c.safety = 100.0;
  } else {
    c.safety = std::clamp(100.0 * min_ttc / cfg.ttc_min, 0.0, 100.0);
  }
  return c;
}

double driving_score(const ComponentScores& c, const MetricConfig& cfg) {
  return cfg.w_safety * c.safety + cfg.w_efficiency * c.efficiency + cfg.w_comfort * c.comfort;
}

std::vector<CornerCase> flag_corner_cases(const std::vector<TrajectoryRow>& ego, const std::vector<Event>& events,
                                          int ego_id, const MetricConfig& cfg) {
  std::vector<CornerCase> out;
  auto at_tick = [&](std::int64_t tick) -> const TrajectoryRow* {
    auto it = std::lower_bound(ego.begin(), ego.end(), tick,
                               [](const TrajectoryRow& r, std::int64_t t) { return r.tick < t; });
    if (it == ego.end()) return ego.empty() ? nullptr : &ego.back();
    return &*it;
  };
  auto add = [&](std::int64_t tick, std::string kind, json payload) {
    CornerCase c;
    c.tick = tick;
    c.kind = std::move(kind);
    if (const TrajectoryRow* r = at_tick(tick)) {
      c.x = r->x;
      c.y = r->y;
    }
    c.window_begin = std::max<std::int64_t>(0, tick - 50);
    c.window_end = tick + 50;
    c.payload = std::move(payload);
    out.push_back(std::move(c));
  };

  bool in_dip = false, braking = false;
  for (const auto& r : ego) {
    const bool dip = r.ttc < cfg.ttc_min;
    if (dip && !in_dip) add(r.tick, "ttc", {{"ttc", r.ttc}});
    in_dip = dip;
    const bool hard = r.accel < -0.8 * cfg.emergency_decel;
    if (hard && !braking) add(r.tick, "emergency_braking", {{"accel", r.accel}});
    braking = hard;
  }
  for (const Event& e : events) {
    if (e.kind == "fallback") {
      if (e.payload.value("id", -1) != ego_id) continue;
      const std::string src = e.payload.value("source", "planner");
      add(e.tick, src == "agent" ? "agent_fallback" : "planner_fallback", e.payload);
    } else if (e.kind == "override") {
      add(e.tick, "override", e.payload);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const CornerCase& a, const CornerCase& b) { return a.tick < b.tick; });
  return out;
}

EpisodeResult episode_result(const EpisodeLog& log, const MetricConfig& cfg) {
  for (const Event& e : log.events) {
    if (e.kind != "episode_start") continue;
    try {
      const int ego = e.payload.at("ego").get<int>();
      const RouteInfo route = route_info_from_json(e.payload.at("route_info"));
      return episode_result(log, ego, route, cfg);
    } catch (const json::exception& ex) {
      throw BadLog(std::string("episode_start: ") + ex.what());
    }
  }
  throw BadLog("log has no episode_start event");
}

EpisodeResult episode_result(const EpisodeLog& log, int ego_id, const RouteInfo& route, const MetricConfig& cfg) {
  EpisodeResult r;
  const auto ego = rows_of(log.rows, ego_id);
  bool collided = false;
  for (const Event& e : log.events) {
    if (e.kind == "collision" && e.payload.value("ego", false)) collided = true;
    if (e.kind == "episode_end") r.end_reason = e.payload.value("reason", "");
  }
  r.route_completion = route_completion(ego, route);
  r.components = component_scores(ego, collided, cfg);
  r.driving_score = driving_score(r.components, cfg);
  double sum = 0.0;
  for (const auto& d : log.decisions) sum += d.decision_time;
  r.decisions = log.decisions.size();
  r.avg_decision_time = log.decisions.empty() ? 0.0 : sum / static_cast<double>(log.decisions.size());
  r.duration = ego.empty() ? 0.0 : ego.back().t - ego.front().t;
  r.time_budget = cfg.time_budget.value_or(2.0 * route.free_flow_time);
  r.min_ttc = std::numeric_limits<double>::infinity();
  for (const auto& row : ego) r.min_ttc = std::min(r.min_ttc, row.ttc);
  r.success = r.route_completion == 100.0 && !collided && r.duration <= r.time_budget;
  r.events = flag_corner_cases(ego, log.events, ego_id, cfg);
  return r;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const EpisodeResult& r) {
  json events = json::array();
  for (const auto& c : r.events) {
    events.push_back({{"tick", c.tick},
                      {"kind", c.kind},
                      {"x", c.x},
                      {"y", c.y},
                      {"window", {c.window_begin, c.window_end}},
                      {"payload", c.payload}});
  }
  return {{"route_completion", r.route_completion},
          {"driving_score", r.driving_score},
          {"avg_decision_time", r.avg_decision_time},
          {"success", r.success},
          {"component_scores",
           {{"comfort", r.components.comfort}, {"efficiency", r.components.efficiency}, {"safety", r.components.safety}}},
          {"end_reason", r.end_reason},
          {"duration", r.duration},
          {"time_budget", r.time_budget},
          {"min_ttc", finite_or_null(r.min_ttc)},
          {"decisions", r.decisions},
          {"events", events}};
}

json to_json(const MetricConfig& c) {
  json j = {{"w_safety", c.w_safety},   {"w_efficiency", c.w_efficiency}, {"w_comfort", c.w_comfort},
            {"jerk_max", c.jerk_max},   {"lat_acc_max", c.lat_acc_max},   {"ttc_min", c.ttc_min},
            {"emergency_decel", c.emergency_decel}};
  j["time_budget"] = c.time_budget ? json(*c.time_budget) : json(nullptr);
  return j;
}

MetricConfig metric_config_from_json(const json& j) {
  MetricConfig c;
  c.w_safety = j.value("w_safety", c.w_safety);
  c.w_efficiency = j.value("w_efficiency", c.w_efficiency);
  c.w_comfort = j.value("w_comfort", c.w_comfort);
  c.jerk_max = j.value("jerk_max", c.jerk_max);
  c.lat_acc_max = j.value("lat_acc_max", c.lat_acc_max);
  c.ttc_min = j.value("ttc_min", c.ttc_min);
  c.emergency_decel = j.value("emergency_decel", c.emergency_decel);
  if (j.contains("time_budget") && !j["time_budget"].is_null()) c.time_budget = j["time_budget"].get<double>();
  return c;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

Aggregate aggregate(const std::vector<EpisodeResult>& results) {
  Aggregate a;
  a.episodes = results.size();
  std::vector<double> rc, ds, dt, sr;
  for (const auto& r : results) {
    rc.push_back(r.route_completion);
    ds.push_back(r.driving_score);
    dt.push_back(r.avg_decision_time);
    sr.push_back(r.success ? 1.0 : 0.0);
  }
  std::tie(a.rc_mean, a.rc_std) = mean_std(rc);
  std::tie(a.ds_mean, a.ds_std) = mean_std(ds);
  std::tie(a.dt_mean, a.dt_std) = mean_std(dt);
  std::tie(a.sr_mean, a.sr_std) = mean_std(sr);
  return a;
}

std::string aggregate_csv(const std::string& scenario, const Aggregate& a) {
  std::ostringstream out;
  out << "scenario,episodes,route_completion_mean,route_completion_std,driving_score_mean,driving_score_std,"
         "avg_decision_time_mean,avg_decision_time_std,success_rate_mean,success_rate_std\n";
  out << scenario << ',' << a.episodes << ',' << format_number(a.rc_mean) << ',' << format_number(a.rc_std) << ','
      << format_number(a.ds_mean) << ',' << format_number(a.ds_std) << ',' << format_number(a.dt_mean) << ','
      << format_number(a.dt_std) << ',' << format_number(a.sr_mean) << ',' << format_number(a.sr_std) << '\n';
  return out.str();
}

}  // namespace limsim
