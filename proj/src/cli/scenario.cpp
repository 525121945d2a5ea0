#include "limsim/cli/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "limsim/common/error.hpp"

namespace limsim {

namespace {

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Typed reads out of one TOML table; remembers which keys were consumed so
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool has(const std::string& key) {
    return t_ && t_->contains(key);
  }

  double num(const std::string& key, double fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value<double>()) return *v;
    throw ConfigError(field(key) + ": expected a number");
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (n->is_integer()) return n->as_integer()->get();
    throw ConfigError(field(key) + ": expected an integer");
  }

  bool flag(const std::string& key, bool fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value<bool>()) return *v;
    throw ConfigError(field(key) + ": expected true or false");
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value<std::string>()) return *v;
    throw ConfigError(field(key) + ": expected a string");
  }

  std::vector<std::string> strings(const std::string& key) {
    const toml::node* n = get(key);
    if (!n) return {};
    return string_list(*n, field(key));
  }

  std::vector<std::vector<std::string>> string_lists(const std::string& key) {
    const toml::node* n = get(key);
    if (!n) return {};
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError(field(key) + ": expected an array of lane lists");
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < a->size(); ++i) out.push_back(string_list(*a->get(i), field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError(field(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *a) {
      auto v = e.value<double>();
      if (!v) throw ConfigError(field(key) + ": expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  const toml::node* raw(const std::string& key) { return get(key); }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, _] : *t_) {
      const std::string key(k.str());
      if (!used_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

  std::string field(const std::string& key) const { return join(name_, key); }

 private:
  const toml::node* get(const std::string& key) {
    used_.insert(key);
    return t_ ? t_->get(key) : nullptr;
  }

  static std::vector<std::string> string_list(const toml::node& n, const std::string& where) {
    const toml::array* a = n.as_array();
    if (!a) throw ConfigError(where + ": expected an array of strings");
    std::vector<std::string> out;
    for (const toml::node& e : *a) {
      auto v = e.value<std::string>();
      if (!v) throw ConfigError(where + ": expected an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  const toml::table* t_;
  std::string name_;
  std::set<std::string> used_;
};

const toml::table* table_of(const toml::table& root, const std::string& key) {
  const toml::node* n = root.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(key + ": expected a table");
  return n->as_table();
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

void apply_override(toml::table& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set '" + spec + "': expected section.key=value");
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);

  toml::node* value_holder = nullptr;
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + text);
    value_holder = parsed.get("v");
  } catch (const toml::parse_error&) {
    parsed.insert_or_assign("v", text);  // bare word: take it as a string
    value_holder = parsed.get("v");
  }

  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  toml::node* cur = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (auto* t = cur->as_table()) {
      if (!t->contains(p)) t->insert(p, toml::table{});
      cur = t->get(p);
    } else if (auto* a = cur->as_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw ConfigError("--set " + path + ": '" + p + "' is not an index");
      }
      if (idx >= a->size()) throw ConfigError("--set " + path + ": index " + p + " out of range");
      cur = a->get(idx);
    } else {
      throw ConfigError("--set " + path + ": '" + p + "' is not a table");
    }
  }
  auto* t = cur->as_table();
  if (!t) throw ConfigError("--set " + path + ": parent is not a table");
  value_holder->visit([&](auto&& v) { t->insert_or_assign(parts.back(), v); });
}

ScenarioConfig from_table(const toml::table& root, const std::filesystem::path& base) {
  static const std::set<std::string> kSections{"scenario", "ego",     "flows",    "aoi",    "behavior",
                                               "planning", "metrics", "replay",   "junction"};
  for (const auto& [k, _] : root) {
    if (!kSections.count(std::string(k.str()))) throw ConfigError(std::string(k.str()) + ": unknown section");
  }
  ScenarioConfig cfg;

  Section sc(table_of(root, "scenario"), "scenario");
  cfg.name = sc.str("name", "scenario");
  const std::string map = sc.str("map", "");
  require(!map.empty(), "scenario.map", "required");
  cfg.map_path = (base / map).lexically_normal();
  cfg.duration = sc.num("duration", cfg.duration);
  require(cfg.duration > 0.0, "scenario.duration", "must be > 0");
  const auto seed = sc.integer("seed", 1);
  require(seed >= 0, "scenario.seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.sim.dt = sc.num("dt", cfg.sim.dt);
  require(cfg.sim.dt > 0.0 && cfg.sim.dt <= 1.0, "scenario.dt", "must be in (0, 1]");
  sc.finish();

  if (const toml::table* t = table_of(root, "ego")) {
    Section s(t, "ego");
    EgoConfig e;
    e.route = s.strings("route");
    require(!e.route.empty(), "ego.route", "required (list of lane ids)");
    e.s = s.num("s", e.s);
    e.l = s.num("l", e.l);
    e.speed = s.num("speed", e.speed);
    require(e.speed >= 0.0, "ego.speed", "must be >= 0");
    const std::string ctl = s.str("controller", "builtin_planner");
    require(ctl == "builtin_planner" || ctl == "external", "ego.controller", "must be builtin_planner or external");
    e.external = ctl == "external";
    e.host = s.str("host", e.host);
    e.port = static_cast<int>(s.integer("port", e.port));
    require(e.port > 0 && e.port < 65536, "ego.port", "out of range");
    e.timeout = s.num("timeout", e.timeout);
    require(e.timeout > 0.0, "ego.timeout", "must be > 0");
    e.connect_timeout = s.num("connect_timeout", e.connect_timeout);
    e.neighbors = static_cast<int>(s.integer("neighbors", e.neighbors));
    require(e.neighbors >= 0, "ego.neighbors", "must be >= 0");
    s.finish();
    cfg.ego = e;
  }

  if (const toml::node* fl = root.get("flows")) {
    const toml::array* arr = fl->as_array();
    require(arr && arr->is_array_of_tables(), "flows", "expected [[flows]] tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string name = "flows." + std::to_string(i);
      Section s(arr->get(i)->as_table(), name);
      FlowSpec f;
      f.name = s.str("name", "flow" + std::to_string(i));
      f.routes = s.string_lists("routes");
      require(!f.routes.empty(), name + ".routes", "required");
      f.vehicles_per_hour = s.num("vehicles_per_hour", 0.0);
      require(f.vehicles_per_hour >= 0.0, name + ".vehicles_per_hour", "must be >= 0");
      f.speed_min = s.num("speed_min", f.speed_min);
      f.speed_max = s.num("speed_max", f.speed_max);
      require(f.speed_min >= 0.0 && f.speed_max >= f.speed_min, name + ".speed_max", "must be >= speed_min >= 0");
      f.begin = s.num("begin", f.begin);
      f.end = s.num("end", f.end);
      f.prefill = static_cast<int>(s.integer("prefill", 0));
      require(f.prefill >= 0, name + ".prefill", "must be >= 0");
      s.finish();
      cfg.flows.push_back(std::move(f));
    }
  }

  {
    Section s(table_of(root, "aoi"), "aoi");
    cfg.sim.aoi.radius = s.num("radius", cfg.sim.aoi.radius);
    require(cfg.sim.aoi.radius > 0.0, "aoi.radius", "must be > 0");
    cfg.sim.aoi.hysteresis_factor = s.num("hysteresis_factor", cfg.sim.aoi.hysteresis_factor);
    require(cfg.sim.aoi.hysteresis_factor >= 1.0, "aoi.hysteresis_factor", "must be >= 1");
    s.finish();
  }

  {
    Section s(table_of(root, "behavior"), "behavior");
    BehaviorConfig& b = cfg.sim.behavior;
    IdmParams& p = b.idm;
    p.time_headway = s.num("time_headway", p.time_headway);
    require(p.time_headway > 0, "behavior.time_headway", "must be > 0");
    p.min_gap = s.num("min_gap", p.min_gap);
    require(p.min_gap >= 0, "behavior.min_gap", "must be >= 0");
    p.max_accel = s.num("max_accel", p.max_accel);
    require(p.max_accel > 0, "behavior.max_accel", "must be > 0");
    p.comfort_decel = s.num("comfort_decel", p.comfort_decel);
    require(p.comfort_decel > 0, "behavior.comfort_decel", "must be > 0");
    p.accel_exponent = s.num("accel_exponent", p.accel_exponent);
    require(p.accel_exponent > 0, "behavior.accel_exponent", "must be > 0");
    p.emergency_decel = s.num("emergency_decel", p.emergency_decel);
    require(p.emergency_decel >= p.comfort_decel, "behavior.emergency_decel", "must be >= comfort_decel");
    MobilParams& m = b.mobil;
    m.politeness = s.num("politeness", m.politeness);
    require(m.politeness >= 0 && m.politeness <= 1, "behavior.politeness", "must be in [0, 1]");
    m.change_threshold = s.num("change_threshold", m.change_threshold);
    require(m.change_threshold > 0, "behavior.change_threshold", "must be > 0");
    m.safe_decel = s.num("safe_decel", m.safe_decel);
    require(m.safe_decel > 0, "behavior.safe_decel", "must be > 0");
    m.bias_right = s.num("bias_right", m.bias_right);
    require(m.bias_right >= 0, "behavior.bias_right", "must be >= 0");
    b.coarse_mobil = s.flag("coarse_mobil", b.coarse_mobil);
    b.lane_change_cooldown = s.num("lane_change_cooldown", b.lane_change_cooldown);
    b.speed_jitter = s.num("speed_jitter", b.speed_jitter);
    require(b.speed_jitter >= 0 && b.speed_jitter < 1, "behavior.speed_jitter", "must be in [0, 1)");
    b.vehicle_length = s.num("vehicle_length", b.vehicle_length);
    require(b.vehicle_length > 0, "behavior.vehicle_length", "must be > 0");
    b.vehicle_width = s.num("vehicle_width", b.vehicle_width);
    require(b.vehicle_width > 0, "behavior.vehicle_width", "must be > 0");
    b.lookahead = s.num("lookahead", b.lookahead);
    require(b.lookahead > 0, "behavior.lookahead", "must be > 0");
    s.finish();
  }

  {
    Section s(table_of(root, "planning"), "planning");
    PlanningConfig& p = cfg.sim.planning;
    p.mcts.iterations = static_cast<int>(s.integer("iterations", p.mcts.iterations));
    require(p.mcts.iterations > 0, "planning.iterations", "must be > 0");
    p.mcts.uct_c = s.num("uct_c", p.mcts.uct_c);
    require(p.mcts.uct_c >= 0, "planning.uct_c", "must be >= 0");
    p.mcts.max_depth = static_cast<int>(s.integer("max_depth", p.mcts.max_depth));
    require(p.mcts.max_depth >= 1, "planning.max_depth", "must be >= 1");
    p.mcts.discount = s.num("discount", p.mcts.discount);
    require(p.mcts.discount > 0 && p.mcts.discount <= 1, "planning.discount", "must be in (0, 1]");
    p.epoch = s.num("epoch", p.epoch);
    require(p.epoch >= cfg.sim.dt, "planning.epoch", "must be >= dt");
    p.model.epoch = p.epoch;
    p.horizon = s.num("horizon", p.horizon);
    require(p.horizon >= p.epoch, "planning.horizon", "must be >= epoch");
    p.lane_change_duration = s.num("lane_change_duration", p.lane_change_duration);
    require(p.lane_change_duration > 0, "planning.lane_change_duration", "must be > 0");
    p.lateral_offsets = s.numbers("lateral_offsets", p.lateral_offsets);
    require(!p.lateral_offsets.empty(), "planning.lateral_offsets", "must not be empty");
    p.ttc_ref = s.num("ttc_ref", p.ttc_ref);
    require(p.ttc_ref > 0, "planning.ttc_ref", "must be > 0");
    p.jerk_ref = s.num("jerk_ref", p.jerk_ref);
    require(p.jerk_ref > 0, "planning.jerk_ref", "must be > 0");
    p.perception_radius = s.num("perception_radius", p.perception_radius);
    p.max_neighbors = static_cast<int>(s.integer("max_neighbors", p.max_neighbors));
    require(p.max_neighbors >= 0, "planning.max_neighbors", "must be >= 0");
    p.threads = static_cast<int>(s.integer("threads", p.threads));
    require(p.threads >= 1, "planning.threads", "must be >= 1");
    p.weights.safety = s.num("w_safety", p.weights.safety);
    p.weights.efficiency = s.num("w_efficiency", p.weights.efficiency);
    p.weights.comfort = s.num("w_comfort", p.weights.comfort);
    p.weights.deviation = s.num("w_deviation", p.weights.deviation);
    for (const char* k : {"w_safety", "w_efficiency", "w_comfort", "w_deviation"}) {
      require(s.num(k, 0.0) >= 0, s.field(k), "must be >= 0");
    }
    p.svo.self_weight = s.num("svo_self", p.svo.self_weight);
    p.svo.group_weight = s.num("svo_group", 1.0 - p.svo.self_weight);
    require(p.svo.valid(), "planning.svo_self", "svo_self + svo_group must be 1, both in [0, 1]");
    s.finish();
  }

  {
    Section s(table_of(root, "metrics"), "metrics");
    MetricConfig& m = cfg.metrics;
    m.w_safety = s.num("w_safety", m.w_safety);
    m.w_efficiency = s.num("w_efficiency", m.w_efficiency);
    m.w_comfort = s.num("w_comfort", m.w_comfort);
    require(m.w_safety >= 0 && m.w_efficiency >= 0 && m.w_comfort >= 0 &&
                std::abs(m.w_safety + m.w_efficiency + m.w_comfort - 1.0) < 1e-9,
            "metrics.w_safety", "weights must be >= 0 and sum to 1");
    m.jerk_max = s.num("jerk_max", m.jerk_max);
    require(m.jerk_max > 0, "metrics.jerk_max", "must be > 0");
    m.lat_acc_max = s.num("lat_acc_max", m.lat_acc_max);
    require(m.lat_acc_max > 0, "metrics.lat_acc_max", "must be > 0");
    m.ttc_min = s.num("ttc_min", m.ttc_min);
    require(m.ttc_min > 0, "metrics.ttc_min", "must be > 0");
    if (s.has("time_budget")) {
      m.time_budget = s.num("time_budget", 0.0);
      require(*m.time_budget > 0, "metrics.time_budget", "must be > 0");
    }
    m.emergency_decel = cfg.sim.behavior.idm.emergency_decel;
    s.finish();
  }

  {
    Section s(table_of(root, "replay"), "replay");
    ReplayConfig& r = cfg.sim.replay;
    const std::string tracks = s.str("tracks", "");
    if (!tracks.empty()) cfg.replay_tracks = (base / tracks).lexically_normal();
    r.ttc_threshold = s.num("ttc_threshold", r.ttc_threshold);
    require(r.ttc_threshold > 0, "replay.ttc_threshold", "must be > 0");
    r.horizon = s.num("horizon", r.horizon);
    require(r.horizon > 0, "replay.horizon", "must be > 0");
    r.max_deviation = s.num("max_deviation", r.max_deviation);
    require(r.max_deviation > 0, "replay.max_deviation", "must be > 0");
    r.conflict_clear = s.num("conflict_clear", r.conflict_clear);
    require(r.conflict_clear >= 0, "replay.conflict_clear", "must be >= 0");
    r.blend_duration = s.num("blend_duration", r.blend_duration);
    require(r.blend_duration > 0, "replay.blend_duration", "must be > 0");
    s.finish();
  }

  {
    Section s(table_of(root, "junction"), "junction");
    JunctionConfig& j = cfg.sim.junction;
    j.conflict_distance = s.num("conflict_distance", j.conflict_distance);
    j.request_distance = s.num("request_distance", j.request_distance);
    require(j.request_distance > 0, "junction.request_distance", "must be > 0");
    j.grant_margin = s.num("grant_margin", j.grant_margin);
    s.finish();
  }
  return cfg;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& toml_text, const std::filesystem::path& base_dir,
                              const std::vector<std::string>& overrides) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  for (const std::string& o : overrides) apply_override(root, o);
  return from_table(root, base_dir);
}

ScenarioConfig load_scenario(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = parse_scenario(buf.str(), file.parent_path(), overrides);
  if (cfg.name == "scenario") cfg.name = file.stem().string();
  return cfg;
}

void validate_scenario(const ScenarioConfig& cfg, const RoadNetwork& network) {
  auto check_route = [&](const std::vector<LaneId>& route, const std::string& field) {
    for (const LaneId& id : route) {
      if (!network.has_lane(id)) throw ConfigError(field + ": unknown lane '" + id + "'");
    }
    for (std::size_t i = 1; i < route.size(); ++i) {
      const Lane& a = network.lane(route[i - 1]);
      const bool linked = std::find(a.successors.begin(), a.successors.end(), route[i]) != a.successors.end() ||
                          a.left_neighbor == route[i] || a.right_neighbor == route[i];
      if (!linked) throw ConfigError(field + ": lane '" + route[i] + "' does not follow '" + route[i - 1] + "'");
    }
  };
  if (cfg.ego) {
    check_route(cfg.ego->route, "ego.route");
    const double len = network.lane(cfg.ego->route.front()).length();
    if (cfg.ego->s < 0.0 || cfg.ego->s > len) throw ConfigError("ego.s: outside lane '" + cfg.ego->route.front() + "'");
  }
  for (std::size_t i = 0; i < cfg.flows.size(); ++i) {
    for (std::size_t r = 0; r < cfg.flows[i].routes.size(); ++r) {
      check_route(cfg.flows[i].routes[r], "flows." + std::to_string(i) + ".routes[" + std::to_string(r) + "]");
    }
  }
}

}  // namespace limsim
