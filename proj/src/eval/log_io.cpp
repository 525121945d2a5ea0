#include "limsim/eval/log_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "limsim/common/error.hpp"

namespace limsim {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view f, std::size_t line_no) {
  double v = 0.0;
  const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
  if (r.ec != std::errc() || r.ptr != f.data() + f.size()) {
    throw BadLog("line " + std::to_string(line_no) + ": '" + std::string(f) + "' is not a number");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view f, std::size_t line_no) {
  Int v = 0;
  const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
  if (r.ec != std::errc() || r.ptr != f.data() + f.size()) {
    throw BadLog("line " + std::to_string(line_no) + ": '" + std::string(f) + "' is not an integer");
  }
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void write_trajectory_header(std::ostream& out) { out << kTrajectoryHeader << '\n'; }

void write_trajectory_row(std::ostream& out, const TrajectoryRow& r) {
  out << r.tick << ',' << r.vehicle_id << ',' << format_number(r.t) << ',' << format_number(r.x) << ','
      << format_number(r.y) << ',' << format_number(r.heading) << ',' << format_number(r.speed) << ','
      << format_number(r.accel) << ',' << format_number(r.jerk) << ',' << format_number(r.lat_acc) << ','
      << r.lane_id << ',' << format_number(r.s) << ',' << format_number(r.l) << ',' << format_number(r.speed_limit)
      << ',' << format_number(r.ttc) << ',' << r.mode << '\n';
}

std::vector<TrajectoryRow> read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw BadLog("empty trajectory log");
  strip_cr(line);
  if (line != kTrajectoryHeader) throw BadLog("unexpected trajectory header: " + line);
  std::vector<TrajectoryRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 16) throw BadLog("line " + std::to_string(n) + ": expected 16 fields");
    TrajectoryRow r;
    r.tick = parse_int<std::int64_t>(f[0], n);
    r.vehicle_id = parse_int<int>(f[1], n);
    r.t = parse_double(f[2], n);
    r.x = parse_double(f[3], n);
    r.y = parse_double(f[4], n);
    r.heading = parse_double(f[5], n);
    r.speed = parse_double(f[6], n);
    r.accel = parse_double(f[7], n);
    r.jerk = parse_double(f[8], n);
    r.lat_acc = parse_double(f[9], n);
    r.lane_id = std::string(f[10]);
    r.s = parse_double(f[11], n);
    r.l = parse_double(f[12], n);
    r.speed_limit = parse_double(f[13], n);
    r.ttc = parse_double(f[14], n);
    r.mode = std::string(f[15]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_event(std::ostream& out, const Event& e) { out << to_json(e).dump() << '\n'; }

std::vector<Event> read_events(std::istream& in) {
  std::vector<Event> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw BadLog("events line " + std::to_string(n) + ": " + ex.what());
    }
  }
  return out;
}

void write_decisions_header(std::ostream& out) { out << "tick,time,decision_time,action\n"; }

void write_decision(std::ostream& out, const DecisionRecord& d) {
  out << d.tick << ',' << format_number(d.time) << ',' << format_number(d.decision_time) << ',' << d.action << '\n';
}

std::vector<DecisionRecord> read_decisions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  strip_cr(line);
  if (line != "tick,time,decision_time,action") throw BadLog("unexpected decisions header: " + line);
  std::vector<DecisionRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw BadLog("decisions line " + std::to_string(n) + ": expected 4 fields");
    out.push_back({parse_int<std::int64_t>(f[0], n), parse_double(f[1], n), parse_double(f[2], n), std::string(f[3])});
  }
  return out;
}

TrajectoryRecorder::TrajectoryRecorder(std::ostream* out) : out_(out) {
  if (out_) write_trajectory_header(*out_);
}

void TrajectoryRecorder::record(const World& world) {
  const double dt = world.dt();
  for (const auto& [id, v] : world.vehicles()) {
    TrajectoryRow r;
    r.tick = world.tick();
    r.vehicle_id = id;
    r.t = world.time();
    r.x = v.pose.x;
    r.y = v.pose.y;
    r.heading = v.pose.heading;
    r.speed = v.pose.speed;
    r.accel = v.pose.accel;
    auto it = prev_.find(id);
    if (it != prev_.end() && it->second.tick + 1 == world.tick()) {
      r.jerk = (r.accel - it->second.accel) / dt;
      r.lat_acc = r.speed * angle_diff(r.heading, it->second.heading) / dt;
    }
    r.lane_id = v.lane_id;
    r.s = v.frenet.s;
    r.l = v.frenet.l;
    r.speed_limit = v.lane_id.empty() ? 0.0 : world.network().lane(v.lane_id).speed_limit;
    r.ttc = v.lane_id.empty() ? std::numeric_limits<double>::infinity() : world.ttc_of(v);
    r.mode = to_string(v.control_mode);
    prev_[id] = {r.accel, r.heading, r.tick};
    if (out_) write_trajectory_row(*out_, r);
    rows_.push_back(std::move(r));
  }
}

EpisodeLog read_episode(const std::filesystem::path& dir) {
  EpisodeLog log;
  std::ifstream traj(dir / "trajectory.csv");
  if (!traj) throw BadLog("missing " + (dir / "trajectory.csv").string());
  log.rows = read_trajectory(traj);
  std::ifstream ev(dir / "events.jsonl");
  if (!ev) throw BadLog("missing " + (dir / "events.jsonl").string());
  log.events = read_events(ev);
  std::ifstream dec(dir / "decisions.csv");
  if (dec) log.decisions = read_decisions(dec);
  return log;
}

}  // namespace limsim
