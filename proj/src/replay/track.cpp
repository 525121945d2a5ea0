#include "limsim/replay/track.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "limsim/common/error.hpp"

namespace limsim {

ReplayTrack::ReplayTrack(int vehicle_id, std::vector<TrackSample> samples)
    : id_(vehicle_id), samples_(std::move(samples)) {
  const std::string who = "track " + std::to_string(id_);
  if (samples_.empty()) throw BadLog(who + " has no samples");
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    const double gap = samples_[i].t - samples_[i - 1].t;
    if (!(gap > 0.0)) throw BadLog(who + ": timestamps not strictly increasing at row " + std::to_string(i));
    if (gap > 1.0 + 1e-9) throw BadLog(who + ": sample rate below 1 Hz at t=" + std::to_string(samples_[i].t));
  }
}

CartesianPose ReplayTrack::at(double t) const {
  const auto& s = samples_;
  if (t <= s.front().t) return {s.front().x, s.front().y, s.front().heading, s.front().speed, 0.0, 0.0};
  if (t >= s.back().t) return {s.back().x, s.back().y, s.back().heading, s.back().speed, 0.0, 0.0};
  auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const TrackSample& a) { return v < a.t; });
  const TrackSample& b = *it;
  const TrackSample& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  CartesianPose p;
  p.x = a.x + u * (b.x - a.x);
  p.y = a.y + u * (b.y - a.y);
  p.heading = normalize_angle(a.heading + u * angle_diff(b.heading, a.heading));
  p.speed = a.speed + u * (b.speed - a.speed);
  p.accel = (b.speed - a.speed) / (b.t - a.t);
  return p;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t row, const char* col) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw BadLog("row " + std::to_string(row) + ": column " + col + " is not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::map<int, ReplayTrack> read_tracks(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw BadLog("replay log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const char* required[] = {"vehicle_id", "t", "x", "y", "heading", "speed"};
  std::size_t idx[6];
  for (int k = 0; k < 6; ++k) {
    auto it = std::find(header.begin(), header.end(), required[k]);
    if (it == header.end()) throw BadLog(std::string("replay log header lacks column ") + required[k]);
    idx[k] = static_cast<std::size_t>(it - header.begin());
  }
  std::map<int, std::vector<TrackSample>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < header.size()) throw BadLog("row " + std::to_string(row) + " has too few columns");
    const int id = static_cast<int>(to_double(f[idx[0]], row, "vehicle_id"));
    rows[id].push_back({to_double(f[idx[1]], row, "t"), to_double(f[idx[2]], row, "x"),
                        to_double(f[idx[3]], row, "y"), to_double(f[idx[4]], row, "heading"),
                        to_double(f[idx[5]], row, "speed")});
  }
  std::map<int, ReplayTrack> out;
  for (auto& [id, samples] : rows) out.emplace(id, ReplayTrack(id, std::move(samples)));
  return out;
}

std::map<int, ReplayTrack> read_tracks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadLog("cannot open replay log " + path);
  return read_tracks(in);
}

const char* to_string(ReplayMode m) { return m == ReplayMode::Following ? "following" : "overridden"; }
const char* to_string(ConflictReason r) {
  return r == ConflictReason::rear_end_ttc ? "rear_end_ttc" : "footprint_overlap";
}

}  // namespace limsim
