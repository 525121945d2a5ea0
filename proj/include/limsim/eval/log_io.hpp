#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "limsim/traffic/world.hpp"

namespace limsim {

struct TrajectoryRow {
  std::int64_t tick = 0;
  int vehicle_id = 0;
  double t = 0.0;
  double x = 0.0, y = 0.0, heading = 0.0;
  double speed = 0.0, accel = 0.0, jerk = 0.0, lat_acc = 0.0;
  LaneId lane_id;
  double s = 0.0, l = 0.0;
  double speed_limit = 0.0;
  double ttc = 0.0;  // inf when not closing on a leader
  std::string mode;
};

inline constexpr const char* kTrajectoryHeader =
    "tick,vehicle_id,t,x,y,heading,speed,accel,jerk,lat_acc,lane_id,s,l,speed_limit,ttc,mode";

// Shortest round-trip decimal form.
std::string format_number(double v);

void write_trajectory_header(std::ostream& out);
void write_trajectory_row(std::ostream& out, const TrajectoryRow& r);
// Throws BadLog on a header or field mismatch.
std::vector<TrajectoryRow> read_trajectory(std::istream& in);

void write_event(std::ostream& out, const Event& e);
std::vector<Event> read_events(std::istream& in);

void write_decisions_header(std::ostream& out);
void write_decision(std::ostream& out, const DecisionRecord& d);
std::vector<DecisionRecord> read_decisions(std::istream& in);

// Samples every vehicle after each step; jerk and lateral acceleration are
// differenced against the vehicle's previous row.
class TrajectoryRecorder {
 public:
  explicit TrajectoryRecorder(std::ostream* out = nullptr);
  void record(const World& world);
  const std::vector<TrajectoryRow>& rows() const { return rows_; }

 private:
  struct Prev {
    double accel;
    double heading;
    std::int64_t tick;
  };
  std::ostream* out_;
  std::vector<TrajectoryRow> rows_;
  std::map<int, Prev> prev_;
};

struct EpisodeLog {
  std::vector<TrajectoryRow> rows;
  std::vector<Event> events;
  std::vector<DecisionRecord> decisions;
};

// Reads trajectory.csv, events.jsonl and decisions.csv from a run directory.
EpisodeLog read_episode(const std::filesystem::path& dir);

}  // namespace limsim
