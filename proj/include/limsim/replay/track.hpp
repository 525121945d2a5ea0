#pragma once

#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limsim/frenet/frenet.hpp"

namespace limsim {

struct TrackSample {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
};

// Recorded path of one vehicle; linear in position and speed, heading blended
// along the shorter arc.
class ReplayTrack {
 public:
  ReplayTrack() = default;
  // Throws BadLog when timestamps are not strictly increasing or samples are
  // further apart than 1 s.
  ReplayTrack(int vehicle_id, std::vector<TrackSample> samples);

  int vehicle_id() const { return id_; }
  const std::vector<TrackSample>& samples() const { return samples_; }
  double t_start() const { return samples_.front().t; }
  double t_end() const { return samples_.back().t; }
  bool covers(double t) const { return !samples_.empty() && t >= t_start() && t <= t_end(); }
  // Interpolated pose, t clamped to the track.
  CartesianPose at(double t) const;

 private:
  int id_ = 0;
  std::vector<TrackSample> samples_;
};

// CSV with header `vehicle_id,t,x,y,heading,speed`; further columns are
// ignored. Rows of one vehicle may be interleaved with others. Throws BadLog.
std::map<int, ReplayTrack> read_tracks(std::istream& in);
std::map<int, ReplayTrack> read_tracks_file(const std::string& path);

enum class ReplayMode { Following, Overridden };
enum class ConflictReason { rear_end_ttc, footprint_overlap };

const char* to_string(ReplayMode m);
const char* to_string(ConflictReason r);

struct Conflict {
  ConflictReason reason = ConflictReason::rear_end_ttc;
  double ttc = std::numeric_limits<double>::infinity();
  int other_id = -1;
};

struct OverrideState {
  ReplayMode mode = ReplayMode::Following;
  double since = 0.0;
  std::optional<ConflictReason> reason;
  double deviation = 0.0;
  double last_conflict = -std::numeric_limits<double>::infinity();
};

}  // namespace limsim
