#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "limsim/common/math.hpp"

namespace limsim {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// One constant-curvature primitive. curvature == 0 is a line.
struct Segment {
  Pose2 start;
  double length = 0.0;
  double curvature = 0.0;
  double s0 = 0.0;  // arc length at the segment start, filled by ReferenceLine

  Pose2 at(double ds) const;
  Pose2 end() const { return at(length); }
};

struct ReferencePoint {
  Vec2 pos;
  double heading = 0.0;
  double curvature = 0.0;
};

struct ProjectionOptions {
  double corridor_half_width = 10.0;
  double tie_tolerance = 1e-6;
  double newton_tolerance = 1e-9;
  int newton_max_iterations = 20;
  // Optional arc-length window restricting the search (e.g. a tracking hint).
  std::optional<double> s_min;
  std::optional<double> s_max;
};

struct Projection {
  double s = 0.0;
  double l = 0.0;
};

// Arc-length parameterized chain of line/arc segments with a fixed-step sample
// table used to bracket foot-point searches.
class ReferenceLine {
 public:
  static constexpr double kSampleStep = 0.5;
  static constexpr double kJointTolerance = 1e-6;

  ReferenceLine() = default;
  // Throws std::invalid_argument on non-positive lengths or joints that are not
  // C0-continuous in position and heading within `joint_tolerance`.
  explicit ReferenceLine(std::vector<Segment> segments, double joint_tolerance = kJointTolerance);

  double length() const { return length_; }
  bool empty() const { return segments_.empty(); }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Vec2>& samples() const { return samples_; }
  double sample_s(std::size_t i) const;

  std::size_t segment_index(double s) const;
  // s is clamped to [0, length].
  ReferencePoint evaluate(double s) const;

  // Lateral offset by d (left positive). Throws std::invalid_argument when an
  // arc would collapse (d * curvature >= 1).
  ReferenceLine offset(double d) const;
  ReferenceLine reversed() const;
  // Rigid transform: rotate by `angle` about the origin, then translate.
  ReferenceLine transformed(double angle, Vec2 translation) const;

  // Joins lines end to start; joints only need to match within `tolerance`.
  static ReferenceLine concatenate(std::span<const ReferenceLine* const> parts,
                                   double tolerance = 1e-3);

  // Closest foot point. Throws ProjectionAmbiguous or OutOfCorridor.
  Projection project(Vec2 p, const ProjectionOptions& opts = {}) const;

  bool operator==(const ReferenceLine& o) const;

 private:
  double refine(Vec2 p, double s, const ProjectionOptions& opts) const;

  std::vector<Segment> segments_;
  std::vector<Vec2> samples_;
  double length_ = 0.0;
};

}  // namespace limsim
