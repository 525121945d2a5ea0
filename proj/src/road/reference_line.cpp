#include "limsim/road/reference_line.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "limsim/common/error.hpp"

namespace limsim {

namespace {

constexpr double kStraight = 1e-12;

bool poses_match(const Pose2& a, const Pose2& b, double tol) {
  return std::hypot(a.x - b.x, a.y - b.y) <= tol &&
         std::abs(angle_diff(a.heading, b.heading)) <= tol;
}

}  // namespace

Pose2 Segment::at(double ds) const {
  const double h0 = start.heading;
  if (std::abs(curvature) < kStraight) {
    return {start.x + ds * std::cos(h0), start.y + ds * std::sin(h0), h0};
  }
  const double h1 = h0 + curvature * ds;
  return {start.x + (std::sin(h1) - std::sin(h0)) / curvature,
          start.y - (std::cos(h1) - std::cos(h0)) / curvature, normalize_angle(h1)};
}

ReferenceLine::ReferenceLine(std::vector<Segment> segments, double joint_tolerance)
    : segments_(std::move(segments)) {
  double s = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    Segment& seg = segments_[i];
    if (!(seg.length > 0.0)) {
      throw std::invalid_argument("segment " + std::to_string(i) + " has non-positive length");
    }
    seg.start.heading = normalize_angle(seg.start.heading);
    if (i > 0 && !poses_match(segments_[i - 1].end(), seg.start, joint_tolerance)) {
      throw std::invalid_argument("segment " + std::to_string(i) +
                                  " is not continuous with its predecessor");
    }
    seg.s0 = s;
    s += seg.length;
  }
  length_ = s;

  if (segments_.empty()) return;
  const auto n = static_cast<std::size_t>(std::ceil(length_ / kSampleStep)) + 1;
  samples_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) samples_.push_back(evaluate(sample_s(i)).pos);
}

double ReferenceLine::sample_s(std::size_t i) const {
  return std::min(static_cast<double>(i) * kSampleStep, length_);
}

std::size_t ReferenceLine::segment_index(double s) const {
  // Last segment whose s0 <= s.
  auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                             [](double v, const Segment& seg) { return v < seg.s0; });
  if (it == segments_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
}

ReferencePoint ReferenceLine::evaluate(double s) const {
  s = std::clamp(s, 0.0, length_);
  const Segment& seg = segments_[segment_index(s)];
  const Pose2 p = seg.at(std::min(s - seg.s0, seg.length));
  return {{p.x, p.y}, p.heading, seg.curvature};
}

ReferenceLine ReferenceLine::offset(double d) const {
  std::vector<Segment> out;
  out.reserve(segments_.size());
  for (const Segment& seg : segments_) {
    const double scale = 1.0 - seg.curvature * d;
    if (scale <= 0.0) throw std::invalid_argument("offset collapses an arc segment");
    const Vec2 n = unit(seg.start.heading + kPi / 2);
    Segment o;
    o.start = {seg.start.x + d * n.x, seg.start.y + d * n.y, seg.start.heading};
    o.length = seg.length * scale;
    o.curvature = seg.curvature / scale;
    out.push_back(o);
  }
  return ReferenceLine(std::move(out), 1e-6);
}

ReferenceLine ReferenceLine::reversed() const {
  std::vector<Segment> out;
  out.reserve(segments_.size());
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    const Pose2 e = it->end();
    Segment r;
    r.start = {e.x, e.y, normalize_angle(e.heading + kPi)};
    r.length = it->length;
    r.curvature = -it->curvature;
    out.push_back(r);
  }
  return ReferenceLine(std::move(out), 1e-6);
}

ReferenceLine ReferenceLine::transformed(double angle, Vec2 translation) const {
  const double c = std::cos(angle), sn = std::sin(angle);
  std::vector<Segment> out = segments_;
  for (Segment& seg : out) {
    const double x = seg.start.x, y = seg.start.y;
    seg.start.x = c * x - sn * y + translation.x;
    seg.start.y = sn * x + c * y + translation.y;
    seg.start.heading = normalize_angle(seg.start.heading + angle);
  }
  return ReferenceLine(std::move(out), 1e-6);
}

ReferenceLine ReferenceLine::concatenate(std::span<const ReferenceLine* const> parts,
                                         double tolerance) {
  std::vector<Segment> out;
  for (const ReferenceLine* part : parts) {
    for (const Segment& seg : part->segments()) out.push_back(seg);
  }
  return ReferenceLine(std::move(out), tolerance);
}

double ReferenceLine::refine(Vec2 p, double s, const ProjectionOptions& opts) const {
  const double lo = std::max(0.0, opts.s_min.value_or(0.0));
  const double hi = std::min(length_, opts.s_max.value_or(length_));
  for (int it = 0; it < opts.newton_max_iterations; ++it) {
    const ReferencePoint r = evaluate(s);
    const Vec2 d = p - r.pos;
    const double g = d.dot(unit(r.heading));
    const double gp = -1.0 + r.curvature * d.dot(unit(r.heading + kPi / 2));
    if (std::abs(gp) < 1e-12) break;
    const double next = std::clamp(s - g / gp, lo, hi);
    const bool done = std::abs(next - s) < opts.newton_tolerance;
    s = next;
    if (done) break;
  }
  return s;
}

Projection ReferenceLine::project(Vec2 p, const ProjectionOptions& opts) const {
  if (samples_.empty()) throw std::invalid_argument("projection onto an empty reference line");
  const std::size_t last = samples_.size() - 1;
  std::size_t lo = 0, hi = last;
  if (opts.s_min) lo = static_cast<std::size_t>(std::clamp(std::floor(*opts.s_min / kSampleStep), 0.0, double(last)));
  if (opts.s_max) hi = static_cast<std::size_t>(std::clamp(std::ceil(*opts.s_max / kSampleStep), 0.0, double(last)));
  if (lo > hi) std::swap(lo, hi);

  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = lo; i <= hi; ++i) dmin = std::min(dmin, (p - samples_[i]).norm());

  // Each contiguous run of near-minimal samples brackets one local foot point.
  struct Candidate {
    double s;
    double l;
    double dist;
  };
  std::vector<Candidate> found;
  const double band = dmin + kSampleStep;
  std::size_t i = lo;
  while (i <= hi) {
    if ((p - samples_[i]).norm() > band) {
      ++i;
      continue;
    }
    std::size_t best = i;
    double best_d = (p - samples_[i]).norm();
    while (i <= hi && (p - samples_[i]).norm() <= band) {
      const double di = (p - samples_[i]).norm();
      if (di < best_d) {
        best_d = di;
        best = i;
      }
      ++i;
    }
    const double s = refine(p, sample_s(best), opts);
    const ReferencePoint r = evaluate(s);
    const Vec2 d = p - r.pos;
    const double l = d.dot(unit(r.heading + kPi / 2));
    if (1.0 - r.curvature * l <= 1e-9) {
      throw ProjectionAmbiguous("point lies at or beyond the center of curvature at s=" +
                                std::to_string(s));
    }
    found.push_back({s, l, d.norm()});
  }

  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.s < b.s);
  });
  Candidate best = found.front();
  for (std::size_t k = 1; k < found.size(); ++k) {
    const Candidate& c = found[k];
    if (c.dist - best.dist > opts.tie_tolerance) break;
    if (std::abs(c.s - best.s) > opts.tie_tolerance) {
      throw ProjectionAmbiguous("point is equidistant to s=" + std::to_string(best.s) +
                                " and s=" + std::to_string(c.s));
    }
    if (c.s < best.s) best = c;
  }
  if (std::abs(best.l) > opts.corridor_half_width) {
    throw OutOfCorridor("lateral offset " + std::to_string(best.l) + " exceeds corridor");
  }
  return {best.s, best.l};
}

bool ReferenceLine::operator==(const ReferenceLine& o) const {
  if (segments_.size() != o.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment &a = segments_[i], &b = o.segments_[i];
    if (a.start.x != b.start.x || a.start.y != b.start.y || a.start.heading != b.start.heading ||
        a.length != b.length || a.curvature != b.curvature) {
      return false;
    }
  }
  return true;
}

}  // namespace limsim
