#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace limsim {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr bool operator==(const Vec2&) const = default;
};

inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Normalizes to (-pi, pi].
inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// Signed shortest difference a - b in (-pi, pi].
inline double angle_diff(double a, double b) { return normalize_angle(a - b); }

// Oriented rectangle: center, heading, full length and width.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
};

// Separating-axis test on the four face normals.
inline bool overlaps(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 d = b.center - a.center;
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  if (d.x * d.x + d.y * d.y > reach * reach) return false;
  const Vec2 axes[4] = {unit(a.heading), unit(a.heading + kPi / 2), unit(b.heading),
                        unit(b.heading + kPi / 2)};
  const Vec2 ua = axes[0], va = axes[1], ub = axes[2], vb = axes[3];
  for (const Vec2& ax : axes) {
    const double ra = 0.5 * a.length * std::abs(ua.dot(ax)) + 0.5 * a.width * std::abs(va.dot(ax));
    const double rb = 0.5 * b.length * std::abs(ub.dot(ax)) + 0.5 * b.width * std::abs(vb.dot(ax));
    if (std::abs(d.dot(ax)) > ra + rb) return false;
  }
  return true;
}

}  // namespace limsim
