#pragma once

// Planar geometry for the intersection: lane paths parameterised by arc
// length, vehicle footprints and overlap tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

namespace probshield {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians, counter-clockwise from +x
};

/// Straight piece of a path.
struct LineSegment {
  Vec2 start;
  double heading = 0.0;
  double length = 0.0;
};

/// Circular arc; a positive sweep turns left.
struct ArcSegment {
  Vec2 centre;
  double radius = 0.0;
  double start_angle = 0.0;  // polar angle of the start point around centre
  double sweep = 0.0;

  double length() const { return radius * std::abs(sweep); }
};

/// A lane-following path parameterised by arc length. Queries past either end
/// extrapolate along the end tangent so look-ahead stays well defined.
class Path {
 public:
  Path() = default;

  /// Starts a path at `start` facing `heading`.
  Path(Vec2 start, double heading) : cursor_{start, heading} {}

  Path& straight(double length) {
    if (length < 0.0) throw std::invalid_argument("Path::straight: negative length");
    segments_.push_back(LineSegment{cursor_.position, cursor_.heading, length});
    cursor_.position = cursor_.position + length * unit(cursor_.heading);
    total_ += length;
    return *this;
  }

  /// Turns by `sweep` radians (positive = left) on a circle of `radius`.
  Path& arc(double radius, double sweep) {
    if (radius <= 0.0) throw std::invalid_argument("Path::arc: radius must be positive");
    const double side = sweep > 0.0 ? 1.0 : -1.0;
    const double normal = cursor_.heading + side * std::numbers::pi / 2.0;
    const Vec2 centre = cursor_.position + radius * unit(normal);
    const double start_angle = normal + std::numbers::pi;
    ArcSegment seg{centre, radius, start_angle, sweep};
    segments_.push_back(seg);
    cursor_.position = centre + radius * unit(start_angle + sweep);
    cursor_.heading += sweep;
    total_ += seg.length();
    return *this;
  }

  double length() const { return total_; }
  bool empty() const { return segments_.empty(); }

  Pose pose(double s) const {
    if (segments_.empty()) return cursor_;
    if (s <= 0.0) {
      const Pose p0 = segment_pose(segments_.front(), 0.0);
      return {p0.position + s * unit(p0.heading), p0.heading};
    }
    double offset = 0.0;
    for (const auto& seg : segments_) {
      const double len = segment_length(seg);
      if (s <= offset + len) return segment_pose(seg, s - offset);
      offset += len;
    }
    return {cursor_.position + (s - total_) * unit(cursor_.heading), cursor_.heading};
  }

 private:
  using Segment = std::variant<LineSegment, ArcSegment>;

  static double segment_length(const Segment& seg) {
    if (const auto* line = std::get_if<LineSegment>(&seg)) return line->length;
    return std::get<ArcSegment>(seg).length();
  }

  static Pose segment_pose(const Segment& seg, double s) {
    if (const auto* line = std::get_if<LineSegment>(&seg)) {
      return {line->start + s * unit(line->heading), line->heading};
    }
    const auto& arc = std::get<ArcSegment>(seg);
    const double side = arc.sweep > 0.0 ? 1.0 : -1.0;
    const double angle = arc.start_angle + side * s / arc.radius;
    return {arc.centre + arc.radius * unit(angle), angle + side * std::numbers::pi / 2.0};
  }

  std::vector<Segment> segments_;
  Pose cursor_{};
  double total_ = 0.0;
};

/// Oriented rectangle.
struct OrientedBox {
  Vec2 centre;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 u = unit(heading);
    const Vec2 n{-u.y, u.x};
    return {centre + half_length * u + half_width * n, centre + half_length * u - half_width * n,
            centre - half_length * u - half_width * n, centre - half_length * u + half_width * n};
  }

  OrientedBox inflated(double by) const {
    return {centre, heading, half_length + by, half_width + by};
  }
};

struct Disc {
  Vec2 centre;
  double radius = 0.0;
};

inline OrientedBox footprint(const Pose& pose, double length, double width) {
  return {pose.position, pose.heading, length / 2.0, width / 2.0};
}

namespace detail {

inline void project(const std::array<Vec2, 4>& pts, Vec2 axis, double& lo, double& hi) {
  lo = hi = dot(pts[0], axis);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = dot(pts[i], axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

}  // namespace detail

/// Separating-axis test; touching boxes count as overlapping.
inline bool overlaps(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{unit(a.heading), unit(a.heading + std::numbers::pi / 2.0),
                                 unit(b.heading), unit(b.heading + std::numbers::pi / 2.0)};
  for (const Vec2 axis : axes) {
    double a_lo, a_hi, b_lo, b_hi;
    detail::project(ca, axis, a_lo, a_hi);
    detail::project(cb, axis, b_lo, b_hi);
    if (a_hi < b_lo || b_hi < a_lo) return false;
  }
  return true;
}

inline bool overlaps(const OrientedBox& box, const Disc& disc) {
  const Vec2 u = unit(box.heading);
  const Vec2 n{-u.y, u.x};
  const Vec2 d = disc.centre - box.centre;
  const double along = std::clamp(dot(d, u), -box.half_length, box.half_length);
  const double across = std::clamp(dot(d, n), -box.half_width, box.half_width);
  const Vec2 closest = box.centre + along * u + across * n;
  return norm(disc.centre - closest) <= disc.radius;
}

}  // namespace probshield
