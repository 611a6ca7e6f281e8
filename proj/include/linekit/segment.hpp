#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace linekit {

/// Detected 2D line segment in original-image pixel coordinates.
/// Pixel centers sit at integer coordinates. Endpoints are ordered so that
/// `angle` (the direction of p2 - p1) lies in (-pi/2, pi/2].
struct LineSegment2D {
  Eigen::Vector2d p1{0.0, 0.0};
  Eigen::Vector2d p2{0.0, 0.0};
  double length = 0.0;
  double angle = 0.0;  // radians, (-pi/2, pi/2]
  int layer = 0;       // pyramid layer the segment was detected on

  Eigen::Vector2d midpoint() const { return 0.5 * (p1 + p2); }
  Eigen::Vector2d direction() const { return (p2 - p1) / length; }
};

/// Builds a segment with canonical endpoint order and consistent
/// length/angle fields.
inline LineSegment2D make_segment(Eigen::Vector2d a, Eigen::Vector2d b, int layer = 0) {
  Eigen::Vector2d d = b - a;
  if (d.x() < 0.0 || (d.x() == 0.0 && d.y() < 0.0)) std::swap(a, b);
  LineSegment2D seg;
  seg.p1 = a;
  seg.p2 = b;
  seg.length = (b - a).norm();
  seg.angle = seg.length > 0.0 ? std::atan2(seg.p2.y() - seg.p1.y(), seg.p2.x() - seg.p1.x()) : 0.0;
  seg.layer = layer;
  return seg;
}

/// Absolute difference between two undirected line angles, in [0, pi/2].
inline double folded_angle_diff(double a, double b) {
  constexpr double pi = std::numbers::pi;
  double d = std::fmod(std::abs(a - b), pi);
  return std::min(d, pi - d);
}

/// Euclidean distance from point p to the closed segment [a, b].
inline double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                     const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

/// Smallest distance between two closed segments (0 when they intersect).
inline double segment_segment_distance(const LineSegment2D& s, const LineSegment2D& t) {
  auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const Eigen::Vector2d r = s.p2 - s.p1;
  const Eigen::Vector2d q = t.p2 - t.p1;
  const double denom = cross(r, q);
  if (denom != 0.0) {
    const double u = cross(t.p1 - s.p1, q) / denom;
    const double v = cross(t.p1 - s.p1, r) / denom;
    if (u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0) return 0.0;
  }
  double d = std::min(point_segment_distance(s.p1, t.p1, t.p2),
                      point_segment_distance(s.p2, t.p1, t.p2));
  d = std::min(d, point_segment_distance(t.p1, s.p1, s.p2));
  d = std::min(d, point_segment_distance(t.p2, s.p1, s.p2));
  return d;
}

}  // namespace linekit
