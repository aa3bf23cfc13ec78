#pragma once

// Planar geometry for the planning stack: poses, the square robot footprint,
// quadratic level sets (separating ellipsoids), obstacle primitives and the
// intersection predicates used by sensing and collision checking.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

namespace raw {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;
/// Robot body: axis-aligned unit square in the body frame, centered on the pose.
inline constexpr double kFootprintSide = 1.0;

/// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }

/// SE(2) configuration. theta is the heading in radians, unconstrained range.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  Mat2 rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat2 r;
    r << c, -s, s, c;
    return r;
  }
  /// Body-frame coordinates of a world point.
  Vec2 to_local(const Vec2& world) const {
    return rotation().transpose() * (world - position());
  }
  /// World coordinates of a body-frame point.
  Vec2 to_world(const Vec2& local) const {
    return rotation() * local + position();
  }
};

/// Quadratic level-set family value(x) = x'Px + q'x + r.  The safe region is
/// {value <= 0}; the body is certified at the -1 level and obstacles at +1.
struct Ellipsoid {
  Mat2 P = Mat2::Identity();
  Vec2 q = Vec2::Zero();
  double r = -1.0;
};

inline double level_set_value(const Ellipsoid& e, const Vec2& x) {
  return x.dot(e.P * x) + e.q.dot(x) + e.r;
}

/// Canonical radii of the 0 and -1 level sets after the affine normalization
/// that maps the ellipsoid family to concentric circles.  lambda is the
/// minimum of value(.), schur the pivot complement of P's leading entry.
/// Invariant: r1^2 - r2^2 == 1 exactly.
struct LevelSetRadii {
  double r1 = 0.0;
  double r2 = 0.0;
  double lambda = 0.0;
  double schur = 0.0;
};

/// Computes LevelSetRadii by pivot elimination on (P, q/2, r).
/// Throws std::invalid_argument if P is not positive definite or if the -1
/// level set is empty (lambda > -1), which would leave r2 undefined.
inline LevelSetRadii canonical_radii(const Ellipsoid& e) {
  const double u11 = e.P(0, 0);
  const double u2 = 0.5 * (e.P(0, 1) + e.P(1, 0));
  const double u22 = e.P(1, 1);
  const double u3 = 0.5 * e.q(0);
  const double u4 = 0.5 * e.q(1);
  if (!(u11 > 0.0) || !(u11 * u22 - u2 * u2 > 0.0)) {
    throw std::invalid_argument("canonical_radii: P is not positive definite");
  }
  LevelSetRadii out;
  out.schur = u22 - u2 * u2 / u11;
  const double w = u4 - u2 * u3 / u11;
  out.lambda = e.r - u3 * u3 / u11 - w * w / out.schur;
  if (out.lambda > -1.0 + 1e-12) {
    throw std::invalid_argument("canonical_radii: -1 level set is empty (r2 undefined)");
  }
  out.r1 = std::sqrt(-out.lambda);
  out.r2 = std::sqrt(-out.lambda - 1.0);
  return out;
}

/// Re-expresses a body-frame ellipsoid in the world frame; level-set values
/// are preserved pointwise: value_world(x) = value_local(pose.to_local(x)).
inline Ellipsoid transform_ellipsoid(const Ellipsoid& e, const Pose& pose) {
  const Mat2 rot = pose.rotation();
  const Vec2 z = pose.position();
  Ellipsoid w;
  w.P = rot * e.P * rot.transpose();
  const Vec2 rq = rot * e.q;
  w.q = rq - 2.0 * w.P * z;
  w.r = z.dot(w.P * z) - rq.dot(z) + e.r;
  return w;
}

/// Footprint corners in world coordinates, counter-clockwise starting at the
/// front-left corner.
inline std::array<Vec2, 4> footprint_corners(const Pose& pose,
                                             double side = kFootprintSide) {
  const double h = 0.5 * side;
  const std::array<Vec2, 4> local = {Vec2{h, h}, Vec2{-h, h}, Vec2{-h, -h},
                                     Vec2{h, -h}};
  std::array<Vec2, 4> world;
  for (int i = 0; i < 4; ++i) world[i] = pose.to_world(local[i]);
  return world;
}

/// True iff every corner satisfies value <= level.  Containment of the convex
/// footprint follows from corner containment.
inline bool footprint_inside(const Ellipsoid& e, const std::array<Vec2, 4>& corners,
                             double level) {
  for (const auto& c : corners) {
    if (level_set_value(e, c) > level) return false;
  }
  return true;
}

/// True iff the footprint lies in the 0-level intersection of both ellipsoids,
/// the hand-off region between consecutive certificates.
inline bool in_overlap(const Ellipsoid& prev, const Ellipsoid& curr,
                       const std::array<Vec2, 4>& corners) {
  return footprint_inside(prev, corners, 0.0) &&
         footprint_inside(curr, corners, 0.0);
}

// ---------------------------------------------------------------------------
// Obstacle primitives.  Closed-set convention throughout: touching a boundary
// counts as intersecting.
// ---------------------------------------------------------------------------

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

/// Simple polygon, vertices counter-clockwise, no self-intersection.
struct Polygon {
  std::vector<Vec2> vertices;
};

using Obstacle = std::variant<Circle, Polygon>;

/// Axis-aligned rectangle, used for arena bounds.
struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

/// Closed segment intersection test, collinear overlaps included.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                               const Vec2& d) {
  const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = cross2(q - p, r - p);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  const auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), r.x()) - 1e-12 <= q.x() &&
           q.x() <= std::max(p.x(), r.x()) + 1e-12 &&
           std::min(p.y(), r.y()) - 1e-12 <= q.y() &&
           q.y() <= std::max(p.y(), r.y()) + 1e-12;
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, c, b)) return true;
  if (o2 == 0 && on_segment(a, d, b)) return true;
  if (o3 == 0 && on_segment(c, a, d)) return true;
  if (o4 == 0 && on_segment(c, b, d)) return true;
  return false;
}

/// Point-in-polygon by crossing number; boundary points count as inside.
inline bool point_in_polygon(const Vec2& p, const Polygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (dist_point_segment(p, v[i], v[(i + 1) % n]) <= 1e-12) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const bool straddles = (v[i].y() > p.y()) != (v[j].y() > p.y());
    if (straddles) {
      const double x_at = v[j].x() +
          (v[i].x() - v[j].x()) * (p.y() - v[j].y()) / (v[i].y() - v[j].y());
      if (p.x() < x_at) inside = !inside;
    }
  }
  return inside;
}

inline bool point_in_obstacle(const Vec2& p, const Obstacle& obs) {
  if (const auto* c = std::get_if<Circle>(&obs)) {
    return (p - c->center).norm() <= c->radius;
  }
  return point_in_polygon(p, std::get<Polygon>(obs));
}

inline bool segment_intersects_obstacle(const Vec2& a, const Vec2& b,
                                        const Obstacle& obs) {
  if (const auto* c = std::get_if<Circle>(&obs)) {
    return dist_point_segment(c->center, a, b) <= c->radius;
  }
  const auto& poly = std::get<Polygon>(obs);
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (segments_intersect(a, b, v[i], v[(i + 1) % n])) return true;
  }
  return point_in_polygon(a, poly) || point_in_polygon(b, poly);
}

/// True iff the closed segment [a, b] touches any obstacle.
inline bool segment_intersects_obstacles(const Vec2& a, const Vec2& b,
                                         const std::vector<Obstacle>& obstacles) {
  for (const auto& obs : obstacles) {
    if (segment_intersects_obstacle(a, b, obs)) return true;
  }
  return false;
}

/// Exact footprint/obstacle overlap test (closed sets).
inline bool footprint_intersects_obstacle(const Pose& pose, const Obstacle& obs,
                                          double side = kFootprintSide) {
  const double h = 0.5 * side;
  if (const auto* c = std::get_if<Circle>(&obs)) {
    const Vec2 local = pose.to_local(c->center);
    const Vec2 clamped{std::clamp(local.x(), -h, h), std::clamp(local.y(), -h, h)};
    return (local - clamped).norm() <= c->radius;
  }
  const auto& poly = std::get<Polygon>(obs);
  const auto corners = footprint_corners(pose, side);
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = corners[i];
    const Vec2& b = corners[(i + 1) % 4];
    if (segment_intersects_obstacle(a, b, obs)) return true;
  }
  // Remaining case: polygon fully inside the rect (rect-inside-polygon is
  // caught by the edge endpoints above).
  for (const auto& v : poly.vertices) {
    const Vec2 local = pose.to_local(v);
    if (std::abs(local.x()) <= h && std::abs(local.y()) <= h) return true;
  }
  return false;
}

/// True iff the whole footprint stays inside the arena rectangle.
inline bool footprint_in_rect(const Pose& pose, const Rect& rect,
                              double side = kFootprintSide) {
  for (const auto& c : footprint_corners(pose, side)) {
    if (!rect.contains(c)) return false;
  }
  return true;
}

}  // namespace raw
