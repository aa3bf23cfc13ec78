#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <raw/geometry.hpp>

namespace raw {

// World model: rectangular arena, static obstacles, one start/goal task.
struct Environment {
  Rect bounds;
  std::vector<Obstacle> obstacles;
  Pose start;
  Vec2 goal = Vec2::Zero();
};

// Semantic checks beyond file syntax; empty result means valid.
inline std::vector<std::string> environment_errors(const Environment& env) {
  std::vector<std::string> errors;
  if (!(env.bounds.xmin < env.bounds.xmax && env.bounds.ymin < env.bounds.ymax)) {
    errors.push_back("bounds rectangle is empty");
  }
  if (!footprint_in_rect(env.start, env.bounds)) {
    errors.push_back("start footprint leaves the bounds");
  }
  for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
    if (footprint_intersects_obstacle(env.start, env.obstacles[i])) {
      errors.push_back("start footprint intersects obstacle " + std::to_string(i));
    }
    if (point_in_obstacle(env.goal, env.obstacles[i])) {
      errors.push_back("goal lies inside obstacle " + std::to_string(i));
    }
  }
  if (!env.bounds.contains(env.goal)) {
    errors.push_back("goal lies outside the bounds");
  }
  return errors;
}

// Sensor cone geometry; angles in degrees.
struct FovParams {
  double r_max = 5.0;
  double dr = 0.2;
  double theta_max = 60.0;
  double dtheta = 1.0;
};

namespace detail {

inline int exact_count(double num, double den, const char* what) {
  const double ratio = num / den;
  const double rounded = std::round(ratio);
  if (!(den > 0) || rounded < 1 || std::abs(ratio - rounded) > 1e-9) {
    throw std::invalid_argument(std::string("field of view: ") + what +
                                " must divide evenly");
  }
  return static_cast<int>(rounded);
}

}  // namespace detail

// Polar lattice of candidate waypoints attached to a pose.  Points are
// bearing-major: j = i_theta * n_r + i_r, bearings from -theta_max, ranges
// from dr outward.
struct FovGrid {
  std::vector<Vec2> points;
  std::vector<std::pair<int, int>> polar;  // (i_r, i_theta), 0-based
  int n_r = 0;
  int n_theta = 0;

  int size() const { return static_cast<int>(points.size()); }
};

inline FovGrid make_grid(const Pose& pose, const FovParams& params) {
  FovGrid grid;
  grid.n_r = detail::exact_count(params.r_max, params.dr, "r_max / dr");
  grid.n_theta =
      2 * detail::exact_count(params.theta_max, params.dtheta, "theta_max / dtheta") + 1;
  grid.points.reserve(static_cast<std::size_t>(grid.n_r) * grid.n_theta);
  grid.polar.reserve(grid.points.capacity());
  for (int i_theta = 0; i_theta < grid.n_theta; ++i_theta) {
    const double bearing =
        deg_to_rad(-params.theta_max + i_theta * params.dtheta) + pose.theta;
    const Vec2 dir{std::cos(bearing), std::sin(bearing)};
    for (int i_r = 0; i_r < grid.n_r; ++i_r) {
      const double range = (i_r + 1) * params.dr;
      grid.points.push_back(pose.position() + range * dir);
      grid.polar.emplace_back(i_r, i_theta);
    }
  }
  return grid;
}

struct PointCloud {
  std::vector<Vec2> points;
};

namespace detail {

class SectorFilter {
 public:
  SectorFilter(const Pose& pose, const FovParams& params)
      : origin_(pose.position()),
        heading_(pose.theta),
        r_max_(params.r_max),
        half_angle_(deg_to_rad(params.theta_max)) {}

  bool admits(const Vec2& p) const {
    const Vec2 v = p - origin_;
    const double range = v.norm();
    if (!(range > 0.0) || range > r_max_) return false;
    return std::abs(wrap_angle(std::atan2(v.y(), v.x()) - heading_)) <=
           half_angle_;
  }

 private:
  Vec2 origin_;
  double heading_;
  double r_max_;
  double half_angle_;
};

inline void sample_segment(const Vec2& a, const Vec2& b, double step,
                           const SectorFilter& fov, PointCloud& out) {
  // Samples [a, b); the shared endpoint belongs to the next edge.
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int k = 0; k < n; ++k) {
    const Vec2 p = a + (static_cast<double>(k) / n) * (b - a);
    if (fov.admits(p)) out.points.push_back(p);
  }
}

inline void sample_boundary(const Obstacle& obstacle, double step,
                            const SectorFilter& fov, PointCloud& out) {
  if (const auto* circle = std::get_if<Circle>(&obstacle)) {
    const double perimeter = 2.0 * kPi * circle->radius;
    const int n = std::max(3, static_cast<int>(std::ceil(perimeter / step)));
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * kPi * k / n;
      const Vec2 p = circle->center +
                     circle->radius * Vec2{std::cos(a), std::sin(a)};
      if (fov.admits(p)) out.points.push_back(p);
    }
    return;
  }
  const auto& poly = std::get<Polygon>(obstacle);
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    sample_segment(poly.vertices[i], poly.vertices[(i + 1) % n], step, fov, out);
  }
}

}  // namespace detail

// Boundary samples of every obstacle plus the arena walls, restricted to
// the FOV sector.  No occlusion shadowing: anything inside the sector is
// sensed.
inline PointCloud sense(const Environment& env, const Pose& pose,
                        const FovParams& params, double sample_step = 0.1) {
  if (!(sample_step > 0)) {
    throw std::invalid_argument("sense: sample_step must be positive");
  }
  if (!env.bounds.contains(pose.position())) {
    throw std::invalid_argument("sense: pose lies outside the bounds");
  }
  const detail::SectorFilter fov(pose, params);
  PointCloud cloud;
  for (const auto& obstacle : env.obstacles) {
    detail::sample_boundary(obstacle, sample_step, fov, cloud);
  }
  const Rect& b = env.bounds;
  const Vec2 corners[4] = {{b.xmin, b.ymin}, {b.xmax, b.ymin},
                           {b.xmax, b.ymax}, {b.xmin, b.ymax}};
  for (int i = 0; i < 4; ++i) {
    detail::sample_segment(corners[i], corners[(i + 1) % 4], sample_step, fov,
                           cloud);
  }
  return cloud;
}

struct PotentialMap {
  std::vector<double> values;
};

inline constexpr double kPotentialSigma = 0.5;

// Gaussian kernel of the nearest-cloud-point distance; zero when nothing is
// sensed.
inline PotentialMap potential_map(const FovGrid& grid, const PointCloud& cloud) {
  PotentialMap map;
  map.values.assign(grid.points.size(), 0.0);
  if (cloud.points.empty()) return map;
  constexpr double inv_two_sigma_sq = 1.0 / (2.0 * kPotentialSigma * kPotentialSigma);
  for (std::size_t j = 0; j < grid.points.size(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& z : cloud.points) {
      best = std::min(best, (grid.points[j] - z).squaredNorm());
    }
    map.values[j] = std::exp(-best * inv_two_sigma_sq);
  }
  return map;
}

// ζ flags from exact obstacle geometry (not the sampled cloud).  A segment
// that leaves the bounds counts as blocked when bounds are given.
inline std::vector<char> blocked_flags(const FovGrid& grid, const Pose& pose,
                                       const std::vector<Obstacle>& obstacles,
                                       const Rect* bounds = nullptr) {
  std::vector<char> flags(grid.points.size(), 0);
  const Vec2 from = pose.position();
  for (std::size_t j = 0; j < grid.points.size(); ++j) {
    const Vec2& to = grid.points[j];
    bool hit = bounds != nullptr && !bounds->contains(to);
    for (std::size_t i = 0; !hit && i < obstacles.size(); ++i) {
      hit = segment_intersects_obstacle(from, to, obstacles[i]);
    }
    flags[j] = hit ? 1 : 0;
  }
  return flags;
}

}  // namespace raw
