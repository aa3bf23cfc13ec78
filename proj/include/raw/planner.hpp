#pragma once
// planner.hpp: online certified planning loop and known-map baselines.
//
// raw_step/raw_run wrap the sense -> certify -> select -> drive cycle in a
// monitor that re-derives every containment guarantee on the executed leg; a
// run never continues past a failed check.  raw_run_unfiltered is the same
// agent with the certificate machinery bypassed (the ablation baseline).
// rrt_plan and reference_optimal are comparison planners that see the whole
// map.

#include <raw/agent.hpp>

#include <chrono>
#include <cstdint>
#include <optional>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <utility>

namespace raw {

struct PlannerParams {
  FovParams fov;
  double epsilon_goal = 0.5;
  double dt_cap = 1.0;  // hard leg ceiling; executed legs stay within 0.9 * dt_cap
  int max_steps = 5000;
  SolverSettings solver;
  std::uint64_t seed = 0;
  CarSpec car;
  double sense_step = 0.1;
  double explore = 0.0;  // kept at 0 so executed runs are greedy and reproducible
};

/// Residual bound on the canonical radii identity of every recorded
/// certificate.
inline constexpr double kRadiiTolerance = 1e-6;

struct SafetyChecks {
  bool inside_prev = true;   // leg-start footprint inside the previous certificate
  bool inside_curr = false;  // every rollout sample inside the current certificate
  bool overlap = true;       // leg-start footprint in the hand-off intersection
  double radii_identity_residual = 0.0;  // |r1^2 - r2^2 - 1| in the world frame
};

struct StepRecord {
  Pose pose_before;
  Pose pose_after;
  Ellipsoid ellipsoid;  // world frame
  Vec2 waypoint = Vec2::Zero();
  double delta_t = 0.0;
  int lambda_count_infeasible = 0;
  SafetyChecks safety_checks;
  double solve_time = 0.0;  // wall-clock; excluded from canonical serialization
  double step_time = 0.0;
};

enum class RunOutcome {
  reached_goal,
  no_feasible_waypoint,
  max_steps,
  solver_failure,
  safety_violation,
};

inline const char* to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::reached_goal: return "reached_goal";
    case RunOutcome::no_feasible_waypoint: return "no_feasible_waypoint";
    case RunOutcome::max_steps: return "max_steps";
    case RunOutcome::solver_failure: return "solver_failure";
    case RunOutcome::safety_violation: return "safety_violation";
  }
  return "unknown";
}

struct RunTrace {
  std::vector<StepRecord> records;
  RunOutcome outcome = RunOutcome::max_steps;
  double path_length = 0.0;  // sum of speed * delta_t over records
  double wall_time = 0.0;
};

struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& msg) : std::runtime_error(msg) {}
};

/// Carries the offending record so a run can persist what was violated
/// before stopping.
struct SafetyViolation : std::runtime_error {
  StepRecord record;
  SafetyViolation(const std::string& msg, StepRecord rec)
      : std::runtime_error(msg), record(std::move(rec)) {}
};

/// Ground-truth pose test against the real map: inside the arena and touching
/// no obstacle.
inline bool footprint_clear(const Environment& env, const Pose& pose) {
  if (!footprint_in_rect(pose, env.bounds)) return false;
  for (const auto& obs : env.obstacles) {
    if (footprint_intersects_obstacle(pose, obs)) return false;
  }
  return true;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

/// One pass of the online loop: sense, certify, select, connect, execute.
/// Re-derives the containment guarantees on the executed leg before
/// returning; any failed check throws SafetyViolation rather than letting
/// the run continue.
inline std::pair<StepRecord, Pose> raw_step(const Environment& env, const Pose& pose,
                                            const PolicyWeights& weights,
                                            const PlannerParams& params,
                                            const Ellipsoid* prev = nullptr) {
  const auto step_start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.pose_before = pose;

  detail::Observation ob;
  ob.grid = make_grid(pose, params.fov);
  ob.cloud = sense(env, pose, params.fov, params.sense_step);
  ob.potential = potential_map(ob.grid, ob.cloud);
  ob.zeta = blocked_flags(ob.grid, pose, env.obstacles, &env.bounds);
  ob.feat = features(ob.grid, pose, env.goal, ob.potential.values, ob.zeta,
                     params.fov.r_max);
  const SdpProblem problem = build_problem(
      pose, ob.cloud, ob.grid,
      local_goal(pose.position(), env.goal, params.fov.r_max));
  const auto solve_start = std::chrono::steady_clock::now();
  ob.sdp = solve(problem, params.solver);
  rec.solve_time = detail::seconds_since(solve_start);
  if (ob.sdp.status != SolveStatus::Optimal) {
    throw SolverFailure("certificate solve did not converge");
  }
  ob.feasible = filter_grid(ob.sdp, ob.grid.points.size());
  for (const char f : ob.feasible) rec.lambda_count_infeasible += f ? 0 : 1;
  rec.ellipsoid = to_world(ob.sdp, pose);

  const std::vector<double> q = q_values(weights, ob.feat);
  std::mt19937_64 rng(params.seed);
  SafeDurationParams leg_params;
  leg_params.cap = params.dt_cap;
  const detail::Leg leg =
      detail::plan_leg(ob, pose, env.goal, q, params.car, params.fov, leg_params,
                       params.epsilon_goal, params.explore, rng);
  if (leg.waypoint < 0) throw NoFeasibleWaypoint();
  rec.waypoint = ob.grid.points[static_cast<std::size_t>(leg.waypoint)];
  rec.delta_t = leg.span;
  const Pose after = pose_at(pose, leg.path, params.car, leg.span);
  rec.pose_after = after;

  rec.safety_checks.inside_curr = true;
  const Trajectory sweep = rollout(pose, leg.path, params.car, leg.span, leg_params.dt);
  for (const auto& [t, p] : sweep.samples) {
    if (!footprint_inside(rec.ellipsoid, footprint_corners(p), 0.0)) {
      rec.safety_checks.inside_curr = false;
      break;
    }
  }
  if (prev != nullptr) {
    const auto corners = footprint_corners(pose);
    rec.safety_checks.inside_prev = footprint_inside(*prev, corners, 0.0);
    rec.safety_checks.overlap = in_overlap(*prev, rec.ellipsoid, corners);
  }
  try {
    const LevelSetRadii radii = canonical_radii(rec.ellipsoid);
    rec.safety_checks.radii_identity_residual =
        std::abs(radii.r1 * radii.r1 - radii.r2 * radii.r2 - 1.0);
  } catch (const std::invalid_argument& err) {
    rec.step_time = detail::seconds_since(step_start);
    throw SafetyViolation(std::string("degenerate certificate: ") + err.what(), rec);
  }
  rec.step_time = detail::seconds_since(step_start);

  if (!(rec.delta_t > 0.0)) {
    throw SafetyViolation("executed duration is not positive", rec);
  }
  if (!rec.safety_checks.inside_curr) {
    throw SafetyViolation("footprint left the certificate mid-leg", rec);
  }
  if (!rec.safety_checks.inside_prev) {
    throw SafetyViolation("leg start outside the previous certificate", rec);
  }
  if (!rec.safety_checks.overlap) {
    throw SafetyViolation("hand-off intersection check failed", rec);
  }
  if (!(rec.safety_checks.radii_identity_residual <= kRadiiTolerance)) {
    throw SafetyViolation("radii identity residual above tolerance", rec);
  }
  return {rec, after};
}

/// Runs the loop to one of the terminal outcomes.  Terminal errors are
/// carried in the trace, never thrown; only invalid inputs throw.
inline RunTrace raw_run(const Environment& env, const PolicyWeights& weights,
                        const PlannerParams& params) {
  {
    const auto errors = environment_errors(env);
    if (!errors.empty()) throw std::invalid_argument("raw_run: " + errors.front());
  }
  if (!footprint_clear(env, env.start)) {
    throw std::invalid_argument("raw_run: start footprint is not collision-free");
  }
  const auto run_start = std::chrono::steady_clock::now();
  RunTrace trace;
  Pose pose = env.start;
  Ellipsoid prev;
  bool have_prev = false;
  while (true) {
    if ((pose.position() - env.goal).norm() <= params.epsilon_goal) {
      trace.outcome = RunOutcome::reached_goal;
      break;
    }
    if (static_cast<int>(trace.records.size()) >= params.max_steps) {
      trace.outcome = RunOutcome::max_steps;
      break;
    }
    try {
      auto [rec, next] = raw_step(env, pose, weights, params,
                                  have_prev ? &prev : nullptr);
      trace.path_length += params.car.speed * rec.delta_t;
      prev = rec.ellipsoid;
      have_prev = true;
      pose = next;
      trace.records.push_back(std::move(rec));
    } catch (const NoFeasibleWaypoint&) {
      trace.outcome = RunOutcome::no_feasible_waypoint;
      break;
    } catch (const SolverFailure&) {
      trace.outcome = RunOutcome::solver_failure;
      break;
    } catch (const SafetyViolation& violation) {
      trace.records.push_back(violation.record);
      trace.outcome = RunOutcome::safety_violation;
      break;
    } catch (const InfeasibleStartError&) {
      // certificate builder rejected the sensed cloud (footprint contact):
      // surfaced as a terminal safety stop, not a recovery attempt
      trace.outcome = RunOutcome::safety_violation;
      break;
    }
  }
  trace.wall_time = detail::seconds_since(run_start);
  return trace;
}

/// Same agent, certificate machinery bypassed: every grid point is eligible
/// and a leg runs to waypoint arrival or the cap, whichever is first.  The
/// real map is consulted only to detect (and record) the collisions this
/// removes the protection against.
inline RunTrace raw_run_unfiltered(const Environment& env, const PolicyWeights& weights,
                                   const PlannerParams& params) {
  {
    const auto errors = environment_errors(env);
    if (!errors.empty()) {
      throw std::invalid_argument("raw_run_unfiltered: " + errors.front());
    }
  }
  if (!footprint_clear(env, env.start)) {
    throw std::invalid_argument("raw_run_unfiltered: start footprint is not collision-free");
  }
  const auto run_start = std::chrono::steady_clock::now();
  RunTrace trace;
  Pose pose = env.start;
  while (true) {
    if ((pose.position() - env.goal).norm() <= params.epsilon_goal) {
      trace.outcome = RunOutcome::reached_goal;
      break;
    }
    if (static_cast<int>(trace.records.size()) >= params.max_steps) {
      trace.outcome = RunOutcome::max_steps;
      break;
    }
    const FovGrid grid = make_grid(pose, params.fov);
    const PointCloud cloud = sense(env, pose, params.fov, params.sense_step);
    const PotentialMap potential = potential_map(grid, cloud);
    const std::vector<char> zeta = blocked_flags(grid, pose, env.obstacles, &env.bounds);
    const Features feat =
        features(grid, pose, env.goal, potential.values, zeta, params.fov.r_max);
    const std::vector<double> q = q_values(weights, feat);
    std::mt19937_64 rng(params.seed);
    const std::vector<char> all(grid.points.size(), 1);
    int a = -1;
    try {
      a = select_waypoint(q, all, grid, env.goal, params.explore, rng);
    } catch (const NoFeasibleWaypoint&) {
      trace.outcome = RunOutcome::no_feasible_waypoint;
      break;
    }
    const Vec2 wp = grid.points[static_cast<std::size_t>(a)];
    const double heading = std::atan2(wp.y() - pose.y, wp.x() - pose.x);
    const RsPath path = connect(pose, Pose{wp.x(), wp.y(), heading}, params.car);
    const double span = std::min(path.duration(params.car), params.dt_cap);
    if (!(span > 0.0)) {
      trace.outcome = RunOutcome::no_feasible_waypoint;
      break;
    }
    StepRecord rec;
    rec.pose_before = pose;
    rec.waypoint = wp;
    rec.delta_t = span;
    rec.pose_after = pose_at(pose, path, params.car, span);
    rec.safety_checks.inside_curr = true;  // vacuous: no certificate in this mode
    bool collided = false;
    const Trajectory sweep = rollout(pose, path, params.car, span, 0.01);
    for (const auto& [t, p] : sweep.samples) {
      if (!footprint_clear(env, p)) {
        collided = true;
        break;
      }
    }
    trace.path_length += params.car.speed * span;
    trace.records.push_back(std::move(rec));
    if (collided) {
      trace.outcome = RunOutcome::safety_violation;
      break;
    }
    pose = trace.records.back().pose_after;
  }
  trace.wall_time = detail::seconds_since(run_start);
  return trace;
}

/// Ground-truth collision audit of an executed trace: re-derives each leg's
/// path from the recorded endpoints and sweeps the footprint at a fixed
/// sampling against the true map, never the certificates.  Also rejects a
/// trace whose recorded end poses do not match the reconstruction.
inline bool trace_collision_free(const Environment& env, const RunTrace& trace,
                                 const CarSpec& car = {}, double dt = 0.01) {
  for (const auto& rec : trace.records) {
    const double heading =
        std::atan2(rec.waypoint.y() - rec.pose_before.y, rec.waypoint.x() - rec.pose_before.x);
    const RsPath path =
        connect(rec.pose_before, Pose{rec.waypoint.x(), rec.waypoint.y(), heading}, car);
    const Trajectory sweep = rollout(rec.pose_before, path, car, rec.delta_t, dt);
    for (const auto& [t, p] : sweep.samples) {
      if (!footprint_clear(env, p)) return false;
    }
    const Pose end = sweep.samples.back().second;
    if (std::hypot(end.x - rec.pose_after.x, end.y - rec.pose_after.y) > 1e-9 ||
        std::abs(wrap_angle(end.theta - rec.pose_after.theta)) > 1e-9) {
      return false;
    }
  }
  return true;
}

namespace detail {

inline double seg_seg_distance(const Vec2& a, const Vec2& b, const Vec2& c,
                               const Vec2& d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min(std::min(dist_point_segment(a, c, d), dist_point_segment(b, c, d)),
                  std::min(dist_point_segment(c, a, b), dist_point_segment(d, a, b)));
}

inline double footprint_obstacle_distance(const Pose& pose, const Obstacle& obs) {
  if (footprint_intersects_obstacle(pose, obs)) return 0.0;
  const auto corners = footprint_corners(pose);
  double best = std::numeric_limits<double>::infinity();
  if (const auto* circle = std::get_if<Circle>(&obs)) {
    for (int i = 0; i < 4; ++i) {
      const double d = dist_point_segment(circle->center, corners[static_cast<std::size_t>(i)],
                                          corners[static_cast<std::size_t>((i + 1) % 4)]) -
                       circle->radius;
      best = std::min(best, d);
    }
    return std::max(0.0, best);
  }
  const auto& poly = std::get<Polygon>(obs);
  const std::size_t n = poly.vertices.size();
  for (int i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      best = std::min(best, seg_seg_distance(corners[static_cast<std::size_t>(i)],
                                             corners[static_cast<std::size_t>((i + 1) % 4)],
                                             poly.vertices[j], poly.vertices[(j + 1) % n]));
    }
  }
  return best;
}

}  // namespace detail

/// Smallest footprint-to-obstacle distance over a trace's executed legs,
/// sampled like the collision audit.  Infinity on an obstacle-free map; zero
/// on contact.
inline double min_trace_clearance(const Environment& env, const RunTrace& trace,
                                  const CarSpec& car = {}, double dt = 0.01) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    const double heading =
        std::atan2(rec.waypoint.y() - rec.pose_before.y, rec.waypoint.x() - rec.pose_before.x);
    const RsPath path =
        connect(rec.pose_before, Pose{rec.waypoint.x(), rec.waypoint.y(), heading}, car);
    const Trajectory sweep = rollout(rec.pose_before, path, car, rec.delta_t, dt);
    for (const auto& [t, p] : sweep.samples) {
      for (const auto& obs : env.obstacles) {
        best = std::min(best, detail::footprint_obstacle_distance(p, obs));
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Known-map baselines.
// ---------------------------------------------------------------------------

/// A planned drive on the fully known map: dense pose samples along the
/// motion plus its arc length.
struct PlannedPath {
  std::vector<Pose> samples;
  double length = 0.0;
};

struct RrtParams {
  double goal_bias = 0.05;
  double extend_cap = 2.0;    // meters of the steering path followed per extension
  double sweep_step = 0.05;   // collision sampling spacing along edges, meters
  double epsilon_goal = 0.5;
  CarSpec car;
};

/// Steered rapidly-exploring random tree over the known map.  Deterministic
/// per seed: one engine, fixed draw order.
inline std::optional<PlannedPath> rrt_plan(const Environment& env, const Pose& start,
                                           const Vec2& goal, int iterations,
                                           std::uint64_t seed, const RrtParams& params = {}) {
  if (iterations < 1) throw std::invalid_argument("rrt_plan: iterations must be >= 1");
  if (!footprint_clear(env, start)) return std::nullopt;
  struct Node {
    Pose pose;
    int parent = -1;
    RsPath edge;
    double edge_time = 0.0;
    double cost = 0.0;
  };
  std::vector<Node> nodes;
  nodes.push_back({start, -1, {}, 0.0, 0.0});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(env.bounds.xmin, env.bounds.xmax);
  std::uniform_real_distribution<double> uy(env.bounds.ymin, env.bounds.ymax);
  std::uniform_real_distribution<double> uth(-kPi, kPi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double sweep_dt = params.sweep_step / params.car.speed;
  int goal_node = (start.position() - goal).norm() <= params.epsilon_goal ? 0 : -1;
  for (int it = 0; it < iterations && goal_node < 0; ++it) {
    Pose target;
    if (coin(rng) < params.goal_bias) {
      target = Pose{goal.x(), goal.y(), uth(rng)};
    } else {
      target = Pose{ux(rng), uy(rng), uth(rng)};
    }
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d2 = (nodes[i].pose.position() - target.position()).squaredNorm();
      if (d2 < best) {
        best = d2;
        nearest = static_cast<int>(i);
      }
    }
    const RsPath path = connect(nodes[static_cast<std::size_t>(nearest)].pose, target, params.car);
    if (!(path.total_length > 0.0)) continue;
    const double t_edge =
        std::min(path.duration(params.car), params.extend_cap / params.car.speed);
    const Trajectory sweep = rollout(nodes[static_cast<std::size_t>(nearest)].pose, path,
                                     params.car, t_edge, sweep_dt);
    bool blocked = false;
    for (const auto& [t, p] : sweep.samples) {
      if (!footprint_clear(env, p)) {
        blocked = true;
        break;
      }
    }
    if (blocked) continue;
    Node node;
    node.pose = sweep.samples.back().second;
    node.parent = nearest;
    node.edge = path;
    node.edge_time = t_edge;
    node.cost = nodes[static_cast<std::size_t>(nearest)].cost + params.car.speed * t_edge;
    nodes.push_back(std::move(node));
    if ((nodes.back().pose.position() - goal).norm() <= params.epsilon_goal) {
      goal_node = static_cast<int>(nodes.size()) - 1;
    }
  }
  if (goal_node < 0) return std::nullopt;
  std::vector<int> chain;
  for (int i = goal_node; i >= 0; i = nodes[static_cast<std::size_t>(i)].parent) {
    chain.push_back(i);
  }
  PlannedPath out;
  out.length = nodes[static_cast<std::size_t>(goal_node)].cost;
  out.samples.push_back(start);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const Node& node = nodes[static_cast<std::size_t>(*it)];
    if (node.parent < 0) continue;
    const Trajectory sweep = rollout(nodes[static_cast<std::size_t>(node.parent)].pose,
                                     node.edge, params.car, node.edge_time, sweep_dt);
    for (std::size_t k = 1; k < sweep.samples.size(); ++k) {
      out.samples.push_back(sweep.samples[k].second);
    }
  }
  return out;
}

struct LatticeParams {
  double cell = 0.25;
  double heading_step_deg = 10.0;
  double epsilon_goal = 0.5;
  CarSpec car;
  std::size_t expansion_cap = 20000000;  // fail instead of searching unboundedly
};

namespace detail {

/// Signed distance from a point to an obstacle boundary, negative inside.
inline double point_obstacle_signed_distance(const Vec2& p, const Obstacle& obs) {
  if (const auto* circle = std::get_if<Circle>(&obs)) {
    return (p - circle->center).norm() - circle->radius;
  }
  const auto& poly = std::get<Polygon>(obs);
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.vertices.size();
  for (std::size_t j = 0; j < n; ++j) {
    d = std::min(d, dist_point_segment(p, poly.vertices[j], poly.vertices[(j + 1) % n]));
  }
  return point_in_polygon(p, poly) ? -d : d;
}

}  // namespace detail

/// Near-optimal reference on the known map: lattice search over position and
/// heading with exact continuous poses carried per cell (first arrival wins),
/// so every expansion integrates real motion instead of snapping to cell
/// centers.  Labeled near-optimal everywhere: resolution bounds its gap.
inline std::optional<PlannedPath> reference_optimal(const Environment& env, const Pose& start,
                                                    const Vec2& goal,
                                                    const LatticeParams& params = {}) {
  if (!footprint_clear(env, start)) return std::nullopt;
  if ((start.position() - goal).norm() <= params.epsilon_goal) {
    return PlannedPath{{start}, 0.0};
  }
  const double cell = params.cell;
  const int nh = std::max(4, static_cast<int>(std::lround(360.0 / params.heading_step_deg)));
  const double dth = 2.0 * kPi / nh;
  const double arc_len = params.car.turn_radius * dth;
  const int nx = std::max(1, static_cast<int>(std::ceil(env.bounds.width() / cell)));
  const int ny = std::max(1, static_cast<int>(std::ceil(env.bounds.height() / cell)));
  const auto cell_of = [&](const Vec2& p) -> std::int64_t {
    const int ix = std::clamp(static_cast<int>(std::floor((p.x() - env.bounds.xmin) / cell)),
                              0, nx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((p.y() - env.bounds.ymin) / cell)),
                              0, ny - 1);
    return static_cast<std::int64_t>(iy) * nx + ix;
  };

  // Coarse clearance field: distance from each cell center to the nearest
  // obstacle boundary or wall.  Large clearance lets motion checks skip the
  // exact footprint test.
  std::vector<float> clearance(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 c{env.bounds.xmin + (ix + 0.5) * cell, env.bounds.ymin + (iy + 0.5) * cell};
      double d = std::min(std::min(c.x() - env.bounds.xmin, env.bounds.xmax - c.x()),
                          std::min(c.y() - env.bounds.ymin, env.bounds.ymax - c.y()));
      for (const auto& obs : env.obstacles) {
        d = std::min(d, detail::point_obstacle_signed_distance(c, obs));
      }
      clearance[static_cast<std::size_t>(iy) * nx + ix] = static_cast<float>(d);
    }
  }
  const double in_cell_slack = cell * 0.7071067811865476;
  const auto pose_clear = [&](const Pose& p) {
    if (clearance[static_cast<std::size_t>(cell_of(p.position()))] >=
        0.7071067811865476 + in_cell_slack + 0.05) {
      return true;
    }
    return footprint_clear(env, p);
  };

  // Holonomic distance-to-goal field over center-passable cells: admissible
  // guidance after correcting the 8-neighbor metric distortion.  A body
  // center can never sit closer than the footprint inradius to an obstacle,
  // so cells are passable when the center might still fit.
  std::vector<float> field(clearance.size(), std::numeric_limits<float>::infinity());
  {
    const float passable = static_cast<float>(0.5 - in_cell_slack);
    using Item = std::pair<float, std::int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    const std::int64_t goal_cell = cell_of(goal);
    field[static_cast<std::size_t>(goal_cell)] = 0.0f;
    pq.push({0.0f, goal_cell});
    const double diag = cell * 1.4142135623730951;
    while (!pq.empty()) {
      const auto [g, id] = pq.top();
      pq.pop();
      if (g > field[static_cast<std::size_t>(id)]) continue;
      const int ix = static_cast<int>(id % nx);
      const int iy = static_cast<int>(id / nx);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int jx = ix + dx;
          const int jy = iy + dy;
          if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) continue;
          const std::size_t jid = static_cast<std::size_t>(jy) * nx + jx;
          if (clearance[jid] < passable) continue;
          const float step = static_cast<float>(dx != 0 && dy != 0 ? diag : cell);
          if (g + step < field[jid]) {
            field[jid] = g + step;
            pq.push({field[jid], static_cast<std::int64_t>(jid)});
          }
        }
      }
    }
  }
  const auto heuristic = [&](const Vec2& p) {
    const double euclid = std::max(0.0, (p - goal).norm() - params.epsilon_goal);
    const float f = field[static_cast<std::size_t>(cell_of(p))];
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    // 8-neighbor paths overshoot continuous length by up to sec(pi/8)
    const double field_h = f / 1.0823922002923940 - 2.0 * cell - params.epsilon_goal;
    return std::max(euclid, field_h);
  };

  struct NodeRec {
    double g = std::numeric_limits<double>::infinity();
    std::int64_t parent = -1;
    std::int8_t control = -1;
    bool closed = false;
    Pose pose;
  };
  std::unordered_map<std::int64_t, NodeRec> table;
  const auto key_of = [&](const Vec2& p, int ih) {
    return cell_of(p) * nh + ((ih % nh) + nh) % nh;
  };
  // controls: steer in {left, straight, right} x gear in {fwd, rev}
  const auto apply = [&](const Pose& p, int control) -> std::pair<Pose, double> {
    const int steer = control / 2;  // 0 left, 1 straight, 2 right
    const int gear = (control % 2 == 0) ? 1 : -1;
    if (steer == 1) {
      return {Pose{p.x + gear * cell * std::cos(p.theta),
                   p.y + gear * cell * std::sin(p.theta), p.theta},
              cell};
    }
    const double sigma = steer == 0 ? 1.0 : -1.0;
    const double r = params.car.turn_radius;
    const double theta = p.theta + sigma * gear * dth;
    return {Pose{p.x + sigma * r * (std::sin(theta) - std::sin(p.theta)),
                 p.y - sigma * r * (std::cos(theta) - std::cos(p.theta)), theta},
            arc_len};
  };
  const auto heading_delta = [&](int control) {
    const int steer = control / 2;
    if (steer == 1) return 0;
    const int gear = (control % 2 == 0) ? 1 : -1;
    return (steer == 0 ? 1 : -1) * gear;
  };

  // Pose after following a fraction of a primitive; frac = 1 is the full
  // step and reproduces apply() bit for bit, so legs chain exactly.
  const auto advance = [&](const Pose& p, int control, double frac) -> Pose {
    const int steer = control / 2;
    const int gear = (control % 2 == 0) ? 1 : -1;
    if (steer == 1) {
      return Pose{p.x + gear * frac * cell * std::cos(p.theta),
                  p.y + gear * frac * cell * std::sin(p.theta), p.theta};
    }
    const double sigma = steer == 0 ? 1.0 : -1.0;
    const double r = params.car.turn_radius;
    const double theta = p.theta + sigma * gear * frac * dth;
    return Pose{p.x + sigma * r * (std::sin(theta) - std::sin(p.theta)),
                p.y - sigma * r * (std::cos(theta) - std::cos(p.theta)), theta};
  };

  using QItem = std::tuple<double, double, std::int64_t>;  // f, g, key
  std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> open;
  const std::int64_t start_key = key_of(start.position(), 0);
  table[start_key] = NodeRec{0.0, -1, -1, false, start};
  open.push({heuristic(start.position()), 0.0, start_key});
  std::int64_t goal_key = -1;
  std::size_t expansions = 0;
  while (!open.empty()) {
    const auto [f, g, key] = open.top();
    open.pop();
    const auto found = table.find(key);
    if (found == table.end() || found->second.closed || g > found->second.g) continue;
    // Settle the cell at first pop and never relax it again.  Cells alias many
    // continuous poses, so a cheaper arrival can show up after children were
    // expanded from the settled pose; accepting it would orphan their recorded
    // poses from the control chain.  Freezing trades that corruption for a
    // slightly suboptimal path.
    found->second.closed = true;
    const NodeRec node = found->second;
    if ((node.pose.position() - goal).norm() <= params.epsilon_goal) {
      goal_key = key;
      break;
    }
    if (++expansions > params.expansion_cap) return std::nullopt;
    const int ih = static_cast<int>(key % nh);
    for (int control = 0; control < 6; ++control) {
      const auto [next, cost] = apply(node.pose, control);
      if (!env.bounds.contains(next.position())) continue;
      if (!pose_clear(advance(node.pose, control, 0.5)) || !pose_clear(next)) continue;
      const std::int64_t nkey = key_of(next.position(), ih + heading_delta(control));
      auto& slot = table[nkey];
      if (!slot.closed && g + cost < slot.g) {
        slot.g = g + cost;
        slot.parent = key;
        slot.control = static_cast<std::int8_t>(control);
        slot.pose = next;
        const double h = heuristic(next.position());
        if (std::isfinite(h)) open.push({slot.g + h, slot.g, nkey});
      }
    }
  }
  if (goal_key < 0) return std::nullopt;

  // Reconstruct by parent chain, then densify each primitive for rendering
  // and audits.
  std::vector<std::int8_t> controls;
  for (std::int64_t k = goal_key; k >= 0;) {
    const NodeRec& node = table.at(k);
    if (node.control >= 0) controls.push_back(node.control);
    k = node.parent;
  }
  PlannedPath out;
  out.length = table.at(goal_key).g;
  out.samples.push_back(start);
  const int pieces = 4;
  for (auto it = controls.rbegin(); it != controls.rend(); ++it) {
    const Pose from = out.samples.back();
    for (int k = 1; k <= pieces; ++k) {
      out.samples.push_back(advance(from, *it, static_cast<double>(k) / pieces));
    }
  }
  return out;
}

}  // namespace raw
