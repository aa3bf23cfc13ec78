#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <raw/geometry.hpp>
#include <raw/sdp_filter.hpp>
#include <raw/sensing.hpp>
#include <raw/steering.hpp>

namespace raw {

/// Per-waypoint feature order: potential, goal progress, heading alignment,
/// blocked flag, bias.
inline constexpr int kFeatureDim = 5;

using FeatureRow = std::array<double, kFeatureDim>;

struct Features {
  std::vector<FeatureRow> rows;

  int size() const { return static_cast<int>(rows.size()); }
};

/// phi_j = (V_j, g1_j, g2_j, zeta_j, 1).  g1 is the progress the waypoint
/// makes toward the goal normalized by the sensor range and clamped to
/// [-1, 1]; g2 is the cosine of the angle between the heading and the
/// robot-to-waypoint direction.
inline Features features(const FovGrid& grid, const Pose& pose, const Vec2& goal,
                         const std::vector<double>& potential,
                         const std::vector<char>& blocked, double r_max) {
  const std::size_t n = grid.points.size();
  if (potential.size() != n || blocked.size() != n) {
    throw std::invalid_argument("features: per-point array sizes differ from the grid");
  }
  if (!(r_max > 0)) {
    throw std::invalid_argument("features: r_max must be positive");
  }
  const Vec2 z = pose.position();
  const Vec2 heading{std::cos(pose.theta), std::sin(pose.theta)};
  const double base = (z - goal).norm();
  Features f;
  f.rows.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 d = grid.points[j] - z;
    const double dist = d.norm();
    const double g1 =
        std::clamp((base - (grid.points[j] - goal).norm()) / r_max, -1.0, 1.0);
    const double g2 = dist > 0.0 ? heading.dot(d) / dist : 0.0;
    f.rows[j] = {potential[j], g1, g2, blocked[j] ? 1.0 : 0.0, 1.0};
  }
  return f;
}

struct RewardParams {
  double alpha1 = 200.0;
  double goal_bonus = 500.0;
  double step_penalty = -5.0;
  double block_penalty = -1000.0;
};

/// r = block_penalty * zeta - alpha1 * V + (goal bonus | step penalty).
/// Range with defaults: [-1205, 500].
inline double reward(double zeta, double potential, bool waypoint_at_goal,
                     const RewardParams& params = {}) {
  return params.block_penalty * zeta - params.alpha1 * potential +
         (waypoint_at_goal ? params.goal_bonus : params.step_penalty);
}

struct PolicyWeights {
  std::vector<double> w = std::vector<double>(kFeatureDim, 0.0);
  std::uint64_t seed = 0;
  int episodes = 0;
  std::string suite_id = "none";
};

/// Q_j = <w, phi_j> for every waypoint.  The weight vector must match the
/// feature dimension.
inline std::vector<double> q_values(const PolicyWeights& policy, const Features& feat) {
  if (policy.w.size() != static_cast<std::size_t>(kFeatureDim)) {
    throw std::invalid_argument("q_values: weight vector has dimension " +
                                std::to_string(policy.w.size()) + ", expected " +
                                std::to_string(kFeatureDim));
  }
  std::vector<double> q(feat.rows.size());
  for (std::size_t j = 0; j < feat.rows.size(); ++j) {
    double s = 0.0;
    for (int i = 0; i < kFeatureDim; ++i) s += policy.w[i] * feat.rows[j][i];
    q[j] = s;
  }
  return q;
}

struct NoFeasibleWaypoint : std::runtime_error {
  NoFeasibleWaypoint() : std::runtime_error("no feasible waypoint") {}
};

/// Epsilon-greedy selection over the feasible subset.  Greedy ties break
/// toward the waypoint nearest the goal, then the lowest index.  With
/// explore_rate = 0 the engine is never touched.
inline int select_waypoint(const std::vector<double>& q, const std::vector<char>& feasible,
                           const FovGrid& grid, const Vec2& goal, double explore_rate,
                           std::mt19937_64& rng) {
  const std::size_t n = q.size();
  if (feasible.size() != n || grid.points.size() != n) {
    throw std::invalid_argument("select_waypoint: size mismatch");
  }
  std::vector<int> idx;
  idx.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (feasible[j]) idx.push_back(static_cast<int>(j));
  }
  if (idx.empty()) throw NoFeasibleWaypoint{};
  if (explore_rate > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < explore_rate) {
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      return idx[pick(rng)];
    }
  }
  int best = idx[0];
  double best_dist = (grid.points[best] - goal).norm();
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const int j = idx[k];
    if (q[j] < q[best]) continue;
    const double dist = (grid.points[j] - goal).norm();
    if (q[j] > q[best] || dist < best_dist) {
      best = j;
      best_dist = dist;
    }
  }
  return best;
}

/// w += alpha * delta * phi, the gradient step of one-step Q-learning on the
/// linear model.
inline void td_update(std::vector<double>& w, const FeatureRow& phi, double delta,
                      double alpha) {
  if (w.size() != static_cast<std::size_t>(kFeatureDim)) {
    throw std::invalid_argument("td_update: weight vector dimension mismatch");
  }
  for (int i = 0; i < kFeatureDim; ++i) w[i] += alpha * delta * phi[i];
}

/// Goal as fed to the certificate: a goal beyond the sensing radius projects
/// onto the r_max circle, so the goal slack scores reachable progress instead
/// of swamping the objective with unattainable distance.
inline Vec2 local_goal(const Vec2& position, const Vec2& goal, double r_max) {
  const Vec2 d = goal - position;
  const double dist = d.norm();
  if (dist <= r_max) return goal;
  return position + (r_max / dist) * d;
}

/// Slack added around the start footprint when judging cleared space.  Turning
/// swings the rear corners slightly outside the square the body occupied (a
/// full-lock arc at unit turn radius peaks near 0.08 m); the band also admits
/// short reverse nudges.  Space in the band is not sensor-verified, so keep it
/// small relative to the footprint.
inline constexpr double kSweepClearance = 0.15;

/// Truncates a leg duration so every sample's footprint stays inside space
/// the sensor has actually cleared: the FOV sector of the leg's start pose
/// plus the footprint already occupied there (dilated by kSweepClearance).
/// The certificate knows nothing about obstacles outside the sector; without
/// this clip a leg could back into them.
inline double sensed_clip(const Pose& start, const RsPath& path, const CarSpec& car,
                          const FovParams& fov, double span, double dt = 0.01) {
  if (!(span > 0.0)) return 0.0;
  const double half_cone = deg_to_rad(fov.theta_max);
  const double h = kFootprintSide / 2.0 + kSweepClearance;
  const auto cleared = [&](const Vec2& point) {
    const Vec2 local = start.to_local(point);
    if (std::abs(local.x()) <= h + 1e-9 && std::abs(local.y()) <= h + 1e-9) return true;
    return local.norm() <= fov.r_max + 1e-9 &&
           std::abs(std::atan2(local.y(), local.x())) <= half_cone + 1e-9;
  };
  double safe = 0.0;
  for (int k = 1;; ++k) {
    const double t = std::min(k * dt, span);
    const Pose p = pose_at(start, path, car, t);
    const auto corners = footprint_corners(p);
    for (int i = 0; i < 4; ++i) {
      // corners and edge midpoints: the sector-or-footprint union is not
      // convex, so corners alone could certify a footprint whose edge dips out
      if (!cleared(corners[static_cast<std::size_t>(i)]) ||
          !cleared(0.5 * (corners[static_cast<std::size_t>(i)] +
                          corners[static_cast<std::size_t>((i + 1) % 4)]))) {
        return safe;
      }
    }
    safe = t;
    if (t >= span) return span;
  }
}

struct TrainConfig {
  int episodes = 2000;
  int step_cap = 200;
  double gamma = 0.95;
  double alpha = 1e-3;  // per-episode decay: alpha / sqrt(episode + 1)
  double explore_start = 0.2;
  double explore_end = 0.01;  // linear schedule across episodes
  std::uint64_t seed = 1;
  double epsilon_goal = 0.5;
  FovParams fov{5.0, 0.5, 60.0, 5.0};
  CarSpec car;
  RewardParams rewards;
  SolverSettings solver;
  SafeDurationParams leg;
  double sense_step = 0.1;
  std::string suite_id = "unnamed";
};

struct TrainResult {
  PolicyWeights weights;
  std::vector<double> episode_return;  // undiscounted per-episode reward sum
};

namespace detail {

/// Everything one planning step derives from a pose: candidate grid, sensed
/// cloud, features, certificate, and the feasibility mask.
struct Observation {
  FovGrid grid;
  PointCloud cloud;
  PotentialMap potential;
  std::vector<char> zeta;
  Features feat;
  SdpSolution sdp;
  std::vector<char> feasible;
};

inline Observation observe(const Environment& env, const Pose& pose, const Vec2& goal,
                           const FovParams& fov, const SolverSettings& solver,
                           double sense_step) {
  Observation ob;
  ob.grid = make_grid(pose, fov);
  ob.cloud = sense(env, pose, fov, sense_step);
  ob.potential = potential_map(ob.grid, ob.cloud);
  ob.zeta = blocked_flags(ob.grid, pose, env.obstacles, &env.bounds);
  ob.feat = features(ob.grid, pose, goal, ob.potential.values, ob.zeta, fov.r_max);
  ob.sdp = solve(
      build_problem(pose, ob.cloud, ob.grid, local_goal(pose.position(), goal, fov.r_max)),
      solver);
  ob.feasible = filter_grid(ob.sdp, ob.grid.points.size());
  return ob;
}

/// One planned leg: the chosen waypoint, its connecting path, and how long it
/// may be followed under both safety monitors.
struct Leg {
  int waypoint = -1;  // grid index, -1 when nothing feasible remains
  bool at_goal = false;
  RsPath path;
  double span = 0.0;
};

/// Selects a waypoint and plans its leg.  Two kinds of choices are masked out
/// and selection retried: a path that opens in reverse (its first motion
/// enters space the sensor never cleared), and a leg that cannot run for any
/// positive duration (certificate exit at the first sample).  A returned leg
/// therefore starts forward and has span > 0.
inline Leg plan_leg(const Observation& ob, const Pose& pose, const Vec2& goal,
                    const std::vector<double>& q, const CarSpec& car,
                    const FovParams& fov, const SafeDurationParams& leg_params,
                    double epsilon_goal, double explore, std::mt19937_64& rng) {
  Leg leg;
  std::vector<char> mask = ob.feasible;
  while (true) {
    int a;
    try {
      a = select_waypoint(q, mask, ob.grid, goal, explore, rng);
    } catch (const NoFeasibleWaypoint&) {
      return leg;
    }
    const Vec2 wp = ob.grid.points[static_cast<std::size_t>(a)];
    const double heading = std::atan2(wp.y() - pose.y, wp.x() - pose.x);
    const RsPath path = connect(pose, Pose{wp.x(), wp.y(), heading}, car);
    if (!path.segments.empty() && path.segments.front().gear < 0) {
      mask[static_cast<std::size_t>(a)] = 0;
      continue;
    }
    const bool at_goal = (wp - goal).norm() <= epsilon_goal;
    SafeDurationParams params = leg_params;
    params.allow_reach = at_goal;
    const double psi_span =
        max_safe_duration(pose, path, car, to_world(ob.sdp, pose), wp, params);
    const double span = sensed_clip(pose, path, car, fov, psi_span, leg_params.dt);
    if (!(span > 0.0)) {
      mask[static_cast<std::size_t>(a)] = 0;
      continue;
    }
    leg.waypoint = a;
    leg.at_goal = at_goal;
    leg.path = path;
    leg.span = span;
    return leg;
  }
}

}  // namespace detail

/// One-step Q-learning over the environment suite, cycling environments
/// round-robin.  Every random draw comes from a single engine in a fixed
/// order, so a config reproduces its weights bit for bit.
inline TrainResult train(const std::vector<Environment>& suite, const TrainConfig& cfg) {
  if (suite.empty()) {
    throw std::invalid_argument("train: environment suite is empty");
  }
  if (cfg.episodes < 0 || cfg.step_cap < 1) {
    throw std::invalid_argument("train: episodes must be >= 0 and step_cap >= 1");
  }
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto errors = environment_errors(suite[i]);
    if (!errors.empty()) {
      throw std::invalid_argument("train: environment " + std::to_string(i) + ": " +
                                  errors.front());
    }
  }
  std::mt19937_64 rng(cfg.seed);
  PolicyWeights policy;
  policy.seed = cfg.seed;
  policy.episodes = cfg.episodes;
  policy.suite_id = cfg.suite_id;
  TrainResult result;
  result.episode_return.reserve(static_cast<std::size_t>(cfg.episodes));
  for (int e = 0; e < cfg.episodes; ++e) {
    const Environment& env = suite[static_cast<std::size_t>(e) % suite.size()];
    const double explore =
        cfg.episodes > 1 ? cfg.explore_start + (cfg.explore_end - cfg.explore_start) *
                                                   (e / (cfg.episodes - 1.0))
                         : cfg.explore_start;
    const double alpha_e = cfg.alpha / std::sqrt(e + 1.0);
    double ret = 0.0;
    Pose pose = env.start;
    auto ob = detail::observe(env, pose, env.goal, cfg.fov, cfg.solver, cfg.sense_step);
    for (int step = 0; step < cfg.step_cap; ++step) {
      if ((pose.position() - env.goal).norm() <= cfg.epsilon_goal) break;
      const std::vector<double> q = q_values(policy, ob.feat);
      const detail::Leg leg = detail::plan_leg(ob, pose, env.goal, q, cfg.car, cfg.fov,
                                               cfg.leg, cfg.epsilon_goal, explore, rng);
      if (leg.waypoint < 0) break;  // dead end: nothing to execute, nothing to update
      const std::size_t a = static_cast<std::size_t>(leg.waypoint);
      const FeatureRow& phi = ob.feat.rows[a];
      const double r = reward(phi[3], phi[0], leg.at_goal, cfg.rewards);
      ret += r;
      const Pose next = pose_at(pose, leg.path, cfg.car, leg.span);
      auto next_ob = detail::observe(env, next, env.goal, cfg.fov, cfg.solver,
                                     cfg.sense_step);
      double target = r;
      if (!((next.position() - env.goal).norm() <= cfg.epsilon_goal)) {
        double best = -std::numeric_limits<double>::infinity();
        const std::vector<double> nq = q_values(policy, next_ob.feat);
        for (std::size_t j = 0; j < nq.size(); ++j) {
          if (next_ob.feasible[j] && nq[j] > best) best = nq[j];
        }
        if (best > -std::numeric_limits<double>::infinity()) {
          target += cfg.gamma * best;  // dead-end next state keeps target = r
        }
      }
      td_update(policy.w, phi, target - q[a], alpha_e);
      pose = next;
      ob = std::move(next_ob);
    }
    result.episode_return.push_back(ret);
  }
  result.weights = std::move(policy);
  return result;
}

/// Hand-set weights for smoke runs when no trained file is available: favor
/// progress and alignment, penalize potential and blocked flags.
inline PolicyWeights fallback_weights() {
  PolicyWeights policy;
  policy.w = {-1.0, 2.0, 0.5, -10.0, 0.0};
  policy.suite_id = "fallback";
  return policy;
}

/// Text format: dimension line, weight line, then one metadata line each for
/// seed, episodes, and suite id.
inline void save_weights(const PolicyWeights& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_weights: cannot open " + path);
  }
  out << policy.w.size() << "\n";
  char buf[32];
  for (std::size_t i = 0; i < policy.w.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", policy.w[i]);
    out << (i ? " " : "") << buf;
  }
  out << "\n";
  out << "seed " << policy.seed << "\n";
  out << "episodes " << policy.episodes << "\n";
  out << "suite " << policy.suite_id << "\n";
  if (!out) {
    throw std::runtime_error("save_weights: write failed for " + path);
  }
}

inline PolicyWeights load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_weights: cannot open " + path);
  }
  const auto fail = [&path](int line, const std::string& what) {
    throw std::runtime_error("load_weights: " + path + ": line " +
                             std::to_string(line) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) fail(1, "missing dimension line");
  std::size_t dim = 0;
  {
    std::istringstream ss(line);
    long long v = -1;
    if (!(ss >> v) || v < 1 || v > 1024) fail(1, "bad dimension");
    dim = static_cast<std::size_t>(v);
  }
  if (!std::getline(in, line)) fail(2, "missing weight line");
  PolicyWeights policy;
  policy.w.assign(dim, 0.0);
  {
    std::istringstream ss(line);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!(ss >> policy.w[i])) fail(2, "expected " + std::to_string(dim) + " weights");
    }
    double extra;
    if (ss >> extra) fail(2, "more weights than the declared dimension");
  }
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "seed") {
      if (!(ss >> policy.seed)) fail(line_no, "bad seed value");
    } else if (key == "episodes") {
      if (!(ss >> policy.episodes)) fail(line_no, "bad episodes value");
    } else if (key == "suite") {
      std::string rest;
      std::getline(ss, rest);
      const std::size_t at = rest.find_first_not_of(' ');
      policy.suite_id = at == std::string::npos ? "" : rest.substr(at);
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }
  return policy;
}

}  // namespace raw
