#pragma once

// Reeds-Shepp steering for a unit-speed car with bounded turn radius:
// shortest bidirectional path between poses, closed-form rollout, and the
// safety-capped execution duration against an ellipsoidal certificate.

#include <raw/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace raw {

/// Unit-speed car, 1 m minimum turn radius by default.
struct CarSpec {
  double speed = 1.0;
  double turn_radius = 1.0;
};

enum class Steer : std::uint8_t { Left, Straight, Right };

/// One constant-control piece: full-lock or straight, forward or reverse.
/// length is the nonnegative arc length; gear is +1 forward, -1 reverse.
struct RsSegment {
  Steer steer = Steer::Straight;
  int gear = 1;
  double length = 0.0;
};

struct RsPath {
  std::vector<RsSegment> segments;
  double total_length = 0.0;

  double duration(const CarSpec& car) const { return total_length / car.speed; }
};

/// Time-stamped poses along a rollout, uniformly spaced except for an exact
/// final sample when the horizon is not a multiple of dt.
struct Trajectory {
  std::vector<std::pair<double, Pose>> samples;
  double dt = 0.0;
};

namespace detail {

inline constexpr double kRsEps = 1e-10;

inline void polar(double x, double y, double& r, double& theta) {
  r = std::hypot(x, y);
  theta = std::atan2(y, x);
}

inline void tau_omega(double u, double v, double xi, double eta, double phi,
                      double& tau, double& omega) {
  const double delta = wrap_angle(u - v);
  const double a = std::sin(u) - std::sin(delta);
  const double b = std::cos(u) - std::cos(delta) - 1.0;
  const double t1 = std::atan2(eta * a - xi * b, xi * a + eta * b);
  const double t2 = 2.0 * (std::cos(delta) - std::cos(v) - std::cos(u)) + 3.0;
  tau = (t2 < 0.0) ? wrap_angle(t1 + kPi) : wrap_angle(t1);
  omega = wrap_angle(tau - u + v - phi);
}

// Base solvers for the canonical word families, target (x, y, phi) in
// turn-radius units.  Segment lengths are signed: negative means reverse.

inline bool lp_sp_lp(double x, double y, double phi, double& t, double& u,
                     double& v) {
  polar(x - std::sin(phi), y - 1.0 + std::cos(phi), u, t);
  if (t >= -kRsEps) {
    v = wrap_angle(phi - t);
    if (v >= -kRsEps) return true;
  }
  return false;
}

inline bool lp_sp_rp(double x, double y, double phi, double& t, double& u,
                     double& v) {
  double t1, u1;
  polar(x + std::sin(phi), y - 1.0 - std::cos(phi), u1, t1);
  u1 *= u1;
  if (u1 < 4.0) return false;
  u = std::sqrt(u1 - 4.0);
  const double theta = std::atan2(2.0, u);
  t = wrap_angle(t1 + theta);
  v = wrap_angle(t - phi);
  return t >= -kRsEps && v >= -kRsEps;
}

inline bool lp_rm_l(double x, double y, double phi, double& t, double& u,
                    double& v) {
  const double xi = x - std::sin(phi);
  const double eta = y - 1.0 + std::cos(phi);
  double u1, theta;
  polar(xi, eta, u1, theta);
  if (u1 > 4.0) return false;
  u = -2.0 * std::asin(0.25 * u1);
  t = wrap_angle(theta + 0.5 * u + kPi);
  v = wrap_angle(phi - t + u);
  return t >= -kRsEps && u <= kRsEps;
}

inline bool lp_rup_lum_rm(double x, double y, double phi, double& t, double& u,
                          double& v) {
  const double xi = x + std::sin(phi);
  const double eta = y - 1.0 - std::cos(phi);
  const double rho = 0.25 * (2.0 + std::hypot(xi, eta));
  if (rho > 1.0) return false;
  u = std::acos(rho);
  tau_omega(u, -u, xi, eta, phi, t, v);
  return t >= -kRsEps && v <= kRsEps;
}

inline bool lp_rum_lum_rp(double x, double y, double phi, double& t, double& u,
                          double& v) {
  const double xi = x + std::sin(phi);
  const double eta = y - 1.0 - std::cos(phi);
  const double rho = (20.0 - xi * xi - eta * eta) / 16.0;
  if (rho < 0.0 || rho > 1.0) return false;
  u = -std::acos(rho);
  if (u < -0.5 * kPi) return false;
  tau_omega(u, u, xi, eta, phi, t, v);
  return t >= -kRsEps && v >= -kRsEps;
}

inline bool lp_rm_sm_lm(double x, double y, double phi, double& t, double& u,
                        double& v) {
  const double xi = x - std::sin(phi);
  const double eta = y - 1.0 + std::cos(phi);
  double rho, theta;
  polar(xi, eta, rho, theta);
  if (rho < 2.0) return false;
  const double r = std::sqrt(rho * rho - 4.0);
  u = 2.0 - r;
  t = wrap_angle(theta + std::atan2(r, -2.0));
  v = wrap_angle(phi - 0.5 * kPi - t);
  return t >= -kRsEps && u <= kRsEps && v <= kRsEps;
}

inline bool lp_rm_sm_rm(double x, double y, double phi, double& t, double& u,
                        double& v) {
  const double xi = x + std::sin(phi);
  const double eta = y - 1.0 - std::cos(phi);
  double rho, theta;
  polar(-eta, xi, rho, theta);
  if (rho < 2.0) return false;
  t = theta;
  u = 2.0 - rho;
  v = wrap_angle(t + 0.5 * kPi - phi);
  return t >= -kRsEps && u <= kRsEps && v <= kRsEps;
}

inline bool lp_rm_s_lm_rp(double x, double y, double phi, double& t, double& u,
                          double& v) {
  const double xi = x + std::sin(phi);
  const double eta = y - 1.0 - std::cos(phi);
  double rho, theta;
  polar(xi, eta, rho, theta);
  if (rho < 2.0) return false;
  u = 4.0 - std::sqrt(rho * rho - 4.0);
  if (u > kRsEps) return false;
  t = wrap_angle(
      std::atan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta));
  v = wrap_angle(t - phi);
  return t >= -kRsEps && v >= -kRsEps;
}

/// Candidate word with signed segment lengths in turn-radius units.
struct Word {
  int n = 0;
  Steer steer[5] = {};
  double len[5] = {};

  double total() const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::abs(len[i]);
    return s;
  }
};

inline Steer mirror(Steer s) {
  if (s == Steer::Left) return Steer::Right;
  if (s == Steer::Right) return Steer::Left;
  return Steer::Straight;
}

/// Advances a pose along one signed segment (radius-1 units).
inline void advance(double& x, double& y, double& th, Steer steer, double s) {
  if (steer == Steer::Straight) {
    x += s * std::cos(th);
    y += s * std::sin(th);
    return;
  }
  const double dir = (steer == Steer::Left) ? 1.0 : -1.0;
  const double th1 = th + dir * s;
  x += dir * (std::sin(th1) - std::sin(th));
  y -= dir * (std::cos(th1) - std::cos(th));
  th = th1;
}

inline bool word_reaches(const Word& w, double x, double y, double phi) {
  double cx = 0.0, cy = 0.0, cth = 0.0;
  for (int i = 0; i < w.n; ++i) advance(cx, cy, cth, w.steer[i], w.len[i]);
  return std::hypot(cx - x, cy - y) <= 1e-6 &&
         std::abs(wrap_angle(cth - phi)) <= 1e-6;
}

inline std::string word_encoding(const Word& w) {
  std::string enc;
  for (int i = 0; i < w.n; ++i) {
    enc.push_back(w.steer[i] == Steer::Left ? 'L'
                  : w.steer[i] == Steer::Right ? 'R'
                                               : 'S');
    enc.push_back(w.len[i] >= 0.0 ? '+' : '-');
  }
  return enc;
}

/// Enumerates every candidate word for the normalized target: each base
/// family under time-flip (negate lengths), reflection (swap L/R) and, for
/// the asymmetric families, traversal reversal.
inline std::vector<Word> enumerate_words(double x, double y, double phi) {
  std::vector<Word> words;
  words.reserve(72);

  struct Variant {
    double x, y, phi;
    bool flip;     // negate segment lengths
    bool reflect;  // swap left/right
  };
  const Variant variants[4] = {
      {x, y, phi, false, false},
      {-x, y, -phi, true, false},
      {x, -y, -phi, false, true},
      {-x, -y, phi, true, true},
  };

  const auto emit = [&words](const Variant& va, std::initializer_list<Steer> ks,
                             std::initializer_list<double> ls, bool reversed) {
    Word w;
    w.n = static_cast<int>(ks.size());
    int i = 0;
    for (Steer k : ks) w.steer[i++] = va.reflect ? mirror(k) : k;
    i = 0;
    for (double l : ls) w.len[i++] = va.flip ? -l : l;
    if (reversed) {
      std::reverse(w.steer, w.steer + w.n);
      std::reverse(w.len, w.len + w.n);
    }
    words.push_back(w);
  };

  constexpr double kHalfPi = 0.5 * kPi;
  double t, u, v;
  for (const auto& va : variants) {
    if (lp_sp_lp(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Straight, Steer::Left}, {t, u, v}, false);
    }
    if (lp_sp_rp(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Straight, Steer::Right}, {t, u, v}, false);
    }
    if (lp_rm_l(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Left}, {t, u, v}, false);
    }
    if (lp_rup_lum_rm(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Left, Steer::Right},
           {t, u, -u, v}, false);
    }
    if (lp_rum_lum_rp(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Left, Steer::Right},
           {t, u, u, v}, false);
    }
    if (lp_rm_sm_lm(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Straight, Steer::Left},
           {t, -kHalfPi, u, v}, false);
    }
    if (lp_rm_sm_rm(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Straight, Steer::Right},
           {t, -kHalfPi, u, v}, false);
    }
    if (lp_rm_s_lm_rp(va.x, va.y, va.phi, t, u, v)) {
      emit(va,
           {Steer::Left, Steer::Right, Steer::Straight, Steer::Left,
            Steer::Right},
           {t, -kHalfPi, u, -kHalfPi, v}, false);
    }
  }

  // Reversed traversal closes the CCC and CCSC families.
  const double xb = x * std::cos(phi) + y * std::sin(phi);
  const double yb = x * std::sin(phi) - y * std::cos(phi);
  const Variant back_variants[4] = {
      {xb, yb, phi, false, false},
      {-xb, yb, -phi, true, false},
      {xb, -yb, -phi, false, true},
      {-xb, -yb, phi, true, true},
  };
  for (const auto& va : back_variants) {
    if (lp_rm_l(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Left}, {t, u, v}, true);
    }
    if (lp_rm_sm_lm(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Straight, Steer::Left},
           {t, -kHalfPi, u, v}, true);
    }
    if (lp_rm_sm_rm(va.x, va.y, va.phi, t, u, v)) {
      emit(va, {Steer::Left, Steer::Right, Steer::Straight, Steer::Right},
           {t, -kHalfPi, u, v}, true);
    }
  }
  return words;
}

}  // namespace detail

/// Shortest Reeds-Shepp path between poses.  Every candidate word is checked
/// by closed-form integration before it may win, so the returned path always
/// reaches `to` exactly; ties in length break on the lexicographically
/// smallest word encoding.
inline RsPath connect(const Pose& from, const Pose& to, const CarSpec& car = {}) {
  const double radius = car.turn_radius;
  if (!(radius > 0.0) || !(car.speed > 0.0)) {
    throw std::invalid_argument("connect: car speed and turn radius must be positive");
  }
  const Vec2 delta_local = from.to_local(to.position()) / radius;
  const double x = delta_local.x();
  const double y = delta_local.y();
  const double phi = wrap_angle(to.theta - from.theta);

  RsPath best;
  if (std::hypot(x, y) < 1e-12 && std::abs(phi) < 1e-12) return best;

  double best_total = std::numeric_limits<double>::infinity();
  std::string best_enc;
  for (const auto& w : detail::enumerate_words(x, y, phi)) {
    const double total = w.total();
    if (total >= best_total + 1e-15) continue;
    if (!detail::word_reaches(w, x, y, phi)) continue;
    const std::string enc = detail::word_encoding(w);
    if (total < best_total - 1e-15 ||
        (total < best_total + 1e-15 && enc < best_enc)) {
      best_total = total;
      best_enc = enc;
      best.segments.clear();
      for (int i = 0; i < w.n; ++i) {
        if (std::abs(w.len[i]) < 1e-12) continue;
        best.segments.push_back(RsSegment{w.steer[i], w.len[i] >= 0.0 ? 1 : -1,
                                          std::abs(w.len[i]) * radius});
      }
    }
  }
  if (!std::isfinite(best_total)) {
    throw std::runtime_error("connect: no valid word found");  // unreachable
  }
  best.total_length = best_total * radius;
  return best;
}

/// Pose after driving the path for time t (clamped to [0, duration]).
inline Pose pose_at(const Pose& from, const RsPath& path, const CarSpec& car,
                    double t) {
  double remaining = std::clamp(t, 0.0, path.duration(car)) * car.speed;
  double x = from.x, y = from.y, th = from.theta;
  for (const auto& seg : path.segments) {
    const double s = std::min(remaining, seg.length);
    if (s > 0.0) {
      const double signed_s = seg.gear * s / car.turn_radius;
      if (seg.steer == Steer::Straight) {
        x += seg.gear * s * std::cos(th);
        y += seg.gear * s * std::sin(th);
      } else {
        const double dir = (seg.steer == Steer::Left) ? 1.0 : -1.0;
        const double th1 = th + dir * signed_s;
        x += dir * car.turn_radius * (std::sin(th1) - std::sin(th));
        y -= dir * car.turn_radius * (std::cos(th1) - std::cos(th));
        th = th1;
      }
    }
    remaining -= s;
    if (remaining <= 0.0) break;
  }
  return Pose{x, y, th};
}

/// Samples the path at multiples of dt up to min(horizon, duration), plus an
/// exact final sample when the end does not land on the grid.  The first
/// sample is always (0, from).
inline Trajectory rollout(const Pose& from, const RsPath& path,
                          const CarSpec& car, double horizon, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rollout: dt must be positive");
  if (horizon < 0.0) throw std::invalid_argument("rollout: negative horizon");
  Trajectory traj;
  traj.dt = dt;
  const double t_end = std::min(horizon, path.duration(car));
  const auto steps = static_cast<std::size_t>(std::floor(t_end / dt + 1e-12));
  traj.samples.reserve(steps + 2);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    traj.samples.emplace_back(t, pose_at(from, path, car, t));
  }
  if (t_end - static_cast<double>(steps) * dt > 1e-12) {
    traj.samples.emplace_back(t_end, pose_at(from, path, car, t_end));
  }
  return traj;
}

struct SafeDurationParams {
  double cap = 1.0;             // hard upper bound on one leg, seconds
  double dt = 0.01;             // scan resolution
  double arrival_radius = 0.2;  // stop short of the waypoint by this much
  double safety_factor = 0.9;
  bool allow_reach = false;  // goal waypoint: arrival permitted
};

/// Largest safe execution time for the path under certificate psi (world
/// frame, 0-level): the footprint must stay inside psi for the whole leg and
/// the position must stop arrival_radius short of the waypoint unless
/// allow_reach.  Throws if the start footprint already violates psi.
inline double max_safe_duration(const Pose& start, const RsPath& path,
                                const CarSpec& car, const Ellipsoid& psi,
                                const Vec2& waypoint,
                                const SafeDurationParams& params = {}) {
  if (!footprint_inside(psi, footprint_corners(start), 1e-9)) {
    throw std::invalid_argument(
        "max_safe_duration: start footprint outside certificate");
  }
  const double t_total = path.duration(car);
  const double t_scan = std::min(t_total, params.cap);
  // A waypoint this close cannot be meaningfully stopped short of; the
  // containment cap still applies.
  const bool skip_arrival =
      params.allow_reach ||
      (start.position() - waypoint).norm() <= params.arrival_radius + 0.05;

  double t_exit = t_scan;
  double t_arrive = t_scan;
  bool exited = false, arrived = false;
  const auto steps = static_cast<std::size_t>(std::ceil(t_scan / params.dt));
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = std::min(static_cast<double>(k) * params.dt, t_scan);
    const Pose p = pose_at(start, path, car, t);
    if (!exited && !footprint_inside(psi, footprint_corners(p), 0.0)) {
      t_exit = static_cast<double>(k - 1) * params.dt;
      exited = true;
    }
    if (!arrived && !skip_arrival &&
        (p.position() - waypoint).norm() <= params.arrival_radius) {
      t_arrive = static_cast<double>(k - 1) * params.dt;
      arrived = true;
    }
    if (exited && (arrived || skip_arrival)) break;
  }
  return params.safety_factor * std::min({t_exit, t_arrive, params.cap, t_total});
}

}  // namespace raw
