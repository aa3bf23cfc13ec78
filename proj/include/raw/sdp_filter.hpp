#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <raw/geometry.hpp>
#include <raw/sensing.hpp>

namespace raw {

// Thrown when the sensed cloud already violates the hard separation
// constraints, i.e. the current configuration is not a feasible start.
class InfeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All data in the robot's local frame: robot at the origin, heading +x.
struct SdpProblem {
  std::array<Vec2, 4> corners;
  std::vector<Vec2> cloud;
  std::vector<Vec2> grid;
  Vec2 goal = Vec2::Zero();
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };

struct SolverSettings {
  double tolerance = 1e-6;
  int max_iterations = 200;
  double mu_init = 1.0;
  double mu_factor = 0.3;
  // Trace regularization keeping the max-det objective bounded: without it
  // the program can grow the ellipsoid without limit whenever the sensed
  // cloud leaves a scale direction unconstrained.
  double epsilon_reg = 1e-3;
  // Slack terms may cover a strided subset of the grid; classification of
  // every grid point happens post-hoc either way.
  int grid_stride = 1;
};

struct SdpSolution {
  Ellipsoid ellipsoid;
  std::vector<double> lambdas;
  double nu = 0.0;
  double objective = 0.0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
};

inline SdpProblem build_problem(const Pose& pose, const PointCloud& cloud,
                                const FovGrid& grid, const Vec2& goal) {
  SdpProblem problem;
  const double h = kFootprintSide / 2.0;
  problem.corners = {Vec2{h, h}, Vec2{-h, h}, Vec2{-h, -h}, Vec2{h, -h}};
  problem.cloud.reserve(cloud.points.size());
  for (const Vec2& z : cloud.points) {
    const Vec2 local = pose.to_local(z);
    if (std::abs(local.x()) < h - 1e-12 && std::abs(local.y()) < h - 1e-12) {
      throw InfeasibleStartError(
          "obstacle point inside the footprint at local (" +
          std::to_string(local.x()) + ", " + std::to_string(local.y()) + ")");
    }
    problem.cloud.push_back(local);
  }
  problem.grid.reserve(grid.points.size());
  for (const Vec2& g : grid.points) problem.grid.push_back(pose.to_local(g));
  problem.goal = pose.to_local(goal);
  return problem;
}

namespace detail {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

// theta = (p11, p12, p22, q1, q2, r); value(x) = coeffs(x) · theta.
inline Vec6 quad_coeffs(const Vec2& x) {
  Vec6 a;
  a << x.x() * x.x(), 2.0 * x.x() * x.y(), x.y() * x.y(), x.x(), x.y(), 1.0;
  return a;
}

inline double quad_value(const Vec6& theta, const Vec2& x) {
  return quad_coeffs(x).dot(theta);
}

// value(x) + c in extended precision.  Near the solution the six products
// cancel to O(1) while individually reaching |theta|-scale, and the active
// slacks sit at O(mu); double accumulation would leave the gradient noise
// floor above the termination threshold on badly scaled instances.
inline double quad_plus(const Vec6& theta, const Vec2& x, double c) {
  const long double xx = x.x(), yy = x.y();
  return static_cast<double>(static_cast<long double>(theta(0)) * xx * xx +
                             2.0L * static_cast<long double>(theta(1)) * xx * yy +
                             static_cast<long double>(theta(2)) * yy * yy +
                             static_cast<long double>(theta(3)) * xx +
                             static_cast<long double>(theta(4)) * yy +
                             static_cast<long double>(theta(5)) +
                             static_cast<long double>(c));
}

struct SmoothHinge {
  double val, slope, curv;
};

// mu * log(1 + exp(t/mu)), overflow-safe; tends to max(0, t) as mu -> 0.
inline SmoothHinge smooth_hinge(double t, double mu) {
  const double z = t / mu;
  if (z > 35.0) return {t, 1.0, 0.0};
  if (z < -35.0) return {0.0, 0.0, 0.0};
  const double e = std::exp(z);
  const double sig = e / (1.0 + e);
  return {mu * std::log1p(e), sig, sig * (1.0 - sig) / mu};
}

// Gradient (3-vector over p11,p12,p22) and Hessian of -log det S at W=S^-1.
inline Eigen::Vector3d logdet_grad(const Mat2& w) {
  return {-w(0, 0), -2.0 * w(0, 1), -w(1, 1)};
}

inline Eigen::Matrix3d logdet_hess(const Mat2& w) {
  Eigen::Matrix3d k;
  const double w11 = w(0, 0), w12 = w(0, 1), w22 = w(1, 1);
  k << w11 * w11, 2.0 * w11 * w12, w12 * w12,
       2.0 * w11 * w12, 2.0 * (w12 * w12 + w11 * w22), 2.0 * w12 * w22,
       w12 * w12, 2.0 * w12 * w22, w22 * w22;
  return k;
}

inline Mat2 shape_of(const Vec6& theta) {
  Mat2 p;
  p << theta(0), theta(1), theta(1), theta(2);
  return p;
}

struct Eig2 {
  Vec2 lam;  // ascending
  Mat2 vec;  // orthonormal columns matching lam
};

inline Eig2 eig_sym(const Mat2& s) {
  const double a = s(0, 0), b = s(0, 1), c = s(1, 1);
  const double mid = 0.5 * (a + c);
  const double disc = std::hypot(0.5 * (a - c), b);
  Eig2 e;
  e.lam = Vec2{mid - disc, mid + disc};
  if (std::abs(b) < 1e-300) {
    e.vec = a <= c ? Mat2::Identity() : Mat2{{0.0, 1.0}, {1.0, 0.0}};
    return e;
  }
  // Whichever difference is larger in magnitude is the better conditioned.
  const Vec2 u0 = std::abs(e.lam(0) - a) >= std::abs(e.lam(0) - c)
                      ? Vec2{b, e.lam(0) - a}.normalized()
                      : Vec2{e.lam(0) - c, b}.normalized();
  e.vec.col(0) = u0;
  e.vec.col(1) = Vec2{-u0.y(), u0.x()};
  return e;
}

// Fraction-to-boundary guards for the damped Newton line search.  Armijo
// acceptance alone can land a hard barrier slack at ~1e-16 of its span:
// the barrier contributes only mu*|log slack| to phi there, while the
// Hessian conditioning grows like (1/slack)^2, so double precision cannot
// walk the iterate back toward the central path.  Capping the step so each
// hard slack keeps at least (1 - tau) of its current value prevents the
// crash in the first place.
inline double scalar_boundary_cap(double tau, double cap, double slack,
                                  double d) {
  return d < 0.0 ? std::min(cap, tau * slack / -d) : cap;
}

inline double slab_boundary_cap(double tau, double cap, const Mat2& a,
                                const Mat2& b) {
  // a + alpha*b stays positive definite up to -1/lam_min of the congruence
  // a^{-1/2} b a^{-1/2}; a is PD at every accepted iterate.
  const Eig2 ea = eig_sym(a);
  const Vec2 isq = ea.lam.cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Mat2 root = ea.vec * isq.asDiagonal() * ea.vec.transpose();
  const Mat2 congruence = root * b * root;
  const double lam = eig_sym(congruence).lam(0);
  return lam < 0.0 ? std::min(cap, tau / -lam) : cap;
}

// Barrier-smoothed objective at a given homotopy level.  Returns false when
// theta violates a hard constraint (line search rejects the point).
class BarrierObjective {
 public:
  BarrierObjective(const SdpProblem& problem, const SolverSettings& settings)
      : p_(problem), eps_(settings.epsilon_reg) {
    const int stride = std::max(1, settings.grid_stride);
    for (std::size_t j = 0; j < p_.grid.size(); j += stride) {
      subset_.push_back(static_cast<int>(j));
    }
  }

  const std::vector<int>& subset() const { return subset_; }

  bool eval(const Vec6& theta, double mu, long double* phi, Vec6* grad,
            Mat6* hess) const {
    const Mat2 p = shape_of(theta);
    const Mat2 a = p - Mat2::Identity();
    const double det_p = p.determinant();
    const double det_a = a.determinant();
    if (!(a(0, 0) > 0.0) || !(det_a > 0.0)) return false;

    const Mat2 m = p.inverse();
    const Mat2 w = a.inverse();
    // phi accumulates in extended precision: with many grid hinges active the
    // total reaches ~1e3 while the line search must resolve decreases around
    // 1e-13, beyond double resolution at that offset.
    long double f = -std::log(det_p) + eps_ * p.trace() - mu * std::log(det_a);
    Vec6 g = Vec6::Zero();
    Mat6 h = Mat6::Zero();
    g.head<3>() = logdet_grad(m) + mu * logdet_grad(w);
    g(0) += eps_;
    g(2) += eps_;
    h.topLeftCorner<3, 3>() = logdet_hess(m) + mu * logdet_hess(w);

    for (const Vec2& c : p_.corners) {
      const Vec6 coeffs = quad_coeffs(c);
      const double slack = -quad_plus(theta, c, 1.0);
      if (!(slack > 0.0)) return false;
      f -= mu * std::log(slack);
      g += (mu / slack) * coeffs;
      h += (mu / (slack * slack)) * coeffs * coeffs.transpose();
    }
    for (const Vec2& z : p_.cloud) {
      const Vec6 coeffs = quad_coeffs(z);
      const double slack = quad_plus(theta, z, -1.0);
      if (!(slack > 0.0)) return false;
      f -= mu * std::log(slack);
      g -= (mu / slack) * coeffs;
      h += (mu / (slack * slack)) * coeffs * coeffs.transpose();
    }
    const auto add_hinge = [&](const Vec2& x) {
      const Vec6 coeffs = quad_coeffs(x);
      const auto sp = smooth_hinge(quad_plus(theta, x, 1.0), mu);
      f += sp.val;
      if (sp.slope > 0.0) g += sp.slope * coeffs;
      if (sp.curv > 0.0) h += sp.curv * coeffs * coeffs.transpose();
    };
    for (const int j : subset_) add_hinge(p_.grid[j]);
    add_hinge(p_.goal);

    *phi = f;
    *grad = g;
    *hess = h;
    return true;
  }

 private:
  const SdpProblem& p_;
  double eps_;
  std::vector<int> subset_;
};

// Jacobi-preconditioned damped Newton step; returns false when no progress
// is possible (numerically stuck).  max_alpha_fn bounds the initial trial
// length fraction-to-boundary style so no hard slack collapses in one jump.
// Near the center the predicted decrease drops below what phi can resolve
// even in extended precision; such steps are taken at the capped length
// under a no-visible-regression guard instead of letting the line search
// collapse on unmeasurable noise.
template <typename Evaluator, typename MaxAlpha, typename VecN, typename MatN>
bool newton_step(const Evaluator& eval_fn, const MaxAlpha& max_alpha_fn,
                 double mu, VecN* theta, long double* phi, VecN* grad,
                 MatN* hess) {
  const VecN scale =
      hess->diagonal().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
  MatN scaled = scale.asDiagonal() * (*hess) * scale.asDiagonal();
  double ridge = 1e-11;
  VecN step;
  for (int attempt = 0;; ++attempt) {
    Eigen::LLT<MatN> llt(scaled + ridge * MatN::Identity());
    if (llt.info() == Eigen::Success) {
      step = -(scale.asDiagonal() *
               llt.solve((scale.asDiagonal() * (*grad)).eval()));
      break;
    }
    if (attempt > 24) return false;
    ridge *= 10.0;
  }
  const double alpha_cap = std::min(1.0, max_alpha_fn(step));
  if (!(alpha_cap > 1e-14)) return false;
  const double slope = grad->dot(step);
  const long double slack =
      1e-13L * (1.0L + (*phi < 0.0L ? -*phi : *phi));
  long double trial_phi;
  VecN trial_grad;
  MatN trial_hess;
  if (!(slope < 0.0) || -slope <= slack) {
    const VecN trial = *theta + alpha_cap * step;
    if ((trial.array() == theta->array()).all()) return false;
    if (eval_fn(trial, mu, &trial_phi, &trial_grad, &trial_hess) &&
        trial_phi <= *phi + slack) {
      *theta = trial;
      *phi = trial_phi;
      *grad = trial_grad;
      *hess = trial_hess;
      return true;
    }
    return false;
  }

  double alpha = alpha_cap;
  while (alpha > 1e-14) {
    const VecN trial = *theta + alpha * step;
    if ((trial.array() == theta->array()).all()) return false;
    if (eval_fn(trial, mu, &trial_phi, &trial_grad, &trial_hess) &&
        trial_phi <= *phi + 0.25L * alpha * slope + slack) {
      *theta = trial;
      *phi = trial_phi;
      *grad = trial_grad;
      *hess = trial_hess;
      return true;
    }
    alpha *= 0.5;
  }
  return false;
}

// Strictly feasible concentric-circle start, when one exists.
inline bool circle_start(const SdpProblem& p, Vec6* theta) {
  double min_sq = std::numeric_limits<double>::infinity();
  for (const Vec2& z : p.cloud) min_sq = std::min(min_sq, z.squaredNorm());
  const double corner_sq = p.corners[0].squaredNorm();
  double t = 2.0;
  if (!p.cloud.empty()) {
    if (min_sq < corner_sq + 0.06) return false;
    t = std::max(t, 2.5 / (min_sq - corner_sq));
  }
  Vec6 candidate;
  candidate << t, 0.0, t, 0.0, 0.0, -1.0 - corner_sq * t - 0.25;
  for (const Vec2& z : p.cloud) {
    if (quad_value(candidate, z) < 1.0 + 1e-7) return false;
  }
  *theta = candidate;
  return true;
}

// First-order certificate for the nonsmooth program at theta.  Starts from
// the exact barrier multipliers (every complementarity product then equals
// mu) and refits the multipliers of near-active constraints by least
// squares: rounding theta to double perturbs the gradient along the stiff
// directions, which are spanned by exactly those constraint gradients, so
// the refit separates rounding noise from genuine non-optimality.  Returns
// the worst violation across stationarity, complementarity, the hinge
// subgradient validity products, and primal feasibility.
inline double certified_kkt(const SdpProblem& p, const std::vector<int>& subset,
                            const Vec6& theta, double mu, double eps) {
  const Mat2 shape = shape_of(theta);
  const Mat2 slab = shape - Mat2::Identity();
  const double active_band = 1e-3;

  Vec6 resid = Vec6::Zero();
  resid.head<3>() = logdet_grad(shape.inverse());
  resid(0) += eps;
  resid(2) += eps;

  double kink = 0.0;
  const auto add_hinge = [&](const Vec2& x) {
    const double t = quad_plus(theta, x, 1.0);
    const double z = t / mu;
    double s = 1.0;
    if (z < -35.0) {
      s = 0.0;
    } else if (z <= 35.0) {
      const double e = std::exp(z);
      s = e / (1.0 + e);
    }
    if (s > 0.0) resid += s * quad_coeffs(x);
    kink = std::max(kink, std::min(s, 1.0 - s) * std::abs(t));
  };
  for (const int j : subset) add_hinge(p.grid[j]);
  add_hinge(p.goal);

  const std::size_t m = p.cloud.size();
  std::array<double, 4> y{}, hc{};
  std::vector<double> w(m), hz(m);
  double primal = 0.0;
  for (int c = 0; c < 4; ++c) {
    hc[c] = quad_plus(theta, p.corners[c], 1.0);
    primal = std::max(primal, hc[c]);
    y[c] = hc[c] < 0.0 ? mu / -hc[c] : 0.0;
    resid += y[c] * quad_coeffs(p.corners[c]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    hz[i] = quad_plus(theta, p.cloud[i], -1.0);
    primal = std::max(primal, -hz[i]);
    w[i] = hz[i] > 0.0 ? mu / hz[i] : 0.0;
    resid -= w[i] * quad_coeffs(p.cloud[i]);
  }
  const Eig2 es = eig_sym(slab);
  const Vec2 lam = es.lam;
  primal = std::max(primal, -lam(0));
  Mat2 base_y = Mat2::Zero();
  for (int k = 0; k < 2; ++k) {
    if (lam(k) > 0.0) {
      const Vec2 u = es.vec.col(k);
      base_y += (mu / lam(k)) * u * u.transpose();
    }
  }
  resid.head<3>() -= Eigen::Vector3d{base_y(0, 0), 2.0 * base_y(0, 1),
                                     base_y(1, 1)};

  // Columns of the refit: near-active scalar constraints and near-active
  // eigendirections of P - I.
  std::vector<Vec6> cols;
  std::vector<int> tag;  // 0..3 corner, 4.. cloud, -1/-2 slab direction k
  for (int c = 0; c < 4; ++c) {
    if (-hc[c] <= active_band) {
      cols.push_back(quad_coeffs(p.corners[c]));
      tag.push_back(c);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (hz[i] <= active_band) {
      cols.push_back(-quad_coeffs(p.cloud[i]));
      tag.push_back(4 + static_cast<int>(i));
    }
  }
  std::array<double, 2> eta{};
  for (int k = 0; k < 2; ++k) {
    if (lam(k) >= 0.0 && lam(k) <= active_band) {
      const Vec2 u = es.vec.col(k);
      Vec6 col = Vec6::Zero();
      col.head<3>() = -Eigen::Vector3d{u(0) * u(0), 2.0 * u(0) * u(1),
                                       u(1) * u(1)};
      cols.push_back(col);
      tag.push_back(-1 - k);
    }
  }
  if (!cols.empty()) {
    Eigen::MatrixXd a(6, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      a.col(static_cast<Eigen::Index>(i)) = cols[i];
    }
    const Eigen::VectorXd shift =
        a.completeOrthogonalDecomposition().solve((-resid).eval());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const double raw_shift = shift(static_cast<Eigen::Index>(i));
      double applied = raw_shift;
      if (tag[i] >= 4) {
        const std::size_t z = static_cast<std::size_t>(tag[i] - 4);
        applied = std::max(raw_shift, -w[z]);
        w[z] += applied;
      } else if (tag[i] >= 0) {
        applied = std::max(raw_shift, -y[tag[i]]);
        y[tag[i]] += applied;
      } else {
        const int k = -1 - tag[i];
        applied = std::max(raw_shift, lam(k) > 0.0 ? -mu / lam(k) : 0.0);
        eta[k] = applied;
      }
      resid += applied * cols[i];
    }
  }

  double comp = 0.0;
  for (int c = 0; c < 4; ++c) comp = std::max(comp, y[c] * std::abs(hc[c]));
  for (std::size_t i = 0; i < m; ++i) {
    comp = std::max(comp, w[i] * std::abs(hz[i]));
  }
  Mat2 slab_comp = Mat2::Identity() * mu;
  for (int k = 0; k < 2; ++k) {
    if (eta[k] != 0.0) {
      const Vec2 u = es.vec.col(k);
      slab_comp += (eta[k] * lam(k)) * u * u.transpose();
    }
  }
  comp = std::max(comp, slab_comp.cwiseAbs().maxCoeff());

  return std::max({resid.lpNorm<Eigen::Infinity>(), comp, kink, primal});
}

enum class PhaseOneOutcome { Feasible, Infeasible, Exhausted };

// Minimizes the joint violation s over (theta, s): a strictly feasible
// theta exists iff s can be pushed negative.  Early-exits once the margin
// is comfortable; a converged nonnegative minimum certifies that the hard
// constraints admit no separating ellipsoid.
inline PhaseOneOutcome phase_one(const SdpProblem& p, Vec6* theta_out,
                                 int* iterations, int budget) {
  const auto eval = [&p](const Vec7& x, double mu, long double* phi,
                         Vec7* grad, Mat7* hess) {
    const Vec6 theta = x.head<6>();
    const double s = x(6);
    const Mat2 shape = shape_of(theta);
    const Mat2 a = shape - Mat2::Identity();
    const double det_a = a.determinant();
    if (!(a(0, 0) > 0.0) || !(det_a > 0.0)) return false;

    long double f = s - mu * std::log(det_a);
    Vec7 g = Vec7::Zero();
    Mat7 h = Mat7::Zero();
    g(6) = 1.0;
    const Mat2 w = a.inverse();
    g.head<3>() += mu * logdet_grad(w);
    h.topLeftCorner<3, 3>() += mu * logdet_hess(w);

    for (const Vec2& c : p.corners) {
      Vec7 b;
      b.head<6>() = -quad_coeffs(c);
      b(6) = 1.0;
      const double slack = b.dot(x) - 1.0;
      if (!(slack > 0.0)) return false;
      f -= mu * std::log(slack);
      g -= (mu / slack) * b;
      h += (mu / (slack * slack)) * b * b.transpose();
    }
    for (const Vec2& z : p.cloud) {
      Vec7 b;
      b.head<6>() = quad_coeffs(z);
      b(6) = 1.0;
      const double slack = b.dot(x) - 1.0;
      if (!(slack > 0.0)) return false;
      f -= mu * std::log(slack);
      g -= (mu / slack) * b;
      h += (mu / (slack * slack)) * b * b.transpose();
    }
    *phi = f;
    *grad = g;
    *hess = h;
    return true;
  };

  Vec7 x;
  x.head<6>() << 2.0, 0.0, 2.0, 0.0, 0.0, -2.25;
  double worst = 0.0;
  for (const Vec2& c : p.corners) {
    worst = std::max(worst, quad_value(x.head<6>(), c) + 1.0);
  }
  for (const Vec2& z : p.cloud) {
    worst = std::max(worst, 1.0 - quad_value(x.head<6>(), z));
  }
  x(6) = worst + 1.0;

  const auto max_alpha = [&p, &x](const Vec7& step) {
    constexpr double tau = 0.95;
    double cap = std::numeric_limits<double>::infinity();
    for (const Vec2& c : p.corners) {
      Vec7 b;
      b.head<6>() = -quad_coeffs(c);
      b(6) = 1.0;
      cap = scalar_boundary_cap(tau, cap, b.dot(x) - 1.0, b.dot(step));
    }
    for (const Vec2& z : p.cloud) {
      Vec7 b;
      b.head<6>() = quad_coeffs(z);
      b(6) = 1.0;
      cap = scalar_boundary_cap(tau, cap, b.dot(x) - 1.0, b.dot(step));
    }
    const Vec6 th = x.head<6>();
    const Vec6 dth = step.head<6>();
    return slab_boundary_cap(tau, cap, shape_of(th) - Mat2::Identity(),
                             shape_of(dth));
  };

  long double phi;
  Vec7 grad;
  Mat7 hess;
  for (double mu = 1.0; mu > 1e-8; mu *= 0.3) {
    if (!eval(x, mu, &phi, &grad, &hess)) return PhaseOneOutcome::Exhausted;
    for (int inner = 0; inner < 40; ++inner) {
      if (x(6) < -0.5) {
        *theta_out = x.head<6>();
        return PhaseOneOutcome::Feasible;
      }
      if (grad.norm() <= std::max(0.1 * mu, 1e-9)) break;
      if (++*iterations > budget) return PhaseOneOutcome::Exhausted;
      if (!newton_step(eval, max_alpha, mu, &x, &phi, &grad, &hess)) break;
    }
    if (x(6) < -0.5) {
      *theta_out = x.head<6>();
      return PhaseOneOutcome::Feasible;
    }
  }
  if (x(6) < -1e-3) {
    *theta_out = x.head<6>();
    return PhaseOneOutcome::Feasible;
  }
  return PhaseOneOutcome::Infeasible;
}

}  // namespace detail

inline SdpSolution solve(const SdpProblem& problem,
                         const SolverSettings& settings = {}) {
  using namespace detail;
  SdpSolution sol;
  sol.lambdas.assign(problem.grid.size(), 0.0);

  Vec6 theta;
  if (!circle_start(problem, &theta)) {
    const auto outcome =
        phase_one(problem, &theta, &sol.iterations, settings.max_iterations);
    if (outcome == PhaseOneOutcome::Infeasible) {
      sol.status = SolveStatus::Infeasible;
      return sol;
    }
    if (outcome == PhaseOneOutcome::Exhausted) {
      sol.status = SolveStatus::MaxIter;
      return sol;
    }
  }

  const BarrierObjective objective(problem, settings);
  const auto eval = [&objective](const Vec6& th, double mu, long double* phi,
                                 Vec6* grad, Mat6* hess) {
    return objective.eval(th, mu, phi, grad, hess);
  };
  const auto max_alpha = [&problem, &theta](const Vec6& step) {
    constexpr double tau = 0.95;
    double cap = std::numeric_limits<double>::infinity();
    for (const Vec2& c : problem.corners) {
      cap = scalar_boundary_cap(tau, cap, -quad_plus(theta, c, 1.0),
                                -quad_coeffs(c).dot(step));
    }
    for (const Vec2& z : problem.cloud) {
      cap = scalar_boundary_cap(tau, cap, quad_plus(theta, z, -1.0),
                                quad_coeffs(z).dot(step));
    }
    return slab_boundary_cap(tau, cap, shape_of(theta) - Mat2::Identity(),
                             shape_of(step));
  };

  long double phi;
  Vec6 grad;
  Mat6 hess;
  double mu = settings.mu_init;
  // The homotopy bottoms out slightly below the tolerance: there the exact
  // barrier multipliers put every complementarity product at mu, and the
  // refitted certificate absorbs the stiff-direction gradient noise that a
  // double-precision theta cannot express.  Pushing mu further buys nothing.
  const double mu_final = 0.8 * settings.tolerance;
  double kkt = std::numeric_limits<double>::infinity();
  while (true) {
    if (!objective.eval(theta, mu, &phi, &grad, &hess)) {
      sol.status = SolveStatus::MaxIter;
      break;
    }
    bool stalled = false;
    int flat = 0;
    for (int inner = 0; inner < 40; ++inner) {
      if (grad.template lpNorm<Eigen::Infinity>() <=
          std::max(0.1 * mu, 0.5 * settings.tolerance)) {
        break;
      }
      if (sol.iterations >= settings.max_iterations) break;
      ++sol.iterations;
      const long double phi_before = phi;
      if (!newton_step(eval, max_alpha, mu, &theta, &phi, &grad, &hess)) {
        stalled = true;
        break;
      }
      // Movement without measurable descent means the level is polished to
      // machine precision even though the gradient floor sits above the
      // threshold; spending the budget here cannot help.
      const long double floor_slack =
          2e-13L * (1.0L + (phi < 0.0L ? -phi : phi));
      if (phi_before - phi <= floor_slack) {
        if (++flat >= 2) break;
      } else {
        flat = 0;
      }
    }
    if (mu <= mu_final) {
      kkt = certified_kkt(problem, objective.subset(), theta, mu,
                          settings.epsilon_reg);
      if (kkt <= settings.tolerance) {
        sol.status = SolveStatus::Optimal;
        break;
      }
      if (stalled || sol.iterations >= settings.max_iterations) {
        sol.status = SolveStatus::MaxIter;
        break;
      }
    } else {
      kkt = std::max(grad.template lpNorm<Eigen::Infinity>(), mu);
      if (sol.iterations >= settings.max_iterations) {
        sol.status = SolveStatus::MaxIter;
        break;
      }
      mu = std::max(mu * settings.mu_factor, mu_final);
    }
  }
  sol.kkt_residual = kkt;

  sol.ellipsoid.P = shape_of(theta);
  sol.ellipsoid.q = theta.segment<2>(3);
  sol.ellipsoid.r = theta(5);
  for (std::size_t j = 0; j < problem.grid.size(); ++j) {
    sol.lambdas[j] = std::max(0.0, quad_plus(theta, problem.grid[j], 1.0));
  }
  sol.nu = std::max(0.0, quad_plus(theta, problem.goal, 1.0));
  if (sol.status == SolveStatus::Optimal) {
    double subset_slack = 0.0;
    for (const int j : objective.subset()) subset_slack += sol.lambdas[j];
    sol.objective = -std::log(sol.ellipsoid.P.determinant()) +
                    settings.epsilon_reg * sol.ellipsoid.P.trace() +
                    subset_slack + sol.nu;

    // Belt and braces: the barrier keeps iterates strictly feasible, so a
    // violation here means the solve did not actually converge.  The margin
    // of P over the identity is measured on P - I, where the subtraction is
    // exact; eigenvalues of P itself would carry ~1e-8 cancellation noise.
    const double slab_min = eig_sym(sol.ellipsoid.P - Mat2::Identity()).lam(0);
    bool clean = slab_min >= -1e-8;
    for (const Vec2& c : problem.corners) {
      clean = clean && quad_plus(theta, c, 1.0) <= 1e-6;
    }
    for (const Vec2& z : problem.cloud) {
      clean = clean && quad_plus(theta, z, -1.0) >= -1e-6;
    }
    if (!clean) sol.status = SolveStatus::MaxIter;
  }
  return sol;
}

// Feasible waypoint mask; any non-optimal solve fails safe to all-blocked.
inline std::vector<char> filter_grid(const SdpSolution& sol, std::size_t n) {
  if (n != sol.lambdas.size()) {
    throw std::invalid_argument("filter_grid: size mismatch");
  }
  std::vector<char> feasible(n, 0);
  if (sol.status != SolveStatus::Optimal) return feasible;
  for (std::size_t j = 0; j < n; ++j) {
    feasible[j] = sol.lambdas[j] < 1.0 ? 1 : 0;
  }
  return feasible;
}

inline Ellipsoid to_world(const SdpSolution& sol, const Pose& pose) {
  return transform_ellipsoid(sol.ellipsoid, pose);
}

}  // namespace raw
