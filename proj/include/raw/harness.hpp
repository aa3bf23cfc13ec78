#pragma once

/// Experiment plumbing around the planner: environment and trace files, the
/// four shipped suites, batch metrics with CSV persistence, SVG rendering,
/// and the offline trace verifier.

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include <raw/planner.hpp>

namespace raw {

inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

namespace detail {

/// %.17g survives a double -> text -> double round trip bit-exactly; every
/// serialized number goes through here so repeated runs emit identical bytes.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline bool to_double(const std::string& tok, double* out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  *out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && errno == 0;
}

inline bool to_int(const std::string& tok, long long* out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  *out = std::strtoll(tok.c_str(), &end, 10);
  return end == tok.c_str() + tok.size() && errno == 0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Environment files.  Line-oriented text: '#' starts a comment, blank lines
// are skipped, every other line is a tagged record.
//
//   bounds <xmin> <ymin> <xmax> <ymax>
//   start <x> <y> <theta_deg>
//   goal <x> <y>
//   circle <cx> <cy> <radius>
//   polygon <x1> <y1> <x2> <y2> ... (at least 3 vertices, counter-clockwise)
//
// bounds, start, and goal appear exactly once; obstacles any number of times.
// ---------------------------------------------------------------------------

struct EnvParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Environment parse_environment(std::istream& in, const std::string& name) {
  Environment env;
  bool saw_bounds = false;
  bool saw_start = false;
  bool saw_goal = false;
  int line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw EnvParseError(name + ":" + std::to_string(line_no) + ": " + what);
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    std::vector<double> nums;
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      if (!detail::to_double(tok, &v) || !std::isfinite(v)) fail("bad number '" + tok + "'");
      nums.push_back(v);
    }
    if (tag == "bounds") {
      if (saw_bounds) fail("duplicate 'bounds'");
      if (nums.size() != 4) fail("expected 4 numbers after 'bounds'");
      env.bounds = Rect{nums[0], nums[1], nums[2], nums[3]};
      saw_bounds = true;
    } else if (tag == "start") {
      if (saw_start) fail("duplicate 'start'");
      if (nums.size() != 3) fail("expected 3 numbers after 'start' (x, y, theta_deg)");
      env.start = Pose{nums[0], nums[1], deg_to_rad(nums[2])};
      saw_start = true;
    } else if (tag == "goal") {
      if (saw_goal) fail("duplicate 'goal'");
      if (nums.size() != 2) fail("expected 2 numbers after 'goal'");
      env.goal = Vec2{nums[0], nums[1]};
      saw_goal = true;
    } else if (tag == "circle") {
      if (nums.size() != 3) fail("expected 3 numbers after 'circle' (cx, cy, radius)");
      if (!(nums[2] > 0.0)) fail("circle radius must be positive");
      env.obstacles.push_back(Circle{Vec2{nums[0], nums[1]}, nums[2]});
    } else if (tag == "polygon") {
      if (nums.size() % 2 != 0) fail("polygon needs an even number of coordinates");
      if (nums.size() < 6) fail("polygon needs at least 3 vertices");
      Polygon poly;
      for (std::size_t i = 0; i < nums.size(); i += 2) {
        poly.vertices.push_back(Vec2{nums[i], nums[i + 1]});
      }
      const std::size_t n = poly.vertices.size();
      double area2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly.vertices[i];
        const Vec2& b = poly.vertices[(i + 1) % n];
        area2 += a.x() * b.y() - b.x() * a.y();
      }
      if (!(area2 > 0.0)) fail("polygon vertices must wind counter-clockwise");
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) continue;  // adjacent around the wrap
          if (segments_intersect(poly.vertices[i], poly.vertices[(i + 1) % n],
                                 poly.vertices[j], poly.vertices[(j + 1) % n])) {
            fail("polygon is self-intersecting");
          }
        }
      }
      env.obstacles.push_back(poly);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!saw_bounds) throw EnvParseError(name + ": missing 'bounds'");
  if (!saw_start) throw EnvParseError(name + ": missing 'start'");
  if (!saw_goal) throw EnvParseError(name + ": missing 'goal'");
  const auto errors = environment_errors(env);
  if (!errors.empty()) throw EnvParseError(name + ": " + errors.front());
  return env;
}

inline Environment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EnvParseError(path + ": cannot open");
  return parse_environment(in, path);
}

inline void serialize_environment(const Environment& env, std::ostream& out) {
  using detail::fmt;
  out << "bounds " << fmt(env.bounds.xmin) << ' ' << fmt(env.bounds.ymin) << ' '
      << fmt(env.bounds.xmax) << ' ' << fmt(env.bounds.ymax) << '\n';
  out << "start " << fmt(env.start.x) << ' ' << fmt(env.start.y) << ' '
      << fmt(rad_to_deg(env.start.theta)) << '\n';
  out << "goal " << fmt(env.goal.x()) << ' ' << fmt(env.goal.y()) << '\n';
  for (const Obstacle& obs : env.obstacles) {
    if (const auto* circle = std::get_if<Circle>(&obs)) {
      out << "circle " << fmt(circle->center.x()) << ' ' << fmt(circle->center.y()) << ' '
          << fmt(circle->radius) << '\n';
    } else {
      out << "polygon";
      for (const Vec2& v : std::get<Polygon>(obs).vertices) {
        out << ' ' << fmt(v.x()) << ' ' << fmt(v.y());
      }
      out << '\n';
    }
  }
}

inline void save_environment(const Environment& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_environment: cannot open " + path);
  serialize_environment(env, out);
}

// ---------------------------------------------------------------------------
// Trace files.  Self-contained: the environment is embedded so the verifier
// needs nothing but the trace.  One 'step' line per record, documented order:
//
//   step <i> <before x y theta> <after x y theta> <waypoint x y> <delta_t>
//        <P00 P01 P10 P11> <q0 q1> <r> <lambda_infeasible>
//        <inside_prev> <inside_curr> <overlap> <residual>
//
// Wall-clock fields are deliberately not serialized; repeated runs with the
// same seeds must produce byte-identical files.
// ---------------------------------------------------------------------------

struct TraceFile {
  Environment env;
  RunTrace trace;
};

inline RunOutcome outcome_from_string(const std::string& name) {
  for (const RunOutcome o :
       {RunOutcome::reached_goal, RunOutcome::no_feasible_waypoint, RunOutcome::max_steps,
        RunOutcome::solver_failure, RunOutcome::safety_violation}) {
    if (name == to_string(o)) return o;
  }
  throw std::runtime_error("unknown outcome '" + name + "'");
}

inline void write_trace(const Environment& env, const RunTrace& trace, const std::string& path) {
  using detail::fmt;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace: cannot open " + path);
  out << "raw-trace 1\n";
  out << "env-begin\n";
  serialize_environment(env, out);
  out << "env-end\n";
  out << "outcome " << to_string(trace.outcome) << '\n';
  out << "path_length " << fmt(trace.path_length) << '\n';
  out << "steps " << trace.records.size() << '\n';
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const StepRecord& rec = trace.records[i];
    out << "step " << i;
    for (const double v : {rec.pose_before.x, rec.pose_before.y, rec.pose_before.theta,
                           rec.pose_after.x, rec.pose_after.y, rec.pose_after.theta,
                           rec.waypoint.x(), rec.waypoint.y(), rec.delta_t,
                           rec.ellipsoid.P(0, 0), rec.ellipsoid.P(0, 1), rec.ellipsoid.P(1, 0),
                           rec.ellipsoid.P(1, 1), rec.ellipsoid.q(0), rec.ellipsoid.q(1),
                           rec.ellipsoid.r}) {
      out << ' ' << fmt(v);
    }
    out << ' ' << rec.lambda_count_infeasible;
    out << ' ' << (rec.safety_checks.inside_prev ? 1 : 0);
    out << ' ' << (rec.safety_checks.inside_curr ? 1 : 0);
    out << ' ' << (rec.safety_checks.overlap ? 1 : 0);
    out << ' ' << fmt(rec.safety_checks.radii_identity_residual) << '\n';
  }
  out << "end\n";
}

inline TraceFile load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace: cannot open " + path);
  int line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
  };
  std::string line;
  const auto next_line = [&]() {
    if (!std::getline(in, line)) fail("unexpected end of file");
    ++line_no;
  };
  next_line();
  if (line != "raw-trace 1") fail("not a raw-trace file");
  next_line();
  if (line != "env-begin") fail("expected 'env-begin'");
  std::ostringstream env_text;
  while (true) {
    next_line();
    if (line == "env-end") break;
    env_text << line << '\n';
  }
  TraceFile out;
  {
    std::istringstream env_in(env_text.str());
    out.env = parse_environment(env_in, path + " (embedded environment)");
  }
  next_line();
  {
    std::istringstream ss(line);
    std::string tag, name;
    if (!(ss >> tag >> name) || tag != "outcome") fail("expected 'outcome'");
    out.trace.outcome = outcome_from_string(name);
  }
  next_line();
  {
    std::istringstream ss(line);
    std::string tag, tok;
    if (!(ss >> tag >> tok) || tag != "path_length" ||
        !detail::to_double(tok, &out.trace.path_length)) {
      fail("expected 'path_length'");
    }
  }
  long long steps = 0;
  next_line();
  {
    std::istringstream ss(line);
    std::string tag, tok;
    if (!(ss >> tag >> tok) || tag != "steps" || !detail::to_int(tok, &steps) || steps < 0) {
      fail("expected 'steps'");
    }
  }
  for (long long i = 0; i < steps; ++i) {
    next_line();
    std::istringstream ss(line);
    std::string tag;
    long long index = -1;
    ss >> tag >> index;
    if (!ss || tag != "step" || index != i) fail("expected 'step " + std::to_string(i) + "'");
    std::array<double, 21> v{};
    std::string tok;
    for (double& slot : v) {
      if (!(ss >> tok) || !detail::to_double(tok, &slot)) fail("bad step field");
    }
    if (ss >> tok) fail("trailing data on step line");
    StepRecord rec;
    rec.pose_before = Pose{v[0], v[1], v[2]};
    rec.pose_after = Pose{v[3], v[4], v[5]};
    rec.waypoint = Vec2{v[6], v[7]};
    rec.delta_t = v[8];
    rec.ellipsoid.P << v[9], v[10], v[11], v[12];
    rec.ellipsoid.q = Vec2{v[13], v[14]};
    rec.ellipsoid.r = v[15];
    rec.lambda_count_infeasible = static_cast<int>(v[16]);
    rec.safety_checks.inside_prev = v[17] != 0.0;
    rec.safety_checks.inside_curr = v[18] != 0.0;
    rec.safety_checks.overlap = v[19] != 0.0;
    rec.safety_checks.radii_identity_residual = v[20];
    out.trace.records.push_back(rec);
  }
  next_line();
  if (line != "end") fail("expected 'end'");
  return out;
}

// ---------------------------------------------------------------------------
// Offline verification.  Re-derives every safety claim from the serialized
// data alone: certificate shape, containment of the reconstructed sweep,
// hand-off overlap, chain continuity, and an independent collision sweep
// against the embedded environment.
// ---------------------------------------------------------------------------

struct VerifyReport {
  bool radii = true;        // |R1^2 - R2^2 - 1| within tolerance, P positive definite
  bool level = true;        // pose_before at or below the -1 level of its certificate
  bool duration = true;     // delta_t > 0
  bool containment = true;  // every reconstructed sample inside the 0 level
  bool overlap = true;      // hand-off footprint inside both consecutive certificates
  bool chain = true;        // pose_after matches the reconstruction, steps abut
  bool sweep = true;        // independent footprint-obstacle sweep
  std::vector<std::string> failures;

  bool ok() const {
    return radii && level && duration && containment && overlap && chain && sweep;
  }
};

inline VerifyReport verify_trace(const Environment& env, const RunTrace& trace,
                                 const CarSpec& car = {}, double dt = 0.01) {
  VerifyReport rep;
  const auto note = [&rep](bool* flag, std::size_t i, const std::string& what) {
    *flag = false;
    rep.failures.push_back("step " + std::to_string(i) + ": " + what);
  };
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const StepRecord& rec = trace.records[i];
    try {
      const LevelSetRadii radii = canonical_radii(rec.ellipsoid);
      if (std::abs(radii.r1 * radii.r1 - radii.r2 * radii.r2 - 1.0) > kRadiiTolerance) {
        note(&rep.radii, i, "radii identity violated");
      }
    } catch (const std::invalid_argument& err) {
      note(&rep.radii, i, err.what());
    }
    if (!(level_set_value(rec.ellipsoid, rec.pose_before.position()) <= -1.0 + 1e-9)) {
      note(&rep.level, i, "pose_before sits above the -1 level of its certificate");
    }
    if (!(rec.delta_t > 0.0)) note(&rep.duration, i, "delta_t is not positive");
    if (i > 0) {
      const Pose& prev = trace.records[i - 1].pose_after;
      if (std::hypot(prev.x - rec.pose_before.x, prev.y - rec.pose_before.y) > 1e-9 ||
          std::abs(wrap_angle(prev.theta - rec.pose_before.theta)) > 1e-9) {
        note(&rep.chain, i, "pose_before does not abut the previous step");
      }
      if (!in_overlap(trace.records[i - 1].ellipsoid, rec.ellipsoid,
                      footprint_corners(rec.pose_before))) {
        note(&rep.overlap, i, "hand-off footprint leaves the certificate intersection");
      }
    }
    const double heading =
        std::atan2(rec.waypoint.y() - rec.pose_before.y, rec.waypoint.x() - rec.pose_before.x);
    const RsPath path =
        connect(rec.pose_before, Pose{rec.waypoint.x(), rec.waypoint.y(), heading}, car);
    const Trajectory sweep = rollout(rec.pose_before, path, car, rec.delta_t, dt);
    for (const auto& [t, p] : sweep.samples) {
      if (!footprint_inside(rec.ellipsoid, footprint_corners(p), 1e-9)) {
        note(&rep.containment, i, "reconstructed sample leaves the certificate");
        break;
      }
    }
    for (const auto& [t, p] : sweep.samples) {
      if (!footprint_clear(env, p)) {
        note(&rep.sweep, i, "reconstructed sample intersects an obstacle");
        break;
      }
    }
    const Pose end = sweep.samples.back().second;
    if (std::hypot(end.x - rec.pose_after.x, end.y - rec.pose_after.y) > 1e-9 ||
        std::abs(wrap_angle(end.theta - rec.pose_after.theta)) > 1e-9) {
      note(&rep.chain, i, "pose_after does not match the reconstruction");
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// SVG rendering.  World coordinates with y flipped into screen space; arcs
// are emitted as short polylines so no path-flag bookkeeping is needed.
// ---------------------------------------------------------------------------

inline void render_svg(const Environment& env, const RunTrace* trace, const std::string& path,
                       int ellipse_every = 5, const FovParams& fov = {},
                       const CarSpec& car = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("render_svg: cannot open " + path);
  const Rect& b = env.bounds;
  const double margin = 1.0;
  const double w = b.xmax - b.xmin + 2.0 * margin;
  const double h = b.ymax - b.ymin + 2.0 * margin;
  const auto sx = [&](double x) { return x - b.xmin + margin; };
  const auto sy = [&](double y) { return b.ymax + margin - y; };
  const auto pt = [&](const Vec2& p) {
    return detail::fmt(sx(p.x())) + "," + detail::fmt(sy(p.y()));
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << detail::fmt(w) << ' '
      << detail::fmt(h) << "\" width=\"800\" height=\"" << detail::fmt(800.0 * h / w) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << detail::fmt(w) << "\" height=\"" << detail::fmt(h)
      << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << detail::fmt(margin) << "\" y=\"" << detail::fmt(margin) << "\" width=\""
      << detail::fmt(b.xmax - b.xmin) << "\" height=\"" << detail::fmt(b.ymax - b.ymin)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.12\"/>\n";
  for (const Obstacle& obs : env.obstacles) {
    if (const auto* circle = std::get_if<Circle>(&obs)) {
      out << "<circle cx=\"" << detail::fmt(sx(circle->center.x())) << "\" cy=\""
          << detail::fmt(sy(circle->center.y())) << "\" r=\"" << detail::fmt(circle->radius)
          << "\" fill=\"#b0b0b0\" stroke=\"#404040\" stroke-width=\"0.05\"/>\n";
    } else {
      out << "<polygon points=\"";
      for (const Vec2& v : std::get<Polygon>(obs).vertices) out << pt(v) << ' ';
      out << "\" fill=\"#b0b0b0\" stroke=\"#404040\" stroke-width=\"0.05\"/>\n";
    }
  }
  if (trace != nullptr && !trace->records.empty()) {
    const int stride = std::max(1, ellipse_every);
    for (std::size_t i = 0; i < trace->records.size(); ++i) {
      if (i % static_cast<std::size_t>(stride) != 0) continue;
      const StepRecord& rec = trace->records[i];
      // FOV wedge at the pose that produced this certificate
      const Pose& p = rec.pose_before;
      out << "<polyline points=\"" << pt(p.position()) << ' ';
      const int arc_steps = 24;
      for (int k = 0; k <= arc_steps; ++k) {
        const double a = p.theta - deg_to_rad(fov.theta_max) +
                         2.0 * deg_to_rad(fov.theta_max) * k / arc_steps;
        const Vec2 edge = p.position() + fov.r_max * Vec2{std::cos(a), std::sin(a)};
        out << pt(edge) << ' ';
      }
      out << pt(p.position())
          << "\" fill=\"#fff2cc\" fill-opacity=\"0.35\" stroke=\"#d6b656\" "
             "stroke-width=\"0.03\"/>\n";
      // certificate outline: eigen-decompose P for the 0-level axes
      const Eigen::SelfAdjointEigenSolver<Mat2> eig(rec.ellipsoid.P);
      if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0) {
        const Vec2 center = -0.5 * rec.ellipsoid.P.inverse() * rec.ellipsoid.q;
        const double vc = level_set_value(rec.ellipsoid, center);
        if (vc < 0.0) {
          const double r0 = std::sqrt(-vc / eig.eigenvalues()(0));
          const double r1 = std::sqrt(-vc / eig.eigenvalues()(1));
          const double angle = std::atan2(eig.eigenvectors()(1, 0), eig.eigenvectors()(0, 0));
          out << "<ellipse cx=\"" << detail::fmt(sx(center.x())) << "\" cy=\""
              << detail::fmt(sy(center.y())) << "\" rx=\"" << detail::fmt(r0) << "\" ry=\""
              << detail::fmt(r1) << "\" transform=\"rotate(" << detail::fmt(-rad_to_deg(angle))
              << ' ' << detail::fmt(sx(center.x())) << ' ' << detail::fmt(sy(center.y()))
              << ")\" fill=\"none\" stroke=\"#3465a4\" stroke-width=\"0.06\"/>\n";
        }
      }
    }
    out << "<polyline points=\"";
    for (const StepRecord& rec : trace->records) {
      const double heading =
          std::atan2(rec.waypoint.y() - rec.pose_before.y, rec.waypoint.x() - rec.pose_before.x);
      const RsPath leg =
          connect(rec.pose_before, Pose{rec.waypoint.x(), rec.waypoint.y(), heading}, car);
      const Trajectory sweep = rollout(rec.pose_before, leg, car, rec.delta_t, 0.05);
      for (const auto& [t, p] : sweep.samples) out << pt(p.position()) << ' ';
    }
    out << "\" fill=\"none\" stroke=\"#cc0000\" stroke-width=\"0.1\"/>\n";
  }
  const auto corners = footprint_corners(env.start);
  out << "<polygon points=\"";
  for (const Vec2& c : corners) out << pt(c) << ' ';
  out << "\" fill=\"none\" stroke=\"#00a000\" stroke-width=\"0.08\"/>\n";
  out << "<circle cx=\"" << detail::fmt(sx(env.goal.x())) << "\" cy=\""
      << detail::fmt(sy(env.goal.y()))
      << "\" r=\"0.5\" fill=\"none\" stroke=\"#00a000\" stroke-width=\"0.08\"/>\n";
  out << "<circle cx=\"" << detail::fmt(sx(env.goal.x())) << "\" cy=\""
      << detail::fmt(sy(env.goal.y())) << "\" r=\"0.12\" fill=\"#00a000\"/>\n";
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Scenarios and the four shipped suites.  The published experiments give the
// obstacle layouts only as figures; these are reconstructions with the same
// obstacle counts and arena scales, with start-goal configurations chosen to
// exercise the maps end to end.
// ---------------------------------------------------------------------------

struct Scenario {
  std::string id;
  std::string suite;
  Environment env;
};

namespace detail {

/// Axis-aligned box as a counter-clockwise polygon.
inline Polygon box(double x0, double y0, double x1, double y1) {
  Polygon poly;
  poly.vertices = {Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x1, y1}, Vec2{x0, y1}};
  return poly;
}

inline Scenario make_scenario(const std::string& suite, int index, const Environment& base,
                              double sx, double sy, double gx, double gy) {
  Scenario sc;
  char id[32];
  std::snprintf(id, sizeof(id), "%s_%02d", suite.c_str(), index);
  sc.id = id;
  sc.suite = suite;
  sc.env = base;
  sc.env.start = Pose{sx, sy, std::atan2(gy - sy, gx - sx)};
  sc.env.goal = Vec2{gx, gy};
  return sc;
}

}  // namespace detail

/// Seven convex obstacles in a 30 m arena, 15 start-goal configurations.
inline std::vector<Scenario> suite_convex() {
  Environment base;
  base.bounds = Rect{0.0, 0.0, 30.0, 30.0};
  base.obstacles = {
      Circle{Vec2{7.5, 7.5}, 1.6},   Circle{Vec2{22.5, 8.0}, 1.8}, Circle{Vec2{15.0, 15.0}, 1.7},
      Circle{Vec2{7.0, 22.0}, 1.5},  Circle{Vec2{23.0, 22.5}, 1.6},
      detail::box(13.0, 5.0, 17.0, 7.0), detail::box(13.5, 23.0, 16.5, 25.5)};
  const double c[15][4] = {
      {3.0, 3.0, 27.0, 27.0},  {27.0, 3.0, 3.0, 27.0},  {3.0, 15.0, 27.0, 15.0},
      {15.0, 3.0, 15.0, 27.0}, {3.0, 27.0, 27.0, 3.0},  {27.0, 27.0, 3.0, 3.0},
      {27.0, 15.0, 3.0, 15.0}, {15.0, 27.0, 15.0, 3.0}, {3.0, 9.0, 27.0, 21.0},
      {3.0, 21.0, 27.0, 9.0},  {9.0, 3.0, 21.0, 27.0},  {21.0, 3.0, 9.0, 27.0},
      {27.0, 9.0, 3.0, 21.0},  {27.0, 21.0, 3.0, 9.0},  {21.0, 27.0, 9.0, 3.0}};
  std::vector<Scenario> out;
  for (int i = 0; i < 15; ++i) {
    out.push_back(detail::make_scenario("convex", i + 1, base, c[i][0], c[i][1], c[i][2], c[i][3]));
  }
  return out;
}

/// Arbitrarily shaped (mostly non-convex) obstacles, 15 configurations.
inline std::vector<Scenario> suite_arbitrary() {
  Environment base;
  base.bounds = Rect{0.0, 0.0, 30.0, 30.0};
  Polygon ell;  // L-shape
  ell.vertices = {Vec2{6.0, 6.0},  Vec2{12.0, 6.0}, Vec2{12.0, 8.0},
                  Vec2{8.0, 8.0},  Vec2{8.0, 12.0}, Vec2{6.0, 12.0}};
  Polygon u_shape;  // opening toward +y
  u_shape.vertices = {Vec2{18.0, 6.0},  Vec2{25.0, 6.0},  Vec2{25.0, 12.0}, Vec2{23.0, 12.0},
                      Vec2{23.0, 8.0},  Vec2{20.0, 8.0},  Vec2{20.0, 12.0}, Vec2{18.0, 12.0}};
  Polygon plus;  // cross centered near (15, 21)
  plus.vertices = {Vec2{14.0, 17.0}, Vec2{16.0, 17.0}, Vec2{16.0, 20.0}, Vec2{19.0, 20.0},
                   Vec2{19.0, 22.0}, Vec2{16.0, 22.0}, Vec2{16.0, 25.0}, Vec2{14.0, 25.0},
                   Vec2{14.0, 22.0}, Vec2{11.0, 22.0}, Vec2{11.0, 20.0}, Vec2{14.0, 20.0}};
  Polygon chevron;  // concave notch on its right face
  chevron.vertices = {Vec2{4.0, 18.0}, Vec2{9.0, 18.0}, Vec2{7.5, 19.5}, Vec2{9.0, 21.0},
                      Vec2{4.0, 21.0}};
  Polygon wedge;
  wedge.vertices = {Vec2{24.0, 16.0}, Vec2{28.0, 18.0}, Vec2{24.0, 20.0}};
  base.obstacles = {ell, u_shape, plus, chevron, wedge};
  const double c[15][4] = {
      {3.0, 3.0, 27.0, 27.0},  {27.0, 3.0, 3.0, 27.0},  {3.0, 15.0, 27.0, 15.0},
      {15.0, 3.0, 15.0, 27.0}, {3.0, 27.0, 27.0, 3.0},  {27.0, 27.0, 3.0, 3.0},
      {27.0, 15.0, 3.0, 15.0}, {15.0, 27.0, 15.0, 3.0}, {3.0, 9.0, 27.0, 21.0},
      {3.0, 21.0, 27.0, 9.0},  {9.0, 3.0, 21.0, 27.0},  {21.0, 3.0, 9.0, 27.0},
      {27.0, 9.0, 3.0, 21.0},  {27.0, 21.0, 3.0, 9.0},  {21.0, 27.0, 9.0, 3.0}};
  std::vector<Scenario> out;
  for (int i = 0; i < 15; ++i) {
    out.push_back(
        detail::make_scenario("arbitrary", i + 1, base, c[i][0], c[i][1], c[i][2], c[i][3]));
  }
  return out;
}

/// Serpentine corridor maze: six walls with strictly alternating attachment
/// give seven 3.6 m corridors threaded top-bottom-top; 50 configurations.
/// With strict alternation every interior corridor is open at both ends, so
/// the forced route never funnels into a closed cell; only the first and
/// last corridors have a blind end, which the configurations respect.
inline std::vector<Scenario> suite_corridors() {
  Environment base;
  base.bounds = Rect{0.0, 0.0, 30.0, 30.0};
  base.obstacles = {
      detail::box(3.6, 0.0, 4.2, 26.4),    // wall 1, bottom-attached
      detail::box(7.8, 3.6, 8.4, 30.0),    // wall 2, top-attached
      detail::box(12.0, 0.0, 12.6, 26.4),  // wall 3, bottom-attached
      detail::box(16.2, 3.6, 16.8, 30.0),  // wall 4, top-attached
      detail::box(20.4, 0.0, 21.0, 26.4),  // wall 5, bottom-attached
      detail::box(24.6, 3.6, 25.2, 30.0),  // wall 6, top-attached
  };
  // corridor centerlines: x = 1.8, 6.0, 10.2, 14.4, 18.6, 22.8, 27.6
  const double c[50][4] = {
      // runs inside one corridor
      {1.8, 2.0, 1.8, 24.0},   {1.8, 24.0, 1.8, 4.0},   {6.0, 26.0, 6.0, 6.0},
      {10.2, 2.0, 10.2, 24.0}, {14.4, 26.0, 14.4, 6.0}, {18.6, 2.0, 18.6, 24.0},
      {22.8, 26.0, 22.8, 4.0}, {27.6, 4.0, 27.6, 26.0}, {27.6, 26.0, 27.6, 4.0},
      {6.0, 4.0, 6.0, 24.0},
      // neighbors through a single passage
      {1.8, 20.0, 6.0, 24.0},  {6.0, 22.0, 1.8, 26.0},  {6.0, 8.0, 10.2, 4.0},
      {10.2, 6.0, 6.0, 2.0},   {10.2, 22.0, 14.4, 26.0}, {14.4, 22.0, 10.2, 26.0},
      {14.4, 6.0, 18.6, 2.0},  {18.6, 8.0, 14.4, 4.0},  {18.6, 20.0, 22.8, 24.0},
      {22.8, 20.0, 18.6, 24.0}, {22.8, 8.0, 27.6, 4.0}, {27.6, 8.0, 22.8, 2.0},
      // two passages
      {1.8, 4.0, 10.2, 2.0},   {6.0, 26.0, 14.4, 22.0}, {10.2, 4.0, 18.6, 6.0},
      {14.4, 26.0, 22.8, 26.0}, {18.6, 2.0, 27.6, 2.0}, {10.2, 26.0, 1.8, 24.0},
      {14.4, 4.0, 6.0, 4.0},   {18.6, 24.0, 10.2, 20.0}, {22.8, 4.0, 14.4, 2.0},
      {27.6, 24.0, 18.6, 22.0},
      // long hauls across the serpentine
      {1.8, 2.0, 27.6, 2.0},   {1.8, 26.0, 27.6, 26.0}, {27.6, 2.0, 1.8, 2.0},
      {27.6, 26.0, 1.8, 26.0}, {1.8, 10.0, 22.8, 6.0},  {6.0, 2.0, 27.6, 6.0},
      {6.0, 28.0, 22.8, 2.0},  {10.2, 24.0, 27.6, 22.0}, {14.4, 2.0, 27.6, 26.0},
      {18.6, 26.0, 1.8, 22.0}, {22.8, 28.0, 6.0, 2.0},  {27.6, 26.0, 6.0, 22.0},
      {1.8, 4.0, 18.6, 22.0},  {6.0, 24.0, 27.6, 24.0},
      // strip-hugging routes along the open top and bottom bands
      {10.2, 28.0, 18.6, 28.0}, {22.8, 2.0, 10.2, 2.0}, {14.4, 28.0, 1.8, 26.0},
      {18.6, 6.0, 27.6, 10.0}};
  std::vector<Scenario> out;
  for (int i = 0; i < 50; ++i) {
    out.push_back(
        detail::make_scenario("corridors", i + 1, base, c[i][0], c[i][1], c[i][2], c[i][3]));
  }
  return out;
}

/// 48 circular obstacles in a 105 x 105 m arena, 50 configurations; the
/// layout is a fixed-seed randomized reconstruction.
inline std::vector<Scenario> suite_circles() {
  Environment base;
  base.bounds = Rect{0.0, 0.0, 105.0, 105.0};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> upos(8.0, 97.0);
  std::uniform_real_distribution<double> urad(1.5, 3.5);
  while (base.obstacles.size() < 48) {
    const Vec2 center{upos(rng), upos(rng)};
    const double radius = urad(rng);
    bool fits = true;
    for (const Obstacle& obs : base.obstacles) {
      const Circle& other = std::get<Circle>(obs);
      if ((other.center - center).norm() < other.radius + radius + 4.5) {
        fits = false;
        break;
      }
    }
    if (fits) base.obstacles.push_back(Circle{center, radius});
  }
  const auto clearance = [&base](const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const Obstacle& obs : base.obstacles) {
      const Circle& circle = std::get<Circle>(obs);
      best = std::min(best, (circle.center - p).norm() - circle.radius);
    }
    return best;
  };
  std::vector<Scenario> out;
  std::uniform_real_distribution<double> uconf(4.0, 101.0);
  int index = 1;
  while (out.size() < 50) {
    const Vec2 s{uconf(rng), uconf(rng)};
    const Vec2 g{uconf(rng), uconf(rng)};
    if ((s - g).norm() < 40.0 || clearance(s) < 2.5 || clearance(g) < 2.0) continue;
    out.push_back(detail::make_scenario("circles", index, base, s.x(), s.y(), g.x(), g.y()));
    ++index;
  }
  return out;
}

inline std::vector<Scenario> make_suite(const std::string& tag) {
  if (tag == "convex") return suite_convex();
  if (tag == "arbitrary") return suite_arbitrary();
  if (tag == "corridors") return suite_corridors();
  if (tag == "circles") return suite_circles();
  throw std::invalid_argument("unknown suite '" + tag + "'");
}

/// Small maps the shipped policy is trained on: open space, scattered discs,
/// a blocking wall with a gap, an L-shape pocket, and a short corridor turn.
inline std::vector<Scenario> suite_training() {
  std::vector<Scenario> out;
  Environment open;
  open.bounds = Rect{0.0, 0.0, 20.0, 20.0};
  out.push_back(detail::make_scenario("training", 1, open, 2.0, 10.0, 18.0, 10.0));
  out.push_back(detail::make_scenario("training", 2, open, 2.0, 2.0, 18.0, 18.0));

  Environment discs = open;
  discs.obstacles = {Circle{Vec2{7.0, 9.0}, 1.2}, Circle{Vec2{12.5, 12.5}, 1.4},
                     Circle{Vec2{12.0, 6.0}, 1.0}, Circle{Vec2{6.5, 15.0}, 1.1}};
  out.push_back(detail::make_scenario("training", 3, discs, 2.0, 10.0, 18.0, 10.0));
  out.push_back(detail::make_scenario("training", 4, discs, 18.0, 18.0, 2.0, 2.0));
  out.push_back(detail::make_scenario("training", 5, discs, 2.0, 18.0, 18.0, 2.0));

  Environment gap = open;
  gap.obstacles = {detail::box(9.4, 0.0, 10.0, 8.2), detail::box(9.4, 11.8, 10.0, 20.0)};
  out.push_back(detail::make_scenario("training", 6, gap, 3.0, 10.0, 17.0, 10.0));
  out.push_back(detail::make_scenario("training", 7, gap, 17.0, 6.0, 3.0, 14.0));

  Environment pocket = open;
  pocket.obstacles = {detail::box(8.0, 8.0, 16.0, 9.0), detail::box(15.0, 9.0, 16.0, 16.0)};
  out.push_back(detail::make_scenario("training", 8, pocket, 3.0, 4.0, 18.0, 14.0));
  out.push_back(detail::make_scenario("training", 9, pocket, 12.0, 12.0, 12.0, 4.0));

  Environment turn = open;
  turn.obstacles = {detail::box(0.0, 12.4, 7.6, 13.0), detail::box(7.0, 4.0, 7.6, 13.0),
                    detail::box(11.8, 8.0, 12.4, 20.0)};
  out.push_back(detail::make_scenario("training", 10, turn, 2.0, 16.0, 10.0, 2.0));
  out.push_back(detail::make_scenario("training", 11, turn, 10.0, 4.0, 2.0, 18.0));
  return out;
}

/// Randomized compact map for the bulk safety sweeps: a handful of discs and
/// boxes with guaranteed start and goal clearance.  Deterministic per seed.
inline Environment random_environment(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Environment env;
  env.bounds = Rect{0.0, 0.0, 20.0, 20.0};
  std::uniform_int_distribution<int> ucount(3, 7);
  std::uniform_real_distribution<double> upos(2.0, 18.0);
  std::uniform_real_distribution<double> urad(0.5, 1.4);
  std::uniform_real_distribution<double> uhalf(0.5, 1.2);
  std::uniform_real_distribution<double> ucoin(0.0, 1.0);
  const int count = ucount(rng);
  for (int i = 0; i < count; ++i) {
    const Vec2 center{upos(rng), upos(rng)};
    if (ucoin(rng) < 0.5) {
      env.obstacles.push_back(Circle{center, urad(rng)});
    } else {
      const double hx = uhalf(rng);
      const double hy = uhalf(rng);
      env.obstacles.push_back(detail::box(center.x() - hx, center.y() - hy, center.x() + hx,
                                          center.y() + hy));
    }
  }
  const auto clearance = [&env](const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const Obstacle& obs : env.obstacles) {
      best = std::min(best, detail::point_obstacle_signed_distance(p, obs));
    }
    return best;
  };
  while (true) {
    const Vec2 s{upos(rng), upos(rng)};
    const Vec2 g{upos(rng), upos(rng)};
    if ((s - g).norm() < 8.0 || clearance(s) < 2.2 || clearance(g) < 1.5) continue;
    env.start = Pose{s.x(), s.y(), std::atan2(g.y() - s.y(), g.x() - s.x())};
    env.goal = g;
    break;
  }
  return env;
}

// ---------------------------------------------------------------------------
// Suite files on disk: one environment file per scenario, id-named, loaded
// back in sorted order.
// ---------------------------------------------------------------------------

inline void write_suite_files(const std::vector<Scenario>& scenarios, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const Scenario& sc : scenarios) {
    save_environment(sc.env, (std::filesystem::path(dir) / (sc.id + ".env")).string());
  }
}

inline std::vector<Scenario> load_suite_dir(const std::string& dir, const std::string& tag) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".env") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("load_suite_dir: no .env files in " + dir);
  std::vector<Scenario> out;
  for (const auto& file : files) {
    Scenario sc;
    sc.id = file.stem().string();
    sc.suite = tag;
    sc.env = load_environment(file.string());
    out.push_back(std::move(sc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch execution and metrics.
// ---------------------------------------------------------------------------

struct ScenarioResult {
  std::string suite;
  std::string id;
  RunOutcome raw_outcome = RunOutcome::max_steps;
  double raw_length = -1.0;
  int steps = 0;
  bool sweep_clear = false;   // independent collision audit of the executed trace
  bool records_ok = false;    // every per-step safety check held
  double worst_resid = 0.0;   // max |R1^2 - R2^2 - 1| over the run
  double worst_local_r = -std::numeric_limits<double>::infinity();  // max local-frame r
  std::array<double, 10> rrt_lengths{-1.0, -1.0, -1.0, -1.0, -1.0,
                                     -1.0, -1.0, -1.0, -1.0, -1.0};  // -1: failed or not run
  double rrt_mean = -1.0;
  double rrt_min = -1.0;
  double reference_length = -1.0;
  double ratio_raw_over_ref = -1.0;
  std::string error;  // nonempty when the scenario itself failed to run
  // timing; reported in the sidecar only, never in the canonical CSV
  double step_time_mean = 0.0;
  double step_time_std = 0.0;
  double solve_time_mean = 0.0;
};

struct SuiteAggregates {
  int n = 0;
  int reached = 0;
  int collisions = 0;       // scenarios whose sweep found contact
  bool all_records_ok = true;
  double worst_resid = 0.0;
  double worst_local_r = -std::numeric_limits<double>::infinity();
  double median_ratio = -1.0;
  double max_ratio = -1.0;
  double frac_below_rrt_mean = 0.0;
  double median_step_time = 0.0;
};

struct SuiteResult {
  std::string suite;
  std::vector<ScenarioResult> rows;
  SuiteAggregates agg;
};

struct RunSuiteParams {
  PlannerParams planner;
  bool unfiltered = false;
  bool with_baselines = true;
  int rrt_iterations = 25000;
  int rrt_seed_count = 10;
  LatticeParams lattice;
  unsigned parallelism = 0;  // 0: one worker per core, capped at the scenario count
};

inline double median_of(std::vector<double> values) {
  if (values.empty()) return -1.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline void aggregate(SuiteResult& result) {
  SuiteAggregates agg;
  agg.n = static_cast<int>(result.rows.size());
  std::vector<double> ratios;
  std::vector<double> step_times;
  int comparable = 0;
  int below = 0;
  for (const ScenarioResult& row : result.rows) {
    if (row.raw_outcome == RunOutcome::reached_goal) ++agg.reached;
    if (!row.sweep_clear) ++agg.collisions;
    agg.all_records_ok = agg.all_records_ok && row.records_ok;
    agg.worst_resid = std::max(agg.worst_resid, row.worst_resid);
    agg.worst_local_r = std::max(agg.worst_local_r, row.worst_local_r);
    if (row.ratio_raw_over_ref > 0.0) {
      ratios.push_back(row.ratio_raw_over_ref);
      agg.max_ratio = std::max(agg.max_ratio, row.ratio_raw_over_ref);
    }
    if (row.raw_outcome == RunOutcome::reached_goal && row.rrt_mean > 0.0) {
      ++comparable;
      if (row.raw_length < row.rrt_mean) ++below;
    }
    if (row.steps > 0) step_times.push_back(row.step_time_mean);
  }
  agg.median_ratio = median_of(ratios);
  agg.frac_below_rrt_mean = agg.n > 0 ? static_cast<double>(below) / agg.n : 0.0;
  agg.median_step_time = median_of(step_times);
  (void)comparable;
  result.agg = agg;
}

inline ScenarioResult run_scenario(const Scenario& scenario, const PolicyWeights& weights,
                                   const RunSuiteParams& params) {
  ScenarioResult row;
  row.suite = scenario.suite;
  row.id = scenario.id;
  try {
    const RunTrace trace = params.unfiltered
                               ? raw_run_unfiltered(scenario.env, weights, params.planner)
                               : raw_run(scenario.env, weights, params.planner);
    row.raw_outcome = trace.outcome;
    row.raw_length = trace.path_length;
    row.steps = static_cast<int>(trace.records.size());
    row.sweep_clear = trace_collision_free(scenario.env, trace, params.planner.car);
    row.records_ok = true;
    double sum = 0.0;
    double sum_sq = 0.0;
    double solve_sum = 0.0;
    for (const StepRecord& rec : trace.records) {
      if (!params.unfiltered) {
        const bool checks = rec.safety_checks.inside_prev && rec.safety_checks.inside_curr &&
                            rec.safety_checks.overlap && rec.delta_t > 0.0 &&
                            rec.safety_checks.radii_identity_residual <= kRadiiTolerance;
        const double local_r = level_set_value(rec.ellipsoid, rec.pose_before.position());
        row.records_ok = row.records_ok && checks && local_r <= -1.0 + 1e-9;
        row.worst_resid = std::max(row.worst_resid, rec.safety_checks.radii_identity_residual);
        row.worst_local_r = std::max(row.worst_local_r, local_r);
      }
      sum += rec.step_time;
      sum_sq += rec.step_time * rec.step_time;
      solve_sum += rec.solve_time;
    }
    if (row.steps > 0) {
      const double n = row.steps;
      row.step_time_mean = sum / n;
      row.step_time_std = std::sqrt(std::max(0.0, sum_sq / n - row.step_time_mean * row.step_time_mean));
      row.solve_time_mean = solve_sum / n;
    }
  } catch (const std::exception& err) {
    std::string what = err.what();
    for (char& c : what) {
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    }
    row.error = what;
    return row;
  }
  if (params.with_baselines) {
    for (int k = 0; k < params.rrt_seed_count && k < 10; ++k) {
      const auto rrt = rrt_plan(scenario.env, scenario.env.start, scenario.env.goal,
                                params.rrt_iterations, static_cast<std::uint64_t>(k + 1),
                                RrtParams{.car = params.planner.car});
      row.rrt_lengths[static_cast<std::size_t>(k)] = rrt ? rrt->length : -1.0;
    }
    double total = 0.0;
    int successes = 0;
    for (int k = 0; k < params.rrt_seed_count && k < 10; ++k) {
      const double len = row.rrt_lengths[static_cast<std::size_t>(k)];
      if (len > 0.0) {
        total += len;
        ++successes;
        row.rrt_min = row.rrt_min < 0.0 ? len : std::min(row.rrt_min, len);
      }
    }
    if (successes > 0) row.rrt_mean = total / successes;
    const auto ref =
        reference_optimal(scenario.env, scenario.env.start, scenario.env.goal, params.lattice);
    if (ref) row.reference_length = ref->length;
    if (ref && row.raw_outcome == RunOutcome::reached_goal && ref->length > 0.0) {
      row.ratio_raw_over_ref = row.raw_length / ref->length;
    }
  }
  return row;
}

/// Runs every scenario, optionally across threads.  Rows land at their
/// scenario's index, so the result is deterministic regardless of schedule;
/// per-scenario failures are recorded in the row and the suite continues.
inline SuiteResult run_suite(const std::vector<Scenario>& scenarios, const PolicyWeights& weights,
                             const RunSuiteParams& params) {
  SuiteResult result;
  result.suite = scenarios.empty() ? "empty" : scenarios.front().suite;
  result.rows.resize(scenarios.size());
  const unsigned worker_cap = params.parallelism > 0
                                  ? params.parallelism
                                  : std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(worker_cap, static_cast<unsigned>(std::max<std::size_t>(1, scenarios.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      result.rows[i] = run_scenario(scenarios[i], weights, params);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= scenarios.size()) return;
          result.rows[i] = run_scenario(scenarios[i], weights, params);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  aggregate(result);
  return result;
}

// ---------------------------------------------------------------------------
// CSV persistence.  The canonical file holds only deterministic fields so
// repeated runs are byte-identical; wall-clock statistics go to a sidecar.
// ---------------------------------------------------------------------------

inline const char* csv_header() {
  return "suite,id,raw_outcome,raw_length,steps,sweep_clear,records_ok,worst_resid,"
         "worst_local_r,rrt_1,rrt_2,rrt_3,rrt_4,rrt_5,rrt_6,rrt_7,rrt_8,rrt_9,rrt_10,"
         "rrt_mean,rrt_min,reference_length,ratio_raw_over_ref,error";
}

inline void write_csv(const SuiteResult& result, const std::string& path) {
  using detail::fmt;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << csv_header() << '\n';
  for (const ScenarioResult& row : result.rows) {
    out << row.suite << ',' << row.id << ',' << to_string(row.raw_outcome) << ','
        << fmt(row.raw_length) << ',' << row.steps << ',' << (row.sweep_clear ? 1 : 0) << ','
        << (row.records_ok ? 1 : 0) << ',' << fmt(row.worst_resid) << ','
        << fmt(row.worst_local_r);
    for (const double len : row.rrt_lengths) out << ',' << fmt(len);
    out << ',' << fmt(row.rrt_mean) << ',' << fmt(row.rrt_min) << ','
        << fmt(row.reference_length) << ',' << fmt(row.ratio_raw_over_ref) << ',' << row.error
        << '\n';
  }
}

inline void write_timing_csv(const SuiteResult& result, const std::string& path) {
  using detail::fmt;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_timing_csv: cannot open " + path);
  out << "suite,id,step_time_mean,step_time_std,solve_time_mean\n";
  for (const ScenarioResult& row : result.rows) {
    out << row.suite << ',' << row.id << ',' << fmt(row.step_time_mean) << ','
        << fmt(row.step_time_std) << ',' << fmt(row.solve_time_mean) << '\n';
  }
}

inline SuiteResult read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw std::runtime_error("read_csv: " + path + ": unexpected header");
  }
  SuiteResult result;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 24) {
      throw std::runtime_error("read_csv: " + path + ":" + std::to_string(line_no) +
                               ": expected 24 fields");
    }
    const auto num = [&](std::size_t i) {
      double v = 0.0;
      if (!detail::to_double(fields[i], &v)) {
        throw std::runtime_error("read_csv: " + path + ":" + std::to_string(line_no) +
                                 ": bad number '" + fields[i] + "'");
      }
      return v;
    };
    ScenarioResult row;
    row.suite = fields[0];
    row.id = fields[1];
    row.raw_outcome = outcome_from_string(fields[2]);
    row.raw_length = num(3);
    row.steps = static_cast<int>(num(4));
    row.sweep_clear = num(5) != 0.0;
    row.records_ok = num(6) != 0.0;
    row.worst_resid = num(7);
    row.worst_local_r = num(8);
    for (std::size_t k = 0; k < 10; ++k) row.rrt_lengths[k] = num(9 + k);
    row.rrt_mean = num(19);
    row.rrt_min = num(20);
    row.reference_length = num(21);
    row.ratio_raw_over_ref = num(22);
    row.error = fields[23];
    result.rows.push_back(std::move(row));
  }
  result.suite = result.rows.empty() ? "empty" : result.rows.front().suite;
  aggregate(result);
  return result;
}

}  // namespace raw
