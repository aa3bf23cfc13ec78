#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <raw/planner.hpp>

using raw::Circle;
using raw::Environment;
using raw::Polygon;
using raw::Pose;
using raw::RunOutcome;
using raw::RunTrace;
using raw::StepRecord;
using raw::Vec2;

namespace {

const raw::FovParams kCoarseFov{5.0, 0.5, 60.0, 15.0};

Environment straight_env() {
  Environment env;
  env.bounds = raw::Rect{0.0, 0.0, 20.0, 20.0};
  env.start = Pose{2.0, 10.0, 0.0};
  env.goal = Vec2{18.0, 10.0};
  return env;
}

Environment wall_env() {
  Environment env;
  env.bounds = raw::Rect{0.0, 0.0, 20.0, 20.0};
  env.start = Pose{3.0, 10.0, 0.0};
  env.goal = Vec2{17.0, 10.0};
  Polygon wall;
  wall.vertices = {Vec2{9.8, 4.0}, Vec2{10.2, 4.0}, Vec2{10.2, 16.0}, Vec2{9.8, 16.0}};
  env.obstacles.push_back(wall);
  return env;
}

Environment disc_env() {
  Environment env;
  env.bounds = raw::Rect{0.0, 0.0, 20.0, 20.0};
  env.start = Pose{5.0, 10.0, 0.0};
  env.goal = Vec2{15.0, 10.0};
  env.obstacles.push_back(Circle{Vec2{10.0, 10.0}, 1.0});
  return env;
}

raw::PlannerParams coarse_params() {
  raw::PlannerParams params;
  params.fov = kCoarseFov;
  return params;
}

bool same_record(const StepRecord& a, const StepRecord& b) {
  const bool poses = a.pose_before.x == b.pose_before.x && a.pose_before.y == b.pose_before.y &&
                     a.pose_before.theta == b.pose_before.theta && a.pose_after.x == b.pose_after.x &&
                     a.pose_after.y == b.pose_after.y && a.pose_after.theta == b.pose_after.theta;
  const bool cert = (a.ellipsoid.P - b.ellipsoid.P).norm() == 0.0 &&
                    (a.ellipsoid.q - b.ellipsoid.q).norm() == 0.0 && a.ellipsoid.r == b.ellipsoid.r;
  return poses && cert && a.waypoint == b.waypoint && a.delta_t == b.delta_t &&
         a.lambda_count_infeasible == b.lambda_count_infeasible;
}

void check_certified(const StepRecord& rec) {
  CHECK(rec.delta_t > 0.0);
  CHECK(rec.delta_t <= 0.9 + 1e-12);
  CHECK(rec.safety_checks.inside_prev);
  CHECK(rec.safety_checks.inside_curr);
  CHECK(rec.safety_checks.overlap);
  CHECK(rec.safety_checks.radii_identity_residual <= raw::kRadiiTolerance);
  // pose_before sits strictly inside the -1 level set of its own certificate
  CHECK(raw::level_set_value(rec.ellipsoid, rec.pose_before.position()) <= -1.0 + 1e-9);
}

}  // namespace

TEST_CASE("first planning step on an open arena") {
  Environment env;
  env.bounds = raw::Rect{0.0, 0.0, 30.0, 30.0};
  env.start = Pose{5.0, 15.0, 0.0};
  env.goal = Vec2{15.0, 15.0};
  raw::PlannerParams params;  // default sensor: 3025 candidates, r_max 5

  const auto [rec, next] = raw::raw_step(env, env.start, raw::fallback_weights(), params);

  // nothing blocks the sector, so the pick is the sensing-boundary point on the
  // goal bearing, and the certified duration saturates at 0.9 * dt_cap
  CHECK(rec.waypoint.x() == Catch::Approx(10.0).margin(1e-9));
  CHECK(rec.waypoint.y() == Catch::Approx(15.0).margin(1e-9));
  CHECK(rec.delta_t == Catch::Approx(0.9).margin(1e-12));
  CHECK(next.x == Catch::Approx(5.9).margin(1e-9));
  CHECK(next.y == Catch::Approx(15.0).margin(1e-9));
  CHECK(next.theta == Catch::Approx(0.0).margin(1e-12));
  CHECK(rec.lambda_count_infeasible == 0);
  CHECK(rec.solve_time > 0.0);
  CHECK(rec.step_time >= rec.solve_time);
  check_certified(rec);
  CHECK(raw::level_set_value(rec.ellipsoid, rec.waypoint) <= 0.0);

  const raw::LevelSetRadii radii = raw::canonical_radii(rec.ellipsoid);
  CHECK(std::abs(radii.r1 * radii.r1 - radii.r2 * radii.r2 - 1.0) <= raw::kRadiiTolerance);
}

TEST_CASE("straight run reaches the goal with certified steps") {
  const Environment env = straight_env();
  const raw::PlannerParams params = coarse_params();
  const RunTrace trace = raw::raw_run(env, raw::fallback_weights(), params);

  REQUIRE(trace.outcome == RunOutcome::reached_goal);
  CHECK(trace.records.size() == 18);
  // 17 saturated 0.9 s legs plus a final half leg; the stop fires once the pose
  // is within epsilon_goal = 0.5, so the total undershoots the 16 m gap
  CHECK(trace.path_length == Catch::Approx(15.75).margin(1e-9));
  CHECK(trace.path_length >= 15.3);
  CHECK(trace.path_length <= 17.6);
  CHECK(trace.wall_time > 0.0);
  for (const StepRecord& rec : trace.records) check_certified(rec);
  CHECK(raw::trace_collision_free(env, trace));

  SECTION("repeat run is bitwise identical") {
    const RunTrace again = raw::raw_run(env, raw::fallback_weights(), params);
    REQUIRE(again.records.size() == trace.records.size());
    CHECK(again.outcome == trace.outcome);
    CHECK(again.path_length == trace.path_length);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      CHECK(same_record(trace.records[i], again.records[i]));
    }
  }
}

TEST_CASE("certificate excludes the far side of a wall") {
  const Environment env = wall_env();
  const Pose pose{6.5, 10.0, 0.0};  // wall front face 3.3 m ahead, well inside range
  const auto ob =
      raw::detail::observe(env, pose, env.goal, kCoarseFov, raw::SolverSettings{}, 0.1);
  REQUIRE(ob.sdp.status == raw::SolveStatus::Optimal);

  int infeasible = 0;
  for (const char f : ob.feasible) infeasible += f ? 0 : 1;
  CHECK(infeasible > 0);

  const raw::Ellipsoid world = raw::to_world(ob.sdp, pose);
  for (std::size_t j = 0; j < ob.grid.points.size(); ++j) {
    if (ob.grid.points[j].x() > 10.2) CHECK_FALSE(static_cast<bool>(ob.feasible[j]));
  }
  // sensed returns must stay on or above the +1 level of the certificate
  double worst = std::numeric_limits<double>::infinity();
  for (const Vec2& pt : ob.cloud.points) worst = std::min(worst, raw::level_set_value(world, pt));
  CHECK(worst >= 1.0 - 1e-6);
}

TEST_CASE("wall contrast between filtered and unfiltered runs") {
  const Environment env = wall_env();
  raw::PlannerParams params = coarse_params();
  params.max_steps = 200;

  SECTION("the certified run never touches the wall") {
    const RunTrace trace = raw::raw_run(env, raw::fallback_weights(), params);
    CHECK(trace.outcome != RunOutcome::safety_violation);
    CHECK(raw::trace_collision_free(env, trace));
    CHECK(raw::min_trace_clearance(env, trace) > 0.05);
  }

  SECTION("dropping the filter drives straight into the wall") {
    const RunTrace trace = raw::raw_run_unfiltered(env, raw::fallback_weights(), params);
    CHECK(trace.outcome == RunOutcome::safety_violation);
    CHECK_FALSE(raw::trace_collision_free(env, trace));
    CHECK(raw::min_trace_clearance(env, trace) == 0.0);
  }

  SECTION("the unfiltered mode still reaches the goal when nothing blocks it") {
    const Environment open = straight_env();
    const RunTrace trace = raw::raw_run_unfiltered(open, raw::fallback_weights(), params);
    CHECK(trace.outcome == RunOutcome::reached_goal);
    CHECK(trace.path_length == Catch::Approx(16.0).margin(1e-9));
    CHECK(raw::trace_collision_free(open, trace));
  }
}

TEST_CASE("ringed start ends with no feasible waypoint") {
  Environment env;
  env.bounds = raw::Rect{0.0, 0.0, 20.0, 20.0};
  env.start = Pose{10.0, 10.0, 0.0};
  env.goal = Vec2{18.0, 10.0};
  // 13 discs centered 1.2 m out across the sector leave no certifiable motion:
  // every forward leg exits the certificate at its first sample
  for (int k = -6; k <= 6; ++k) {
    const double bearing = raw::deg_to_rad(12.0 * k);
    env.obstacles.push_back(
        Circle{Vec2{10.0 + 1.2 * std::cos(bearing), 10.0 + 1.2 * std::sin(bearing)}, 0.473});
  }
  REQUIRE(raw::footprint_clear(env, env.start));

  const RunTrace trace = raw::raw_run(env, raw::fallback_weights(), coarse_params());
  CHECK(trace.outcome == RunOutcome::no_feasible_waypoint);
  CHECK(trace.path_length < 0.05);
  CHECK(trace.records.size() <= 3);
  CHECK(raw::trace_collision_free(env, trace));
}

TEST_CASE("run rejects invalid starts") {
  Environment env = straight_env();
  env.obstacles.push_back(Circle{env.start.position(), 0.3});
  CHECK_THROWS_AS(raw::raw_run(env, raw::fallback_weights(), coarse_params()),
                  std::invalid_argument);

  Environment outside = straight_env();
  outside.start = Pose{-1.0, 10.0, 0.0};
  CHECK_THROWS_AS(raw::raw_run(outside, raw::fallback_weights(), coarse_params()),
                  std::invalid_argument);
}

TEST_CASE("steered rrt on the known map") {
  const Environment env = straight_env();

  SECTION("finds the goal on an open arena") {
    const auto path = raw::rrt_plan(env, env.start, env.goal, 10000, 7);
    REQUIRE(path.has_value());
    CHECK(path->length >= 15.5);  // no plan can beat the straight line minus epsilon_goal
    REQUIRE_FALSE(path->samples.empty());
    CHECK(path->samples.front().x == env.start.x);
    CHECK((path->samples.back().position() - env.goal).norm() <= 0.5);
    for (const Pose& p : path->samples) CHECK(raw::footprint_clear(env, p));
  }

  SECTION("same seed replays the same tree") {
    const auto a = raw::rrt_plan(env, env.start, env.goal, 10000, 7);
    const auto b = raw::rrt_plan(env, env.start, env.goal, 10000, 7);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->length == b->length);
    REQUIRE(a->samples.size() == b->samples.size());
    for (std::size_t i = 0; i < a->samples.size(); ++i) {
      CHECK(a->samples[i].x == b->samples[i].x);
      CHECK(a->samples[i].y == b->samples[i].y);
      CHECK(a->samples[i].theta == b->samples[i].theta);
    }
    const auto c = raw::rrt_plan(env, env.start, env.goal, 10000, 8);
    REQUIRE(c.has_value());
    CHECK(c->length != a->length);
  }

  SECTION("walled-off goal comes back empty") {
    Environment boxed = env;
    Polygon box;
    box.vertices = {Vec2{16.0, 8.0}, Vec2{20.0, 8.0}, Vec2{20.0, 12.0}, Vec2{16.0, 12.0}};
    boxed.obstacles.push_back(box);
    CHECK_FALSE(raw::rrt_plan(boxed, boxed.start, boxed.goal, 3000, 7).has_value());
  }

  SECTION("iteration budget must be positive") {
    CHECK_THROWS_AS(raw::rrt_plan(env, env.start, env.goal, 0, 7), std::invalid_argument);
  }
}

TEST_CASE("near-optimal reference planner") {
  SECTION("open arena cost is the straight line minus the goal tolerance") {
    Environment env = straight_env();
    env.goal = Vec2{10.0, 10.0};
    const auto path = raw::reference_optimal(env, env.start, env.goal);
    REQUIRE(path.has_value());
    CHECK(path->length == Catch::Approx(7.5).margin(1e-9));
    CHECK(path->samples.front().x == env.start.x);
    CHECK((path->samples.back().position() - env.goal).norm() <= 0.5);
  }

  SECTION("detours a disc near the tangent-line bound") {
    const Environment env = disc_env();
    const auto path = raw::reference_optimal(env, env.start, env.goal);
    REQUIRE(path.has_value());
    // two tangent lines plus the wrap arc at the tightest clearing radius give
    // roughly 10.0 after the 0.5 stop-short; the lattice lands within a cell
    CHECK(path->length == Catch::Approx(10.0615).epsilon(1e-3));
    CHECK(path->length >= 9.5);
    CHECK(path->length <= 11.2);
    CHECK((path->samples.back().position() - env.goal).norm() <= 0.5);
    for (const Pose& p : path->samples) CHECK(raw::footprint_clear(env, p));
  }

  SECTION("beats every rrt seed on the disc map") {
    const Environment env = disc_env();
    const auto ref = raw::reference_optimal(env, env.start, env.goal);
    REQUIRE(ref.has_value());
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto rrt = raw::rrt_plan(env, env.start, env.goal, 6000, seed);
      REQUIRE(rrt.has_value());
      CHECK(ref->length < rrt->length);
    }
  }

  SECTION("walled-off goal comes back empty") {
    Environment boxed = straight_env();
    Polygon box;
    box.vertices = {Vec2{16.0, 8.0}, Vec2{20.0, 8.0}, Vec2{20.0, 12.0}, Vec2{16.0, 12.0}};
    boxed.obstacles.push_back(box);
    CHECK_FALSE(raw::reference_optimal(boxed, boxed.start, boxed.goal).has_value());
  }
}
