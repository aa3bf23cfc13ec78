#include <raw/sdp_filter.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "oracles/sdp_case_io.hpp"

using namespace raw;

#ifndef RAW_SOURCE_DIR
#define RAW_SOURCE_DIR "."
#endif

namespace {

SdpProblem local_problem(std::vector<Vec2> cloud, std::vector<Vec2> grid,
                         Vec2 goal) {
  SdpProblem p;
  const double h = kFootprintSide / 2.0;
  p.corners = {Vec2{h, h}, Vec2{-h, h}, Vec2{-h, -h}, Vec2{h, -h}};
  p.cloud = std::move(cloud);
  p.grid = std::move(grid);
  p.goal = goal;
  return p;
}

double value_at(const Ellipsoid& e, const Vec2& x) {
  return level_set_value(e, x);
}

FovGrid coarse_grid() {
  return make_grid(Pose{0, 0, 0}, FovParams{5, 0.5, 60, 5});
}

}  // namespace

TEST_CASE("build_problem moves everything into the robot frame") {
  SECTION("rigid transform of a cloud point") {
    PointCloud cloud;
    cloud.points.push_back({2, 4});
    const auto grid = coarse_grid();
    const auto p = build_problem(Pose{2, 3, kPi / 2}, cloud, grid, {2, 3});
    REQUIRE(p.cloud.size() == 1);
    CHECK(p.cloud[0].x() == Catch::Approx(1.0).margin(1e-12));
    CHECK(p.cloud[0].y() == Catch::Approx(0.0).margin(1e-12));
    CHECK(p.goal.norm() < 1e-12);
    CHECK(p.grid.size() == grid.points.size());
  }

  SECTION("empty cloud is allowed") {
    const auto p = build_problem(Pose{0, 0, 0}, PointCloud{}, coarse_grid(), {1, 0});
    CHECK(p.cloud.empty());
  }

  SECTION("cloud point inside the footprint is a hard error") {
    PointCloud cloud;
    cloud.points.push_back({0.1, -0.2});
    CHECK_THROWS_AS(build_problem(Pose{0, 0, 0}, cloud, coarse_grid(), {1, 0}),
                    InfeasibleStartError);
  }

  SECTION("boundary contact is tolerated") {
    PointCloud cloud;
    cloud.points.push_back({0.5, 0.0});
    CHECK_NOTHROW(build_problem(Pose{0, 0, 0}, cloud, coarse_grid(), {1, 0}));
  }
}

TEST_CASE("empty cloud solve leaves every slack at zero") {
  const auto grid = coarse_grid();
  std::vector<Vec2> pts(grid.points.begin(), grid.points.end());
  const auto p = local_problem({}, pts, {4, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.kkt_residual <= 1e-6);
  CHECK(sol.nu == 0.0);
  for (double l : sol.lambdas) CHECK(l == 0.0);
  const auto mask = filter_grid(sol, sol.lambdas.size());
  for (char f : mask) CHECK(f == 1);
}

TEST_CASE("four-fold symmetric instance matches the dense search") {
  const auto p = local_problem({{3, 0}, {-3, 0}, {0, 3}, {0, -3}},
                               {{0, 0}}, {0, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.kkt_residual <= 1e-6);

  // Dense 2-variable search over concentric circles t*I with offset r,
  // which by symmetry contains the optimum: objective
  // -log det(tI) + eps*tr + lambda + nu with hinge slacks at the origin.
  double best = std::numeric_limits<double>::infinity();
  const double eps = SolverSettings{}.epsilon_reg;
  for (int i = 0; i <= 20000; ++i) {
    const double t = std::exp(std::log(1.0) + (std::log(5000.0) / 20000.0) * i);
    for (const double r : {-1.0 - 0.5 * t, 1.0 - 9.0 * t, -1.0}) {
      if (0.5 * t + r > -1.0 + 1e-12) continue;
      if (9.0 * t + r < 1.0 - 1e-12) continue;
      const double slacks = 2.0 * std::max(0.0, r + 1.0);
      best = std::min(best, -2.0 * std::log(t) + eps * 2.0 * t + slacks);
    }
  }
  CHECK(sol.objective == Catch::Approx(best).margin(1e-4));

  SECTION("solution is a centered circle by symmetry") {
    CHECK(std::abs(sol.ellipsoid.P(0, 1)) < 1e-4);
    CHECK(sol.ellipsoid.P(0, 0) ==
          Catch::Approx(sol.ellipsoid.P(1, 1)).margin(1e-4));
    CHECK(sol.ellipsoid.q.norm() < 1e-3);
  }
  SECTION("hard constraints hold") {
    for (const Vec2& z : p.cloud) CHECK(value_at(sol.ellipsoid, z) >= 1 - 1e-6);
    for (const Vec2& c : p.corners) CHECK(value_at(sol.ellipsoid, c) <= -1 + 1e-6);
  }
}

TEST_CASE("single obstacle certificate is feasible and canonical") {
  const auto grid = coarse_grid();
  std::vector<Vec2> pts(grid.points.begin(), grid.points.end());
  const auto p = local_problem({{3, 0}}, pts, {4.5, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.kkt_residual <= 1e-6);
  CHECK(value_at(sol.ellipsoid, {3, 0}) >= 1.0 - 1e-6);
  CHECK(footprint_inside(sol.ellipsoid, footprint_corners(Pose{0, 0, 0}), -1.0));
  CHECK(sol.ellipsoid.r <= -1.0 + 1e-9);

  const auto radii = canonical_radii(sol.ellipsoid);
  CHECK(std::abs(radii.r1 * radii.r1 - radii.r2 * radii.r2 - 1.0) <= 1e-6);

  SECTION("slacks equal the hinge of the level-set value") {
    for (std::size_t j = 0; j < p.grid.size(); ++j) {
      const double hinge = std::max(0.0, value_at(sol.ellipsoid, p.grid[j]) + 1.0);
      CHECK(sol.lambdas[j] == Catch::Approx(hinge).margin(1e-5));
    }
  }
}

TEST_CASE("solver matches the frozen reference objectives") {
  const auto file = oracle::load_sdp_cases(
      std::string(RAW_SOURCE_DIR) + "/tests/data/sdp_oracle_cases.txt");
  REQUIRE(file.cases.size() == 200);
  SolverSettings settings;
  REQUIRE(settings.epsilon_reg == Catch::Approx(file.epsilon_reg).margin(1e-15));

  // The full 200-case battery runs in the acceptance gate; a prefix keeps
  // the unit suite fast while still exercising the solver end to end.
  for (std::size_t i = 0; i < 40; ++i) {
    const auto& c = file.cases[i];
    INFO("case " << i);
    const auto p = local_problem(c.cloud, c.grid, c.goal);
    const auto sol = solve(p, settings);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.kkt_residual <= 1e-6);
    CHECK(std::abs(sol.objective - c.objective) <=
          1e-3 * std::max(1.0, std::abs(c.objective)));
    for (const Vec2& z : c.cloud) {
      CHECK(value_at(sol.ellipsoid, z) >= 1.0 - 1e-6);
    }
    CHECK(sol.ellipsoid.r <= -1.0 + 1e-9);
  }
}

TEST_CASE("pinched footprint has no separating ellipsoid") {
  // Two facing pairs of points just off the footprint edge midpoints leave
  // no room for any ellipsoid with P above the identity: the difference of
  // the opposing constraints is unsatisfiable.
  const auto p = local_problem({{0.52, 0}, {-0.52, 0}, {0, 0.52}, {0, -0.52}},
                               {{2, 0}}, {2, 0});
  const auto sol = solve(p);
  CHECK(sol.status == SolveStatus::Infeasible);
  const auto mask = filter_grid(sol, sol.lambdas.size());
  for (char f : mask) CHECK(f == 0);
}

TEST_CASE("elongated separations are found from the relaxation start") {
  // A point too close for any concentric circle: requires the phase-one
  // search to produce an elongated certificate.
  const auto p = local_problem({{0.58, 0.1}}, {{2, 0}}, {2, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.kkt_residual <= 1e-6);
  CHECK(value_at(sol.ellipsoid, {0.58, 0.1}) >= 1.0 - 1e-6);
  CHECK(footprint_inside(sol.ellipsoid, footprint_corners(Pose{0, 0, 0}), -1.0));
}

TEST_CASE("filter_grid applies the unit threshold") {
  SdpSolution sol;
  sol.status = SolveStatus::Optimal;
  sol.lambdas = {0.0, 1.0 - 1e-12, 1.0, 2.3};
  const auto mask = filter_grid(sol, 4);
  CHECK(mask[0] == 1);
  CHECK(mask[1] == 1);
  CHECK(mask[2] == 0);
  CHECK(mask[3] == 0);

  sol.status = SolveStatus::MaxIter;
  for (char f : filter_grid(sol, 4)) CHECK(f == 0);

  CHECK_THROWS_AS(filter_grid(sol, 3), std::invalid_argument);
}

TEST_CASE("grid point sharing an obstacle location is filtered out") {
  const Vec2 shared{2.0, 0.5};
  const auto p = local_problem({shared}, {shared, {0.4, 0}}, {4, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.lambdas[0] >= 2.0 - 1e-5);
  const auto mask = filter_grid(sol, 2);
  CHECK(mask[0] == 0);
  CHECK(mask[1] == 1);  // a point inside the footprint is always inside Ψ
}

TEST_CASE("to_world preserves level-set values") {
  const auto p = local_problem({{2.5, 0.4}}, {{1, 0}}, {3, 0});
  const auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);

  SECTION("identity pose is the identity map") {
    const auto e = to_world(sol, Pose{0, 0, 0});
    CHECK((e.P - sol.ellipsoid.P).norm() < 1e-12);
    CHECK((e.q - sol.ellipsoid.q).norm() < 1e-12);
    CHECK(e.r == Catch::Approx(sol.ellipsoid.r).margin(1e-12));
  }

  SECTION("translation shifts values with the frame") {
    const Pose pose{3, -2, 0};
    const auto e = to_world(sol, pose);
    const Vec2 local{1.3, 0.4};
    CHECK(level_set_value(e, local + pose.position()) ==
          Catch::Approx(level_set_value(sol.ellipsoid, local)).margin(1e-9));
  }

  SECTION("rotation preserves the spectrum") {
    const auto e = to_world(sol, Pose{0, 0, kPi / 2});
    CHECK(e.P.trace() == Catch::Approx(sol.ellipsoid.P.trace()).margin(1e-9));
    CHECK(e.P.determinant() ==
          Catch::Approx(sol.ellipsoid.P.determinant()).margin(1e-9));
  }
}

TEST_CASE("identical inputs give bitwise-identical classifications") {
  const auto file = oracle::load_sdp_cases(
      std::string(RAW_SOURCE_DIR) + "/tests/data/sdp_oracle_cases.txt");
  const auto& c = file.cases[3];
  const auto p = local_problem(c.cloud, c.grid, c.goal);
  const auto a = solve(p);
  const auto b = solve(p);
  REQUIRE(a.lambdas.size() == b.lambdas.size());
  CHECK(std::memcmp(a.lambdas.data(), b.lambdas.data(),
                    a.lambdas.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(&a.ellipsoid.P, &b.ellipsoid.P, sizeof(Mat2)) == 0);
  CHECK(a.ellipsoid.r == b.ellipsoid.r);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("strided slack subsets still certify safety") {
  const auto grid = coarse_grid();
  std::vector<Vec2> pts(grid.points.begin(), grid.points.end());
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> uang(-kPi, kPi);
  std::uniform_real_distribution<double> urad(1.2, 4.5);
  std::vector<Vec2> cloud;
  for (int i = 0; i < 12; ++i) {
    const double a = uang(rng), r = urad(rng);
    cloud.push_back({r * std::cos(a), r * std::sin(a)});
  }
  SolverSettings strided;
  strided.grid_stride = 7;
  const auto p = local_problem(cloud, pts, {4, 0});
  const auto sol = solve(p, strided);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.lambdas.size() == pts.size());
  for (const Vec2& z : cloud) CHECK(value_at(sol.ellipsoid, z) >= 1.0 - 1e-6);
  for (const Vec2& c : p.corners) CHECK(value_at(sol.ellipsoid, c) <= -1.0 + 1e-6);
}
