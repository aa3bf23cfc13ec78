#include <raw/geometry.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles/radii_oracle.hpp"

using namespace raw;

namespace {

Ellipsoid from_center(const Mat2& p, const Vec2& center, double lambda) {
  // Builds value(x) = (x-c)'P(x-c) + lambda, i.e. minimum lambda at c.
  Ellipsoid e;
  e.P = p;
  e.q = -2.0 * (p * center);
  e.r = lambda + center.dot(p * center);
  return e;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(2.0 * kPi + 0.25) == Catch::Approx(0.25));
  CHECK(wrap_angle(-7.5 * kPi) == Catch::Approx(0.5 * kPi));
}

TEST_CASE("pose local/world round trip") {
  const Pose pose{1.5, -2.0, 0.7};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p{u(rng), u(rng)};
    CHECK((pose.to_world(pose.to_local(p)) - p).norm() < 1e-12);
    CHECK((pose.to_local(pose.to_world(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("canonical_radii matches frozen examples") {
  SECTION("unit circle family") {
    Ellipsoid e;  // P=I, q=0, r=-4
    e.r = -4.0;
    const auto radii = canonical_radii(e);
    CHECK(radii.lambda == Catch::Approx(-4.0).margin(1e-15));
    CHECK(radii.r1 == Catch::Approx(2.0).margin(1e-15));
    CHECK(radii.r2 == Catch::Approx(std::sqrt(3.0)).margin(1e-15));
    CHECK(radii.schur == Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("axis-scaled ellipsoid keeps the same canonical radii") {
    Ellipsoid e;
    e.P << 4.0, 0.0, 0.0, 1.0;
    e.r = -4.0;
    const auto radii = canonical_radii(e);
    CHECK(radii.r1 == Catch::Approx(2.0).margin(1e-15));
    CHECK(radii.r2 == Catch::Approx(std::sqrt(3.0)).margin(1e-15));
  }
  SECTION("boundary case r = -1 gives empty inner radius") {
    Ellipsoid e;
    e.r = -1.0;
    const auto radii = canonical_radii(e);
    CHECK(radii.r1 == Catch::Approx(1.0).margin(1e-15));
    CHECK(radii.r2 == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("linear term shifts the center, not the identity") {
    Ellipsoid e;
    e.q << 2.0, 0.0;  // center (-1, 0), lambda = -5
    e.r = -4.0;
    const auto radii = canonical_radii(e);
    CHECK(radii.lambda == Catch::Approx(-5.0).margin(1e-14));
    CHECK(radii.r1 == Catch::Approx(std::sqrt(5.0)).margin(1e-14));
    CHECK(radii.r2 == Catch::Approx(2.0).margin(1e-14));
  }
  SECTION("full matrix case, value frozen from explicit arithmetic") {
    Ellipsoid e;
    e.P << 2.0, 0.5, 0.5, 1.0;
    e.q << 0.4, -0.2;
    e.r = -3.0;
    const auto radii = canonical_radii(e);
    const double expected_lambda = -3.0 - 0.04 / 2.0 - 0.0225 / 0.875;
    CHECK(radii.lambda == Catch::Approx(expected_lambda).margin(1e-14));
    CHECK(radii.schur == Catch::Approx(0.875).margin(1e-15));
  }
}

TEST_CASE("canonical_radii agrees with elimination oracle on random ellipsoids") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ul(-30.0, -1.05);
  for (int i = 0; i < 500; ++i) {
    Mat2 a;
    a << u(rng), u(rng), u(rng), u(rng);
    const Mat2 p = a.transpose() * a + 0.2 * Mat2::Identity();
    const Vec2 center{u(rng), u(rng)};
    const Ellipsoid e = from_center(p, center, ul(rng));
    const auto radii = canonical_radii(e);
    const auto ref = oracle::radii_by_elimination(e);
    CHECK(radii.lambda == Catch::Approx(ref.lambda).margin(1e-9));
    CHECK(radii.r1 == Catch::Approx(ref.r1).margin(1e-9));
    CHECK(radii.r2 == Catch::Approx(ref.r2).margin(1e-9));
    // The defining identity of the two levels.
    CHECK(std::abs(radii.r1 * radii.r1 - radii.r2 * radii.r2 - 1.0) < 1e-9);
    // lambda is the minimum of the quadratic, attained at the center.
    CHECK(level_set_value(e, center) == Catch::Approx(radii.lambda).margin(1e-9));
  }
}

TEST_CASE("canonical_radii monotone in r") {
  Ellipsoid e;
  e.P << 3.0, 1.0, 1.0, 2.0;
  e.q << 0.5, -1.0;
  e.r = -6.0;
  double prev = canonical_radii(e).r1;
  for (double delta = 0.25; delta <= 2.0; delta += 0.25) {
    Ellipsoid shifted = e;
    shifted.r += delta;
    const double r1 = canonical_radii(shifted).r1;
    CHECK(r1 < prev);
    prev = r1;
  }
}

TEST_CASE("canonical_radii rejects invalid inputs distinctly") {
  Ellipsoid bad_p;
  bad_p.P << -1.0, 0.0, 0.0, 1.0;
  bad_p.r = -4.0;
  CHECK_THROWS_WITH(canonical_radii(bad_p),
                    Catch::Matchers::ContainsSubstring("positive definite"));

  Ellipsoid indefinite;
  indefinite.P << 1.0, 3.0, 3.0, 1.0;
  indefinite.r = -4.0;
  CHECK_THROWS_WITH(canonical_radii(indefinite),
                    Catch::Matchers::ContainsSubstring("positive definite"));

  Ellipsoid shallow;  // minimum above -1: inner level set empty
  shallow.r = -0.5;
  CHECK_THROWS_WITH(canonical_radii(shallow),
                    Catch::Matchers::ContainsSubstring("r2 undefined"));
}

TEST_CASE("transform_ellipsoid preserves level-set values pointwise") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 100; ++i) {
    Mat2 a;
    a << u(rng), u(rng), u(rng), u(rng);
    Ellipsoid local = from_center(a.transpose() * a + 0.3 * Mat2::Identity(),
                                  Vec2{u(rng), u(rng)}, -5.0);
    const Pose pose{u(rng), u(rng), ang(rng)};
    const Ellipsoid world = transform_ellipsoid(local, pose);
    for (int k = 0; k < 10; ++k) {
      const Vec2 x_world{u(rng), u(rng)};
      CHECK(level_set_value(world, x_world) ==
            Catch::Approx(level_set_value(local, pose.to_local(x_world)))
                .margin(1e-9));
    }
    // Canonical radii are invariant under rigid transforms.
    CHECK(canonical_radii(world).r1 ==
          Catch::Approx(canonical_radii(local).r1).margin(1e-9));
  }
}

TEST_CASE("footprint corners") {
  const auto corners = footprint_corners(Pose{0.0, 0.0, 0.0});
  CHECK((corners[0] - Vec2{0.5, 0.5}).norm() < 1e-15);
  CHECK((corners[1] - Vec2{-0.5, 0.5}).norm() < 1e-15);
  CHECK((corners[2] - Vec2{-0.5, -0.5}).norm() < 1e-15);
  CHECK((corners[3] - Vec2{0.5, -0.5}).norm() < 1e-15);

  // CCW orientation: positive signed area.
  double area = 0.0;
  for (int i = 0; i < 4; ++i) area += cross2(corners[i], corners[(i + 1) % 4]);
  CHECK(area > 0.0);

  // Quarter turn permutes the corner set.
  const auto rotated = footprint_corners(Pose{0.0, 0.0, kPi / 2.0});
  for (const auto& rc : rotated) {
    const bool found = std::any_of(corners.begin(), corners.end(), [&](const Vec2& c) {
      return (rc - c).norm() < 1e-12;
    });
    CHECK(found);
  }

  const auto shifted = footprint_corners(Pose{2.0, 1.0, 0.0});
  CHECK((shifted[0] - Vec2{2.5, 1.5}).norm() < 1e-15);
}

TEST_CASE("footprint_inside and in_overlap") {
  const auto corners = footprint_corners(Pose{0.0, 0.0, 0.3});
  Ellipsoid big;  // circle radius 2 at level 0
  big.r = -4.0;
  Ellipsoid tight;  // circle through the corners
  tight.r = -0.5;
  Ellipsoid small;  // corners outside at level 0
  small.r = -0.4;

  CHECK(footprint_inside(big, corners, 0.0));
  CHECK(footprint_inside(big, corners, -1.0));
  CHECK(footprint_inside(tight, corners, 0.0));   // touching counts
  CHECK(!footprint_inside(small, corners, 0.0));
  CHECK(!footprint_inside(tight, corners, -1.0));

  CHECK(in_overlap(big, tight, corners));
  CHECK(!in_overlap(big, small, corners));
  Ellipsoid offset = from_center(Mat2::Identity(), Vec2{10.0, 0.0}, -4.0);
  CHECK(!in_overlap(big, offset, corners));
}

TEST_CASE("segment versus circle") {
  const std::vector<Obstacle> obstacles = {Circle{{2.0, 0.0}, 0.5}};
  CHECK(segment_intersects_obstacles({0.0, 0.0}, {4.0, 0.0}, obstacles));
  CHECK(!segment_intersects_obstacles({0.0, 1.0}, {4.0, 1.0}, obstacles));
  // Tangent segment: boundary contact counts.
  CHECK(segment_intersects_obstacles({0.0, 0.5}, {4.0, 0.5}, obstacles));
  // Segment ending inside.
  CHECK(segment_intersects_obstacles({0.0, 0.0}, {1.8, 0.0}, obstacles));
  // Segment entirely short of the circle.
  CHECK(!segment_intersects_obstacles({0.0, 0.0}, {1.2, 0.0}, obstacles));
}

TEST_CASE("segment versus polygon") {
  Polygon square;
  square.vertices = {{1.0, 1.0}, {3.0, 1.0}, {3.0, 3.0}, {1.0, 3.0}};
  const std::vector<Obstacle> obstacles = {square};

  CHECK(segment_intersects_obstacles({0.0, 0.0}, {2.0, 2.0}, obstacles));
  CHECK(!segment_intersects_obstacles({0.0, 0.0}, {0.5, 0.5}, obstacles));
  CHECK(segment_intersects_obstacles({1.5, 1.5}, {2.5, 2.5}, obstacles));  // inside
  CHECK(segment_intersects_obstacles({0.0, 1.0}, {2.0, 1.0}, obstacles));  // touches edge
  CHECK(segment_intersects_obstacles({0.0, 0.0}, {1.0, 1.0}, obstacles));  // touches vertex
  CHECK(!segment_intersects_obstacles({0.0, 4.0}, {4.0, 4.0}, obstacles));
}

TEST_CASE("point_in_polygon handles nonconvex shapes") {
  Polygon lshape;  // L-shaped, CCW
  lshape.vertices = {{0.0, 0.0}, {3.0, 0.0}, {3.0, 1.0},
                     {1.0, 1.0}, {1.0, 3.0}, {0.0, 3.0}};
  CHECK(point_in_polygon({0.5, 0.5}, lshape));
  CHECK(point_in_polygon({2.5, 0.5}, lshape));
  CHECK(point_in_polygon({0.5, 2.5}, lshape));
  CHECK(!point_in_polygon({2.0, 2.0}, lshape));  // in the notch
  CHECK(point_in_polygon({1.0, 2.0}, lshape));   // on boundary
  CHECK(!point_in_polygon({3.5, 0.5}, lshape));
}

TEST_CASE("footprint versus circle matches a sampling oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> rad(0.2, 0.8);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const Pose pose{u(rng), u(rng), ang(rng)};
    const Circle circle{{u(rng), u(rng)}, rad(rng)};
    // Sampled distance from the circle center to the footprint boundary/area.
    const auto corners = footprint_corners(pose);
    double dmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      dmin = std::min(dmin, dist_point_segment(circle.center, corners[k],
                                               corners[(k + 1) % 4]));
    }
    const Vec2 local = pose.to_local(circle.center);
    const bool center_inside =
        std::abs(local.x()) <= 0.5 && std::abs(local.y()) <= 0.5;
    if (center_inside) dmin = 0.0;
    if (std::abs(dmin - circle.radius) < 1e-6) continue;  // knife-edge, skip
    ++checked;
    CHECK(footprint_intersects_obstacle(pose, Obstacle{circle}) ==
          (dmin <= circle.radius));
  }
  CHECK(checked > 150);
}

TEST_CASE("footprint versus polygon containment cases") {
  Polygon big;
  big.vertices = {{-5.0, -5.0}, {5.0, -5.0}, {5.0, 5.0}, {-5.0, 5.0}};
  CHECK(footprint_intersects_obstacle(Pose{0.0, 0.0, 0.4}, Obstacle{big}));

  Polygon tiny;
  tiny.vertices = {{-0.1, -0.1}, {0.1, -0.1}, {0.0, 0.1}};
  CHECK(footprint_intersects_obstacle(Pose{0.0, 0.0, 0.0}, Obstacle{tiny}));
  CHECK(!footprint_intersects_obstacle(Pose{3.0, 0.0, 0.0}, Obstacle{tiny}));

  Polygon wall;
  wall.vertices = {{2.0, -4.0}, {2.2, -4.0}, {2.2, 4.0}, {2.0, 4.0}};
  CHECK(!footprint_intersects_obstacle(Pose{1.0, 0.0, 0.0}, Obstacle{wall}));
  CHECK(footprint_intersects_obstacle(Pose{1.6, 0.0, 0.0}, Obstacle{wall}));
  // Rotated by 45 degrees the half-diagonal reaches 0.707.
  CHECK(footprint_intersects_obstacle(Pose{1.35, 0.0, kPi / 4.0}, Obstacle{wall}));
}

TEST_CASE("footprint_in_rect") {
  const Rect rect{0.0, 0.0, 10.0, 10.0};
  CHECK(footprint_in_rect(Pose{5.0, 5.0, 0.3}, rect));
  CHECK(footprint_in_rect(Pose{0.5, 0.5, 0.0}, rect));  // touching the wall
  CHECK(!footprint_in_rect(Pose{0.4, 5.0, 0.0}, rect));
  CHECK(!footprint_in_rect(Pose{0.6, 0.6, kPi / 4.0}, rect));  // diagonal pokes out
  CHECK(!footprint_in_rect(Pose{11.0, 5.0, 0.0}, rect));
}
