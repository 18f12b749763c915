#include <doctest.h>

#include <cmath>
#include <random>

#include "fvmm/exact.hpp"
#include "fvmm/geometry.hpp"

using namespace fvmm;

TEST_CASE("circumcenter reference value") {
  const Vec2 c = circumcenter({0, 0}, {2, 0}, {1, 3});
  CHECK(c.x == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.y == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("circumcenter is equidistant from the vertices") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Vec2 a{U(rng), U(rng)}, b{U(rng), U(rng)}, c{U(rng), U(rng)};
    if (std::abs(signed_area2(a, b, c)) < 1e-3) continue;
    const Vec2 m = circumcenter(a, b, c);
    const double ra = norm(m - a), rb = norm(m - b), rc = norm(m - c);
    CHECK(ra == doctest::Approx(rb).epsilon(1e-10));
    CHECK(ra == doctest::Approx(rc).epsilon(1e-10));
  }
}

TEST_CASE("circumcenter rejects collinear points") {
  CHECK_THROWS_AS(circumcenter({0, 0}, {1, 1}, {2, 2}), GeometryError);
}

TEST_CASE("radius ratio") {
  const double s = std::sqrt(3.0) / 2.0;
  CHECK(radius_ratio({0, 0}, {1, 0}, {0.5, s}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(radius_ratio({0, 0}, {1, 0}, {0.5, 0.01}) < 0.1);
}

TEST_CASE("swept volume closed forms") {
  // facet of length 1 translating with unit speed along its normal
  CHECK(swept_volume({0, 0}, {1, 0}, {0, -1}, {0, -1}, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-14));
  // only one endpoint moves: triangular sweep
  CHECK(swept_volume({0, 0}, {1, 0}, {0, -1}, {0, 0}, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
  // motion tangential to the facet sweeps nothing
  CHECK(swept_volume({0, 0}, {1, 0}, {1, 0}, {1, 0}, 1.0) ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("swept volumes satisfy the discrete geometric conservation law") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    std::array<Vec2, 3> p{Vec2{U(rng), U(rng)}, Vec2{U(rng), U(rng)}, Vec2{U(rng), U(rng)}};
    if (signed_area2(p[0], p[1], p[2]) < 0) std::swap(p[1], p[2]);
    const double a0 = std::abs(triangle_area(p[0], p[1], p[2]));
    if (a0 < 1e-3) continue;
    std::array<Vec2, 3> v{Vec2{U(rng), U(rng)}, Vec2{U(rng), U(rng)}, Vec2{U(rng), U(rng)}};
    const double dt = 0.05 * std::abs(U(rng));
    std::array<Vec2, 3> q{p[0] + v[0] * dt, p[1] + v[1] * dt, p[2] + v[2] * dt};
    double swept = 0.0;
    for (int e = 0; e < 3; ++e) {
      const int i = (e + 1) % 3, j = (e + 2) % 3;
      swept += swept_volume(p[i], p[j], v[i], v[j], dt);
    }
    const double da = triangle_area(q[0], q[1], q[2]) - triangle_area(p[0], p[1], p[2]);
    CHECK(std::abs(swept - da) <= 1e-13 * std::max(1.0, a0));
  }
}

TEST_CASE("minimum area over a step catches mid-step inversion") {
  // vertex passes through the opposite edge and comes back
  std::array<Vec2, 3> p{Vec2{0, 0}, Vec2{1, 0}, Vec2{0.5, 0.1}};
  std::array<Vec2, 3> v{Vec2{0, 0}, Vec2{0, 0}, Vec2{0, -1}};
  CHECK(min_signed_area2_over_step(p, v, 0.4) < 0.0);
  CHECK(min_signed_area2_over_step(p, v, 0.05) > 0.0);
}

TEST_CASE("orientation predicate is exact on collinear input") {
  // points constructed on the main diagonal are detected as collinear
  const Vec2 a{0.3, 0.3}, b{0.55, 0.55}, c{0.7000000000000001, 0.7000000000000001};
  CHECK(orient2d_sign(a, b, c) == 0);
  CHECK(orient2d_sign(a, c, Vec2{0.7, 0.7000000000000002}) != 0);
}

TEST_CASE("incircle predicate on cocircular points") {
  CHECK(incircle_sign({1, 0}, {0, 1}, {-1, 0}, {0, -1}) == 0);
  CHECK(incircle_sign({1, 0}, {0, 1}, {-1, 0}, {0, -0.5}) > 0);
  CHECK(incircle_sign({1, 0}, {0, 1}, {-1, 0}, {0, -1.5}) < 0);
}

TEST_CASE("convex intersection areas") {
  const std::vector<Vec2> sq1{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const std::vector<Vec2> sq2{{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}};
  CHECK(convex_intersection_area(sq1, sq2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(convex_intersection_area(sq1, sq1) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<Vec2> far{{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  CHECK(convex_intersection_area(sq1, far) == 0.0);
  // triangle pair sharing only an edge
  const std::vector<Vec2> t1{{0, 0}, {1, 0}, {0, 1}};
  const std::vector<Vec2> t2{{1, 0}, {1, 1}, {0, 1}};
  CHECK(convex_intersection_area(t1, t2) == 0.0);
}

TEST_CASE("bisecting a triangle partitions it exactly") {
  // children of a longest-edge bisection tile the parent: intersection areas
  // against the parent sum to the parent area with no rounding loss
  const std::vector<Vec2> parent{{0.1, 0.2}, {0.9, 0.3}, {0.4, 0.8}};
  const Vec2 mid{(parent[0].x + parent[1].x) / 2, (parent[0].y + parent[1].y) / 2};
  const std::vector<Vec2> c1{parent[0], mid, parent[2]};
  const std::vector<Vec2> c2{mid, parent[1], parent[2]};
  const double a1 = convex_intersection_area(c1, parent);
  const double a2 = convex_intersection_area(c2, parent);
  const double total = std::abs(triangle_area(parent[0], parent[1], parent[2]));
  CHECK(a1 + a2 == doctest::Approx(total).epsilon(1e-15));
}

TEST_CASE("interval overlap") {
  CHECK(interval_overlap(0, 1, 0.5, 2) == doctest::Approx(0.5));
  CHECK(interval_overlap(1, 0, 0.5, 2) == doctest::Approx(0.5));
  CHECK(interval_overlap(0, 1, 2, 3) == 0.0);
}

TEST_CASE("point segment distance") {
  CHECK(point_segment_distance({0, 1}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(point_segment_distance({2, 0}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
}
