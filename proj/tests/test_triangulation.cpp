#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fvmm/exact.hpp"
#include "fvmm/geometry.hpp"
#include "fvmm/triangulation.hpp"

using namespace fvmm;

namespace {

double total_area(const Triangulation& T) {
  double a = 0.0;
  for (int t : T.alive_triangles()) {
    const auto& tr = T.triangle(t);
    a += triangle_area(T.vertex(tr.v[0]).pos, T.vertex(tr.v[1]).pos,
                       T.vertex(tr.v[2]).pos);
  }
  return a;
}

// every unconstrained interior edge is locally Delaunay
bool locally_delaunay(const Triangulation& T) {
  for (int t : T.alive_triangles()) {
    const auto& tr = T.triangle(t);
    for (int e = 0; e < 3; ++e) {
      if (tr.ek[e] != ConstraintKind::none) continue;
      int u = tr.nbr[e];
      if (u < t) continue;
      const auto& ur = T.triangle(u);
      int j = -1;
      for (int k = 0; k < 3; ++k)
        if (ur.nbr[k] == t) j = k;
      if (incircle_sign(T.vertex(tr.v[e]).pos, T.vertex(tr.v[(e + 1) % 3]).pos,
                        T.vertex(tr.v[(e + 2) % 3]).pos,
                        T.vertex(ur.v[j]).pos) > 0)
        return false;
    }
  }
  return true;
}

Triangulation unit_box() {
  Triangulation T;
  T.bootstrap_box(Vec2{0.0, 0.0}, Vec2{1.0, 1.0});
  return T;
}

}  // namespace

TEST_CASE("random point insertion keeps a valid Delaunay triangulation") {
  Triangulation T = unit_box();
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  for (int i = 0; i < 120; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  T.validate();
  CHECK(locally_delaunay(T));
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("locate classifies interior, edge, vertex and outside queries") {
  Triangulation T = unit_box();
  int w = T.insert_point(Vec2{0.5, 0.5});
  auto in = T.locate(Vec2{0.25, 0.125});
  CHECK(in.what == Triangulation::Locate::inside);
  auto onv = T.locate(Vec2{0.5, 0.5});
  REQUIRE(onv.what == Triangulation::Locate::on_vertex);
  CHECK(T.triangle(onv.tri).v[onv.sub] == w);
  auto out = T.locate(Vec2{1.5, 0.5});
  CHECK(out.what == Triangulation::Locate::outside);
  auto one = T.locate(Vec2{0.25, 0.25});  // on edge (0,0)-(0.5,0.5)
  CHECK(one.what == Triangulation::Locate::on_edge);
}

TEST_CASE("splitting a boundary edge keeps the boundary constrained") {
  Triangulation T = unit_box();
  int w = T.insert_point(Vec2{0.5, 0.0});
  T.validate();
  std::array<int, 2> nb;
  std::array<ConstraintKind, 2> ks;
  int deg = T.constrained_degree(w, &nb, &ks);
  CHECK(deg == 2);
  CHECK(ks[0] == ConstraintKind::domain_boundary);
  CHECK(ks[1] == ConstraintKind::domain_boundary);
  CHECK(T.on_domain_boundary(w));
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forced segments survive as constrained edges") {
  Triangulation T = unit_box();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  for (int i = 0; i < 60; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  int a = T.insert_point(Vec2{0.1, 0.2});
  int b = T.insert_point(Vec2{0.9, 0.8});
  T.insert_segment(a, b, ConstraintKind::fracture);
  T.validate();
  // the forced path from a to b consists of constrained fracture edges
  int cur = a, prev = -1, hops = 0;
  while (cur != b) {
    std::array<int, 2> nb{-1, -1};
    std::array<ConstraintKind, 2> ks;
    int deg = T.constrained_degree(cur, &nb, &ks);
    REQUIRE(deg >= 1);
    int next = (nb[0] == prev && deg > 1) ? nb[1] : nb[0];
    REQUIRE(T.find_edge(cur, next).has_value());
    auto er = *T.find_edge(cur, next);
    CHECK(T.edge_kind(er.t, er.e) == ConstraintKind::fracture);
    prev = cur;
    cur = next;
    REQUIRE(++hops < 100);
  }
  CHECK(locally_delaunay(T));
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a segment through exactly collinear vertices splits at each one") {
  Triangulation T = unit_box();
  const double k = 1.0 / std::sqrt(2.0);
  auto diag = [&](double u) { return Vec2{0.5 + u * k, 0.5 + u * k}; };
  std::vector<double> us = {-0.3, -0.12, 0.0, 0.07, 0.21, 0.3};
  std::vector<int> ids;
  // scatter some off-diagonal points first so the pipe is nontrivial
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  for (int i = 0; i < 40; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  for (double u : us) ids.push_back(T.insert_point(diag(u)));
  T.insert_segment(ids.front(), ids.back(), ConstraintKind::fracture);
  T.validate();
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    auto er = T.find_edge(ids[i], ids[i + 1]);
    REQUIRE(er.has_value());
    CHECK(T.edge_kind(er->t, er->e) == ConstraintKind::fracture);
  }
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vertex removal retriangulates the hole without changing the domain") {
  Triangulation T = unit_box();
  std::mt19937 rng(18);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  std::vector<int> ids;
  for (int i = 0; i < 50; ++i) ids.push_back(T.insert_point(Vec2{U(rng), U(rng)}));
  for (int i = 0; i < 20; ++i) {
    int v = ids[static_cast<std::size_t>(i) * 2];
    REQUIRE(T.removable(v));
    T.remove_vertex(v);
    T.validate();
  }
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(locally_delaunay(T));
}

TEST_CASE("removing a polyline vertex keeps the chord constrained") {
  Triangulation T = unit_box();
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  for (int i = 0; i < 30; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  int a = T.insert_point(Vec2{0.2, 0.5});
  int m = T.insert_point(Vec2{0.5, 0.5});
  int b = T.insert_point(Vec2{0.8, 0.5});
  T.insert_segment(a, m, ConstraintKind::fracture);
  T.insert_segment(m, b, ConstraintKind::fracture);

  REQUIRE(T.removable(m));
  T.remove_vertex(m);
  T.validate();
  auto er = T.find_edge(a, b);
  REQUIRE(er.has_value());
  CHECK(T.edge_kind(er->t, er->e) == ConstraintKind::fracture);
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("polyline endpoints and corners are not removable") {
    CHECK_FALSE(T.removable(a));  // single incident constraint: a tip
    CHECK_FALSE(T.removable(0));  // box corner: constraints not collinear
  }
}

TEST_CASE("removing an inserted boundary vertex restores the straight boundary") {
  Triangulation T = unit_box();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  for (int i = 0; i < 25; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  int w = T.insert_point(Vec2{0.375, 0.0});
  T.validate();
  REQUIRE(T.removable(w));
  T.remove_vertex(w);
  T.validate();
  CHECK(total_area(T) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("surgery journal balances destroyed and created cell area") {
  Triangulation T = unit_box();
  std::mt19937 rng(27);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  std::vector<int> ids;
  for (int i = 0; i < 60; ++i) ids.push_back(T.insert_point(Vec2{U(rng), U(rng)}));

  T.begin_surgery();
  int w = T.insert_point(Vec2{0.512, 0.487});
  T.remove_vertex(ids[10]);
  auto log = T.end_surgery();
  CHECK(!log.empty());

  double dead = 0.0, born = 0.0;
  for (const auto& oc : log.destroyed)
    dead += triangle_area(oc.p[0], oc.p[1], oc.p[2]);
  for (int t : log.created) {
    const auto& tr = T.triangle(t);
    REQUIRE(tr.alive);
    born += triangle_area(T.vertex(tr.v[0]).pos, T.vertex(tr.v[1]).pos,
                          T.vertex(tr.v[2]).pos);
  }
  CHECK(dead == doctest::Approx(born).epsilon(1e-12));
  for (const auto& oc : log.destroyed)
    CHECK(triangle_area(oc.p[0], oc.p[1], oc.p[2]) > 0.0);
  (void)w;
}

TEST_CASE("connectivity flips toward a target frame stay valid in both frames") {
  Triangulation T = unit_box();
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  for (int i = 0; i < 80; ++i) T.insert_point(Vec2{U(rng), U(rng)});
  std::vector<Vec2> target(static_cast<std::size_t>(T.vertex_count()));
  const double pi = 3.14159265358979323846;
  for (int v = 0; v < T.vertex_count(); ++v) {
    Vec2 p = T.vertex(v).pos;
    double bump = 0.03 * std::sin(pi * p.x) * std::sin(pi * p.y);
    target[static_cast<std::size_t>(v)] = Vec2{p.x + bump, p.y - bump};
  }
  T.make_delaunay_at(target);
  T.validate();
  for (int t : T.alive_triangles()) {
    const auto& tr = T.triangle(t);
    CHECK(orient2d_sign(target[tr.v[0]], target[tr.v[1]], target[tr.v[2]]) > 0);
  }
}
