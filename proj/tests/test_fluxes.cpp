#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fvmm/fluxes.hpp"
#include "fvmm/geometry.hpp"
#include "fvmm/physics.hpp"

using namespace fvmm;

namespace {

// Brute-force Godunov value: scan the interval between the states on a fine
// grid and take the min (s_in <= s_out) or max (s_in > s_out). Endpoints are
// grid nodes, so monotone fluxes are reproduced exactly.
double scan_godunov(const FluxFn& F, double s_in, double s_out, int n) {
  const double lo = std::min(s_in, s_out), hi = std::max(s_in, s_out);
  const bool take_min = s_in <= s_out;
  double best = F(lo);
  for (int i = 1; i <= n; ++i) {
    const double v = F(lo + (hi - lo) * (static_cast<double>(i) / n));
    best = take_min ? std::min(best, v) : std::max(best, v);
  }
  return best;
}

// Independent two-law interface value: scan candidate traces for the best
// agreement of the two one-sided Godunov fluxes, then refine around the
// winner on a second grid.
double scan_interface_godunov(const FluxFn& fin, const FluxFn& fout, double s_in,
                              double s_out, int n) {
  auto sweep = [&](double lo, double hi, double& best_t) {
    double best_gap = -1.0, best_q = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = lo + (hi - lo) * (static_cast<double>(i) / n);
      const double qa = godunov_flux(fin, s_in, t);
      const double qb = godunov_flux(fout, t, s_out);
      const double gap = std::abs(qa - qb);
      if (best_gap < 0.0 || gap < best_gap) {
        best_gap = gap;
        best_t = t;
        best_q = 0.5 * (qa + qb);
      }
    }
    return best_q;
  };
  double t0 = 0.0;
  sweep(0.0, 1.0, t0);
  const double w = 1.0 / n;
  double t1 = 0.0;
  return sweep(std::max(0.0, t0 - w), std::min(1.0, t0 + w), t1);
}

// Transverse elimination oracle for the bulk<->interface coupling flux.
// Across the aperture d the pressure is quadratic, p(s) = c0 + c1 s + c2 s^2
// with s in [-d/2, d/2] along the near-side facet normal. Conditions:
//   mean of p equals the interface pressure,
//   normal Darcy flux inside the slab matches the one-sided bulk flux on
//   both faces.
// The near-side face flux is returned. A = lam_f * K_n * len is the slab
// conductance per unit thickness, gf = G_f * (g . n_hat).
double slab_coupling_oracle(double T_near, double T_far, double Phi_near,
                            double Phi_far, double P_if, double A, double d,
                            double gf) {
  // rows: mean-pressure, near-face continuity, far-face continuity
  double M[3][3] = {
      {1.0, 0.0, d * d / 12.0},
      {-T_near, T_near * d / 2.0 + A, -T_near * d * d / 4.0 - A * d},
      {T_far, T_far * d / 2.0 + A, T_far * d * d / 4.0 + A * d}};
  double rhs[3] = {P_if, A * gf - T_near * Phi_near, A * gf + T_far * Phi_far};

  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double D = det3(M);
  REQUIRE(std::abs(D) > 0.0);
  double c[3];
  for (int j = 0; j < 3; ++j) {
    double Mj[3][3];
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) Mj[r][k] = (k == j) ? rhs[r] : M[r][k];
    c[j] = det3(Mj) / D;
  }
  return -A * (c[1] - d * c[2] - gf);  // flux along +n at the near face
}

// Two triangles sharing the edge (a,b), apexes on opposite sides, with a
// usable circumcenter pair for two-point flux tests.
struct FacetPair {
  Vec2 cc_in, cc_out, mid, n_hat;
  double len, delta_in, delta_out;
};

bool make_facet_pair(std::mt19937& rng, FacetPair& fp) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Vec2 a{U(rng), U(rng)};
  const Vec2 b = a + Vec2{0.3 + 0.7 * std::abs(U(rng)), U(rng)};
  const Vec2 t = b - a;
  const Vec2 nn = perp(t) / norm(t);
  const Vec2 m = (a + b) / 2.0;
  // perp(t) points right of a->b, so the in-cell apex sits on the left
  const Vec2 c_in = m - nn * (0.4 + std::abs(U(rng))) + t * (0.3 * U(rng));
  const Vec2 c_out = m + nn * (0.4 + std::abs(U(rng))) + t * (0.3 * U(rng));
  if (signed_area2(a, b, c_in) <= 0.0 || signed_area2(b, a, c_out) <= 0.0) return false;
  fp.cc_in = circumcenter(a, b, c_in);
  fp.cc_out = circumcenter(b, a, c_out);
  fp.mid = m;
  fp.len = norm(t);
  fp.n_hat = nn;
  fp.delta_in = dot(fp.mid - fp.cc_in, fp.n_hat);
  fp.delta_out = dot(fp.mid - fp.cc_out, fp.n_hat * -1.0);
  return fp.delta_in > 1e-3 && fp.delta_out > 1e-3;
}

}  // namespace

TEST_CASE("endpoint upwinding reproduces the scan for gravity-free fluxes") {
  Fluids fl;
  for (double v : {1.7, -0.6, 0.0}) {
    FluxFn F{fl, v, 0.0};
    for (auto [si, so] : std::vector<std::pair<double, double>>{
             {0.0, 1.0}, {1.0, 0.0}, {0.3, 0.8}, {0.8, 0.3}, {0.5, 0.5}}) {
      // monotone flux: the scan extremum sits on an endpoint, equality is exact
      CHECK(godunov_flux(F, si, so) == scan_godunov(F, si, so, 100000));
    }
  }
  // lenient states just outside [0,1] evaluate like their clamp
  FluxFn F{fl, 2.0, 0.0};
  CHECK(godunov_flux(F, -1e-13, 1.0 + 1e-13) == godunov_flux(F, 0.0, 1.0));
  CHECK(godunov_flux(F, 0.4, 0.4) == F(0.4));
}

TEST_CASE("gravity humps are minimized and maximized like the brute-force scan") {
  std::mt19937 rng(2026);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Fluids quad;
  Fluids lin = quad;
  lin.law = RelPermLaw::linear;
  Fluids thick = quad;
  thick.mu_nw = 0.5;

  int checked = 0;
  for (const Fluids& fl : {quad, lin, thick}) {
    for (double v : {-1.3, 0.0, 0.9}) {
      for (double grav : {-4.0, 2.5}) {
        FluxFn F{fl, v, grav};
        for (int k = 0; k < 4; ++k) {
          const double si = (k == 0) ? 0.0 : U(rng);
          const double so = (k == 1) ? 1.0 : U(rng);
          const double got = godunov_flux(F, si, so);
          const double want = scan_godunov(F, si, so, 1000000);
          CHECK(std::abs(got - want) <= 5e-9);
          // the Godunov value never leaves the range of F on the interval
          const bool take_min = si <= so;
          CHECK((take_min ? got <= F(si) + 1e-15 : got >= F(si) - 1e-15));
          CHECK((take_min ? got <= F(so) + 1e-15 : got >= F(so) - 1e-15));
          ++checked;
        }
      }
    }
  }
  CHECK(checked == 72);
}

TEST_CASE("two-law interface flux satisfies the trace matching property") {
  Fluids quad;
  Fluids lin = quad;
  lin.law = RelPermLaw::linear;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  SUBCASE("identical laws collapse to the single-law flux exactly") {
    FluxFn F{quad, 0.8, -3.0};
    for (int k = 0; k < 20; ++k) {
      const double si = U(rng), so = U(rng);
      CHECK(godunov_flux(F, F, si, so) == godunov_flux(F, si, so));
    }
  }

  SUBCASE("monotone case: the upwind value crosses unchanged") {
    // gravity-free and v > 0 on both sides: both one-sided fluxes are
    // increasing, so the interface flux equals the inflow-side value
    FluxFn fin{quad, 1.4, 0.0};
    FluxFn fout{lin, 1.4, 0.0};
    for (double si : {0.15, 0.6, 1.0}) {
      const double q = godunov_flux(fin, fout, si, 0.9);
      CHECK(q == doctest::Approx(fin(si)).epsilon(1e-9));
    }
    FluxFn rin{quad, -0.7, 0.0}, rout{lin, -0.7, 0.0};
    const double q = godunov_flux(rin, rout, 0.4, 0.65);
    CHECK(q == doctest::Approx(rout(0.65)).epsilon(1e-9));
  }

  SUBCASE("jumping gravity coefficient: trace equalizes both sides") {
    for (auto [gin, gout] : std::vector<std::pair<double, double>>{
             {-4.0, -1.0}, {3.0, 0.5}, {-2.0, 2.0}}) {
      FluxFn fin{quad, 0.6, gin};
      FluxFn fout{lin, 0.6, gout};
      for (int k = 0; k < 8; ++k) {
        const double si = U(rng), so = U(rng);
        double t = -1.0;
        const double q = godunov_flux(fin, fout, si, so, &t);
        REQUIRE(t >= 0.0);
        REQUIRE(t <= 1.0);
        CHECK(std::abs(godunov_flux(fin, si, t) - godunov_flux(fout, t, so)) <= 1e-9);
        CHECK(std::abs(q - godunov_flux(fin, si, t)) <= 1e-9);
        const double q_scan = scan_interface_godunov(fin, fout, si, so, 8000);
        CHECK(std::abs(q - q_scan) <= 2e-5);
      }
    }
  }
}

TEST_CASE("two-point flux reproduces the resistor chain by hand") {
  // len 3, resistances 0.3/2 + 0.5/4 = 0.275, potential drop 0.11:
  // T = 3/0.275 = 120/11 and v = 120/11 * 0.11 = 1.2
  TpfaSide in{1.11, 0.0, 0.3, 2.0};
  TpfaSide out{1.0, 0.0, 0.5, 4.0};
  CHECK(tpfa_flux(3.0, in, out) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(tpfa_flux(3.0, out, in) == doctest::Approx(-1.2).epsilon(1e-12));

  // a zero gap on one side drops that resistance
  TpfaSide flush{2.0, 0.0, 0.0, 7.0};
  CHECK(tpfa_flux(1.0, flush, TpfaSide{0.0, 0.0, 0.5, 1.0}) ==
        doctest::Approx(4.0).epsilon(1e-12));

  // boundary flux is one-sided against the facet value
  CHECK(tpfa_boundary_flux(2.0, TpfaSide{3.0, 0.0, 0.25, 1.0}, 1.0) ==
        doctest::Approx(16.0).epsilon(1e-12));

  CHECK_THROWS_AS(tpfa_flux(1.0, TpfaSide{0.0, 0.0, 0.0, 1.0},
                            TpfaSide{0.0, 0.0, 0.0, 1.0}),
                  GeometryError);
  CHECK_THROWS_AS(tpfa_boundary_flux(1.0, TpfaSide{0.0, 0.0, -0.2, 1.0}, 0.0),
                  GeometryError);
}

TEST_CASE("two-point flux is exact for linear pressure on circumcenter pairs") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int done = 0;
  while (done < 40) {
    FacetPair fp;
    if (!make_facet_pair(rng, fp)) continue;
    const Vec2 grad{U(rng) * 3.0, U(rng) * 3.0};
    const double p0 = U(rng);
    const double lam = 0.2 + std::abs(U(rng));
    const double kappa = 0.5 + std::abs(U(rng));
    TpfaSide in{p0 + dot(grad, fp.cc_in), 0.0, fp.delta_in, lam * kappa};
    TpfaSide out{p0 + dot(grad, fp.cc_out), 0.0, fp.delta_out, lam * kappa};
    const double want = -fp.len * lam * kappa * dot(grad, fp.n_hat);
    const double got = tpfa_flux(fp.len, in, out);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    ++done;
  }
}

TEST_CASE("uniform-density hydrostatic pressure produces no flux") {
  const Vec2 g{0.0, -9.81};
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Fluids fl;
  int done = 0;
  while (done < 25) {
    FacetPair fp;
    if (!make_facet_pair(rng, fp)) continue;
    const double S = 0.5 * (U(rng) + 1.0);
    const double Gs = mobility_weighted_density(fl, S);
    const double lk = total_mobility(fl, S) * 1e-8;
    const double p0 = 5e4;
    TpfaSide in{p0 + Gs * dot(g, fp.cc_in), Gs * dot(g, fp.mid - fp.cc_in),
                fp.delta_in, lk};
    TpfaSide out{p0 + Gs * dot(g, fp.cc_out), Gs * dot(g, fp.mid - fp.cc_out),
                 fp.delta_out, lk};
    const double T = fp.len / (fp.delta_in / lk + fp.delta_out / lk);
    CHECK(std::abs(tpfa_flux(fp.len, in, out)) <= T * 1e-9);
    ++done;
  }
}

TEST_CASE("gravity drives flow along g when pressure is uniform") {
  Fluids fl;
  const Vec2 g{0.0, -9.81};
  const double S = 0.7;
  const double Gs = mobility_weighted_density(fl, S);
  FacetPair fp;
  std::mt19937 rng(3);
  while (!make_facet_pair(rng, fp)) {
  }
  TpfaSide in{1.0, Gs * dot(g, fp.mid - fp.cc_in), fp.delta_in, 1.0};
  TpfaSide out{1.0, Gs * dot(g, fp.mid - fp.cc_out), fp.delta_out, 1.0};
  const double v = tpfa_flux(fp.len, in, out);
  if (dot(g, fp.n_hat) > 0.0)
    CHECK(v > 0.0);  // facet normal has a downward component: mixture sinks
  else
    CHECK(v < 0.0);
}

TEST_CASE("interface coupling flux matches the transverse elimination oracle") {
  SUBCASE("symmetric hand case") {
    // T_near = T_far = 1, slab transmissibility 3 (A = 0.15, d = 0.1):
    // the chain reduces to T*T_if/(T + T_if) * (P_near - P_if) = 3/4
    const double A = 0.15, d = 0.1;
    const double T_if = 2.0 * A / d;
    CHECK(T_if == doctest::Approx(3.0).epsilon(1e-15));
    const double got = coupling_flux({1.0, 1.0}, {-1.0, 1.0}, 0.0, T_if, 0.0);
    CHECK(got == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(slab_coupling_oracle(1.0, 1.0, 1.0, -1.0, 0.0, A, d, 0.0) ==
          doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("random draws against the oracle") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto logu = [&](double lo, double hi) {
      return lo * std::pow(hi / lo, 0.5 * (U(rng) + 1.0));
    };
    for (int k = 0; k < 200; ++k) {
      const double Tn = logu(1e-9, 10.0), Tf = logu(1e-9, 10.0);
      const double A = logu(1e-9, 1.0);
      const double d = logu(1e-3, 0.2);
      const double Pn = 3.0 * U(rng), Pf = 3.0 * U(rng), Pg = 3.0 * U(rng);
      const double gf = 2000.0 * U(rng);
      const double T_if = 2.0 * A / d;
      const double G_if = -0.5 * d * gf;
      const double want = slab_coupling_oracle(Tn, Tf, Pn, Pf, Pg, A, d, gf);
      const double got = coupling_flux({Pn, Tn}, {Pf, Tf}, Pg, T_if, G_if);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }

  SUBCASE("hydrostatic slab states produce no flux on either side") {
    // a linear transverse pressure with slope gf and matching bulk
    // potentials is an exact rest state of the closure
    const double A = 0.02, d = 0.05, gf = -4905.0;
    const double T_if = 2.0 * A / d;
    const double G_if = -0.5 * d * gf;
    const double Pg = 7.5;
    const double phi_near = Pg + G_if;   // trace at the near face
    const double phi_far = Pg - G_if;    // trace at the far face
    const double vp = coupling_flux({phi_near, 0.9}, {phi_far, 2.3}, Pg, T_if, G_if);
    CHECK(std::abs(vp) <= 1e-12 * std::abs(Pg) * T_if);
    // mirror side: swap the roles and flip the gravity offset
    const double vm = coupling_flux({phi_far, 2.3}, {phi_near, 0.9}, Pg, T_if, -G_if);
    CHECK(std::abs(vm) <= 1e-12 * std::abs(Pg) * T_if);
    CHECK(std::abs(slab_coupling_oracle(0.9, 2.3, phi_near, phi_far, Pg, A, d, gf)) <=
          1e-12 * std::abs(Pg) * T_if);
  }
}

TEST_CASE("mesh motion transport upwinds across the moving facet") {
  // facet sweeping outward takes the outside state, inward the inside one
  CHECK(geometric_flux(0.2, 0.8, 0.5) == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(geometric_flux(0.2, 0.8, -0.5) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(geometric_flux(0.2, 0.8, 0.0) == 0.0);
}
