#include <doctest.h>

#include <cmath>

#include "fvmm/physics.hpp"

using namespace fvmm;

TEST_CASE("mobility of the quadratic law") {
  Fluids f;  // mu_w=1, mu_nw=10, quadratic
  CHECK(mobility(f, Phase::wetting, 0.5) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(mobility(f, Phase::nonwetting, 0.5) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(mobility(f, Phase::wetting, 0.0) == 0.0);
  CHECK(mobility(f, Phase::nonwetting, 1.0) == 0.0);
}

TEST_CASE("mobility of the linear law") {
  Fluids f;
  f.law = RelPermLaw::linear;
  CHECK(mobility(f, Phase::wetting, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(mobility(f, Phase::nonwetting, 0.3) == doctest::Approx(0.07).epsilon(1e-14));
}

TEST_CASE("saturation domain handling") {
  Fluids f;
  CHECK_THROWS_AS(mobility(f, Phase::wetting, 1.0 + 1e-9), DomainError);
  CHECK_THROWS_AS(mobility(f, Phase::wetting, -1e-9), DomainError);
  // inside the tolerance band values are clamped, not rejected
  CHECK(mobility(f, Phase::wetting, 1.0 + 1e-13) == doctest::Approx(1.0));
  CHECK(mobility(f, Phase::wetting, -1e-13) == 0.0);
}

TEST_CASE("fractional flow reference value") {
  Fluids f;
  CHECK(fractional_flow(f, 0.5) == doctest::Approx(10.0 / 11.0).epsilon(1e-14));
  CHECK(fractional_flow(f, 0.0) == 0.0);
  CHECK(fractional_flow(f, 1.0) == 1.0);
}

TEST_CASE("fractional flow is monotone on a grid") {
  Fluids f;
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double S = i / 200.0;
    const double fw = fractional_flow(f, S);
    CHECK(fw >= prev);
    CHECK(fw >= 0.0);
    CHECK(fw <= 1.0);
    prev = fw;
  }
}

TEST_CASE("mobility weighted density") {
  Fluids f;  // rho_w=1000, rho_nw=500
  CHECK(mobility_weighted_density(f, 0.5) ==
        doctest::Approx(262.5 / 0.275).epsilon(1e-14));
  for (int i = 0; i <= 50; ++i) {
    const double S = i / 50.0;
    const double G = mobility_weighted_density(f, S);
    CHECK(G >= f.rho_nw - 1e-12);
    CHECK(G <= f.rho_w + 1e-12);
  }
}

TEST_CASE("normal flux reference value") {
  Fluids f;
  const double F = flux_normal(f, 0.5, 2.0, 10.0);
  CHECK(F == doctest::Approx(17.5 / 11.0).epsilon(1e-14));
  // endpoints: F(0)=0, F(1)=v for any gravity coefficient
  CHECK(flux_normal(f, 0.0, 2.0, 10.0) == 0.0);
  CHECK(flux_normal(f, 1.0, 2.0, 10.0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("flux function of the quadratic law has a single interior extremum") {
  // the closed-form upwinding relies on the flux having isolated stationary
  // points; for the reference parameters there is exactly one
  FluxFn F{Fluids{}, 1.0, 30.0};
  int changes = 0;
  double prev = F.deriv(1e-6);
  for (int i = 1; i <= 1000; ++i) {
    const double S = i / 1000.0 * (1.0 - 2e-6) + 1e-6;
    const double d = F.deriv(S);
    if ((prev < 0 && d > 0) || (prev > 0 && d < 0)) ++changes;
    prev = d;
  }
  CHECK(changes == 1);
  double roots[4];
  const int n = F.stationary_points(0.0, 1.0, roots);
  CHECK(n == 1);
  CHECK(std::abs(F.deriv(roots[0])) < 1e-9);
}

TEST_CASE("flux function clamps out-of-range saturations") {
  FluxFn F{Fluids{}, 2.0, 0.0};
  CHECK(F(1.2) == doctest::Approx(F(1.0)));
  CHECK(F(-0.2) == doctest::Approx(F(0.0)));
}
