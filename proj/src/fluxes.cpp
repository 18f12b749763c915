#include "fvmm/fluxes.hpp"

#include <algorithm>
#include <cmath>

namespace fvmm {

namespace {

// Godunov extremum together with the state achieving it. The arg doubles as
// the interface trace in the matched two-law flux.
double godunov_arg(const FluxFn& F, double s_in, double s_out, double& arg) {
  double best = F(s_in);
  arg = s_in;
  if (s_in == s_out) return best;
  const bool take_min = s_in < s_out;
  const double f_out = F(s_out);
  if (take_min ? f_out < best : f_out > best) {
    best = f_out;
    arg = s_out;
  }
  if (F.grav == 0.0) return best;  // f(S) v is monotone: endpoints suffice
  double pts[4];
  const int n = F.stationary_points(std::min(s_in, s_out), std::max(s_in, s_out), pts);
  for (int i = 0; i < n; ++i) {
    const double fm = F(pts[i]);
    if (take_min ? fm < best : fm > best) {
      best = fm;
      arg = pts[i];
    }
  }
  return best;
}

// FluxFn evaluation depends on the law and viscosities but not the densities
// (gravity already carries the density difference).
bool same_flux_law(const FluxFn& a, const FluxFn& b) {
  return a.v == b.v && a.grav == b.grav && a.fluids.law == b.fluids.law &&
         a.fluids.mu_w == b.fluids.mu_w && a.fluids.mu_nw == b.fluids.mu_nw;
}

}  // namespace

double godunov_flux(const FluxFn& F, double s_in, double s_out) {
  double arg;
  return godunov_arg(F, s_in, s_out, arg);
}

double godunov_flux(const FluxFn& F_in, const FluxFn& F_out, double s_in,
                    double s_out, double* trace) {
  if (same_flux_law(F_in, F_out)) {
    double arg;
    const double q = godunov_arg(F_in, s_in, s_out, arg);
    if (trace) *trace = arg;
    return q;
  }
  // h(t) = godunov(F_in; s_in, t) - godunov(F_out; t, s_out) is nonincreasing
  // in t and brackets zero for fluxes vanishing at S = 0 and sharing the
  // facet total velocity at S = 1.
  auto h = [&](double t) {
    return godunov_flux(F_in, s_in, t) - godunov_flux(F_out, t, s_out);
  };
  double lo = 0.0, hi = 1.0;
  double t;
  if (h(lo) <= 0.0) {
    t = lo;
  } else if (h(hi) >= 0.0) {
    t = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double m = 0.5 * (lo + hi);
      if (h(m) > 0.0)
        lo = m;
      else
        hi = m;
    }
    t = 0.5 * (lo + hi);
  }
  if (trace) *trace = t;
  return 0.5 * (godunov_flux(F_in, s_in, t) + godunov_flux(F_out, t, s_out));
}

namespace {

double half_resistance(const TpfaSide& s) {
  if (s.delta == 0.0) return 0.0;
  if (!(s.lk > 0.0)) throw GeometryError("two-point flux: nonpositive mobility-permeability");
  return s.delta / s.lk;
}

}  // namespace

double tpfa_flux(double len, const TpfaSide& in, const TpfaSide& out) {
  const double r = half_resistance(in) + half_resistance(out);
  if (!(r > 0.0)) throw GeometryError("two-point flux: nonpositive facet resistance");
  return len * ((in.P + in.G) - (out.P + out.G)) / r;
}

double tpfa_boundary_flux(double len, const TpfaSide& in, double P_boundary) {
  const double r = half_resistance(in);
  if (!(r > 0.0)) throw GeometryError("two-point flux: nonpositive facet resistance");
  return len * ((in.P + in.G) - P_boundary) / r;
}

double coupling_flux(const CouplingBulkSide& near, const CouplingBulkSide& far,
                     double P_if, double T_if, double G_if) {
  const double den =
      near.T * far.T + 3.0 * T_if * T_if + 2.0 * T_if * (near.T + far.T);
  if (!(den > 0.0)) throw GeometryError("coupling flux: nonpositive transmissibility chain");
  const double R = near.T * T_if / den;
  return R * ((3.0 * T_if + 2.0 * far.T) * near.Phi -
              3.0 * (T_if + far.T) * (P_if + G_if) +
              far.T * (far.Phi + 2.0 * G_if));
}

}  // namespace fvmm
