#ifndef FVMM_FLUXES_HPP
#define FVMM_FLUXES_HPP

#include "fvmm/physics.hpp"

namespace fvmm {

/// Godunov numerical flux across a facet: the extremum of F between the two
/// cell states, min for s_in <= s_out and max otherwise. Interior stationary
/// points are only hunted when the gravity term makes F non-monotone.
double godunov_flux(const FluxFn& F, double s_in, double s_out);

/// Godunov flux across a facet where the flux law itself jumps (different
/// permeability or gravity coefficient on the two sides, same total
/// velocity). The interface trace t solves
///   godunov(F_in; s_in, t) = godunov(F_out; t, s_out)
/// by bisection; the matched value is returned and the trace optionally
/// reported. Falls back to the single-law flux when the laws coincide.
double godunov_flux(const FluxFn& F_in, const FluxFn& F_out, double s_in,
                    double s_out, double* trace = nullptr);

/// Mesh-motion transport through a facet, -(phi S)_up * swept_rate, upwinded
/// by the sign of the outward swept volume rate: a facet sweeping outward
/// ingests the outside state.
inline double geometric_flux(double phiS_in, double phiS_out, double swept_rate) {
  return -(swept_rate > 0.0 ? phiS_out : phiS_in) * swept_rate;
}

/// One side of a two-point pressure flux. delta is the distance from the
/// cell circumcenter to the facet midpoint measured along the outward facet
/// normal of that cell; lk is the total mobility times n^T K n. G is the
/// gravity potential offset from the cell center to the facet,
/// G(S) * (g . (m_F - cc)).
struct TpfaSide {
  double P = 0.0;
  double G = 0.0;
  double delta = 0.0;
  double lk = 0.0;
};

/// Resistor-chain two-point total-velocity flux, positive from `in` toward
/// `out`. Either gap may be zero; a nonpositive total resistance throws.
double tpfa_flux(double len, const TpfaSide& in, const TpfaSide& out);

/// One-sided two-point flux against a Dirichlet pressure at the facet.
double tpfa_boundary_flux(double len, const TpfaSide& in, double P_boundary);

/// Bulk side of a coupling facet: potential P + G at the circumcenter and the
/// one-sided transmissibility len * lam * (n^T K n) / delta.
struct CouplingBulkSide {
  double Phi = 0.0;
  double T = 0.0;
};

/// Total-velocity flux leaving the near bulk cell through its coupling facet
/// into the interface, from the quadratic transverse pressure closure.
/// T_if = (2/d) lam_f K_n len is the half-aperture transmissibility and
/// G_if = -(d/2) G_f (g . n_hat) the gravity offset from the interface
/// centerline to the near face. The far-side flux is the same call with the
/// sides swapped and G_if negated.
double coupling_flux(const CouplingBulkSide& near, const CouplingBulkSide& far,
                     double P_if, double T_if, double G_if);

}  // namespace fvmm

#endif
