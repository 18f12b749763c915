#ifndef FVMM_PHYSICS_HPP
#define FVMM_PHYSICS_HPP

#include "fvmm/geometry.hpp"

namespace fvmm {

enum class Phase { wetting, nonwetting };
enum class RelPermLaw { linear, quadratic };

/// Symmetric 2x2 permeability tensor.
struct Tensor2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
  Vec2 apply(const Vec2& v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  static Tensor2 isotropic(double k) { return {k, 0.0, k}; }
};

inline double quad_form(const Tensor2& K, const Vec2& a, const Vec2& b) {
  return a.x * (K.xx * b.x + K.xy * b.y) + a.y * (K.xy * b.x + K.yy * b.y);
}

/// Fluid pair description: densities, viscosities and the shared relative
/// permeability law. Defaults are the reference parameter set used by the
/// bundled cases.
struct Fluids {
  double rho_w = 1000.0;
  double rho_nw = 500.0;
  double mu_w = 1.0;
  double mu_nw = 10.0;
  RelPermLaw law = RelPermLaw::quadratic;
};

struct MediumParams {
  Tensor2 K;
  double porosity = 1.0;
};

inline constexpr double kSaturationTol = 1e-12;

/// Clamp S to [0,1]; values outside by more than kSaturationTol are a hard
/// domain error. Used by the public evaluation entry points.
double checked_saturation(double S);

/// Clamp without the domain check. The implicit solver evaluates laws through
/// this path: interface saturations can leave [0,1] transiently when the
/// aperture shrinks faster than the fluxes respond, and the mass bookkeeping
/// must keep the unclamped state.
inline double clamped_saturation(double S) { return S < 0.0 ? 0.0 : (S > 1.0 ? 1.0 : S); }

double relative_permeability(RelPermLaw law, Phase ph, double S);
double relative_permeability_deriv(RelPermLaw law, Phase ph, double S);

/// Phase mobility k_a(S)/mu_a.
double mobility(const Fluids& f, Phase ph, double S);
double total_mobility(const Fluids& f, double S);

/// Fractional flow f(S) = lam_w / (lam_w + lam_nw).
double fractional_flow(const Fluids& f, double S);

/// Mobility-weighted density G(S) = (lam_w rho_w + lam_nw rho_nw) / lam.
/// Multiplies gravity in the pressure fluxes.
double mobility_weighted_density(const Fluids& f, double S);

/// Normal component of the wetting phase flux for given integrated normal
/// total velocity v_n and integrated facet gravity coefficient
/// gravity_term = n^T K (rho_nw - rho_w) g |F|:
///   F(S) . n = f(S) v_n - f(S) lam_nw(S) gravity_term
double flux_normal(const Fluids& f, double S, double v_n, double gravity_term);

/// Scalar flux S -> F(S).n with frozen facet data, evaluated with lenient
/// clamping. This is the flux function handed to the upwinding routines.
struct FluxFn {
  Fluids fluids;
  double v = 0.0;     ///< integrated normal total velocity
  double grav = 0.0;  ///< integrated gravity coefficient

  double operator()(double S) const;
  double deriv(double S) const;

  /// All interior stationary points of the flux on (lo, hi), ascending.
  /// The flux of the quadratic law has at most one, but the search does not
  /// rely on that: sign changes of the derivative are bracketed on a fine
  /// grid and bisected.
  int stationary_points(double lo, double hi, double out[4]) const;
};

}  // namespace fvmm

#endif
