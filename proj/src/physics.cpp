#include "fvmm/physics.hpp"

#include <algorithm>
#include <cmath>

namespace fvmm {

double checked_saturation(double S) {
  if (S < -kSaturationTol || S > 1.0 + kSaturationTol)
    throw DomainError("saturation " + std::to_string(S) + " outside [0,1]");
  return clamped_saturation(S);
}

double relative_permeability(RelPermLaw law, Phase ph, double S) {
  S = checked_saturation(S);
  const double u = (ph == Phase::wetting) ? S : 1.0 - S;
  return law == RelPermLaw::linear ? u : u * u;
}

double relative_permeability_deriv(RelPermLaw law, Phase ph, double S) {
  S = checked_saturation(S);
  const double sgn = (ph == Phase::wetting) ? 1.0 : -1.0;
  if (law == RelPermLaw::linear) return sgn;
  const double u = (ph == Phase::wetting) ? S : 1.0 - S;
  return sgn * 2.0 * u;
}

double mobility(const Fluids& f, Phase ph, double S) {
  const double mu = (ph == Phase::wetting) ? f.mu_w : f.mu_nw;
  return relative_permeability(f.law, ph, S) / mu;
}

double total_mobility(const Fluids& f, double S) {
  return mobility(f, Phase::wetting, S) + mobility(f, Phase::nonwetting, S);
}

double fractional_flow(const Fluids& f, double S) {
  const double lw = mobility(f, Phase::wetting, S);
  const double ln = mobility(f, Phase::nonwetting, S);
  return lw / (lw + ln);
}

double mobility_weighted_density(const Fluids& f, double S) {
  const double lw = mobility(f, Phase::wetting, S);
  const double ln = mobility(f, Phase::nonwetting, S);
  return (lw * f.rho_w + ln * f.rho_nw) / (lw + ln);
}

double flux_normal(const Fluids& f, double S, double v_n, double gravity_term) {
  S = checked_saturation(S);
  const double fw = fractional_flow(f, S);
  const double ln = mobility(f, Phase::nonwetting, S);
  return fw * v_n - fw * ln * gravity_term;
}

namespace {

// lenient kernels: assume S already clamped to [0,1]
inline double kr(RelPermLaw law, Phase ph, double S) {
  const double u = (ph == Phase::wetting) ? S : 1.0 - S;
  return law == RelPermLaw::linear ? u : u * u;
}

inline double dkr(RelPermLaw law, Phase ph, double S) {
  const double sgn = (ph == Phase::wetting) ? 1.0 : -1.0;
  if (law == RelPermLaw::linear) return sgn;
  return sgn * 2.0 * ((ph == Phase::wetting) ? S : 1.0 - S);
}

}  // namespace

double FluxFn::operator()(double S) const {
  S = clamped_saturation(S);
  const double lw = kr(fluids.law, Phase::wetting, S) / fluids.mu_w;
  const double ln = kr(fluids.law, Phase::nonwetting, S) / fluids.mu_nw;
  const double lam = lw + ln;
  if (lam == 0.0) return 0.0;
  const double fw = lw / lam;
  return fw * v - fw * ln * grav;
}

double FluxFn::deriv(double S) const {
  if (S <= 0.0 || S >= 1.0) return 0.0;
  const double lw = kr(fluids.law, Phase::wetting, S) / fluids.mu_w;
  const double ln = kr(fluids.law, Phase::nonwetting, S) / fluids.mu_nw;
  const double dlw = dkr(fluids.law, Phase::wetting, S) / fluids.mu_w;
  const double dln = dkr(fluids.law, Phase::nonwetting, S) / fluids.mu_nw;
  const double lam = lw + ln;
  if (lam == 0.0) return 0.0;
  const double fw = lw / lam;
  const double dfw = (dlw * lam - lw * (dlw + dln)) / (lam * lam);
  return dfw * v - (dfw * ln + fw * dln) * grav;
}

int FluxFn::stationary_points(double lo, double hi, double out[4]) const {
  lo = clamped_saturation(lo);
  hi = clamped_saturation(hi);
  if (hi - lo <= 0.0) return 0;
  if (v == 0.0 && grav == 0.0) return 0;
  constexpr int kGrid = 32;
  int count = 0;
  double s0 = lo;
  double d0 = deriv(s0);
  for (int i = 1; i <= kGrid && count < 4; ++i) {
    const double s1 = lo + (hi - lo) * (static_cast<double>(i) / kGrid);
    const double d1 = deriv(s1);
    if ((d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0)) {
      double a = s0, b = s1, da = d0;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (a + b);
        const double dm = deriv(m);
        if ((da < 0.0) == (dm < 0.0)) {
          a = m;
          da = dm;
        } else {
          b = m;
        }
        if (b - a <= 1e-15) break;
      }
      out[count++] = 0.5 * (a + b);
    } else if (d1 == 0.0 && i < kGrid) {
      out[count++] = s1;  // stationary point exactly on a grid node
    }
    s0 = s1;
    d0 = d1;
  }
  return count;
}

}  // namespace fvmm
