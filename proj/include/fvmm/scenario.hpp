#ifndef FVMM_SCENARIO_HPP
#define FVMM_SCENARIO_HPP

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "fvmm/mesh.hpp"
#include "fvmm/physics.hpp"
#include "fvmm/triangulation.hpp"

namespace fvmm {

/// Permeability of a slit of width d under plane Poiseuille flow.
inline double slit_permeability(double d) { return d * d / 12.0; }

/// Straight fracture segment through `center` along `tangent` that
/// prolongates at the tips and thins over time. The aperture profile is
///   d(x, t) = (d0 - t v_squeeze) sqrt(1 - (r(x) - R(t))^2)
/// with r the distance from the center and R(t) = R0 + t v_prolong the
/// half-length.
struct FractureSchedule {
  Vec2 center{0.5, 0.5};
  Vec2 tangent{std::sqrt(0.5), std::sqrt(0.5)};
  double R0 = 0.25;
  double v_prolong = 0.0;
  double d0 = 0.0;
  double v_squeeze = 0.0;

  double half_length(double t) const { return R0 + t * v_prolong; }
  double width_factor(double t) const { return d0 - t * v_squeeze; }
  /// Point at signed arclength u from the center.
  Vec2 point_at(double u) const { return center + tangent * u; }
  Vec2 tip(int sign, double t) const {
    return point_at(sign > 0 ? half_length(t) : -half_length(t));
  }

  /// Aperture profile by distance from the center. Defined for any r; the
  /// square root argument is clamped at zero.
  double aperture_by_radius(double r, double t) const;
  double aperture_of(const Vec2& x, double t) const {
    return aperture_by_radius(norm(x - center), t);
  }

  /// Aperture at a point of the segment itself; points off the segment are a
  /// domain error.
  double aperture_at(const Vec2& x, double t) const;
};

enum class RunMode { reduced, full_dimensional };

enum class BcKind { no_flow, pressure };
struct BoundaryCondition {
  BcKind kind = BcKind::no_flow;
  double value = 0.0;
};

/// Complete run description: materials, schedule, initial and boundary data,
/// sources and discretization targets. Bulk sources act on fracture-labeled
/// cells (present only in full-dimensional runs); interface sources act on
/// the lower-dimensional elements (present only in reduced runs), so both can
/// be configured unconditionally.
struct CaseConfig {
  int case_id = 0;
  RunMode mode = RunMode::reduced;
  Fluids fluids;
  Tensor2 K = Tensor2::isotropic(1e-8);
  double phi = 1.0;
  double phi_frac = 1.0;
  Vec2 gravity{0.0, -9.81};
  FractureSchedule frac;
  double S0 = 0.0;
  double S0_frac = 0.0;
  double q_w = 0.0, q_nw = 0.0;            // volumetric, fracture-labeled cells
  double q_w_frac = 0.0, q_nw_frac = 0.0;  // per interface length
  std::array<BoundaryCondition, 4> bc{};   // bottom, right, top, left
  double t_end = 1.0;
  double h = 1.0 / 64.0;
  double tip_reach = 0.0;  // decay radius of the bulk velocity field

  Tensor2 permeability(int label, const Vec2& x, double t) const {
    if (label == 0) return K;
    return Tensor2::isotropic(slit_permeability(frac.aperture_of(x, t)));
  }
  double porosity_of(int label) const { return label == 0 ? phi : phi_frac; }

  /// Schedule and parameter sanity over [0, t_end]; throws ConfigError.
  void validate() const;
};

struct CaseSetup {
  Triangulation mesh;
  MeshState state;
  CaseConfig cfg;
};

/// Assemble one of the published experiments on a fresh mesh with target
/// bulk edge length h. Reduced mode conforms a fracture chain along the
/// segment; full-dimensional mode meshes the slab region
/// {x : dist(x, segment) <= d(x,t)/2} as a labeled subdomain refined to h/4.
CaseSetup build_case(int case_id, RunMode mode, double h = 1.0 / 64.0);

/// Target edge-length field for the configured mode at time t: uniform h in
/// reduced mode, h/4 in a band around the slab in full-dimensional mode.
std::function<double(const Vec2&)> mesh_size_field(const CaseConfig& cfg, double t);

/// Closed counter-clockwise polygon tracing the slab boundary
/// {x : dist(x, segment(t)) = d(x,t)/2} with roughly the given spacing.
std::vector<Vec2> sample_rim(const FractureSchedule& fs, double t, double spacing);

/// Point of the slab boundary hit by the ray from the nearest segment point
/// through x. Bisected to machine accuracy.
Vec2 project_to_rim(const FractureSchedule& fs, const Vec2& x, double t);

/// Set vertex velocities for the step [t, t+dt]. Tips translate along the
/// tangent, free vertices near a tip follow with linear decay, boundary and
/// interior interface vertices rest. Full-dimensional slab boundary vertices
/// get the velocity that lands them exactly on the rim at t+dt.
void assign_velocities(Triangulation& T, const CaseConfig& cfg, double t, double dt);

}  // namespace fvmm

#endif
