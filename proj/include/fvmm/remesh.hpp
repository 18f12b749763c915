#ifndef FVMM_REMESH_HPP
#define FVMM_REMESH_HPP

#include <functional>

#include "fvmm/mesh.hpp"
#include "fvmm/triangulation.hpp"

namespace fvmm {

/// Aperture at a point, evaluated at the time the mesh currently represents.
/// Used to weight lower-dimensional masses during projection.
using ApertureFn = std::function<double(const Vec2&)>;

/// Conservative transfer of cell fields across a surgery batch. New cell
/// saturations are intersection-area averages of the destroyed cells
/// (porosity-weighted masses); pressure is area-averaged as a solver guess.
/// Reads old values before writing, so triangle slot reuse is safe.
void project_cells(const Triangulation& T, const Triangulation::SurgeryLog& log,
                   const std::function<double(int)>& phi_of_label, MeshState& state);

/// Conservative transfer of interface fields after the fracture edge set
/// changed. Masses move by collinear-overlap between old and new elements,
/// weighted by aperture and the lower-dimensional porosity.
void project_interface(const Triangulation& T, const ApertureFn& aperture,
                       double phi_iface, MeshState& state);

struct RemeshOptions {
  std::function<double(const Vec2&)> size;  // bulk target edge length field
  double size_iface = 0.0;   // interface target length; 0 means size(mid)
  double min_radius_ratio = 0.25;
  double split_factor = 1.6;     // split edges longer than split_factor*size
  double coarsen_factor = 0.45;  // remove vertices whose edges are all shorter
  double iface_split_factor = 1.5;
  int max_rounds = 20;
  double dt = 0.0;  // motion lookahead; quality is judged at pos + dt*vel
  std::function<double(int)> phi_of_label;  // defaults to 1
  double phi_iface = 1.0;
  ApertureFn aperture;  // required when interface fields exist
  std::function<void(Triangulation&)> reassign_velocities;  // after each batch
  // snaps split points of subdomain-boundary edges onto the curved boundary
  std::function<Vec2(const Vec2&)> subdomain_project;
};

struct RemeshReport {
  int rounds = 0;
  int inserted = 0;
  int removed = 0;
  bool changed = false;
  bool motion_valid = false;  // every cell keeps positive area over [0, dt]
};

/// Adapt the mesh so that the upcoming motion step stays valid and the
/// target-frame mesh keeps quality and sizing bounds. Fields in `state` are
/// projected conservatively across every topology change.
RemeshReport remesh(Triangulation& T, MeshState& state, const RemeshOptions& opt);

}  // namespace fvmm

#endif
