#ifndef FVMM_SOLVER_HPP
#define FVMM_SOLVER_HPP

#include <vector>

#include "fvmm/mesh.hpp"
#include "fvmm/remesh.hpp"
#include "fvmm/scenario.hpp"

namespace fvmm {

/// Dense numbering of the implicit unknowns: interleaved (S, P) per bulk
/// cell in geometry order, then (S, P) per interface element.
struct UnknownMap {
  int n_cells = 0;
  int n_iface = 0;
  int size() const { return 2 * (n_cells + n_iface); }
  int s_bulk(int c) const { return 2 * c; }
  int p_bulk(int c) const { return 2 * c + 1; }
  int s_iface(int j) const { return 2 * (n_cells + j); }
  int p_iface(int j) const { return 2 * (n_cells + j) + 1; }
};

/// One implicit step frozen against a geometry snapshot: previous-level
/// masses, per-cell coefficients and the residual of the coupled balance
/// system. Rows per bulk cell: wetting mass with upwind and swept-volume
/// fluxes, and the algebraic total-volume constraint. Rows per interface
/// element: wetting mass with tangential and coupling fluxes weighted by
/// the aperture, and the storage-free tangential volume constraint fed by
/// both coupling velocities. Coupling terms enter the bulk and interface
/// rows from one evaluation with opposite signs.
class StepSystem {
 public:
  StepSystem(const MeshGeometry& geo, const CaseConfig& cfg,
             const MeshState& old_state, double t_old);

  const UnknownMap& map() const { return map_; }
  int size() const { return map_.size(); }

  std::vector<double> gather(const MeshState& state) const;
  void scatter(const std::vector<double>& U, MeshState& state) const;

  void residual(const std::vector<double>& U, std::vector<double>& R) const;

  /// Rows reachable from each unknown, wide enough for the finite-difference
  /// Jacobian. Built once from the facet and interface stencils.
  const std::vector<std::vector<int>>& sparsity() const { return cols_; }

  /// Assembled source and boundary terms of the wetting rows at a given
  /// state, integrated over the step. Matches the residual bookkeeping
  /// exactly, so mass_new - mass_old = injected - boundary_out holds to the
  /// solve tolerance.
  struct Audit {
    double injected_w = 0.0;
    double boundary_w_out = 0.0;
  };
  Audit audit(const std::vector<double>& U) const;

  const MeshGeometry& geometry() const { return *geo_; }

 private:
  struct CellCoef {
    double phi = 1.0;
    Tensor2 K;
    double qw = 0.0, qnw = 0.0;
  };
  struct IfaceCoef {
    double d_new = 0.0;    // aperture at the element midpoint, target frame
    double Ktau = 0.0;     // tangential slit permeability of d_new
    double d_node = 0.0;   // aperture at the shared node with `right`
    Vec2 node;             // that node's target-frame position
    double qw = 0.0, qnw = 0.0;
  };

  void assemble(const std::vector<double>& U, std::vector<double>* R,
                Audit* audit) const;
  void build_sparsity();

  const MeshGeometry* geo_ = nullptr;
  const CaseConfig* cfg_ = nullptr;
  UnknownMap map_;
  double dt_ = 0.0;
  bool pin_pressure_ = false;
  std::vector<CellCoef> cc_;
  std::vector<IfaceCoef> ic_;
  std::vector<double> mass_old_bulk_;   // phi S^n |K|_old
  std::vector<double> mass_old_iface_;  // phi_f S^n d^n |e|_old
  std::vector<std::vector<int>> cols_;
};

struct NewtonOptions {
  double atol = 1e-10;
  double rtol = 1e-8;
  int max_iter = 25;
  int max_halvings = 8;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // row-equilibrated infinity norm
};

/// Damped Newton on the step system. The Jacobian is assembled by colored
/// finite differences on the structural sparsity; the linear solves use a
/// sparse LU with the symbolic analysis cached across iterations. Residual
/// norms are measured after row equilibration.
NewtonReport newton_solve(const StepSystem& sys, std::vector<double>& U,
                          const NewtonOptions& opt = {});

struct StepOptions {
  NewtonOptions newton;
  int max_dt_halvings = 5;
};

struct StepReport {
  double t0 = 0.0, t1 = 0.0;
  int substeps = 0;            // accepted substeps; 1 means no halving
  int newton_iterations = 0;   // summed over substeps
  double residual = 0.0;       // worst final Newton residual
  double mass_before = 0.0, mass_after = 0.0;
  double injected = 0.0;       // net wetting source volume over the step
  double boundary_outflow = 0.0;
  double dgcl_max = 0.0;       // worst cell volume-vs-swept defect
  int remesh_rounds = 0, remesh_inserted = 0, remesh_removed = 0;
};

/// Prepare one motion substep: assign the schedule velocities, remesh so the
/// upcoming motion keeps positive areas and the target frame stays locally
/// Delaunay, and build the two-frame geometry. Mutates the mesh topology and
/// projects `state` across it, but leaves positions at time t. Throws
/// GeometryError when the adapted mesh still folds over the step.
MeshGeometry stage_step(Triangulation& T, MeshState& state, const CaseConfig& cfg,
                        double t, double dt, RemeshReport* remesh_report = nullptr);

/// Advance state and mesh from t to t + dt: assign the motion, remesh so the
/// step stays valid, solve the implicit system on the old-to-target geometry
/// pair, then commit positions. Rejected solves and invalid motion retry on
/// recursively halved substeps; exceeding the halving budget throws
/// SolverError.
StepReport advance(Triangulation& T, MeshState& state, const CaseConfig& cfg,
                   double t, double dt, const StepOptions& opt = {});

/// Total wetting volume of the current state: bulk phi S |K| plus interface
/// phi_f S d |e|, with apertures evaluated at time t.
double wetting_mass(const Triangulation& T, const MeshState& state,
                    const CaseConfig& cfg, double t);

/// Worst per-cell defect |K|_new - |K|_old - sum of swept facet volumes and
/// its interface analog. Zero up to roundoff for any admissible motion.
double dgcl_max_residual(const MeshGeometry& geo);

}  // namespace fvmm

#endif
