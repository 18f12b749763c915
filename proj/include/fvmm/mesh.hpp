#ifndef FVMM_MESH_HPP
#define FVMM_MESH_HPP

#include <map>
#include <utility>
#include <vector>

#include "fvmm/triangulation.hpp"

namespace fvmm {

/// Discrete fields carried across remeshing. Cell fields are indexed by
/// triangle slot id; interface fields are keyed by the sorted vertex pair of
/// the fracture edge they live on.
struct MeshState {
  std::vector<double> S, P;
  std::map<std::pair<int, int>, double> S_if, P_if;

  static std::pair<int, int> key(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }
  void resize_cells(int n) {
    S.resize(static_cast<std::size_t>(n), 0.0);
    P.resize(static_cast<std::size_t>(n), 0.0);
  }
};

/// One-step geometric snapshot of the moving mesh: cell volumes at both time
/// frames, facet data at the target frame, swept volumes over the step, and
/// the lower-dimensional interface grid carried by the fracture edges.
struct MeshGeometry {
  struct Cell {
    int tri = -1;
    int label = 0;
    double area_old = 0.0, area_new = 0.0;
    Vec2 cc_new;        // circumcenter, target frame
    Vec2 centroid_new;  // for coefficient evaluation
  };
  struct Facet {
    int t = -1, e = -1;
    int cell_in = -1, cell_out = -1;
    ConstraintKind kind = ConstraintKind::none;
    double len_new = 0.0;
    Vec2 n_hat;    // unit outward normal of cell_in, target frame
    Vec2 mid_new;
    double swept = 0.0;  // volume swept outward from cell_in over the step
    int iface_elem = -1;
    int bc_side = -1;  // 0 bottom, 1 right, 2 top, 3 left
  };
  struct IfaceElem {
    int va = -1, vb = -1;  // ascending arclength along the interface
    double len_old = 0.0, len_new = 0.0;
    Vec2 mid_old, mid_new;
    Vec2 tau;  // unit tangent va->vb, target frame
    int facet_plus = -1, facet_minus = -1;
    int left = -1, right = -1;
    double slide_a = 0.0, slide_b = 0.0;  // endpoint velocity . tau
  };
  std::vector<Cell> cells;
  std::vector<Facet> facets;
  std::vector<IfaceElem> iface;
  std::vector<int> cell_of_tri;
  double dt = 0.0;

  const Cell& cell_of(int tri) const {
    return cells[static_cast<std::size_t>(cell_of_tri[static_cast<std::size_t>(tri)])];
  }
};

/// Assemble the per-step geometry from current positions, velocities and dt.
/// Facets are enumerated once per unordered cell pair, except fracture edges
/// which produce one coupling facet per side plus one interface element.
MeshGeometry build_geometry(const Triangulation& T, double dt);

/// Structural classification of a vertex, used by the motion schedules.
struct VertexClass {
  bool on_boundary = false;
  bool on_fracture = false;
  bool on_subdomain = false;
  bool tip = false;  // endpoint of the fracture polyline
  int constrained_degree = 0;
};
VertexClass classify_vertex(const Triangulation& T, int v);

}  // namespace fvmm

#endif
