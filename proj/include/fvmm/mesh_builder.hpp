#ifndef FVMM_MESH_BUILDER_HPP
#define FVMM_MESH_BUILDER_HPP

#include <functional>
#include <vector>

#include "fvmm/triangulation.hpp"

namespace fvmm {

/// Input description for the conforming mesh generator: a box, constraint
/// chains (domain boundary is implicit), and a target edge-length field.
struct MeshSpec {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};
  struct Chain {
    std::vector<Vec2> pts;
    ConstraintKind kind = ConstraintKind::fracture;
    bool closed = false;
  };
  std::vector<Chain> chains;
  std::function<double(const Vec2&)> size;
  /// Projects a tentative split point of a subdomain-boundary edge back onto
  /// the exact interface curve; identity when absent.
  std::function<Vec2(const Vec2&)> subdomain_project;
  double radius_edge_bound = 1.45;  // circumradius / shortest edge
  double size_radius_factor = 0.7;  // split when circumradius > factor * size
  int max_points = 200000;
  int inside_label = 1;
};

/// Delaunay refinement honoring the constraint chains. The result satisfies
/// the diametral-circle property on constrained edges: no adjacent apex lies
/// strictly inside the diametral disc, so circumcenters of cells next to a
/// constrained facet fall strictly on their own side.
Triangulation build_mesh(const MeshSpec& spec);

/// Label cells: everything reachable from the hull without crossing a
/// subdomain boundary keeps label 0, enclosed regions get inside_label.
void assign_labels_by_flood(Triangulation& T, int inside_label);

}  // namespace fvmm

#endif
