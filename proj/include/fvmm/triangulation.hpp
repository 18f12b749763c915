#ifndef FVMM_TRIANGULATION_HPP
#define FVMM_TRIANGULATION_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fvmm/geometry.hpp"

namespace fvmm {

/// Role of a constrained edge. Constrained edges are never flipped; they are
/// the domain boundary, the lower-dimensional fracture grid, and (in
/// equi-dimensional runs) the resolved fracture subdomain boundary.
enum class ConstraintKind : std::uint8_t {
  none = 0,
  domain_boundary = 1,
  fracture = 2,
  subdomain_boundary = 3,
};

/// Editable triangle mesh with neighbor adjacency, exact-predicate constrained
/// Delaunay maintenance, and a surgery journal that records enough geometry to
/// project cell data conservatively after local modifications.
class Triangulation {
 public:
  struct Triangle {
    std::array<int, 3> v{-1, -1, -1};    // CCW
    std::array<int, 3> nbr{-1, -1, -1};  // neighbor opposite v[i]
    std::array<ConstraintKind, 3> ek{ConstraintKind::none, ConstraintKind::none,
                                     ConstraintKind::none};
    int label = 0;  // subdomain id
    bool alive = false;
    std::uint32_t gen = 0;
  };

  struct VertexData {
    Vec2 pos;
    Vec2 vel;
    bool alive = false;
  };

  struct Locate {
    enum What { inside, on_edge, on_vertex, outside } what = inside;
    int tri = -1;
    int sub = 0;  // edge index or corner index within tri
  };

  /// Two triangles over an axis-aligned box; the four box edges are marked as
  /// domain boundary.
  void bootstrap_box(const Vec2& lo, const Vec2& hi);
  Vec2 box_lo() const { return box_lo_; }
  Vec2 box_hi() const { return box_hi_; }

  int vertex_count() const { return static_cast<int>(verts_.size()); }
  int triangle_count() const { return static_cast<int>(tris_.size()); }
  const VertexData& vertex(int v) const { return verts_[v]; }
  VertexData& vertex(int v) { return verts_[v]; }
  const Triangle& triangle(int t) const { return tris_[t]; }
  Triangle& triangle_mutable(int t) { return tris_[t]; }

  Vec2 edge_tail(int t, int e) const { return verts_[tris_[t].v[(e + 1) % 3]].pos; }
  Vec2 edge_head(int t, int e) const { return verts_[tris_[t].v[(e + 2) % 3]].pos; }

  Locate locate(const Vec2& p, int hint = -1) const;

  /// Delaunay point insertion. Returns the vertex id; inserting at an existing
  /// vertex position returns that vertex. Points on a constrained edge split
  /// the constraint into two constrained sub-edges.
  int insert_point(const Vec2& p, int hint = -1);
  int insert_point_on_edge(const Vec2& p, int t, int e);
  int insert_point_in_triangle(const Vec2& p, int t);

  /// Force edge (a,b) into the triangulation and mark it with `kind`.
  /// Vertices lying exactly on the segment split it into sub-constraints.
  void insert_segment(int a, int b, ConstraintKind kind);

  /// Remove a vertex and retriangulate the hole. A vertex with exactly two
  /// incident constrained edges of the same kind is replaced by the
  /// constrained chord between its constraint neighbors (the chord must be a
  /// valid diagonal of the hole). Throws GeometryError when the removal is not
  /// possible.
  void remove_vertex(int v);

  /// True if removing v is structurally permitted (used by the remesh driver
  /// to pick candidates without try/catch control flow).
  bool removable(int v) const;

  /// Restore the constrained Delaunay property everywhere (flips only).
  void make_delaunay();

  /// Delaunay flips evaluated on externally supplied coordinates (the motion
  /// target geometry); flips are applied only when valid in both the stored
  /// and the supplied coordinates.
  void make_delaunay_at(const std::vector<Vec2>& coords);

  struct EdgeRef {
    int t = -1;
    int e = -1;
  };
  std::optional<EdgeRef> find_edge(int a, int b) const;
  ConstraintKind edge_kind(int t, int e) const { return tris_[t].ek[e]; }
  void set_edge_kind(int t, int e, ConstraintKind k);

  /// Triangles incident to v, in CCW order around v when possible.
  std::vector<int> star(int v) const;
  /// Number of incident constrained edges; optionally the first two opposite
  /// endpoints and their kinds.
  int constrained_degree(int v, std::array<int, 2>* neighbors = nullptr,
                         std::array<ConstraintKind, 2>* kinds = nullptr) const;
  bool on_domain_boundary(int v) const;

  // surgery journal -----------------------------------------------------
  struct OldCell {
    int tri = -1;
    std::array<Vec2, 3> p;
    int label = 0;
  };
  struct SurgeryLog {
    std::vector<OldCell> destroyed;  // originals destroyed since begin
    std::vector<int> created;        // alive triangles created since begin
    bool empty() const { return destroyed.empty() && created.empty(); }
  };
  void begin_surgery();
  SurgeryLog end_surgery();

  /// Adjacency / orientation / constraint-symmetry structural check.
  void validate() const;

  std::vector<int> alive_triangles() const;

 private:
  std::vector<VertexData> verts_;
  std::vector<Triangle> tris_;
  std::vector<int> free_tris_;
  std::uint32_t gen_counter_ = 1;
  mutable int locate_hint_ = -1;
  Vec2 box_lo_{0.0, 0.0}, box_hi_{1.0, 1.0};

  bool journal_active_ = false;
  std::uint32_t journal_start_gen_ = 0;
  std::vector<OldCell> journal_destroyed_;

  int new_vertex(const Vec2& p);
  int new_triangle(int a, int b, int c, int label);
  void kill_triangle(int t);
  int edge_index_of_neighbor(int t, int u) const;
  void legalize(int t, int e);
  bool flip(int t, int e);
  bool flip_valid_at(const std::vector<Vec2>& coords, int t, int e) const;

  struct CavityEdge {
    int a, b;             // directed: cavity boundary runs a->b (cavity on the left)
    int outside_tri = -1; // triangle beyond this edge; -1 domain hull, -2 chord
    ConstraintKind kind = ConstraintKind::none;
  };
  std::vector<int> retriangulate_polygon(const std::vector<int>& poly,
                                         const std::vector<CavityEdge>& boundary,
                                         int label);
  bool ear_clip(const std::vector<int>& poly,
                std::vector<std::array<int, 3>>* out) const;
  struct RemovalPlan {
    std::vector<int> star;
    std::vector<std::vector<int>> polys;
    std::vector<std::vector<CavityEdge>> edges;
    std::vector<int> labels;
    int chord_a = -1, chord_b = -1;
    ConstraintKind chord_kind = ConstraintKind::none;
  };
  bool plan_removal(int v, RemovalPlan* plan, std::string* why) const;
  void wire_chord(const std::vector<int>& made, int a, int b,
                  ConstraintKind kind);
  int orient_v(int a, int b, int c) const;
  int find_incident(int v) const;
  void legalize_all(const std::vector<int>& tris);
  mutable std::vector<int> vert_tri_;
};

}  // namespace fvmm

#endif
