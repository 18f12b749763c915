#include "fvmm/mesh_builder.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <limits>

#include "fvmm/exact.hpp"

namespace fvmm {

namespace {

inline int ccw(int i) { return (i + 1) % 3; }
inline int cw(int i) { return (i + 2) % 3; }

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic sub-ulp-free jitter of a quality insertion point. Exact
// circumcenter inserts on a symmetric domain cascade into structured grids of
// mutually cocircular cells, whose coincident circumcenters break the
// two-point flux (zero collocation distance). A 2% of circumradius offset,
// hashed from the point itself, keeps insertions reproducible and leaves the
// refinement termination argument intact while making exact cocircularity a
// measure-zero accident.
inline Vec2 jitter_insert_point(const Vec2& cc, double radius) {
  std::uint64_t hx, hy;
  std::memcpy(&hx, &cc.x, sizeof hx);
  std::memcpy(&hy, &cc.y, sizeof hy);
  std::uint64_t h = splitmix64(hx ^ splitmix64(hy));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;          // [0,1)
  double v = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
  double ang = 2.0 * 3.14159265358979323846 * u;
  double r = 0.02 * radius * (0.5 + 0.5 * v);
  return {cc.x + r * std::cos(ang), cc.y + r * std::sin(ang)};
}

// p strictly inside the open diametral disc of (a,b)
bool encroaches(const Vec2& a, const Vec2& b, const Vec2& p) {
  return dot(a - p, b - p) < 0.0;
}

struct Builder {
  const MeshSpec& spec;
  Triangulation& T;

  struct TriRef {
    int t;
    std::uint32_t gen;
  };
  std::deque<TriRef> quality;
  std::deque<TriRef> suspect;  // triangles whose constrained edges need a look

  explicit Builder(const MeshSpec& s, Triangulation& tri) : spec(s), T(tri) {}

  bool stale(const TriRef& r) const {
    return r.t < 0 || r.t >= T.triangle_count() || !T.triangle(r.t).alive ||
           T.triangle(r.t).gen != r.gen;
  }

  void push_created(const std::vector<int>& created) {
    for (int t : created) {
      quality.push_back(TriRef{t, T.triangle(t).gen});
      suspect.push_back(TriRef{t, T.triangle(t).gen});
    }
  }

  // apex of t, and apex across: either strictly inside the diametral disc?
  bool edge_encroached(int t, int e) const {
    Vec2 a = T.edge_tail(t, e), b = T.edge_head(t, e);
    if (encroaches(a, b, T.vertex(T.triangle(t).v[e]).pos)) return true;
    int u = T.triangle(t).nbr[e];
    if (u >= 0) {
      const auto& ur = T.triangle(u);
      for (int k = 0; k < 3; ++k)
        if (ur.nbr[k] == t)
          return encroaches(a, b, T.vertex(ur.v[k]).pos);
    }
    return false;
  }

  void split_constrained_edge(int t, int e) {
    ConstraintKind kind = T.edge_kind(t, e);
    int ta = T.triangle(t).v[ccw(e)], tb = T.triangle(t).v[cw(e)];
    Vec2 a = T.vertex(ta).pos, b = T.vertex(tb).pos;
    Vec2 sp{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    if (kind == ConstraintKind::subdomain_boundary && spec.subdomain_project)
      sp = spec.subdomain_project(sp);
    T.begin_surgery();
    if (orient2d_sign(a, b, sp) == 0) {
      T.insert_point_on_edge(sp, t, e);
    } else {
      // split point off the straight edge (curved interface): release the
      // constraint, insert the point, and re-constrain the two sub-chords
      T.set_edge_kind(t, e, ConstraintKind::none);
      int w = T.insert_point(sp, t);
      T.insert_segment(ta, w, kind);
      T.insert_segment(w, tb, kind);
    }
    push_created(T.end_surgery().created);
  }

  // first constrained edge of t whose diametral disc strictly contains p
  bool split_edge_containing(const Vec2& p) {
    for (int t = 0; t < T.triangle_count(); ++t) {
      if (!T.triangle(t).alive) continue;
      for (int e = 0; e < 3; ++e) {
        if (T.triangle(t).ek[e] == ConstraintKind::none) continue;
        int u = T.triangle(t).nbr[e];
        if (u >= 0 && u < t) continue;
        if (encroaches(T.edge_tail(t, e), T.edge_head(t, e), p)) {
          split_constrained_edge(t, e);
          return true;
        }
      }
    }
    return false;
  }

  double violation(int t) const {
    const auto& tr = T.triangle(t);
    Vec2 p0 = T.vertex(tr.v[0]).pos, p1 = T.vertex(tr.v[1]).pos,
         p2 = T.vertex(tr.v[2]).pos;
    Vec2 cc;
    try {
      cc = circumcenter(p0, p1, p2);
    } catch (const GeometryError&) {
      return 0.0;  // degenerate sliver: nothing a circumcenter insert can do
    }
    double R = norm(p0 - cc);
    double lmin = std::min({norm(p1 - p0), norm(p2 - p1), norm(p0 - p2)});
    Vec2 cen{(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0};
    double s = spec.size(cen);
    double v = std::max(R / (lmin * spec.radius_edge_bound),
                        R / (spec.size_radius_factor * s));
    return v;
  }

  void run() {
    for (int t : T.alive_triangles())
      quality.push_back(TriRef{t, T.triangle(t).gen}),
          suspect.push_back(TriRef{t, T.triangle(t).gen});

    for (int sweep = 0; sweep < 64; ++sweep) {
      while (!suspect.empty() || !quality.empty()) {
        if (T.vertex_count() > spec.max_points)
          throw GeometryError("mesh refinement exceeded the point budget");
        if (!suspect.empty()) {
          TriRef r = suspect.front();
          suspect.pop_front();
          if (stale(r)) continue;
          for (int e = 0; e < 3; ++e) {
            if (T.triangle(r.t).ek[e] == ConstraintKind::none) continue;
            if (edge_encroached(r.t, e)) {
              split_constrained_edge(r.t, e);
              break;  // r is stale now
            }
          }
          continue;
        }
        TriRef r = quality.front();
        quality.pop_front();
        if (stale(r)) continue;
        if (violation(r.t) <= 1.0) continue;
        const auto& tr = T.triangle(r.t);
        Vec2 ccx = circumcenter(T.vertex(tr.v[0]).pos, T.vertex(tr.v[1]).pos,
                                T.vertex(tr.v[2]).pos);
        Vec2 cc = jitter_insert_point(ccx, norm(T.vertex(tr.v[0]).pos - ccx));
        if (split_edge_containing(cc)) {
          quality.push_back(r);  // revisit if it survived the split
          continue;
        }
        auto loc = T.locate(cc, r.t);
        if (loc.what == Triangulation::Locate::outside) {
          if (loc.tri >= 0 &&
              T.triangle(loc.tri).ek[loc.sub] != ConstraintKind::none) {
            split_constrained_edge(loc.tri, loc.sub);
            quality.push_back(r);
          }
          continue;
        }
        if (loc.what == Triangulation::Locate::on_vertex) continue;
        T.begin_surgery();
        if (loc.what == Triangulation::Locate::on_edge)
          T.insert_point_on_edge(cc, loc.tri, loc.sub);
        else
          T.insert_point_in_triangle(cc, loc.tri);
        push_created(T.end_surgery().created);
      }
      // verification sweep: requeue anything still encroached or oversized
      bool dirty = false;
      for (int t : T.alive_triangles()) {
        for (int e = 0; e < 3; ++e)
          if (T.triangle(t).ek[e] != ConstraintKind::none &&
              edge_encroached(t, e)) {
            suspect.push_back(TriRef{t, T.triangle(t).gen});
            dirty = true;
            break;
          }
        if (violation(t) > 1.0) {
          quality.push_back(TriRef{t, T.triangle(t).gen});
          dirty = true;
        }
      }
      if (!dirty) return;
    }
    throw GeometryError("mesh refinement failed to settle");
  }
};

}  // namespace

Triangulation build_mesh(const MeshSpec& spec) {
  if (!spec.size) throw GeometryError("build_mesh: size field is required");
  Triangulation T;
  T.bootstrap_box(spec.lo, spec.hi);
  for (const auto& chain : spec.chains) {
    if (chain.pts.size() < 2)
      throw GeometryError("build_mesh: chain needs at least two points");
    std::vector<int> ids;
    for (const Vec2& p : chain.pts) ids.push_back(T.insert_point(p));
    for (std::size_t i = 0; i + 1 < ids.size(); ++i)
      T.insert_segment(ids[i], ids[i + 1], chain.kind);
    if (chain.closed) T.insert_segment(ids.back(), ids.front(), chain.kind);
  }
  Builder b(spec, T);
  b.run();
  assign_labels_by_flood(T, spec.inside_label);
  T.validate();
  return T;
}

void assign_labels_by_flood(Triangulation& T, int inside_label) {
  std::vector<int> alive = T.alive_triangles();
  std::vector<char> outside(static_cast<std::size_t>(T.triangle_count()), 0);
  std::deque<int> bfs;
  for (int t : alive) {
    const auto& tr = T.triangle(t);
    for (int e = 0; e < 3; ++e)
      if (tr.nbr[e] < 0) {
        outside[static_cast<std::size_t>(t)] = 1;
        bfs.push_back(t);
        break;
      }
  }
  while (!bfs.empty()) {
    int t = bfs.front();
    bfs.pop_front();
    const auto& tr = T.triangle(t);
    for (int e = 0; e < 3; ++e) {
      int u = tr.nbr[e];
      if (u < 0 || outside[static_cast<std::size_t>(u)]) continue;
      if (tr.ek[e] == ConstraintKind::subdomain_boundary) continue;
      outside[static_cast<std::size_t>(u)] = 1;
      bfs.push_back(u);
    }
  }
  for (int t : alive)
    T.triangle_mutable(t).label =
        outside[static_cast<std::size_t>(t)] ? 0 : inside_label;
}

}  // namespace fvmm
