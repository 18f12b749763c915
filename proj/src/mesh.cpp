#include "fvmm/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <map>

#include "fvmm/geometry.hpp"

namespace fvmm {

VertexClass classify_vertex(const Triangulation& T, int v) {
  VertexClass c;
  c.on_boundary = T.on_domain_boundary(v);
  int nfrac = 0;
  for (int t : T.star(v)) {
    const auto& tri = T.triangle(t);
    for (int e = 0; e < 3; ++e) {
      int tail = tri.v[(e + 1) % 3];
      int head = tri.v[(e + 2) % 3];
      // each incident edge is counted from the triangle where v is its tail;
      // hull edges may show up only with v as head, so claim those too
      bool owned = tail == v || (head == v && tri.nbr[e] == -1);
      if (!owned) continue;
      ConstraintKind k = tri.ek[e];
      if (k == ConstraintKind::none) continue;
      ++c.constrained_degree;
      if (k == ConstraintKind::fracture) ++nfrac;
      if (k == ConstraintKind::subdomain_boundary) c.on_subdomain = true;
    }
  }
  c.on_fracture = nfrac > 0;
  c.tip = nfrac == 1;
  return c;
}

namespace {

int bc_side_of(const Vec2& a, const Vec2& b, const Vec2& lo, const Vec2& hi) {
  if (a.y == lo.y && b.y == lo.y) return 0;
  if (a.x == hi.x && b.x == hi.x) return 1;
  if (a.y == hi.y && b.y == hi.y) return 2;
  if (a.x == lo.x && b.x == lo.x) return 3;
  throw GeometryError("boundary facet does not lie on a box side");
}

}  // namespace

MeshGeometry build_geometry(const Triangulation& T, double dt) {
  MeshGeometry G;
  G.dt = dt;
  auto pos_new = [&](int v) {
    const auto& vd = T.vertex(v);
    return vd.pos + vd.vel * dt;
  };

  G.cell_of_tri.assign(static_cast<std::size_t>(T.triangle_count()), -1);
  for (int t : T.alive_triangles()) {
    const auto& tri = T.triangle(t);
    MeshGeometry::Cell c;
    c.tri = t;
    c.label = tri.label;
    Vec2 a0 = T.vertex(tri.v[0]).pos;
    Vec2 b0 = T.vertex(tri.v[1]).pos;
    Vec2 c0 = T.vertex(tri.v[2]).pos;
    Vec2 a1 = pos_new(tri.v[0]);
    Vec2 b1 = pos_new(tri.v[1]);
    Vec2 c1 = pos_new(tri.v[2]);
    c.area_old = triangle_area(a0, b0, c0);
    c.area_new = triangle_area(a1, b1, c1);
    if (!(c.area_old > 0.0) || !(c.area_new > 0.0))
      throw GeometryError("mesh motion inverts a cell within the step");
    c.cc_new = circumcenter(a1, b1, c1);
    c.centroid_new = (a1 + b1 + c1) / 3.0;
    G.cell_of_tri[static_cast<std::size_t>(t)] = static_cast<int>(G.cells.size());
    G.cells.push_back(c);
  }

  const Vec2 lo = T.box_lo(), hi = T.box_hi();

  auto facet_geom = [&](int t, int e) {
    MeshGeometry::Facet f;
    f.t = t;
    f.e = e;
    f.kind = T.edge_kind(t, e);
    const auto& tri = T.triangle(t);
    int vt = tri.v[(e + 1) % 3];
    int vh = tri.v[(e + 2) % 3];
    Vec2 a1 = pos_new(vt), b1 = pos_new(vh);
    f.len_new = norm(b1 - a1);
    if (!(f.len_new > 0.0)) throw GeometryError("zero-length facet");
    f.n_hat = perp(b1 - a1) / f.len_new;
    f.mid_new = (a1 + b1) * 0.5;
    f.swept = swept_volume(T.vertex(vt).pos, T.vertex(vh).pos, T.vertex(vt).vel,
                           T.vertex(vh).vel, dt);
    return f;
  };

  // fracture edges feed the interface grid; remember both coupling facets
  struct FracEdge {
    int va = -1, vb = -1;         // sorted key order
    std::array<int, 2> facet{-1, -1};
    int nf = 0;
  };
  std::map<std::pair<int, int>, int> frac_id;
  std::vector<FracEdge> fedges;

  for (std::size_t ci = 0; ci < G.cells.size(); ++ci) {
    int t = G.cells[ci].tri;
    const auto& tri = T.triangle(t);
    for (int e = 0; e < 3; ++e) {
      ConstraintKind k = tri.ek[e];
      int u = tri.nbr[e];
      int vt = tri.v[(e + 1) % 3];
      int vh = tri.v[(e + 2) % 3];
      if (k == ConstraintKind::fracture) {
        // one coupling facet per side; the bulk neighbor across the interface
        // is not a flux neighbor here
        MeshGeometry::Facet f = facet_geom(t, e);
        f.cell_in = static_cast<int>(ci);
        f.cell_out = -1;
        auto key = MeshState::key(vt, vh);
        auto it = frac_id.find(key);
        if (it == frac_id.end()) {
          it = frac_id.emplace(key, static_cast<int>(fedges.size())).first;
          fedges.push_back(FracEdge{key.first, key.second, {-1, -1}, 0});
        }
        FracEdge& fe = fedges[static_cast<std::size_t>(it->second)];
        if (fe.nf >= 2) throw GeometryError("fracture edge with more than two sides");
        fe.facet[static_cast<std::size_t>(fe.nf++)] = static_cast<int>(G.facets.size());
        G.facets.push_back(f);
        continue;
      }
      if (u == -1) {
        MeshGeometry::Facet f = facet_geom(t, e);
        f.cell_in = static_cast<int>(ci);
        f.cell_out = -1;
        f.bc_side = bc_side_of(T.vertex(vt).pos, T.vertex(vh).pos, lo, hi);
        G.facets.push_back(f);
        continue;
      }
      if (u < t) continue;  // interior facet, emitted from the lower slot only
      MeshGeometry::Facet f = facet_geom(t, e);
      f.cell_in = static_cast<int>(ci);
      f.cell_out = G.cell_of_tri[static_cast<std::size_t>(u)];
      G.facets.push_back(f);
    }
  }

  if (fedges.empty()) return G;

  for (const FracEdge& fe : fedges)
    if (fe.nf != 2) throw GeometryError("fracture edge without two adjacent cells");

  // walk the fracture polyline tip to tip; ties broken by position so the
  // element order is reproducible across runs
  std::map<int, std::vector<int>> incident;
  for (std::size_t i = 0; i < fedges.size(); ++i) {
    incident[fedges[i].va].push_back(static_cast<int>(i));
    incident[fedges[i].vb].push_back(static_cast<int>(i));
  }
  std::vector<int> endpoints;
  for (const auto& [v, es] : incident) {
    if (es.size() > 2) throw GeometryError("branching fracture is not supported");
    if (es.size() == 1) endpoints.push_back(v);
  }
  std::sort(endpoints.begin(), endpoints.end(), [&](int a, int b) {
    const Vec2& pa = T.vertex(a).pos;
    const Vec2& pb = T.vertex(b).pos;
    return pa.x != pb.x ? pa.x < pb.x : pa.y < pb.y;
  });

  std::vector<char> used(fedges.size(), 0);
  for (int start : endpoints) {
    if (used[static_cast<std::size_t>(incident[start][0])]) continue;
    int cur = start;
    int prev_elem = -1;
    for (;;) {
      int eid = -1;
      for (int cand : incident[cur])
        if (!used[static_cast<std::size_t>(cand)]) eid = cand;
      if (eid == -1) break;
      used[static_cast<std::size_t>(eid)] = 1;
      const FracEdge& fe = fedges[static_cast<std::size_t>(eid)];
      int nxt = fe.va == cur ? fe.vb : fe.va;

      MeshGeometry::IfaceElem el;
      el.va = cur;
      el.vb = nxt;
      Vec2 a0 = T.vertex(cur).pos, b0 = T.vertex(nxt).pos;
      Vec2 a1 = pos_new(cur), b1 = pos_new(nxt);
      el.len_old = norm(b0 - a0);
      el.len_new = norm(b1 - a1);
      if (!(el.len_new > 0.0) || !(el.len_old > 0.0))
        throw GeometryError("degenerate interface element");
      el.mid_old = (a0 + b0) * 0.5;
      el.mid_new = (a1 + b1) * 0.5;
      el.tau = (b1 - a1) / el.len_new;
      el.slide_a = dot(T.vertex(cur).vel, el.tau);
      el.slide_b = dot(T.vertex(nxt).vel, el.tau);
      el.left = prev_elem;

      int id = static_cast<int>(G.iface.size());
      for (int fi : fe.facet) {
        MeshGeometry::Facet& f = G.facets[static_cast<std::size_t>(fi)];
        f.iface_elem = id;
        Vec2 cen = G.cells[static_cast<std::size_t>(f.cell_in)].centroid_new;
        double side = cross(el.tau, cen - el.mid_new);
        if (side > 0.0)
          el.facet_plus = fi;
        else if (side < 0.0)
          el.facet_minus = fi;
        else
          throw GeometryError("cell centroid on the interface line");
      }
      if (el.facet_plus == -1 || el.facet_minus == -1)
        throw GeometryError("interface element missing a side");
      if (prev_elem >= 0) G.iface[static_cast<std::size_t>(prev_elem)].right = id;
      G.iface.push_back(el);
      prev_elem = id;
      cur = nxt;
    }
  }
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i]) throw GeometryError("closed fracture loop is not supported");

  return G;
}

}  // namespace fvmm
