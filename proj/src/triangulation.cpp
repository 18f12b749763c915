#include "fvmm/triangulation.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "fvmm/exact.hpp"

namespace fvmm {

namespace {

// Directed edge e of a triangle runs v[(e+1)%3] -> v[(e+2)%3] along the CCW
// boundary, so edge e is the one opposite corner e.
inline int ccw(int i) { return (i + 1) % 3; }
inline int cw(int i) { return (i + 2) % 3; }

bool strictly_between(const Vec2& a, const Vec2& b, const Vec2& p) {
  // assumes a, b, p collinear
  if (a.x != b.x) return (a.x < p.x) != (b.x < p.x) && p.x != a.x && p.x != b.x;
  return (a.y < p.y) != (b.y < p.y) && p.y != a.y && p.y != b.y;
}

}  // namespace

int Triangulation::orient_v(int a, int b, int c) const {
  return orient2d_sign(verts_[a].pos, verts_[b].pos, verts_[c].pos);
}

int Triangulation::new_vertex(const Vec2& p) {
  verts_.push_back(VertexData{p, Vec2{0.0, 0.0}, true});
  vert_tri_.push_back(-1);
  return static_cast<int>(verts_.size()) - 1;
}

int Triangulation::new_triangle(int a, int b, int c, int label) {
  int t;
  if (!free_tris_.empty()) {
    t = free_tris_.back();
    free_tris_.pop_back();
  } else {
    t = static_cast<int>(tris_.size());
    tris_.emplace_back();
  }
  Triangle& tr = tris_[t];
  tr.v = {a, b, c};
  tr.nbr = {-1, -1, -1};
  tr.ek = {ConstraintKind::none, ConstraintKind::none, ConstraintKind::none};
  tr.label = label;
  tr.alive = true;
  tr.gen = gen_counter_++;
  vert_tri_[a] = vert_tri_[b] = vert_tri_[c] = t;
  return t;
}

void Triangulation::kill_triangle(int t) {
  Triangle& tr = tris_[t];
  if (!tr.alive) throw GeometryError("kill_triangle: triangle already dead");
  if (journal_active_ && tr.gen < journal_start_gen_) {
    journal_destroyed_.push_back(OldCell{
        t,
        {verts_[tr.v[0]].pos, verts_[tr.v[1]].pos, verts_[tr.v[2]].pos},
        tr.label});
  }
  tr.alive = false;
  free_tris_.push_back(t);
}

int Triangulation::edge_index_of_neighbor(int t, int u) const {
  for (int e = 0; e < 3; ++e)
    if (tris_[t].nbr[e] == u) return e;
  throw GeometryError("adjacency broken: triangles are not mutual neighbors");
}

void Triangulation::bootstrap_box(const Vec2& lo, const Vec2& hi) {
  verts_.clear();
  tris_.clear();
  free_tris_.clear();
  vert_tri_.clear();
  locate_hint_ = -1;
  box_lo_ = lo;
  box_hi_ = hi;
  int v0 = new_vertex(Vec2{lo.x, lo.y});
  int v1 = new_vertex(Vec2{hi.x, lo.y});
  int v2 = new_vertex(Vec2{hi.x, hi.y});
  int v3 = new_vertex(Vec2{lo.x, hi.y});
  int t0 = new_triangle(v0, v1, v2, 0);
  int t1 = new_triangle(v0, v2, v3, 0);
  tris_[t0].nbr = {-1, t1, -1};
  tris_[t1].nbr = {-1, -1, t0};
  const ConstraintKind B = ConstraintKind::domain_boundary;
  tris_[t0].ek = {B, ConstraintKind::none, B};
  tris_[t1].ek = {B, B, ConstraintKind::none};
}

Triangulation::Locate Triangulation::locate(const Vec2& p, int hint) const {
  int t = hint;
  if (t < 0 || t >= triangle_count() || !tris_[t].alive) t = locate_hint_;
  if (t < 0 || t >= triangle_count() || !tris_[t].alive) {
    t = -1;
    for (int i = 0; i < triangle_count(); ++i)
      if (tris_[i].alive) {
        t = i;
        break;
      }
    if (t < 0) throw GeometryError("locate: empty triangulation");
  }
  const long max_steps = 4 * static_cast<long>(tris_.size()) + 16;
  long steps = 0;
  while (steps++ < max_steps) {
    int s[3];
    for (int e = 0; e < 3; ++e)
      s[e] = orient2d_sign(edge_tail(t, e), edge_head(t, e), p);
    int neg = -1;
    for (int e = 0; e < 3; ++e)
      if (s[e] < 0) {
        neg = e;
        break;
      }
    if (neg < 0) {
      locate_hint_ = t;
      int z0 = -1, z1 = -1;
      for (int e = 0; e < 3; ++e)
        if (s[e] == 0) (z0 < 0 ? z0 : z1) = e;
      if (z0 < 0) return Locate{Locate::inside, t, 0};
      if (z1 < 0) return Locate{Locate::on_edge, t, z0};
      return Locate{Locate::on_vertex, t, 3 - z0 - z1};
    }
    int next = tris_[t].nbr[neg];
    if (next < 0) {
      locate_hint_ = t;
      return Locate{Locate::outside, t, neg};
    }
    t = next;
  }
  // walk failed to settle (possible on a temporarily non-Delaunay mesh):
  // deterministic exhaustive fallback, lowest triangle index wins.
  for (int i = 0; i < triangle_count(); ++i) {
    if (!tris_[i].alive) continue;
    int s[3];
    bool in = true;
    for (int e = 0; e < 3 && in; ++e) {
      s[e] = orient2d_sign(edge_tail(i, e), edge_head(i, e), p);
      if (s[e] < 0) in = false;
    }
    if (!in) continue;
    locate_hint_ = i;
    int z0 = -1, z1 = -1;
    for (int e = 0; e < 3; ++e)
      if (s[e] == 0) (z0 < 0 ? z0 : z1) = e;
    if (z0 < 0) return Locate{Locate::inside, i, 0};
    if (z1 < 0) return Locate{Locate::on_edge, i, z0};
    return Locate{Locate::on_vertex, i, 3 - z0 - z1};
  }
  return Locate{Locate::outside, -1, 0};
}

void Triangulation::legalize_all(const std::vector<int>& seed) {
  struct Item {
    int t, e;
    std::uint32_t gen;
  };
  std::vector<Item> stack;
  for (int t : seed)
    for (int e = 0; e < 3; ++e) stack.push_back(Item{t, e, tris_[t].gen});
  long guard = 0;
  while (!stack.empty()) {
    if (++guard > 200000)
      throw GeometryError("legalize: flip cascade failed to terminate");
    Item it = stack.back();
    stack.pop_back();
    if (it.t < 0 || !tris_[it.t].alive || tris_[it.t].gen != it.gen) continue;
    const Triangle& tr = tris_[it.t];
    if (tr.ek[it.e] != ConstraintKind::none) continue;
    int u = tr.nbr[it.e];
    if (u < 0) continue;
    int j = edge_index_of_neighbor(u, it.t);
    int a = tr.v[it.e], b = tr.v[ccw(it.e)], c = tr.v[cw(it.e)];
    int d = tris_[u].v[j];
    if (incircle_sign(verts_[a].pos, verts_[b].pos, verts_[c].pos,
                      verts_[d].pos) <= 0)
      continue;
    int t_old = it.t;
    if (!flip(t_old, it.e)) continue;
    // flip() replaced both slots in place; re-stack their edges
    for (int tt : {t_old, u})
      for (int e = 0; e < 3; ++e) stack.push_back(Item{tt, e, tris_[tt].gen});
  }
}

void Triangulation::legalize(int t, int e) {
  (void)e;
  legalize_all({t});
}

bool Triangulation::flip(int t, int e) {
  Triangle& tr = tris_[t];
  if (tr.ek[e] != ConstraintKind::none) return false;
  int u = tr.nbr[e];
  if (u < 0) return false;
  if (tris_[u].label != tr.label) return false;
  int j = edge_index_of_neighbor(u, t);
  int a = tr.v[e], b = tr.v[ccw(e)], c = tr.v[cw(e)];
  int d = tris_[u].v[j];
  if (orient_v(a, b, d) <= 0 || orient_v(a, d, c) <= 0) return false;

  int nb_ab = tr.nbr[cw(e)], nb_ca = tr.nbr[ccw(e)];
  ConstraintKind k_ab = tr.ek[cw(e)], k_ca = tr.ek[ccw(e)];
  int nb_dc = tris_[u].nbr[cw(j)], nb_bd = tris_[u].nbr[ccw(j)];
  ConstraintKind k_dc = tris_[u].ek[cw(j)], k_bd = tris_[u].ek[ccw(j)];
  int label = tr.label;

  kill_triangle(t);
  kill_triangle(u);
  // reuse both slots so neighbor ids stay stable
  free_tris_.pop_back();
  free_tris_.pop_back();
  Triangle& nt = tris_[t];
  nt.v = {a, b, d};
  nt.nbr = {nb_bd, u, nb_ab};
  nt.ek = {k_bd, ConstraintKind::none, k_ab};
  nt.label = label;
  nt.alive = true;
  nt.gen = gen_counter_++;
  Triangle& nu = tris_[u];
  nu.v = {a, d, c};
  nu.nbr = {nb_dc, nb_ca, t};
  nu.ek = {k_dc, k_ca, ConstraintKind::none};
  nu.label = label;
  nu.alive = true;
  nu.gen = gen_counter_++;
  for (int w : {a, b, d}) vert_tri_[w] = t;
  for (int w : {a, d, c}) vert_tri_[w] = u;
  if (nb_ab >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_ab].nbr[k] == t || tris_[nb_ab].nbr[k] == u) tris_[nb_ab].nbr[k] = t;
  if (nb_bd >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_bd].nbr[k] == u || tris_[nb_bd].nbr[k] == t) tris_[nb_bd].nbr[k] = t;
  if (nb_ca >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_ca].nbr[k] == t || tris_[nb_ca].nbr[k] == u) tris_[nb_ca].nbr[k] = u;
  if (nb_dc >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_dc].nbr[k] == u || tris_[nb_dc].nbr[k] == t) tris_[nb_dc].nbr[k] = u;
  return true;
}

int Triangulation::insert_point_in_triangle(const Vec2& p, int t) {
  const Triangle tr = tris_[t];
  int w = new_vertex(p);
  kill_triangle(t);
  int a = tr.v[0], b = tr.v[1], c = tr.v[2];
  int t0 = new_triangle(w, b, c, tr.label);
  int t1 = new_triangle(w, c, a, tr.label);
  int t2 = new_triangle(w, a, b, tr.label);
  tris_[t0].nbr = {tr.nbr[0], t1, t2};
  tris_[t0].ek[0] = tr.ek[0];
  tris_[t1].nbr = {tr.nbr[1], t2, t0};
  tris_[t1].ek[0] = tr.ek[1];
  tris_[t2].nbr = {tr.nbr[2], t0, t1};
  tris_[t2].ek[0] = tr.ek[2];
  int news[3] = {t0, t1, t2};
  for (int e = 0; e < 3; ++e) {
    int nb = tr.nbr[e];
    if (nb < 0) continue;
    for (int k = 0; k < 3; ++k)
      if (tris_[nb].nbr[k] == t) tris_[nb].nbr[k] = news[e];
  }
  legalize_all({t0, t1, t2});
  return w;
}

int Triangulation::insert_point_on_edge(const Vec2& p, int t, int e) {
  if (orient2d_sign(edge_tail(t, e), edge_head(t, e), p) != 0)
    throw GeometryError("insert_point_on_edge: point is off the edge");
  const Triangle tr = tris_[t];
  const ConstraintKind kind = tr.ek[e];
  int a = tr.v[e], b = tr.v[ccw(e)], c = tr.v[cw(e)];
  int nb_ab = tr.nbr[cw(e)], nb_ca = tr.nbr[ccw(e)];
  ConstraintKind k_ab = tr.ek[cw(e)], k_ca = tr.ek[ccw(e)];
  int u = tr.nbr[e];
  int w = new_vertex(p);

  kill_triangle(t);
  int t1 = new_triangle(a, b, w, tr.label);
  int t2 = new_triangle(a, w, c, tr.label);
  // t1 edges: 0:(b,w) half of split edge, 1:(w,a) internal, 2:(a,b)
  tris_[t1].ek = {kind, ConstraintKind::none, k_ab};
  tris_[t2].ek = {kind, k_ca, ConstraintKind::none};
  tris_[t1].nbr = {-1, t2, nb_ab};
  tris_[t2].nbr = {-1, nb_ca, t1};
  if (nb_ab >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_ab].nbr[k] == t) tris_[nb_ab].nbr[k] = t1;
  if (nb_ca >= 0)
    for (int k = 0; k < 3; ++k)
      if (tris_[nb_ca].nbr[k] == t) tris_[nb_ca].nbr[k] = t2;

  std::vector<int> made = {t1, t2};
  if (u >= 0) {
    const Triangle ur = tris_[u];
    int j = edge_index_of_neighbor(u, t);
    int d = ur.v[j];  // u = (d, c, b) CCW
    int nb_dc = ur.nbr[cw(j)], nb_bd = ur.nbr[ccw(j)];
    ConstraintKind k_dc = ur.ek[cw(j)], k_bd = ur.ek[ccw(j)];
    kill_triangle(u);
    int u1 = new_triangle(d, c, w, ur.label);
    int u2 = new_triangle(d, w, b, ur.label);
    tris_[u1].ek = {kind, ConstraintKind::none, k_dc};
    tris_[u2].ek = {kind, k_bd, ConstraintKind::none};
    tris_[u1].nbr = {t2, u2, nb_dc};
    tris_[u2].nbr = {t1, nb_bd, u1};
    tris_[t2].nbr[0] = u1;
    tris_[t1].nbr[0] = u2;
    if (nb_dc >= 0)
      for (int k = 0; k < 3; ++k)
        if (tris_[nb_dc].nbr[k] == u) tris_[nb_dc].nbr[k] = u1;
    if (nb_bd >= 0)
      for (int k = 0; k < 3; ++k)
        if (tris_[nb_bd].nbr[k] == u) tris_[nb_bd].nbr[k] = u2;
    made.push_back(u1);
    made.push_back(u2);
  }
  legalize_all(made);
  return w;
}

int Triangulation::insert_point(const Vec2& p, int hint) {
  Locate loc = locate(p, hint);
  switch (loc.what) {
    case Locate::on_vertex:
      return tris_[loc.tri].v[loc.sub];
    case Locate::inside:
      return insert_point_in_triangle(p, loc.tri);
    case Locate::on_edge:
      return insert_point_on_edge(p, loc.tri, loc.sub);
    case Locate::outside:
      throw GeometryError("insert_point: point lies outside the domain");
  }
  throw GeometryError("insert_point: unreachable");
}

std::optional<Triangulation::EdgeRef> Triangulation::find_edge(int a, int b) const {
  for (int t : star(a)) {
    const Triangle& tr = tris_[t];
    for (int e = 0; e < 3; ++e) {
      int u = tr.v[ccw(e)], w = tr.v[cw(e)];
      if ((u == a && w == b) || (u == b && w == a)) return EdgeRef{t, e};
    }
  }
  return std::nullopt;
}

void Triangulation::set_edge_kind(int t, int e, ConstraintKind k) {
  tris_[t].ek[e] = k;
  int u = tris_[t].nbr[e];
  if (u >= 0) tris_[u].ek[edge_index_of_neighbor(u, t)] = k;
}

int Triangulation::find_incident(int v) const {
  int h = vert_tri_[v];
  if (h >= 0 && h < triangle_count() && tris_[h].alive)
    for (int k = 0; k < 3; ++k)
      if (tris_[h].v[k] == v) return h;
  for (int t = 0; t < triangle_count(); ++t)
    if (tris_[t].alive)
      for (int k = 0; k < 3; ++k)
        if (tris_[t].v[k] == v) {
          vert_tri_[v] = t;
          return t;
        }
  throw GeometryError("vertex has no incident triangle");
}

std::vector<int> Triangulation::star(int v) const {
  int t0 = find_incident(v);
  auto corner = [&](int t) {
    for (int k = 0; k < 3; ++k)
      if (tris_[t].v[k] == v) return k;
    throw GeometryError("star walk left the vertex");
  };
  // rewind clockwise to a boundary fan edge (or detect a closed star)
  int start = t0;
  bool open = false;
  for (long guard = 0;; ++guard) {
    if (guard > triangle_count())
      throw GeometryError("star walk failed to terminate");
    int c = corner(start);
    int prev = tris_[start].nbr[cw(c)];
    if (prev < 0) {
      open = true;
      break;
    }
    if (prev == t0) break;
    start = prev;
  }
  std::vector<int> out;
  int t = start;
  for (long guard = 0;; ++guard) {
    if (guard > triangle_count())
      throw GeometryError("star walk failed to terminate");
    out.push_back(t);
    int c = corner(t);
    int next = tris_[t].nbr[ccw(c)];
    if (next < 0) {
      if (!open) throw GeometryError("star walk hit boundary on a closed star");
      break;
    }
    if (next == start && !open) break;
    if (next == start && open)
      throw GeometryError("star walk wrapped on an open star");
    t = next;
  }
  return out;
}

bool Triangulation::on_domain_boundary(int v) const {
  std::vector<int> st = star(v);
  int t = st.front();
  for (int k = 0; k < 3; ++k)
    if (tris_[t].v[k] == v) return tris_[t].nbr[cw(k)] < 0;
  return false;
}

int Triangulation::constrained_degree(int v, std::array<int, 2>* neighbors,
                                      std::array<ConstraintKind, 2>* kinds) const {
  std::vector<int> st = star(v);
  int count = 0;
  auto note = [&](int other, ConstraintKind k) {
    if (k == ConstraintKind::none) return;
    if (count < 2) {
      if (neighbors) (*neighbors)[count] = other;
      if (kinds) (*kinds)[count] = k;
    }
    ++count;
  };
  for (std::size_t i = 0; i < st.size(); ++i) {
    const Triangle& tr = tris_[st[i]];
    int c = -1;
    for (int k = 0; k < 3; ++k)
      if (tr.v[k] == v) c = k;
    note(tr.v[ccw(c)], tr.ek[cw(c)]);  // edge (v, p)
    if (i + 1 == st.size()) {
      int next = tr.nbr[ccw(c)];
      if (next < 0) note(tr.v[cw(c)], tr.ek[ccw(c)]);  // open star: edge (q, v)
    }
  }
  return count;
}

bool Triangulation::ear_clip(const std::vector<int>& poly,
                             std::vector<std::array<int, 3>>* out) const {
  out->clear();
  std::vector<int> chain = poly;
  while (chain.size() > 3) {
    bool clipped = false;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      int a = chain[(i + chain.size() - 1) % chain.size()];
      int b = chain[i];
      int c = chain[(i + 1) % chain.size()];
      if (orient_v(a, b, c) <= 0) continue;
      bool blocked = false;
      for (std::size_t k = 0; k < chain.size() && !blocked; ++k) {
        int u = chain[k];
        if (u == a || u == b || u == c) continue;
        if (orient_v(a, b, u) >= 0 && orient_v(b, c, u) >= 0 &&
            orient_v(c, a, u) >= 0)
          blocked = true;
      }
      if (blocked) continue;
      out->push_back({a, b, c});
      chain.erase(chain.begin() + static_cast<long>(i));
      clipped = true;
      break;
    }
    if (!clipped) return false;
  }
  if (chain.size() == 3) {
    if (orient_v(chain[0], chain[1], chain[2]) <= 0) return false;
    out->push_back({chain[0], chain[1], chain[2]});
  }
  return !out->empty();
}

std::vector<int> Triangulation::retriangulate_polygon(
    const std::vector<int>& poly, const std::vector<CavityEdge>& boundary,
    int label) {
  std::vector<std::array<int, 3>> ears;
  if (!ear_clip(poly, &ears))
    throw GeometryError("retriangulation failed: cavity polygon is not simple");
  std::vector<int> made;
  made.reserve(ears.size());
  std::map<std::pair<int, int>, std::pair<int, int>> half;  // (tail,head)->(t,e)
  for (const auto& tri : ears) {
    int t = new_triangle(tri[0], tri[1], tri[2], label);
    made.push_back(t);
    for (int e = 0; e < 3; ++e)
      half[{tris_[t].v[ccw(e)], tris_[t].v[cw(e)]}] = {t, e};
  }
  std::map<std::pair<int, int>, const CavityEdge*> rim;
  for (const auto& ce : boundary) rim[{ce.a, ce.b}] = &ce;
  for (int t : made) {
    for (int e = 0; e < 3; ++e) {
      int tail = tris_[t].v[ccw(e)], head = tris_[t].v[cw(e)];
      auto in = half.find({head, tail});
      if (in != half.end()) {
        tris_[t].nbr[e] = in->second.first;
        continue;
      }
      auto rm = rim.find({tail, head});
      if (rm == rim.end())
        throw GeometryError("retriangulation produced an unmatched edge");
      const CavityEdge& ce = *rm->second;
      tris_[t].ek[e] = ce.kind;
      if (ce.outside_tri >= 0) {
        tris_[t].nbr[e] = ce.outside_tri;
        Triangle& ot = tris_[ce.outside_tri];
        for (int k = 0; k < 3; ++k) {
          int ot_tail = ot.v[ccw(k)], ot_head = ot.v[cw(k)];
          if (ot_tail == head && ot_head == tail) {
            ot.nbr[k] = t;
            ot.ek[k] = ce.kind;
          }
        }
      } else {
        tris_[t].nbr[e] = -1;  // hull or chord half (wired by caller)
      }
    }
  }
  return made;
}

void Triangulation::wire_chord(const std::vector<int>& made, int a, int b,
                               ConstraintKind kind) {
  int tl = -1, el = -1, tr = -1, er = -1;
  for (int t : made) {
    for (int e = 0; e < 3; ++e) {
      if (tris_[t].v[ccw(e)] == a && tris_[t].v[cw(e)] == b) {
        tl = t;
        el = e;
      } else if (tris_[t].v[ccw(e)] == b && tris_[t].v[cw(e)] == a) {
        tr = t;
        er = e;
      }
    }
  }
  if (tl < 0 || tr < 0)
    throw GeometryError("chord edge missing after retriangulation");
  tris_[tl].nbr[el] = tr;
  tris_[tr].nbr[er] = tl;
  tris_[tl].ek[el] = kind;
  tris_[tr].ek[er] = kind;
}

void Triangulation::insert_segment(int a, int b, ConstraintKind kind) {
  if (a == b) throw GeometryError("insert_segment: endpoints coincide");
  for (long guard = 0; guard <= triangle_count(); ++guard) {
    if (auto er = find_edge(a, b)) {
      set_edge_kind(er->t, er->e, kind);
      return;
    }
    const Vec2 pa = verts_[a].pos, pb = verts_[b].pos;
    // find the star triangle of a whose cone contains the direction a->b
    int entry = -1;
    int hit_vertex = -1;
    for (int t : star(a)) {
      int c = -1;
      for (int k = 0; k < 3; ++k)
        if (tris_[t].v[k] == a) c = k;
      int p = tris_[t].v[ccw(c)], q = tris_[t].v[cw(c)];
      int op = orient2d_sign(pa, verts_[p].pos, pb);
      int oq = orient2d_sign(pa, verts_[q].pos, pb);
      if (op == 0 && dot(verts_[p].pos - pa, pb - pa) > 0.0) {
        hit_vertex = p;
        break;
      }
      if (oq == 0 && dot(verts_[q].pos - pa, pb - pa) > 0.0) {
        hit_vertex = q;
        break;
      }
      if (op > 0 && oq < 0) {
        entry = t;
        break;
      }
    }
    if (hit_vertex >= 0) {
      auto er = find_edge(a, hit_vertex);
      if (!er) throw GeometryError("insert_segment: collinear vertex is not a neighbor");
      set_edge_kind(er->t, er->e, kind);
      a = hit_vertex;
      continue;
    }
    if (entry < 0)
      throw GeometryError("insert_segment: no triangle cone contains the segment");

    // walk the pipe of triangles crossed by the open segment (a,b)
    std::vector<int> pipe;
    std::vector<int> left_chain, right_chain;
    std::map<std::pair<int, int>, std::pair<int, ConstraintKind>> outer;
    auto record_outer = [&](int t, int e) {
      int u = tris_[t].v[ccw(e)], w = tris_[t].v[cw(e)];
      auto key = std::minmax(u, w);
      outer[{key.first, key.second}] = {tris_[t].nbr[e], tris_[t].ek[e]};
    };
    int c = -1;
    for (int k = 0; k < 3; ++k)
      if (tris_[entry].v[k] == a) c = k;
    int p = tris_[entry].v[ccw(c)], q = tris_[entry].v[cw(c)];
    if (tris_[entry].ek[c] != ConstraintKind::none)
      throw GeometryError("insert_segment: segment crosses a constrained edge");
    pipe.push_back(entry);
    record_outer(entry, ccw(c));
    record_outer(entry, cw(c));
    // cone test: orient(a,p,b) > 0 puts b left of ray a->p, hence p right of
    // the directed segment a->b, and q left of it
    left_chain.push_back(q);
    right_chain.push_back(p);
    int label = tris_[entry].label;
    int cur = tris_[entry].nbr[c];
    int stop_vertex = -1;
    for (long g2 = 0;; ++g2) {
      if (g2 > triangle_count() || cur < 0)
        throw GeometryError("insert_segment: pipe walk failed");
      int j = edge_index_of_neighbor(cur, pipe.back());
      int w = tris_[cur].v[j];
      pipe.push_back(cur);
      if (tris_[cur].label != label)
        throw GeometryError("insert_segment: pipe crosses a label boundary");
      if (w == b) {
        record_outer(cur, ccw(j));
        record_outer(cur, cw(j));
        stop_vertex = b;
        break;
      }
      int s = orient2d_sign(pa, pb, verts_[w].pos);
      if (s == 0) {
        if (!strictly_between(pa, pb, verts_[w].pos))
          throw GeometryError("insert_segment: collinear vertex outside span");
        record_outer(cur, ccw(j));
        record_outer(cur, cw(j));
        stop_vertex = w;
        break;
      }
      // exit through the edge whose endpoints straddle the segment; the third
      // edge of cur joins two same-side vertices and becomes cavity rim
      int exit_e;
      if (s > 0) {
        int l_prev = left_chain.back();
        left_chain.push_back(w);
        exit_e = (tris_[cur].v[ccw(j)] == l_prev) ? ccw(j) : cw(j);
      } else {
        int r_prev = right_chain.back();
        right_chain.push_back(w);
        exit_e = (tris_[cur].v[ccw(j)] == r_prev) ? ccw(j) : cw(j);
      }
      record_outer(cur, (exit_e == ccw(j)) ? cw(j) : ccw(j));
      if (tris_[cur].ek[exit_e] != ConstraintKind::none)
        throw GeometryError("insert_segment: segment crosses a constrained edge");
      int nxt = tris_[cur].nbr[exit_e];
      cur = nxt;
    }

    // carve the cavity and retriangulate both sides of the chord a->stop
    for (int t : pipe) kill_triangle(t);
    int sb = stop_vertex;
    std::vector<int> upper;  // CCW: a -> sb (chord), then left chain reversed
    upper.push_back(a);
    upper.push_back(sb);
    for (auto it = left_chain.rbegin(); it != left_chain.rend(); ++it)
      upper.push_back(*it);
    std::vector<int> lower;  // CCW: sb -> a (chord), then right chain forward
    lower.push_back(sb);
    lower.push_back(a);
    for (int w : right_chain) lower.push_back(w);

    auto rim_edges = [&](const std::vector<int>& poly) {
      std::vector<CavityEdge> edges;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        int u = poly[i], w = poly[(i + 1) % poly.size()];
        CavityEdge ce;
        ce.a = u;
        ce.b = w;
        if ((u == a && w == sb) || (u == sb && w == a)) {
          ce.outside_tri = -2;
          ce.kind = kind;
        } else {
          auto key = std::minmax(u, w);
          auto it = outer.find({key.first, key.second});
          if (it == outer.end())
            throw GeometryError("insert_segment: cavity rim bookkeeping failed");
          ce.outside_tri = it->second.first;
          ce.kind = it->second.second;
        }
        edges.push_back(ce);
      }
      return edges;
    };
    std::vector<int> made = retriangulate_polygon(upper, rim_edges(upper), label);
    std::vector<int> made_lo = retriangulate_polygon(lower, rim_edges(lower), label);
    made.insert(made.end(), made_lo.begin(), made_lo.end());
    wire_chord(made, a, sb, kind);
    legalize_all(made);
    if (sb == b) return;
    a = sb;
  }
  throw GeometryError("insert_segment: failed to converge");
}

bool Triangulation::plan_removal(int v, RemovalPlan* plan, std::string* why) const {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (v < 0 || v >= vertex_count() || !verts_[v].alive)
    return fail("vertex is not alive");
  std::array<int, 2> cnb{-1, -1};
  std::array<ConstraintKind, 2> ck{ConstraintKind::none, ConstraintKind::none};
  int cdeg = constrained_degree(v, &cnb, &ck);
  if (cdeg != 0 && cdeg != 2) return fail("vertex has constrained degree != 0, 2");
  plan->star = star(v);
  if (plan->star.size() < 2 && cdeg == 0) return fail("degenerate star");

  // link chain in CCW order
  std::vector<int> link;
  std::vector<CavityEdge> link_edges;
  std::vector<int> link_labels;
  bool open = false;
  for (std::size_t i = 0; i < plan->star.size(); ++i) {
    const Triangle& tr = tris_[plan->star[i]];
    int c = -1;
    for (int k = 0; k < 3; ++k)
      if (tr.v[k] == v) c = k;
    link.push_back(tr.v[ccw(c)]);
    CavityEdge ce;
    ce.a = tr.v[ccw(c)];
    ce.b = tr.v[cw(c)];
    ce.outside_tri = tr.nbr[c];
    ce.kind = tr.ek[c];
    link_edges.push_back(ce);
    link_labels.push_back(tr.label);
    if (i + 1 == plan->star.size()) {
      if (tr.nbr[ccw(c)] < 0) {
        open = true;
        link.push_back(tr.v[cw(c)]);
      }
    }
  }

  plan->polys.clear();
  plan->edges.clear();
  plan->labels.clear();
  plan->chord_a = plan->chord_b = -1;
  plan->chord_kind = ConstraintKind::none;

  if (cdeg == 0) {
    if (open) return fail("boundary vertex without boundary constraints");
    plan->polys.push_back(link);
    plan->edges.push_back(link_edges);
    plan->labels.push_back(link_labels.front());
  } else {
    if (ck[0] != ck[1]) return fail("incident constraints differ in kind");
    ConstraintKind kind = ck[0];
    int a = cnb[0], b = cnb[1];
    if (kind != ConstraintKind::subdomain_boundary) {
      if (orient_v(a, v, b) != 0) return fail("constraint neighbors not collinear");
      if (!strictly_between(verts_[a].pos, verts_[b].pos, verts_[v].pos))
        return fail("vertex not between its constraint neighbors");
    }
    plan->chord_a = a;
    plan->chord_b = b;
    plan->chord_kind = kind;
    if (open) {
      // boundary vertex: link is an open chain from a to b (or b to a);
      // close it with the chord along the domain boundary
      if (kind != ConstraintKind::domain_boundary)
        return fail("open star with non-boundary constraints");
      if (!((link.front() == a && link.back() == b) ||
            (link.front() == b && link.back() == a)))
        return fail("boundary chain does not end at constraint neighbors");
      std::vector<int> poly = link;
      std::vector<CavityEdge> edges = link_edges;
      CavityEdge chord;
      chord.a = poly.back();
      chord.b = poly.front();
      chord.outside_tri = -1;
      chord.kind = kind;
      edges.push_back(chord);
      plan->polys.push_back(poly);
      plan->edges.push_back(edges);
      plan->labels.push_back(link_labels.front());
      plan->chord_a = -1;  // chord lies on the hull, no mutual wiring needed
      plan->chord_b = -1;
    } else {
      // closed link split by the chord into two sub-polygons
      auto pos_of = [&](int w) {
        for (std::size_t i = 0; i < link.size(); ++i)
          if (link[i] == w) return static_cast<long>(i);
        return -1L;
      };
      long ia = pos_of(a), ib = pos_of(b);
      if (ia < 0 || ib < 0) return fail("constraint neighbors missing from link");
      // the chord must be a diagonal of the link polygon: reject a chord that
      // properly crosses a link edge (possible when the constraint polyline
      // bends sharply at v)
      for (std::size_t i = 0; i < link.size(); ++i) {
        int u = link[i], w = link[(i + 1) % link.size()];
        if (u == a || u == b || w == a || w == b) continue;
        int s1 = orient_v(a, b, u), s2 = orient_v(a, b, w);
        int s3 = orient_v(u, w, a), s4 = orient_v(u, w, b);
        if (s1 * s2 < 0 && s3 * s4 < 0)
          return fail("chord crosses the link polygon");
      }
      auto build_side = [&](long from, long to, int chord_tail, int chord_head) {
        std::vector<int> poly;
        std::vector<CavityEdge> edges;
        long n = static_cast<long>(link.size());
        for (long i = from;; i = (i + 1) % n) {
          poly.push_back(link[i]);
          if (i == to) break;
          edges.push_back(link_edges[i]);
        }
        CavityEdge chord;
        chord.a = chord_head;
        chord.b = chord_tail;
        chord.outside_tri = -2;
        chord.kind = kind;
        edges.push_back(chord);
        plan->polys.push_back(poly);
        plan->edges.push_back(edges);
        plan->labels.push_back(link_labels[static_cast<std::size_t>(from)]);
      };
      build_side(ia, ib, a, b);
      build_side(ib, ia, b, a);
    }
  }

  for (const auto& poly : plan->polys) {
    if (poly.size() < 3) return fail("cavity polygon degenerate");
    double area2 = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& u = verts_[poly[i]].pos;
      const Vec2& w = verts_[poly[(i + 1) % poly.size()]].pos;
      area2 += cross(u, w);
    }
    if (!(area2 > 0.0)) return fail("cavity polygon not positively oriented");
    std::vector<std::array<int, 3>> ears;
    if (!ear_clip(poly, &ears)) return fail("cavity polygon not triangulable");
  }
  if (why) why->clear();
  return true;
}

bool Triangulation::removable(int v) const {
  RemovalPlan plan;
  return plan_removal(v, &plan, nullptr);
}

void Triangulation::remove_vertex(int v) {
  RemovalPlan plan;
  std::string why;
  if (!plan_removal(v, &plan, &why))
    throw GeometryError("remove_vertex: " + why);
  for (int t : plan.star) kill_triangle(t);
  verts_[v].alive = false;
  std::vector<int> made_all;
  for (std::size_t i = 0; i < plan.polys.size(); ++i) {
    std::vector<int> made =
        retriangulate_polygon(plan.polys[i], plan.edges[i], plan.labels[i]);
    made_all.insert(made_all.end(), made.begin(), made.end());
  }
  if (plan.chord_a >= 0)
    wire_chord(made_all, plan.chord_a, plan.chord_b, plan.chord_kind);
  legalize_all(made_all);
}

void Triangulation::make_delaunay() {
  for (long sweep = 0; sweep < 1000; ++sweep) {
    bool any = false;
    for (int t = 0; t < triangle_count(); ++t) {
      if (!tris_[t].alive) continue;
      for (int e = 0; e < 3; ++e) {
        if (tris_[t].ek[e] != ConstraintKind::none) continue;
        int u = tris_[t].nbr[e];
        if (u < t) continue;  // visit each interior edge once
        int j = edge_index_of_neighbor(u, t);
        int a = tris_[t].v[e], b = tris_[t].v[ccw(e)], c = tris_[t].v[cw(e)];
        int d = tris_[u].v[j];
        if (incircle_sign(verts_[a].pos, verts_[b].pos, verts_[c].pos,
                          verts_[d].pos) > 0)
          if (flip(t, e)) any = true;
      }
    }
    if (!any) return;
  }
  throw GeometryError("make_delaunay failed to terminate");
}

bool Triangulation::flip_valid_at(const std::vector<Vec2>& coords, int t,
                                  int e) const {
  int u = tris_[t].nbr[e];
  if (u < 0) return false;
  int j = edge_index_of_neighbor(u, t);
  int a = tris_[t].v[e], b = tris_[t].v[ccw(e)], c = tris_[t].v[cw(e)];
  int d = tris_[u].v[j];
  return orient2d_sign(coords[a], coords[b], coords[d]) > 0 &&
         orient2d_sign(coords[a], coords[d], coords[c]) > 0;
}

void Triangulation::make_delaunay_at(const std::vector<Vec2>& coords) {
  for (long sweep = 0; sweep < 200; ++sweep) {
    bool any = false;
    for (int t = 0; t < triangle_count(); ++t) {
      if (!tris_[t].alive) continue;
      for (int e = 0; e < 3; ++e) {
        if (tris_[t].ek[e] != ConstraintKind::none) continue;
        int u = tris_[t].nbr[e];
        if (u < t) continue;
        int j = edge_index_of_neighbor(u, t);
        int a = tris_[t].v[e], b = tris_[t].v[ccw(e)], c = tris_[t].v[cw(e)];
        int d = tris_[u].v[j];
        if (incircle_sign(coords[a], coords[b], coords[c], coords[d]) <= 0)
          continue;
        if (!flip_valid_at(coords, t, e)) continue;
        if (flip(t, e)) any = true;  // flip() also checks current coords
      }
    }
    if (!any) return;
  }
  // best effort: motion constraints can block full Delaunay status
}

void Triangulation::begin_surgery() {
  if (journal_active_) throw GeometryError("surgery journal already active");
  journal_active_ = true;
  journal_start_gen_ = gen_counter_;
  journal_destroyed_.clear();
}

Triangulation::SurgeryLog Triangulation::end_surgery() {
  if (!journal_active_) throw GeometryError("surgery journal not active");
  SurgeryLog log;
  log.destroyed = std::move(journal_destroyed_);
  journal_destroyed_.clear();
  for (int t = 0; t < triangle_count(); ++t)
    if (tris_[t].alive && tris_[t].gen >= journal_start_gen_)
      log.created.push_back(t);
  journal_active_ = false;
  return log;
}

std::vector<int> Triangulation::alive_triangles() const {
  std::vector<int> out;
  for (int t = 0; t < triangle_count(); ++t)
    if (tris_[t].alive) out.push_back(t);
  return out;
}

void Triangulation::validate() const {
  for (int t = 0; t < triangle_count(); ++t) {
    const Triangle& tr = tris_[t];
    if (!tr.alive) continue;
    for (int k = 0; k < 3; ++k) {
      if (tr.v[k] < 0 || tr.v[k] >= vertex_count() || !verts_[tr.v[k]].alive)
        throw GeometryError("validate: dead or missing corner vertex");
    }
    if (orient_v(tr.v[0], tr.v[1], tr.v[2]) <= 0)
      throw GeometryError("validate: non-positive triangle orientation");
    for (int e = 0; e < 3; ++e) {
      int u = tr.nbr[e];
      if (u < 0) {
        if (tr.ek[e] != ConstraintKind::domain_boundary)
          throw GeometryError("validate: hull edge lacks boundary constraint");
        continue;
      }
      if (!tris_[u].alive) throw GeometryError("validate: dead neighbor");
      int j = edge_index_of_neighbor(u, t);
      if (tris_[u].ek[j] != tr.ek[e])
        throw GeometryError("validate: asymmetric constraint kind");
      int tail = tr.v[ccw(e)], head = tr.v[cw(e)];
      if (tris_[u].v[ccw(j)] != head || tris_[u].v[cw(j)] != tail)
        throw GeometryError("validate: shared edge vertex mismatch");
    }
  }
}

}  // namespace fvmm
