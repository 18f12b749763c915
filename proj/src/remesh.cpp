#include "fvmm/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <set>
#include <vector>

#include "fvmm/exact.hpp"
#include "fvmm/geometry.hpp"

namespace fvmm {

void project_cells(const Triangulation& T, const Triangulation::SurgeryLog& log,
                   const std::function<double(int)>& phi_of_label, MeshState& state) {
  auto phi = [&](int label) { return phi_of_label ? phi_of_label(label) : 1.0; };

  // snapshot destroyed values before touching the arrays: triangle slots are
  // recycled, so a created cell may live in a destroyed cell's slot
  struct Old {
    std::vector<Vec2> p;
    double S = 0.0, P = 0.0;
    double xmin, xmax, ymin, ymax;
    int label = 0;
  };
  std::vector<Old> olds;
  olds.reserve(log.destroyed.size());
  for (const auto& oc : log.destroyed) {
    Old o;
    o.p.assign(oc.p.begin(), oc.p.end());
    o.label = oc.label;
    const auto i = static_cast<std::size_t>(oc.tri);
    if (i < state.S.size()) o.S = state.S[i];
    if (i < state.P.size()) o.P = state.P[i];
    o.xmin = std::min({oc.p[0].x, oc.p[1].x, oc.p[2].x});
    o.xmax = std::max({oc.p[0].x, oc.p[1].x, oc.p[2].x});
    o.ymin = std::min({oc.p[0].y, oc.p[1].y, oc.p[2].y});
    o.ymax = std::max({oc.p[0].y, oc.p[1].y, oc.p[2].y});
    olds.push_back(std::move(o));
  }

  state.resize_cells(T.triangle_count());

  for (int c : log.created) {
    const auto& tri = T.triangle(c);
    std::vector<Vec2> q{T.vertex(tri.v[0]).pos, T.vertex(tri.v[1]).pos,
                        T.vertex(tri.v[2]).pos};
    const double area = triangle_area(q[0], q[1], q[2]);
    const double xmin = std::min({q[0].x, q[1].x, q[2].x});
    const double xmax = std::max({q[0].x, q[1].x, q[2].x});
    const double ymin = std::min({q[0].y, q[1].y, q[2].y});
    const double ymax = std::max({q[0].y, q[1].y, q[2].y});
    double cover = 0.0, mS = 0.0, mP = 0.0;
    for (const Old& o : olds) {
      if (o.xmax < xmin || xmax < o.xmin || o.ymax < ymin || ymax < o.ymin) continue;
      const double w = convex_intersection_area(q, o.p);
      if (w <= 0.0) continue;
      cover += w;
      mS += w * phi(o.label) * o.S;
      mP += w * o.P;
    }
    // the destroyed cells tile every created cell; a gap means the journal
    // and the mesh disagree. The double-precision area of a sliver carries
    // absolute roundoff ~eps*|coord|^2, so the tolerance needs that floor.
    const double m =
        std::max({std::abs(xmin), std::abs(xmax), std::abs(ymin), std::abs(ymax)});
    const double tol =
        1e-9 * area + 64.0 * std::numeric_limits<double>::epsilon() * m * m;
    if (!(cover > 0.0) || std::abs(cover - area) > tol)
      throw GeometryError("cell projection: destroyed cells do not cover a new cell");
    // normalizing by the covered area keeps the value an exact convex
    // combination of the old values, even on near-degenerate cells
    const auto ci = static_cast<std::size_t>(c);
    state.S[ci] = mS / (phi(tri.label) * cover);
    state.P[ci] = mP / cover;
  }
}

namespace {

std::vector<std::pair<int, int>> fracture_edges(const Triangulation& T) {
  std::set<std::pair<int, int>> seen;
  for (int t : T.alive_triangles()) {
    const auto& tri = T.triangle(t);
    for (int e = 0; e < 3; ++e) {
      if (tri.ek[e] != ConstraintKind::fracture) continue;
      seen.insert(MeshState::key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]));
    }
  }
  return {seen.begin(), seen.end()};
}

}  // namespace

void project_interface(const Triangulation& T, const ApertureFn& aperture,
                       double phi_iface, MeshState& state) {
  if (state.S_if.empty()) return;  // fields not initialized yet
  auto cur = fracture_edges(T);
  bool same = cur.size() == state.S_if.size();
  if (same)
    for (const auto& key : cur)
      if (!state.S_if.count(key)) {
        same = false;
        break;
      }
  if (same) return;

  if (!aperture) throw ConfigError("interface projection requires an aperture field");

  // positions of removed vertices stay readable: vertex slots are not reused
  struct OldSeg {
    Vec2 a, b;
    double len = 0.0, mass = 0.0, P = 0.0;
  };
  std::vector<OldSeg> olds;
  olds.reserve(state.S_if.size());
  for (const auto& [key, S] : state.S_if) {
    OldSeg o;
    o.a = T.vertex(key.first).pos;
    o.b = T.vertex(key.second).pos;
    o.len = norm(o.b - o.a);
    o.mass = aperture((o.a + o.b) * 0.5) * phi_iface * S * o.len;
    auto ip = state.P_if.find(key);
    o.P = ip == state.P_if.end() ? 0.0 : ip->second;
    olds.push_back(o);
  }

  std::map<std::pair<int, int>, double> newS, newP;
  for (const auto& key : cur) {
    auto is = state.S_if.find(key);
    if (is != state.S_if.end()) {  // element untouched: carry values verbatim
      newS[key] = is->second;
      auto ip = state.P_if.find(key);
      newP[key] = ip == state.P_if.end() ? 0.0 : ip->second;
      continue;
    }
    const Vec2 A = T.vertex(key.first).pos;
    const Vec2 B = T.vertex(key.second).pos;
    const double L = norm(B - A);
    if (!(L > 0.0)) throw GeometryError("degenerate interface element");
    const Vec2 u = (B - A) / L;
    double cover = 0.0, m = 0.0, mp = 0.0;
    for (const OldSeg& o : olds) {
      // only collinear old elements may contribute
      const double tol = 1e-10 * std::max(L, o.len);
      if (std::abs(cross(u, o.a - A)) > tol || std::abs(cross(u, o.b - A)) > tol)
        continue;
      const double ta = dot(o.a - A, u);
      const double tb = dot(o.b - A, u);
      const double ov =
          interval_overlap(std::min(ta, tb), std::max(ta, tb), 0.0, L);
      if (ov <= 0.0) continue;
      cover += ov;
      m += o.mass * (ov / o.len);
      mp += o.P * ov;
    }
    if (std::abs(cover - L) > 1e-9 * L)
      throw GeometryError("interface projection: old elements do not cover a new one");
    const double d_new = aperture((A + B) * 0.5);
    if (!(d_new > 0.0)) throw GeometryError("nonpositive aperture on the interface");
    newS[key] = m / (d_new * phi_iface * cover);
    newP[key] = mp / cover;
  }
  state.S_if = std::move(newS);
  state.P_if = std::move(newP);
}

namespace {

// split a mesh edge at its midpoint; constrained edges keep their constraint
// on both halves, subdomain-boundary midpoints are snapped onto the curve
// first. Off-segment split points re-insert the two sub-constraints.
// Returns the new vertex, or -1 when the edge is gone.
// deterministic off-midpoint placement for unconstrained splits: exact
// midpoints rebuild structured patches whose cells are mutually cocircular,
// and coincident circumcenters break the two-point flux
Vec2 jitter_split_point(const Vec2& mid, double len) {
  std::uint64_t hx, hy;
  std::memcpy(&hx, &mid.x, sizeof hx);
  std::memcpy(&hy, &mid.y, sizeof hy);
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(hx ^ mix(hy));
  const double u = 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
  const double v = 2.0 * (static_cast<double>(mix(h) >> 11) * 0x1.0p-53) - 1.0;
  return {mid.x + 0.08 * len * u, mid.y + 0.08 * len * v};
}

int split_edge_at(Triangulation& T, int a, int b, const Vec2& mid,
                  const std::function<Vec2(const Vec2&)>& subdomain_project) {
  auto er = T.find_edge(a, b);
  if (!er) return -1;
  ConstraintKind k = T.edge_kind(er->t, er->e);
  if (k == ConstraintKind::none) {
    const double len = norm(T.vertex(b).pos - T.vertex(a).pos);
    return T.insert_point(jitter_split_point(mid, len), er->t);
  }
  Vec2 p = mid;
  if (k == ConstraintKind::subdomain_boundary && subdomain_project)
    p = subdomain_project(mid);
  if (orient2d_sign(T.vertex(a).pos, T.vertex(b).pos, p) == 0)
    return T.insert_point_on_edge(p, er->t, er->e);
  T.set_edge_kind(er->t, er->e, ConstraintKind::none);
  int w = T.insert_point(p, er->t);
  T.insert_segment(a, w, k);
  T.insert_segment(w, b, k);
  return w;
}

bool free_vertex(const Triangulation& T, int v) {
  return T.constrained_degree(v) == 0 && !T.on_domain_boundary(v);
}

}  // namespace

RemeshReport remesh(Triangulation& T, MeshState& state, const RemeshOptions& opt) {
  if (!opt.size) throw ConfigError("remesh: a size field is required");
  RemeshReport rep;

  auto target_coords = [&]() {
    std::vector<Vec2> coords(static_cast<std::size_t>(T.vertex_count()));
    for (int v = 0; v < T.vertex_count(); ++v) {
      const auto& vd = T.vertex(v);
      coords[static_cast<std::size_t>(v)] = vd.pos + vd.vel * opt.dt;
    }
    return coords;
  };

  auto motion_min2 = [&](int t) {
    const auto& tri = T.triangle(t);
    std::array<Vec2, 3> p{T.vertex(tri.v[0]).pos, T.vertex(tri.v[1]).pos,
                          T.vertex(tri.v[2]).pos};
    std::array<Vec2, 3> v{T.vertex(tri.v[0]).vel, T.vertex(tri.v[1]).vel,
                          T.vertex(tri.v[2]).vel};
    return min_signed_area2_over_step(p, v, opt.dt);
  };
  auto motion_ok = [&](int t) {
    const auto& tri = T.triangle(t);
    double a2 = signed_area2(T.vertex(tri.v[0]).pos, T.vertex(tri.v[1]).pos,
                             T.vertex(tri.v[2]).pos);
    return motion_min2(t) > 1e-12 * a2;
  };
  auto all_motion_ok = [&]() {
    for (int t : T.alive_triangles())
      if (!motion_ok(t)) return false;
    return true;
  };

  for (int round = 1; round <= opt.max_rounds; ++round) {
    rep.rounds = round;
    const auto coords = target_coords();
    const int nv0 = static_cast<int>(coords.size());  // have target coordinates
    auto at = [&](int v) { return coords[static_cast<std::size_t>(v)]; };

    T.begin_surgery();
    T.make_delaunay_at(coords);

    // stretched interface elements get bisected (tips stretch their elements)
    for (const auto& [a, b] : fracture_edges(T)) {
      const double lt = norm(at(b) - at(a));
      const Vec2 mid = (T.vertex(a).pos + T.vertex(b).pos) * 0.5;
      const double h = opt.size_iface > 0.0 ? opt.size_iface : opt.size(mid);
      if (lt > opt.iface_split_factor * h) {
        if (split_edge_at(T, a, b, mid, opt.subdomain_project) >= 0) ++rep.inserted;
      }
    }

    // free vertices of cells the motion would invert, then crowded free
    // vertices; both re-checked at apply time since removals reshape stars
    std::vector<int> hazard, crowded;
    for (int t : T.alive_triangles()) {
      if (motion_ok(t)) continue;
      for (int v : T.triangle(t).v)
        if (free_vertex(T, v)) hazard.push_back(v);
    }
    for (int v = 0; v < nv0; ++v) {
      if (!T.vertex(v).alive || !free_vertex(T, v)) continue;
      bool short_all = true;
      for (int t : T.star(v)) {
        for (int w : T.triangle(t).v) {
          if (w == v || w >= nv0) continue;
          if (norm(at(w) - at(v)) >= opt.coarsen_factor * opt.size(at(v)))
            short_all = false;
        }
        if (!short_all) break;
      }
      if (short_all) crowded.push_back(v);
    }
    for (int v : hazard) {
      if (!T.vertex(v).alive || !free_vertex(T, v) || !T.removable(v)) continue;
      bool still_bad = false;
      for (int t : T.star(v))
        if (!motion_ok(t)) still_bad = true;
      if (!still_bad) continue;
      T.remove_vertex(v);
      ++rep.removed;
    }
    for (int v : crowded) {
      if (!T.vertex(v).alive || !free_vertex(T, v) || !T.removable(v)) continue;
      bool short_all = true;
      for (int t : T.star(v)) {
        for (int w : T.triangle(t).v) {
          if (w == v || w >= nv0) continue;
          if (norm(at(w) - at(v)) >= opt.coarsen_factor * opt.size(at(v)))
            short_all = false;
        }
        if (!short_all) break;
      }
      if (!short_all) continue;
      T.remove_vertex(v);
      ++rep.removed;
    }

    // sizing and shape control, judged on the target frame
    struct Split {
      int a, b;
      Vec2 p;
    };
    std::vector<Split> splits;
    for (int t : T.alive_triangles()) {
      if (!T.triangle(t).alive) continue;  // removals above may have killed it
      const auto& tri = T.triangle(t);
      if (tri.v[0] >= nv0 || tri.v[1] >= nv0 || tri.v[2] >= nv0) continue;
      std::array<Vec2, 3> q{at(tri.v[0]), at(tri.v[1]), at(tri.v[2])};
      int emax = 0, emin = 0;
      double lmax = -1.0, lmin = 1e300;
      for (int e = 0; e < 3; ++e) {
        double l = norm(q[(e + 2) % 3] - q[(e + 1) % 3]);
        if (l > lmax) lmax = l, emax = e;
        if (l < lmin) lmin = l, emin = e;
      }
      auto queue_split = [&](int e) {
        int a = tri.v[(e + 1) % 3], b = tri.v[(e + 2) % 3];
        Vec2 mid = (T.vertex(a).pos + T.vertex(b).pos) * 0.5;
        splits.push_back(Split{a, b, mid});
      };
      const double hmax = opt.size((q[(emax + 1) % 3] + q[(emax + 2) % 3]) * 0.5);
      if (lmax > opt.split_factor * hmax) {
        queue_split(emax);
        continue;
      }
      if (radius_ratio(q[0], q[1], q[2]) >= opt.min_radius_ratio) continue;
      int va = tri.v[(emin + 1) % 3], vb = tri.v[(emin + 2) % 3];
      const double hmin = opt.size((q[(emin + 1) % 3] + q[(emin + 2) % 3]) * 0.5);
      if (lmin < opt.coarsen_factor * hmin) {
        int drop = free_vertex(T, va) && T.removable(va)   ? va
                   : free_vertex(T, vb) && T.removable(vb) ? vb
                                                           : -1;
        if (drop >= 0) {
          T.remove_vertex(drop);
          ++rep.removed;
          continue;
        }
      }
      queue_split(emax);
    }
    for (const auto& s : splits) {
      if (!T.vertex(s.a).alive || !T.vertex(s.b).alive) continue;
      if (split_edge_at(T, s.a, s.b, s.p, opt.subdomain_project) >= 0)
        ++rep.inserted;
    }

    auto log = T.end_surgery();
    const bool changed = !log.created.empty() || !log.destroyed.empty();
    if (changed) {
      rep.changed = true;
      project_cells(T, log, opt.phi_of_label, state);
      project_interface(T, opt.aperture, opt.phi_iface, state);
      if (opt.reassign_velocities) opt.reassign_velocities(T);
    } else {
      state.resize_cells(T.triangle_count());
    }
    if (!changed) break;
  }

  rep.motion_valid = all_motion_ok();
  return rep;
}

}  // namespace fvmm
