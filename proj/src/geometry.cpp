#include "fvmm/geometry.hpp"

#include <algorithm>

namespace fvmm {

double signed_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a;
  const Vec2 ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double scale = std::max({norm2(ab), norm2(ac), norm2(c - b)});
  if (std::abs(d) <= 1e-14 * scale || scale == 0.0)
    throw GeometryError("circumcenter: degenerate triangle");
  const double ab2 = norm2(ab);
  const double ac2 = norm2(ac);
  const double ux = (ac.y * ab2 - ab.y * ac2) / d;
  const double uy = (ab.x * ac2 - ac.x * ab2) / d;
  return {a.x + ux, a.y + uy};
}

double radius_ratio(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double la = norm(c - b);
  const double lb = norm(a - c);
  const double lc = norm(b - a);
  const double area = std::abs(triangle_area(a, b, c));
  if (area == 0.0) return 0.0;
  const double s = 0.5 * (la + lb + lc);
  const double r_in = area / s;
  const double r_circ = la * lb * lc / (4.0 * area);
  if (r_circ == 0.0) return 0.0;
  return 2.0 * r_in / r_circ;
}

double swept_volume(const Vec2& a0, const Vec2& b0, const Vec2& va, const Vec2& vb,
                    double dt) {
  // facet at time t_n + tau: endpoints a0 + tau*va, b0 + tau*vb.
  // instantaneous sweep rate = mean endpoint velocity dotted with the
  // area-weighted normal perp(b(tau)-a(tau)); linear in tau, integrate exactly.
  const Vec2 vm = (va + vb) * 0.5;
  const Vec2 n0 = perp(b0 - a0);
  const Vec2 n1 = perp(vb - va);
  return dt * dot(vm, n0) + 0.5 * dt * dt * dot(vm, n1);
}

double min_signed_area2_over_step(const std::array<Vec2, 3>& p,
                                  const std::array<Vec2, 3>& v, double dt) {
  // signed_area2 of linearly moving vertices is quadratic in time:
  // A(t) = A0 + B t + C t^2
  const double A0 = signed_area2(p[0], p[1], p[2]);
  const Vec2 q0 = p[0] + v[0] * dt, q1 = p[1] + v[1] * dt, q2 = p[2] + v[2] * dt;
  const double A1 = signed_area2(q0, q1, q2);
  const Vec2 h0 = p[0] + v[0] * (0.5 * dt), h1 = p[1] + v[1] * (0.5 * dt),
             h2 = p[2] + v[2] * (0.5 * dt);
  const double Ah = signed_area2(h0, h1, h2);
  // quadratic through (0,A0), (dt/2,Ah), (dt,A1)
  const double C = 2.0 * (A0 + A1 - 2.0 * Ah);  // C * dt^2
  const double B = A1 - A0 - C;                 // B * dt
  double m = std::min(A0, A1);
  if (C > 0.0) {
    const double s = -B / (2.0 * C);  // extremum location in units of dt
    if (s > 0.0 && s < 1.0) m = std::min(m, A0 + B * s + C * s * s);
  }
  return m;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = norm2(ab);
  if (len2 == 0.0) return norm(p - a);
  double t = dot(p - a, ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

}  // namespace fvmm
