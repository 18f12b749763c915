#include "fvmm/exact.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>

namespace fvmm {

namespace {

using Rational = boost::multiprecision::cpp_rational;

struct RVec2 {
  Rational x, y;
  RVec2() = default;
  RVec2(const Vec2& v) : x(v.x), y(v.y) {}
  RVec2(Rational xx, Rational yy) : x(std::move(xx)), y(std::move(yy)) {}
};

Rational rcross(const RVec2& o, const RVec2& a, const RVec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign_of(const Rational& r) {
  if (r > 0) return 1;
  if (r < 0) return -1;
  return 0;
}

int orient2d_exact(const Vec2& a, const Vec2& b, const Vec2& c) {
  return sign_of(rcross(RVec2(a), RVec2(b), RVec2(c)));
}

int incircle_exact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const RVec2 ra(a), rb(b), rc(c), rd(d);
  const Rational adx = ra.x - rd.x, ady = ra.y - rd.y;
  const Rational bdx = rb.x - rd.x, bdy = rb.y - rd.y;
  const Rational cdx = rc.x - rd.x, cdy = rc.y - rd.y;
  const Rational det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) +
                       (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
                       (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace

int orient2d_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double detleft = (a.x - c.x) * (b.y - c.y);
  const double detright = (a.y - c.y) * (b.x - c.x);
  const double det = detleft - detright;
  const double detsum = std::abs(detleft) + std::abs(detright);
  // filter bound: 4 eps |detsum| covers the rounding of the two products and
  // the subtraction
  if (std::abs(det) > 4.0 * 2.220446049250313e-16 * detsum) return det > 0.0 ? 1 : -1;
  if (detsum == 0.0) return 0;
  return orient2d_exact(a, b, c);
}

int incircle_sign(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                     clift * (adx * bdy - bdx * ady);
  const double permanent = alift * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) +
                           blift * (std::abs(cdx * ady) + std::abs(adx * cdy)) +
                           clift * (std::abs(adx * bdy) + std::abs(bdx * ady));
  if (std::abs(det) > 16.0 * 2.220446049250313e-16 * permanent) return det > 0.0 ? 1 : -1;
  if (permanent == 0.0) return 0;
  return incircle_exact(a, b, c, d);
}

namespace {

// Sutherland-Hodgman clip of convex CCW polygon `subject` by the half-plane
// left of directed line (a,b), exact arithmetic.
std::vector<RVec2> clip_halfplane(const std::vector<RVec2>& subject, const RVec2& a,
                                  const RVec2& b) {
  std::vector<RVec2> out;
  const size_t n = subject.size();
  if (n == 0) return out;
  auto side = [&](const RVec2& p) { return rcross(a, b, p); };
  Rational sp = side(subject[0]);
  for (size_t i = 0; i < n; ++i) {
    const RVec2& P = subject[i];
    const RVec2& Q = subject[(i + 1) % n];
    const Rational sq = (i + 1 == n) ? side(subject[0]) : side(Q);
    if (sp >= 0) out.push_back(P);
    if ((sp > 0 && sq < 0) || (sp < 0 && sq > 0)) {
      const Rational t = sp / (sp - sq);
      out.emplace_back(P.x + t * (Q.x - P.x), P.y + t * (Q.y - P.y));
    }
    sp = sq;
  }
  return out;
}

Rational polygon_area2(const std::vector<RVec2>& poly) {
  Rational acc = 0;
  const size_t n = poly.size();
  if (n < 3) return acc;
  for (size_t i = 1; i + 1 < n; ++i) acc += rcross(poly[0], poly[i], poly[i + 1]);
  return acc;
}

}  // namespace

double convex_intersection_area(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
  std::vector<RVec2> poly;
  poly.reserve(p.size());
  for (const Vec2& v : p) poly.emplace_back(v);
  for (size_t i = 0; i < q.size(); ++i) {
    poly = clip_halfplane(poly, RVec2(q[i]), RVec2(q[(i + 1) % q.size()]));
    if (poly.empty()) return 0.0;
  }
  const Rational a2 = polygon_area2(poly);
  return static_cast<double>(a2) * 0.5;
}

double interval_overlap(double a0, double a1, double b0, double b1) {
  if (a0 > a1) std::swap(a0, a1);
  if (b0 > b1) std::swap(b0, b1);
  const double lo = std::max(a0, b0);
  const double hi = std::min(a1, b1);
  return hi > lo ? hi - lo : 0.0;
}

}  // namespace fvmm
