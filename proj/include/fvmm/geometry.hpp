#ifndef FVMM_GEOMETRY_HPP
#define FVMM_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fvmm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct SolverError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double xx, double yy) : x(xx), y(yy) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm2(const Vec2& a) { return dot(a, a); }
inline double norm(const Vec2& a) { return std::sqrt(norm2(a)); }
// clockwise perpendicular: for a CCW cell boundary edge a->b, perp(b-a) is the
// outward area-weighted normal
inline Vec2 perp(const Vec2& v) { return {v.y, -v.x}; }

// signed doubled area of triangle (a,b,c); positive when CCW
double signed_area2(const Vec2& a, const Vec2& b, const Vec2& c);
inline double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * signed_area2(a, b, c);
}

/// Circumcenter of a nondegenerate triangle. Throws GeometryError for
/// (near-)collinear input.
Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c);

/// Quality measure 2*r_in/r_circ in (0,1]; 1 for equilateral triangles.
/// Degenerate triangles give 0.
double radius_ratio(const Vec2& a, const Vec2& b, const Vec2& c);

/// Volume swept by a moving facet (a,b) over a time step, measured against
/// the fixed orientation normal perp(b-a). Endpoints move linearly with
/// velocities va, vb; the quadratic-in-time integrand is integrated exactly.
/// Positive when the facet moves in the direction of perp(b0-a0).
double swept_volume(const Vec2& a0, const Vec2& b0, const Vec2& va, const Vec2& vb,
                    double dt);

/// Minimum over [0,dt] of the signed doubled area of a triangle whose
/// vertices move linearly. Used to validate mesh motion.
double min_signed_area2_over_step(const std::array<Vec2, 3>& p,
                                  const std::array<Vec2, 3>& v, double dt);

struct Segment {
  Vec2 a, b;
};

/// Distance from point p to segment [a,b].
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace fvmm

#endif
