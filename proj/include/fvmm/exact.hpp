#ifndef FVMM_EXACT_HPP
#define FVMM_EXACT_HPP

#include <array>
#include <vector>

#include "fvmm/geometry.hpp"

namespace fvmm {

// Robust geometric predicates. Fast double-precision paths with a
// floating-point filter; ties fall back to exact rational arithmetic, so the
// sign is always correct. Required for constrained Delaunay maintenance and
// for the conservative remeshing projection.

/// Sign of the signed area of (a,b,c): +1 CCW, -1 CW, 0 collinear.
int orient2d_sign(const Vec2& a, const Vec2& b, const Vec2& c);

/// Sign of the incircle determinant: +1 if d lies strictly inside the
/// circumcircle of CCW triangle (a,b,c), -1 outside, 0 cocircular.
int incircle_sign(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Exact area of the intersection of two convex polygons, computed in
/// rational arithmetic and rounded once at the end. Polygons must be CCW.
double convex_intersection_area(const std::vector<Vec2>& p, const std::vector<Vec2>& q);

/// Exact overlap length of two collinear segments [a0,a1] and [b0,b1] given
/// by their scalar coordinates along a common axis.
double interval_overlap(double a0, double a1, double b0, double b1);

}  // namespace fvmm

#endif
