#pragma once

#include "relief/cloud.hpp"

namespace relief {

/// Sign of the orientation determinant of (a, b, c): > 0 when c lies left
/// of a -> b. Exact: a floating-point filter with an exact rational
/// fallback for near-degenerate input.
int orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

/// Sign of the in-circle determinant: > 0 when d lies strictly inside the
/// circle through the counter-clockwise triangle (a, b, c). Exact.
int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

}  // namespace relief
