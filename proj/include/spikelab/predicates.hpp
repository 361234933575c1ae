#pragma once

#include "spikelab/vec2.hpp"

namespace spikelab {

/// Sign of the orientation determinant: +1 if (a, b, c) turns left, -1 right, 0 collinear.
/// Exact: a floating-point filter falls back to rational arithmetic when inconclusive.
int orient2d(Vec2 a, Vec2 b, Vec2 c);

/// +1 if d lies strictly inside the circumcircle of the counterclockwise triangle (a, b, c),
/// -1 outside, 0 on the circle. Exact in the same sense as orient2d.
int incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

}  // namespace spikelab
