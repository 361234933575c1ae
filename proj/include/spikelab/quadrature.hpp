#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spikelab/vec2.hpp"

namespace spikelab {

/// Barycentric quadrature point on the reference triangle; weights sum to 1.
struct TriPoint {
  double l0, l1, l2;
  double w;
};

/// Degree-5 seven-point rule (Dunavant).
std::span<const TriPoint> triangle_rule7();

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};
const GaussRule& gauss_legendre(int n);

/// Quadrature point in physical coordinates with the physical weight folded in.
struct PhysPoint {
  Vec2 x;
  double w;
  std::array<double, 3> lambda;  ///< barycentric coordinates in the parent triangle
};

/// Quadrature points for the triangle (a, b, c) (counterclockwise).
///
/// If `singular` is given and lies in the closed triangle, the triangle is split at
/// that point and each piece integrated with a Duffy-collapsed tensor Gauss rule, which
/// integrates 1/r and log r singularities at the point to high accuracy. If it lies
/// within `near_radius` of the triangle the triangle is subdivided `levels` times.
void triangle_points(Vec2 a, Vec2 b, Vec2 c, const Vec2* singular, double near_radius,
                     int levels, std::vector<PhysPoint>& out);

/// Adaptive Gauss-Kronrod on [a, b]; b may be +infinity. Throws SolverError naming the
/// interval when the error estimate exceeds `tol` (absolute).
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                 const std::string& what = "integral");

/// Fixed composite Gauss-Legendre over [a, b] with `panels` equal panels of `n` points.
double integrate_fixed(const std::function<double(double)>& f, double a, double b, int panels,
                       int n = 10);

}  // namespace spikelab
