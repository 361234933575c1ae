#pragma once

#include <functional>
#include <vector>

#include "spikelab/vec2.hpp"

namespace spikelab {

/// U_{delta,xi}(x) = log(8 delta^2 / (delta^2 + |x - xi|^2)^2), the entire solution of
/// -Laplace u = e^u in the plane.
double standard_bubble(double delta, Vec2 xi, Vec2 x);

/// Radial profile of U_{1,0} and its first two derivatives.
double bubble_profile(double r);
double bubble_profile_d(double r);
double bubble_profile_dd(double r);
/// 8 / (1 + r^2)^2 = e^{U_{1,0}(r)}.
double bubble_weight(double r);

/// I(x) = int_x^inf log((s + 1) / s) / (s + 1) ds by a fixed composite rule; I(0) = pi^2 / 6.
double log_tail_integral(double x);

/// First radial correction, evaluated from its closed form.
double omega1(double r);
double omega1_d(double r);

/// Right-hand sides of the radial correction equations.
double f1(double r);
/// f2 needs omega1; pass a precomputed value to avoid re-evaluating it.
double f2(double r, double omega1_value);
double f2(double r);

/// Tabulated radial solution of  w'' + w'/r + 8/(1+r^2)^2 w = 8/(1+r^2)^2 f.
class RadialProfile {
 public:
  std::vector<double> r;
  std::vector<double> value;
  std::vector<double> deriv;
  /// Coefficient of (1/2) log(1 + r^2) at infinity, from the quadrature of the source.
  double C = 0.0;
  /// Same coefficient fitted by least squares on the outer third of the grid.
  double fitted_C = 0.0;
  /// max (1 + r) |w(r) - (C/2) log(1 + r^2)| on the outer third of the grid.
  double envelope = 0.0;

  double operator()(double radius) const;
  double derivative(double radius) const;
  double r_max() const { return r.back(); }
};

/// Default radial grid: uniform on [0, 1], log-spaced out to 1e6.
std::vector<double> radial_grid(int n_inner = 1000, int n_outer = 3000, double r_max = 1e6);

/// Variation of parameters on the homogeneous pair Z0 = (r^2-1)/(r^2+1) and
/// Z0 log r - 2/(1+r^2). The solution is regular at the origin, and the Z0 component is
/// fixed so that w - (C/2) log(1 + r^2) -> 0 at infinity.
RadialProfile solve_radial(const std::function<double(double)>& f,
                           const std::vector<double>& grid = radial_grid());

/// Tabulates the closed-form omega1 on the default grid.
RadialProfile tabulate_omega1();
RadialProfile solve_omega2();

/// C = 8 int_0^inf t (t^2-1)/(t^2+1)^3 f(t) dt, with t -> 1/t on [1, inf).
double constant_Cj(const std::function<double(double)>& f, double tol = 1e-8);

/// K = (1/8pi) int [e^U u - Laplace w] over the plane for radial u, w, where
/// Laplace w = e^U (f - w) comes from the correction equation.
double constant_K_generic(const std::function<double(double)>& u,
                          const std::function<double(double)>& f,
                          const std::function<double(double)>& w, double tol = 1e-9);
double constant_K();

/// int e^{U_{1,0}} over the plane (= 8 pi).
double bubble_mass();

struct AsymptoticConstants {
  double C1 = 0.0;
  double C2 = 0.0;
  double K = 0.0;
};

/// Computed once and cached; safe for concurrent readers.
const AsymptoticConstants& asymptotic_constants();
const RadialProfile& omega1_profile();
const RadialProfile& omega2_profile();

}  // namespace spikelab
