#include "spikelab/bubble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "spikelab/error.hpp"
#include "spikelab/quadrature.hpp"

namespace spikelab {

namespace {

const double kLog8 = std::log(8.0);

double y1(double r) { return (r * r - 1.0) / (r * r + 1.0); }
double y1_d(double r) {
  const double q = 1.0 + r * r;
  return 4.0 * r / (q * q);
}
double y2(double r) { return y1(r) * std::log(r) - 2.0 / (1.0 + r * r); }
double y2_d(double r) {
  const double q = 1.0 + r * r;
  return y1_d(r) * std::log(r) + y1(r) / r + 4.0 * r / (q * q);
}

// Least-squares fit of w on the outer third against C/2 log(1+r^2) + c0 + c1/(1+r) plus
// log^k r / r^2 (k <= 5); the sources are polynomials in log r, so the remainder carries
// such terms and leaving them out biases C by about 1e-3 for omega2. The envelope uses
// the quadrature C.
void fit_tail(RadialProfile& p) {
  constexpr int kLogTerms = 6;
  const std::size_t n = p.r.size();
  const std::size_t start = n - n / 3;
  const auto m = static_cast<Eigen::Index>(n - start);
  Eigen::MatrixXd A(m, 3 + kLogTerms);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = p.r[start + static_cast<std::size_t>(i)];
    A(i, 0) = 0.5 * std::log1p(r * r);
    A(i, 1) = 1.0;
    A(i, 2) = 1.0 / (1.0 + r);
    double lk = 1.0 / (r * r);
    for (int k = 0; k < kLogTerms; ++k, lk *= std::log(r)) A(i, 3 + k) = lk;
    b[i] = p.value[start + static_cast<std::size_t>(i)];
  }
  p.fitted_C = A.colPivHouseholderQr().solve(b)[0];
  p.envelope = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    const double r = p.r[i];
    p.envelope = std::max(p.envelope, (1.0 + r) * std::abs(p.value[i] - 0.5 * p.C * std::log1p(r * r)));
  }
}

}  // namespace

double standard_bubble(double delta, Vec2 xi, Vec2 x) {
  const double d2 = delta * delta;
  const double q = d2 + norm2(x - xi);
  return std::log(8.0 * d2 / (q * q));
}

double bubble_profile(double r) { return kLog8 - 2.0 * std::log1p(r * r); }
double bubble_profile_d(double r) { return -4.0 * r / (1.0 + r * r); }
double bubble_profile_dd(double r) {
  const double q = 1.0 + r * r;
  return -4.0 * (1.0 - r * r) / (q * q);
}
double bubble_weight(double r) {
  const double q = 1.0 + r * r;
  return 8.0 / (q * q);
}

double log_tail_integral(double x) {
  if (x < 0.0) throw ConfigError("log_tail_integral needs x >= 0");
  // s = e^v turns the integrand into log1p(e^-v) / (1 + e^-v), analytic in a strip of
  // half-width pi, so a fixed composite rule is accurate to rounding and, unlike an
  // adaptive one, smooth in x (omega1 is differentiated numerically in places).
  // Both tails beyond |v| = 40 are below 1e-16.
  constexpr double kCut = 40.0;
  const auto g = [](double v) {
    const double e = std::exp(-v);
    return std::log1p(e) / (1.0 + e);
  };
  const double lo = x > 0.0 ? std::max(std::log(x), -kCut) : -kCut;
  if (lo >= kCut) return 0.0;
  const int panels = static_cast<int>(std::ceil(kCut - lo));
  return integrate_fixed(g, lo, kCut, panels, 20);
}

double omega1(double r) {
  const double x = r * r;
  const double L = std::log1p(x);
  const double U = kLog8 - 2.0 * L;
  const double Z = (x - 1.0) / (x + 1.0);
  const double xlog = x > 0.0 ? std::log(x) * L : 0.0;
  const double B = -0.5 * kLog8 * kLog8 + 2.0 * L * L + 4.0 * log_tail_integral(x) - 4.0 * xlog;
  return 0.5 * U * U + 6.0 * L + (2.0 * kLog8 - 10.0) / (1.0 + x) + Z * B;
}

double omega1_d(double r) {
  if (r == 0.0) return 0.0;
  const double x = r * r;
  const double L = std::log1p(x);
  const double U = kLog8 - 2.0 * L;
  const double Up = -2.0 / (1.0 + x);
  const double Z = (x - 1.0) / (x + 1.0);
  const double Zp = 2.0 / ((1.0 + x) * (1.0 + x));
  const double B = -0.5 * kLog8 * kLog8 + 2.0 * L * L + 4.0 * log_tail_integral(x) -
                   4.0 * std::log(x) * L;
  const double Bp = -4.0 * L / x;
  const double dx = U * Up + 6.0 / (1.0 + x) - (2.0 * kLog8 - 10.0) / ((1.0 + x) * (1.0 + x)) +
                    Zp * B + Z * Bp;
  return 2.0 * r * dx;
}

double f1(double r) {
  const double U = bubble_profile(r);
  return 0.5 * U * U;
}

double f2(double r, double w) {
  const double U = bubble_profile(r);
  const double U2 = U * U;
  return w * U - U2 * U / 3.0 - 0.5 * w * w - U2 * U2 / 8.0 + 0.5 * w * U2;
}

double f2(double r) { return f2(r, omega1(r)); }

double RadialProfile::operator()(double radius) const {
  if (radius >= r.back()) return 0.5 * C * std::log1p(radius * radius);
  const auto it = std::upper_bound(r.begin(), r.end(), radius);
  const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
  const double h = r[i + 1] - r[i];
  const double t = (radius - r[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * value[i] + (t3 - 2 * t2 + t) * h * deriv[i] +
         (-2 * t3 + 3 * t2) * value[i + 1] + (t3 - t2) * h * deriv[i + 1];
}

double RadialProfile::derivative(double radius) const {
  if (radius >= r.back()) return C * radius / (1.0 + radius * radius);
  const auto it = std::upper_bound(r.begin(), r.end(), radius);
  const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
  const double h = r[i + 1] - r[i];
  const double t = (radius - r[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * value[i] + (-6 * t2 + 6 * t) * value[i + 1]) / h +
         (3 * t2 - 4 * t + 1) * deriv[i] + (3 * t2 - 2 * t) * deriv[i + 1];
}

std::vector<double> radial_grid(int n_inner, int n_outer, double r_max) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n_inner + n_outer + 1));
  for (int i = 0; i <= n_inner; ++i) g.push_back(static_cast<double>(i) / n_inner);
  const double lmax = std::log(r_max);
  for (int i = 1; i <= n_outer; ++i) g.push_back(std::exp(lmax * i / n_outer));
  return g;
}

RadialProfile solve_radial(const std::function<double(double)>& f, const std::vector<double>& grid) {
  if (grid.size() < 3 || grid.front() != 0.0) throw ConfigError("radial grid must start at 0");
  const std::size_t n = grid.size();
  const auto ga = [&](double s) { return y1(s) * bubble_weight(s) * f(s) * s; };
  const auto gb = [&](double s) { return y2(s) * bubble_weight(s) * f(s) * s; };
  // panel integrals; the tails of both are integrated from the far end inward so that
  // B(inf) - B(r) keeps its relative accuracy at large r
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    pa[i] = integrate_fixed(ga, grid[i], grid[i + 1], 1);
    pb[i] = integrate_fixed(gb, grid[i], grid[i + 1], 1);
  }
  const double rn = grid.back();
  const double tail_a = integrate(ga, rn, INFINITY, 1e-12, "source tail");
  const double tail_b = integrate(gb, rn, INFINITY, 1e-12, "source tail");
  std::vector<double> A(n), Bt(n);  // A(r) and B(inf) - B(r)
  A[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) A[i] = A[i - 1] + pa[i - 1];
  Bt[n - 1] = tail_b;
  for (std::size_t i = n - 1; i-- > 0;) Bt[i] = Bt[i + 1] + pb[i];
  const double beta = Bt[0];

  RadialProfile p;
  p.r = grid;
  p.value.resize(n);
  p.deriv.resize(n);
  p.C = A[n - 1] + tail_a;
  p.value[0] = -beta;
  p.deriv[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double r = grid[i];
    p.value[i] = y2(r) * A[i] + y1(r) * Bt[i];
    p.deriv[i] = y2_d(r) * A[i] + y1_d(r) * Bt[i];
  }
  fit_tail(p);
  return p;
}

RadialProfile tabulate_omega1() {
  RadialProfile p;
  p.r = radial_grid();
  p.value.resize(p.r.size());
  p.deriv.resize(p.r.size());
  for (std::size_t i = 0; i < p.r.size(); ++i) {
    p.value[i] = omega1(p.r[i]);
    p.deriv[i] = omega1_d(p.r[i]);
  }
  p.C = constant_Cj(f1);
  fit_tail(p);
  return p;
}

RadialProfile solve_omega2() {
  const RadialProfile& w1 = omega1_profile();
  return solve_radial([&](double r) { return f2(r, w1(r)); });
}

double constant_Cj(const std::function<double(double)>& f, double tol) {
  const auto inner = [&](double t) {
    const double q = 1.0 + t * t;
    return t * (t * t - 1.0) / (q * q * q) * f(t);
  };
  const auto outer = [&](double u) {
    // f grows polylogarithmically, so u f(1/u) is negligible long before 1/u overflows
    if (u < 1e-100) return 0.0;
    const double q = 1.0 + u * u;
    return u * (1.0 - u * u) / (q * q * q) * f(1.0 / u);
  };
  const double half = 0.5 * tol / 8.0;
  return 8.0 * (integrate(inner, 0.0, 1.0, half, "C_j on [0,1]") +
                integrate(outer, 0.0, 1.0, half, "C_j on [1,inf)"));
}

double constant_K_generic(const std::function<double(double)>& u,
                          const std::function<double(double)>& f,
                          const std::function<double(double)>& w, double tol) {
  // (1/8pi) int [V u - V (f - w)] 2 pi r dr = (1/4) int V (u - f + w) r dr
  const auto g = [&](double r) { return bubble_weight(r) * (u(r) - f(r) + w(r)) * r; };
  const auto h = [&](double v) { return v < 1e-60 ? 0.0 : g(1.0 / v) / (v * v); };
  return 0.25 * (integrate(g, 0.0, 1.0, 0.5 * tol, "K on [0,1]") +
                 integrate(h, 0.0, 1.0, 0.5 * tol, "K on [1,inf)"));
}

double constant_K() {
  return constant_K_generic(bubble_profile, f1, [](double r) { return omega1(r); });
}

double bubble_mass() {
  const auto g = [](double r) { return bubble_weight(r) * r; };
  return 2.0 * std::numbers::pi * integrate(g, 0.0, INFINITY, 1e-12, "bubble mass");
}

const RadialProfile& omega1_profile() {
  static const RadialProfile p = tabulate_omega1();
  return p;
}

const RadialProfile& omega2_profile() {
  static const RadialProfile p = solve_omega2();
  return p;
}

const AsymptoticConstants& asymptotic_constants() {
  static const AsymptoticConstants c = [] {
    AsymptoticConstants k;
    k.C1 = constant_Cj(f1);
    const RadialProfile& w1 = omega1_profile();
    k.C2 = constant_Cj([&](double r) { return f2(r, w1(r)); });
    k.K = constant_K();
    return k;
  }();
  return c;
}

}  // namespace spikelab
