#include "spikelab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spikelab/error.hpp"

namespace spikelab {

std::span<const TriPoint> triangle_rule7() {
  static const std::array<TriPoint, 7> rule = [] {
    const double r15 = std::sqrt(15.0);
    const double a = (6.0 - r15) / 21.0;
    const double b = (6.0 + r15) / 21.0;
    const double wa = (155.0 - r15) / 1200.0;
    const double wb = (155.0 + r15) / 1200.0;
    return std::array<TriPoint, 7>{{
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0},
        {1.0 - 2.0 * a, a, a, wa},
        {a, 1.0 - 2.0 * a, a, wa},
        {a, a, 1.0 - 2.0 * a, wa},
        {1.0 - 2.0 * b, b, b, wb},
        {b, 1.0 - 2.0 * b, b, wb},
        {b, b, 1.0 - 2.0 * b, wb},
    }};
  }();
  return rule;
}

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // Golub-Welsch: eigenvalues of the symmetric Jacobi matrix.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    j(k, k - 1) = beta;
    j(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.x[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    rule.w[k] = 2.0 * v * v;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

namespace {

using Bary = std::array<double, 3>;

Bary mix(const Bary& a, const Bary& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

void rule7(Vec2 a, Vec2 b, Vec2 c, const Bary& la, const Bary& lb, const Bary& lc,
           std::vector<PhysPoint>& out) {
  const double area = 0.5 * std::abs(cross(b - a, c - a));
  if (area == 0.0) return;
  for (const TriPoint& q : triangle_rule7()) {
    PhysPoint p;
    p.x = q.l0 * a + q.l1 * b + q.l2 * c;
    p.w = q.w * area;
    for (int i = 0; i < 3; ++i) p.lambda[i] = q.l0 * la[i] + q.l1 * lb[i] + q.l2 * lc[i];
    out.push_back(p);
  }
}

void subdivide(Vec2 a, Vec2 b, Vec2 c, const Bary& la, const Bary& lb, const Bary& lc, int levels,
               std::vector<PhysPoint>& out) {
  if (levels == 0) {
    rule7(a, b, c, la, lb, lc, out);
    return;
  }
  const Vec2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  const Bary lab = mix(la, lb, 0.5), lbc = mix(lb, lc, 0.5), lca = mix(lc, la, 0.5);
  subdivide(a, ab, ca, la, lab, lca, levels - 1, out);
  subdivide(ab, b, bc, lab, lb, lbc, levels - 1, out);
  subdivide(ca, bc, c, lca, lbc, lc, levels - 1, out);
  subdivide(ab, bc, ca, lab, lbc, lca, levels - 1, out);
}

// Duffy collapse of the triangle (y, p1, p2) onto the square; the Jacobian u removes a
// 1/r singularity at y.
void duffy(Vec2 y, Vec2 p1, Vec2 p2, const Bary& ly, const Bary& l1, const Bary& l2,
           std::vector<PhysPoint>& out) {
  const double twice_area = std::abs(cross(p1 - y, p2 - y));
  if (twice_area == 0.0) return;
  const GaussRule& g = gauss_legendre(8);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double u = 0.5 * (g.x[i] + 1.0);
    for (std::size_t j = 0; j < g.x.size(); ++j) {
      const double v = 0.5 * (g.x[j] + 1.0);
      PhysPoint p;
      p.x = y + u * (p1 - y) + (u * v) * (p2 - p1);
      p.w = 0.25 * g.w[i] * g.w[j] * u * twice_area;
      for (int k = 0; k < 3; ++k) {
        p.lambda[k] = ly[k] + u * (l1[k] - ly[k]) + u * v * (l2[k] - l1[k]);
      }
      out.push_back(p);
    }
  }
}

double point_triangle_distance(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  auto seg = [](Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    double t = dot(p - a, ab) / norm2(ab);
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
  };
  const double o1 = cross(b - a, p - a), o2 = cross(c - b, p - b), o3 = cross(a - c, p - c);
  if (o1 >= 0 && o2 >= 0 && o3 >= 0) return 0.0;
  return std::min({seg(p, a, b), seg(p, b, c), seg(p, c, a)});
}

}  // namespace

void triangle_points(Vec2 a, Vec2 b, Vec2 c, const Vec2* singular, double near_radius, int levels,
                     std::vector<PhysPoint>& out) {
  const Bary la{1, 0, 0}, lb{0, 1, 0}, lc{0, 0, 1};
  if (singular == nullptr) {
    rule7(a, b, c, la, lb, lc, out);
    return;
  }
  const Vec2 y = *singular;
  const double dist = point_triangle_distance(y, a, b, c);
  if (dist == 0.0) {
    const double area2 = cross(b - a, c - a);
    const Bary ly{cross(b - y, c - y) / area2, cross(c - y, a - y) / area2,
                  cross(a - y, b - y) / area2};
    duffy(y, a, b, ly, la, lb, out);
    duffy(y, b, c, ly, lb, lc, out);
    duffy(y, c, a, ly, lc, la, out);
    return;
  }
  if (dist < near_radius) {
    subdivide(a, b, c, la, lb, lc, levels, out);
    return;
  }
  rule7(a, b, c, la, lb, lc, out);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 const std::string& what) {
  double err = 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  // Boost's tolerance is relative to the L1 norm; derive it from the absolute target so
  // rounding noise in the integrand cannot force bisection of every subinterval
  double l1 = 0.0;
  GK::integrate(f, a, b, 0, 0.0, &err, &l1);
  const double rel = std::max(0.05 * tol / std::max(l1, 1e-300), 1e-14);
  double value = GK::integrate(f, a, b, 15, rel, &err);
  if (!(err <= tol) || !std::isfinite(value)) {
    // endpoint singularities (log, x log^2 x) defeat the Kronrod estimate; the double
    // exponential rules handle them
    double err2 = 0.0;
    try {
      if (std::isinf(b)) {
        boost::math::quadrature::exp_sinh<double> es;
        value = es.integrate([&](double t) { return f(t); }, a, b, 1e-14, &err2);
      } else {
        boost::math::quadrature::tanh_sinh<double> ts;
        value = ts.integrate([&](double t) { return f(t); }, a, b, 1e-14, &err2);
      }
      err = err2;
    } catch (const std::exception&) {
    }
  }
  if (!(err <= tol) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << what << ": quadrature on [" << a << ", " << b << "] reached error estimate " << err
        << " above tolerance " << tol << " (value " << value << ")";
    throw SolverError(msg.str());
  }
  return value;
}

double integrate_fixed(const std::function<double(double)>& f, double a, double b, int panels,
                       int n) {
  const GaussRule& g = gauss_legendre(n);
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * h;
    for (int i = 0; i < n; ++i) total += 0.5 * h * g.w[i] * f(mid + 0.5 * h * g.x[i]);
  }
  return total;
}

}  // namespace spikelab
