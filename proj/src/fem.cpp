#include "spikelab/fem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spikelab/error.hpp"

namespace spikelab {

MeshedOperator::MeshedOperator(std::shared_ptr<const Mesh> mesh, WeightField weight)
    : mesh_(std::move(mesh)), weight_(std::move(weight)) {
  const Mesh& m = *mesh_;
  const auto n = static_cast<Eigen::Index>(m.num_nodes());
  elements_.resize(m.num_triangles());
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(9 * m.num_triangles());
  mt.reserve(9 * m.num_triangles());
  const auto rule = triangle_rule7();
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const Vec2 p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
    const double area2 = cross(p1 - p0, p2 - p0);
    if (!(area2 > 0.0)) throw MeshError("triangle with non-positive area in assembly");
    ElementGeometry& eg = elements_[t];
    eg.area = 0.5 * area2;
    eg.grad = {perp(p2 - p1) / area2, perp(p0 - p2) / area2, perp(p1 - p0) / area2};
    // grad of barycentric i is perp(opposite edge)/2A, pointing toward vertex i
    double abar = 0.0;
    double mloc[3][3] = {};
    for (const TriPoint& q : rule) {
      const Vec2 x = q.l0 * p0 + q.l1 * p1 + q.l2 * p2;
      const double av = weight_.eval(m.world(x));
      if (!(av > 0.0)) throw ConfigError("weight is not positive at a mesh point");
      abar += q.w * av;
      const double l[3] = {q.l0, q.l1, q.l2};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) mloc[i][j] += q.w * av * l[i] * l[j];
      }
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        kt.emplace_back(tr[i], tr[j], abar * eg.area * dot(eg.grad[i], eg.grad[j]));
        mt.emplace_back(tr[i], tr[j], eg.area * mloc[i][j]);
      }
    }
  }
  stiffness_.resize(n, n);
  mass_.resize(n, n);
  stiffness_.setFromTriplets(kt.begin(), kt.end());
  mass_.setFromTriplets(mt.begin(), mt.end());
  system_ = stiffness_ + mass_;
  llt_.compute(system_);
  if (llt_.info() != Eigen::Success) {
    throw SolverError("Cholesky factorisation of the Neumann operator failed");
  }
}

Eigen::VectorXd MeshedOperator::load(const std::function<double(Vec2)>& f,
                                     const std::optional<SingularPoint>& singular) const {
  const Mesh& m = *mesh_;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.num_nodes()));
  std::vector<PhysPoint> pts;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const Vec2 p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
    pts.clear();
    if (singular) {
      const double longest = std::max({distance(p0, p1), distance(p1, p2), distance(p2, p0)});
      triangle_points(p0, p1, p2, &singular->local, singular->near_factor * longest,
                      singular->levels, pts);
    } else {
      triangle_points(p0, p1, p2, nullptr, 0.0, 0, pts);
    }
    for (const PhysPoint& q : pts) {
      const double v = q.w * a(q.x) * f(q.x);
      for (int i = 0; i < 3; ++i) b[tr[i]] += v * q.lambda[i];
    }
  }
  return b;
}

Eigen::VectorXd MeshedOperator::boundary_load(const std::function<double(double, Vec2, Vec2)>& g,
                                              int points) const {
  const Mesh& m = *mesh_;
  const Domain& dom = m.domain;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.num_nodes()));
  const GaussRule& gr = gauss_legendre(points);
  for (const BoundaryEdge& e : m.boundary) {
    for (int k = 0; k < points; ++k) {
      const double t = 0.5 * (gr.x[k] + 1.0);
      const double s = Domain::wrap(e.sa + t * e.ds);
      const Vec2 x = m.boundary_local(s);
      const double jac = 0.5 * gr.w[k] * e.ds * dom.speed(s);
      const double v = jac * a(x) * g(s, x, dom.normal(s));
      b[e.a] += v * (1.0 - t);
      b[e.b] += v * t;
    }
  }
  return b;
}

Eigen::VectorXd MeshedOperator::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = llt_.solve(rhs);
  const double bnorm = rhs.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd r = rhs - system_ * x;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * bnorm) break;
    x += llt_.solve(r);
  }
  return x;
}

Eigen::VectorXd MeshedOperator::neumann_solve(const std::function<double(Vec2)>& f,
                                              const std::function<double(double, Vec2, Vec2)>& g,
                                              const std::optional<SingularPoint>& singular) const {
  Eigen::VectorXd rhs = load(f, singular);
  if (g) rhs += boundary_load(g);
  return solve(rhs);
}

double MeshedOperator::relative_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rhs) const {
  const double bnorm = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
  return (system_ * u - rhs).lpNorm<Eigen::Infinity>() / bnorm;
}

double MeshedOperator::l2_error(const Eigen::VectorXd& u,
                                const std::function<double(Vec2)>& exact) const {
  const Mesh& m = *mesh_;
  double total = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const Vec2 p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
    for (const TriPoint& q : triangle_rule7()) {
      const Vec2 x = q.l0 * p0 + q.l1 * p1 + q.l2 * p2;
      const double uh = q.l0 * u[tr[0]] + q.l1 * u[tr[1]] + q.l2 * u[tr[2]];
      const double d = uh - exact(x);
      total += q.w * elements_[t].area * d * d;
    }
  }
  return std::sqrt(total);
}

double MeshedOperator::smallest_eigenvalue(int iterations) const {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = llt_.solve(v);
    lambda = 1.0 / v.dot(w);
    v = w.normalized();
  }
  return lambda;
}

Eigen::VectorXd MeshedOperator::nodal(const std::function<double(Vec2)>& f) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f(mesh_->nodes[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace spikelab
