#include "spikelab/pde_verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "spikelab/error.hpp"

namespace spikelab {

namespace {

double positive_power(double u, double q) {
  if (u <= 0.0) return 0.0;
  const double v = std::pow(u, q);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "u^" << q << " overflows at u = " << u;
    throw SolverError(msg.str());
  }
  return v;
}

// 7-point rule data per triangle: weight * area * a(x_q) and barycentrics
struct QuadTable {
  std::vector<double> wa;  // n_tri * 7
  std::array<std::array<double, 3>, 7> lambda{};
};

QuadTable quad_table(const MeshedOperator& op) {
  const Mesh& m = op.mesh();
  const auto rule = triangle_rule7();
  QuadTable qt;
  for (std::size_t q = 0; q < rule.size(); ++q) qt.lambda[q] = {rule[q].l0, rule[q].l1, rule[q].l2};
  qt.wa.resize(m.num_triangles() * rule.size());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const double area = op.elements()[t].area;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& l = qt.lambda[q];
      const Vec2 x = l[0] * m.nodes[tr[0]] + l[1] * m.nodes[tr[1]] + l[2] * m.nodes[tr[2]];
      qt.wa[t * 7 + q] = rule[q].w * area * op.a(x);
    }
  }
  return qt;
}

Eigen::VectorXd nonlinear_load(const MeshedOperator& op, const QuadTable& qt, const Eigen::VectorXd& u,
                               double p) {
  const Mesh& m = op.mesh();
  Eigen::VectorXd n = Eigen::VectorXd::Zero(u.size());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    for (std::size_t q = 0; q < 7; ++q) {
      const auto& l = qt.lambda[q];
      const double uq = l[0] * u[tr[0]] + l[1] * u[tr[1]] + l[2] * u[tr[2]];
      const double f = qt.wa[t * 7 + q] * positive_power(uq, p);
      for (int k = 0; k < 3; ++k) n[tr[k]] += f * l[k];
    }
  }
  return n;
}

Eigen::SparseMatrix<double> jacobian(const MeshedOperator& op, const QuadTable& qt,
                                     const Eigen::VectorXd& u, double p) {
  const Mesh& m = op.mesh();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.num_triangles() * 9);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    double block[3][3] = {};
    for (std::size_t q = 0; q < 7; ++q) {
      const auto& l = qt.lambda[q];
      const double uq = l[0] * u[tr[0]] + l[1] * u[tr[1]] + l[2] * u[tr[2]];
      const double f = qt.wa[t * 7 + q] * p * positive_power(uq, p - 1.0);
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) block[j][k] += f * l[j] * l[k];
      }
    }
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) trip.emplace_back(tr[j], tr[k], -block[j][k]);
    }
  }
  Eigen::SparseMatrix<double> J(u.size(), u.size());
  J.setFromTriplets(trip.begin(), trip.end());
  J += op.matrix();
  J.makeCompressed();
  return J;
}

struct ResidualEval {
  Eigen::VectorXd r;
  double scale = 0.0;
  double rel = 0.0;
};

ResidualEval residual(const MeshedOperator& op, const QuadTable& qt, const Eigen::VectorXd& u, double p) {
  const Eigen::VectorXd au = op.matrix() * u;
  const Eigen::VectorXd n = nonlinear_load(op, qt, u, p);
  ResidualEval out;
  out.r = au - n;
  out.scale = std::max({au.lpNorm<Eigen::Infinity>(), n.lpNorm<Eigen::Infinity>(), 1e-300});
  out.rel = out.r.lpNorm<Eigen::Infinity>() / out.scale;
  return out;
}

}  // namespace

std::vector<double> weak_residual(const MeshedOperator& op, const std::vector<double>& u, double p,
                                  double* scale) {
  if (u.size() != op.size()) throw ConfigError("nodal field has the wrong size");
  const QuadTable qt = quad_table(op);
  const ResidualEval r =
      residual(op, qt, Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())), p);
  if (scale) *scale = r.scale;
  return {r.r.data(), r.r.data() + r.r.size()};
}

SolutionField newton_solve(std::shared_ptr<const MeshedOperator> op, std::vector<double> u0, double p,
                           const NewtonOptions& opt) {
  if (!op) throw ConfigError("newton_solve needs an operator");
  if (u0.size() != op->size()) throw ConfigError("initial field has the wrong size");
  if (!(p > 1.0)) throw ConfigError("exponent p must exceed 1");
  SolutionField sol;
  sol.p = p;
  sol.op = op;
  const QuadTable qt = quad_table(*op);
  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(u0.data(), static_cast<Eigen::Index>(u0.size()));
  ResidualEval res = residual(*op, qt, u, p);
  sol.residual_history.push_back(res.rel);
  int it = 0;
  for (; it < opt.max_iter && res.rel > opt.tol; ++it) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jacobian(*op, qt, u, p));
    if (lu.info() != Eigen::Success) {
      sol.message = "Jacobian factorisation failed";
      break;
    }
    const Eigen::VectorXd step = lu.solve(-res.r);
    if (!step.allFinite()) {
      sol.message = "Jacobian is singular at this iterate";
      break;
    }
    double alpha = 1.0;
    bool accepted = false;
    const double merit = res.r.norm();
    for (int k = 0; k <= opt.max_halvings; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = u + alpha * step;
      ResidualEval rt = residual(*op, qt, trial, p);
      if (rt.r.norm() < merit) {
        u = trial;
        res = std::move(rt);
        accepted = true;
        break;
      }
    }
    sol.residual_history.push_back(res.rel);
    if (!accepted) {
      sol.message = "line search stalled";
      ++it;
      break;
    }
  }
  sol.newton_iters = it;
  sol.residual_norm = res.rel;
  sol.converged = res.rel <= opt.tol;
  if (!sol.converged && sol.message.empty()) {
    std::ostringstream msg;
    msg << "no convergence in " << it << " iterations (relative residual " << res.rel << ")";
    sol.message = msg.str();
  }
  sol.u.assign(u.data(), u.data() + u.size());
  return sol;
}

SpikeMetrics spike_metrics(const MeshedOperator& op, double p, const std::vector<double>& u,
                           const std::vector<Vec2>& centers, std::optional<double> d) {
  const Mesh& m = op.mesh();
  if (u.size() != m.num_nodes()) throw ConfigError("nodal field has the wrong size");
  if (centers.empty()) throw ConfigError("no spike centers given");
  double min_dist = INFINITY;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t k = i + 1; k < centers.size(); ++k) {
      min_dist = std::min(min_dist, distance(centers[i], centers[k]));
    }
  }
  SpikeMetrics out;
  out.d = d ? *d : (centers.size() == 1 ? 0.25 * m.domain.diameter() : 0.5 * min_dist);
  if (!(out.d > 0.0)) throw ConfigError("ball radius must be positive");
  if (2.0 * out.d > min_dist) throw ConfigError("metric balls overlap; reduce d");

  std::vector<Vec2> local;
  for (const Vec2& c : centers) {
    local.push_back(m.to_local(c));
    out.spikes.push_back({c, c, -INFINITY, 0.0});
  }
  for (std::size_t v = 0; v < m.num_nodes(); ++v) {
    bool inside = false;
    for (std::size_t i = 0; i < local.size(); ++i) {
      if (distance(m.nodes[v], local[i]) < out.d) {
        inside = true;
        if (u[v] > out.spikes[i].peak) {
          out.spikes[i].peak = u[v];
          out.spikes[i].location = m.world(m.nodes[v]);
        }
      }
    }
    if (!inside) out.outside_sup = std::max(out.outside_sup, u[v]);
  }
  const auto rule = triangle_rule7();
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const double area = op.elements()[t].area;
    for (const TriPoint& q : rule) {
      const Vec2 x = q.l0 * m.nodes[tr[0]] + q.l1 * m.nodes[tr[1]] + q.l2 * m.nodes[tr[2]];
      for (std::size_t i = 0; i < local.size(); ++i) {
        if (distance(x, local[i]) >= out.d) continue;
        const double uq = q.l0 * u[tr[0]] + q.l1 * u[tr[1]] + q.l2 * u[tr[2]];
        out.spikes[i].mass += p * q.w * area * positive_power(uq, p + 1.0);
      }
    }
  }
  return out;
}

Branch continuation_in_p(const Domain& dom, const WeightField& weight, SpikeConfig cfg,
                         const std::vector<double>& schedule, double h, double resolution,
                         const NewtonOptions& opt) {
  if (schedule.empty()) throw ConfigError("empty p schedule");
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    if (!(schedule[k] > schedule[k - 1])) throw ConfigError("p schedule must be increasing");
  }
  Branch br;
  for (double p : schedule) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.p = p;
    cfg.mu.clear();
    BranchStage st;
    st.p = p;
    try {
      const SpikeSetup su = setup_spikes(dom, weight, cfg, h, resolution);
      const AnsatzField af = build_ansatz(*su.op, su.cfg);
      st.cfg = su.cfg;
      st.sol = newton_solve(su.op, af.nodal_values, p, opt);
    } catch (const Error& e) {
      st.sol.p = p;
      st.sol.message = e.what();
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!st.sol.converged) {
      std::ostringstream msg;
      msg << "stage p = " << p << " failed: " << st.sol.message;
      br.message = msg.str();
      br.truncated = true;
      br.stages.push_back(std::move(st));
      break;
    }
    std::vector<Vec2> centers;
    for (const Spike& s : st.cfg.spikes) centers.push_back(s.position);
    st.metrics = spike_metrics(*st.sol.op, p, st.sol.u, centers);
    br.stages.push_back(std::move(st));
  }
  return br;
}

double lift_identity_check(int k1, int k2, const std::function<double(Vec2)>& u, Vec2 x, double p,
                           double h) {
  if (!(x.x > 0.0 && x.y > 0.0)) throw ConfigError("lift identity needs x1, x2 > 0");
  if (k1 < 0 || k2 < 0) throw ConfigError("exponents must be nonnegative");
  const auto a = [&](Vec2 y) { return std::pow(y.x, k1) * std::pow(y.y, k2); };
  const double u0 = u(x);
  const Vec2 e1{h, 0}, e2{0, h};
  // one-sided differences shared by both forms
  const double dp1 = (u(x + e1) - u0) / h, dm1 = (u0 - u(x - e1)) / h;
  const double dp2 = (u(x + e2) - u0) / h, dm2 = (u0 - u(x - e2)) / h;
  const double ax = a(x);
  const double up = std::pow(u0, p);

  const double div = (a(x + 0.5 * e1) * dp1 - a(x - 0.5 * e1) * dm1) / h +
                     (a(x + 0.5 * e2) * dp2 - a(x - 0.5 * e2) * dm2) / h;
  const double lhs = -div + ax * u0 - ax * up;

  const double lap = (dp1 - dm1) / h + (dp2 - dm2) / h;
  const double drift = k1 / x.x * 0.5 * (dp1 + dm1) + k2 / x.y * 0.5 * (dp2 + dm2);
  const double rhs = ax * (-lap - drift + u0 - up);
  return std::abs(lhs - rhs);
}

}  // namespace spikelab
