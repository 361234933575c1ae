#include "spikelab/reduced_energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"

namespace spikelab {

namespace {

constexpr double kE = std::numbers::e;

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

}  // namespace

double energy_nodal(const MeshedOperator& op, double p, const std::vector<double>& u) {
  const Mesh& m = op.mesh();
  if (u.size() != m.num_nodes()) throw ConfigError("nodal field has the wrong size");
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
  double quad = 0.5 * uv.dot(op.matrix() * uv);
  double nonlinear = 0.0;
  const auto rule = triangle_rule7();
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const double area = op.elements()[t].area;
    for (const TriPoint& q : rule) {
      const double val = q.l0 * u[tr[0]] + q.l1 * u[tr[1]] + q.l2 * u[tr[2]];
      const Vec2 x = q.l0 * m.nodes[tr[0]] + q.l1 * m.nodes[tr[1]] + q.l2 * m.nodes[tr[2]];
      nonlinear += q.w * area * op.a(x) * positive_power(val, p + 1.0);
    }
  }
  return quad - nonlinear / (p + 1.0);
}

double energy_quadrature(const MeshedOperator& op, const AnsatzField& af) {
  const Mesh& m = op.mesh();
  if (af.mesh.get() != &m) throw ConfigError("ansatz lives on another mesh");
  const double p = af.cfg.p;
  const auto& elements = op.elements();
  std::vector<PhysPoint> pts;
  double total = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const Vec2 p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
    const double longest = std::max({distance(p0, p1), distance(p1, p2), distance(p2, p0)});
    const Vec2 centroid = (p0 + p1 + p2) / 3.0;
    const Vec2* near = nullptr;
    for (const Vec2& xi : af.spike_local) {
      if (distance(centroid, xi) < 4.0 * longest) near = &xi;
    }
    pts.clear();
    triangle_points(p0, p1, p2, near, near ? 3.0 * longest : 0.0, near ? 3 : 0, pts);
    for (const PhysPoint& q : pts) {
      const ProfileSample s = af.sample(q.x, static_cast<int>(t), q.lambda, elements);
      total += q.w * op.a(q.x) *
               (0.5 * (norm2(s.grad) + s.value * s.value) - positive_power(s.value, p + 1.0) / (p + 1.0));
    }
  }
  return total;
}

double energy_expansion(const SpikeConfig& cfg, const Interactions& in, const WeightField& a) {
  const double p = cfg.p;
  const double K = asymptotic_constants().K;
  const std::size_t m = cfg.m();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double ci = interaction_constant(cfg.spikes[i].kind);
    double bracket = 1.0 - 2.0 * std::log(p) / p + (K + 2.0) / p - ci * in.robin[i] / p;
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      bracket -= interaction_constant(cfg.spikes[k].kind) *
                 in.green(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) / p;
    }
    total += ci * a.eval(cfg.spikes[i].position) * bracket;
  }
  return kE / (2.0 * p) * total;
}

// ---------------------------------------------------------------- separated regime

SeparatedObjective::SeparatedObjective(Domain dom, WeightField a, std::size_t m, std::size_t l,
                                       double p, std::optional<double> d)
    : dom_(std::move(dom)), a_(std::move(a)), m_(m), l_(l), p_(p) {
  if (m == 0) throw ConfigError("at least one spike is required");
  if (l > m) throw ConfigError("l (interior spikes) must not exceed m");
  if (!(p > 1.0)) throw ConfigError("exponent p must exceed 1");
  d_ = d ? *d : 0.1 * dom_.diameter();
  if (!(d_ > 0.0)) throw ConfigError("Lambda_d radius must be positive");
}

double SeparatedObjective::a_at(double s) const { return a_.eval(dom_.point(s)); }

double SeparatedObjective::normal_derivative(double s) const {
  return dot(a_.grad(dom_.point(s)), dom_.normal(s));
}

double SeparatedObjective::t_star(double s) const {
  const double dn = normal_derivative(s);
  if (!(dn > 0.0)) {
    std::ostringstream msg;
    msg << "interior spike anchored at s = " << s << " needs d_nu a > 0 there (got " << dn
        << "); no interior depth is stationary";
    throw ConfigError(msg.str());
  }
  return 4.0 * a_at(s) / dn;
}

double SeparatedObjective::value(const std::vector<double>& x) const {
  if (x.size() != m_ + l_) throw ConfigError("expected m + l variables");
  const double pi = std::numbers::pi;
  double v = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    if (i < l_) {
      const double t = x[m_ + i];
      if (!(t > 0.0)) return std::numeric_limits<double>::quiet_NaN();
      v += 8.0 * pi * (a_at(x[i]) + (4.0 * a_at(x[i]) * std::log(t) - t * normal_derivative(x[i])) / p_);
    } else {
      v += 4.0 * pi * a_at(x[i]);
    }
  }
  return kE / (2.0 * p_) * v;
}

std::vector<double> SeparatedObjective::gradient(const std::vector<double>& x) const {
  if (x.size() != m_ + l_) throw ConfigError("expected m + l variables");
  const double pi = std::numbers::pi;
  const double pre = kE / (2.0 * p_);
  std::vector<double> g(m_ + l_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    const double s = x[i];
    const Vec2 y = dom_.point(s);
    const Vec2 d1 = dom_.d1(s);
    const Vec2 nu = dom_.normal(s);
    const Vec2 ga = a_.grad(y);
    const double a_s = dot(ga, d1);
    if (i < l_) {
      const double t = x[m_ + i];
      const double dn = dot(ga, nu);
      const double dn_s = dot(a_.hessian(y) * d1, nu) + dot(ga, dom_.normal_derivative(s));
      g[i] = pre * 8.0 * pi * ((1.0 + 4.0 * std::log(t) / p_) * a_s - t / p_ * dn_s);
      g[m_ + i] = pre * 8.0 * pi * (4.0 * a_at(s) / t - dn) / p_;
    } else {
      g[i] = pre * 4.0 * pi * a_s;
    }
  }
  return g;
}

std::vector<std::vector<double>> SeparatedObjective::hessian(const std::vector<double>& x) const {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> H(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const double h = j < m_ ? 1e-5 : 1e-5 * std::max(1.0, x[j]);
    std::vector<double> xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const std::vector<double> gp = gradient(xp), gm = gradient(xm);
    for (std::size_t i = 0; i < n; ++i) H[i][j] = (gp[i] - gm[i]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) H[i][j] = H[j][i] = 0.5 * (H[i][j] + H[j][i]);
  }
  return H;
}

bool SeparatedObjective::in_lambda(const std::vector<double>& x) const {
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t k = i + 1; k < m_; ++k) {
      if (!(distance(dom_.point(x[i]), dom_.point(x[k])) > 2.0 * d_)) return false;
    }
  }
  for (std::size_t i = 0; i < l_; ++i) {
    const double t = x[m_ + i];
    if (!(t > d_ && t < 1.0 / d_)) return false;
  }
  return true;
}

std::vector<Spike> SeparatedObjective::spikes(const std::vector<double>& x) const {
  std::vector<Spike> out;
  for (std::size_t i = 0; i < m_; ++i) {
    if (i < l_) {
      out.push_back(interior_spike(dom_.point(x[i]) - x[m_ + i] / p_ * dom_.normal(x[i])));
    } else {
      out.push_back(boundary_spike(dom_, x[i]));
    }
  }
  return out;
}

std::string to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::Maximum: return "maximum";
    case CriticalKind::Minimum: return "minimum";
    case CriticalKind::Saddle: return "saddle";
    case CriticalKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

Eigen::MatrixXd to_eigen(const std::vector<std::vector<double>>& H) {
  const auto n = static_cast<Eigen::Index>(H.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return M;
}

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<CriticalPoint> find_critical_separated(const SeparatedObjective& obj,
                                                   const std::vector<std::vector<double>>& seeds,
                                                   int max_iter, double tol) {
  const std::size_t m = obj.m(), l = obj.l(), n = m + l;
  std::vector<CriticalPoint> out;
  for (const std::vector<double>& seed : seeds) {
    if (seed.size() != n) throw ConfigError("seed must hold m + l variables");
    std::vector<double> x = seed;
    for (std::size_t i = 0; i < m; ++i) x[i] = Domain::wrap(x[i]);
    for (std::size_t i = 0; i < l; ++i) {
      const double ts = obj.t_star(x[i]);  // also checks the sign of d_nu a
      if (std::isnan(x[m + i])) x[m + i] = ts;
    }
    CriticalPoint cp;
    std::vector<double> g = obj.gradient(x);
    double gn = vec_norm(g);
    int it = 0;
    for (; it < max_iter && gn > tol; ++it) {
      const Eigen::MatrixXd H = to_eigen(obj.hessian(x));
      const Eigen::VectorXd ge = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(n));
      const auto try_step = [&](const Eigen::VectorXd& step, std::vector<double>& xn,
                                std::vector<double>& gnew) -> double {
        if (!step.allFinite()) return INFINITY;
        xn = x;
        for (std::size_t j = 0; j < n; ++j) xn[j] += step[static_cast<Eigen::Index>(j)];
        for (std::size_t j = 0; j < l; ++j) {
          if (!(xn[m + j] > 0.0)) return static_cast<double>(INFINITY);
        }
        gnew = obj.gradient(xn);
        return vec_norm(gnew);
      };
      std::vector<double> xn, gnew;
      double gnn = try_step(H.fullPivLu().solve(-ge), xn, gnew);
      if (!(gnn < gn)) {
        const Eigen::MatrixXd HtH = H.transpose() * H;
        double lambda = 1e-6 * std::max(HtH.norm(), 1e-300);
        for (int k = 0; k < 40 && !(gnn < gn); ++k, lambda *= 4.0) {
          const Eigen::MatrixXd M = HtH + lambda * Eigen::MatrixXd::Identity(H.rows(), H.cols());
          gnn = try_step(M.ldlt().solve(-H.transpose() * ge), xn, gnew);
        }
      }
      if (!(gnn < gn)) break;
      x = xn;
      g = gnew;
      gn = gnn;
    }
    for (std::size_t i = 0; i < m; ++i) x[i] = Domain::wrap(x[i]);
    cp.x = x;
    cp.iterations = it;
    cp.gradient_norm = gn;
    cp.converged = gn <= tol || (gn <= 1e3 * tol && it > 0);
    cp.value = obj.value(x);
    cp.in_lambda = obj.in_lambda(x);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(obj.hessian(x)));
    const Eigen::VectorXd ev = es.eigenvalues();
    cp.hessian_eigenvalues.assign(ev.data(), ev.data() + ev.size());
    const double flat = 1e-6 * std::max(std::abs(cp.value), 1e-300);
    if (ev.cwiseAbs().minCoeff() < flat) {
      cp.kind = CriticalKind::Degenerate;
    } else if (ev.maxCoeff() < 0.0) {
      cp.kind = CriticalKind::Maximum;
    } else if (ev.minCoeff() > 0.0) {
      cp.kind = CriticalKind::Minimum;
    } else {
      cp.kind = CriticalKind::Saddle;
    }
    out.push_back(std::move(cp));
  }
  return out;
}

// ---------------------------------------------------------------- clustered regime

namespace {

struct Configuration {
  std::vector<Vec2> interior;   // world
  std::vector<double> bparam;   // curve parameters
};

class ClusteredProblem {
 public:
  ClusteredProblem(const Domain& dom, const WeightField& a, std::size_t m, std::size_t l, double p,
                   double s_star, const ClusteredOptions& opt)
      : dom_(dom), a_(a), m_(m), l_(l), p_(p), s_star_(Domain::wrap(s_star)), opt_(opt) {
    xi_star_ = dom.point(s_star_);
    d_ = opt.d ? *opt.d : 0.1 * dom.diameter();
    sep_min_ = std::pow(p, -2.0 * (static_cast<double>(m * m) + 1.0));
    auto mesh = std::make_shared<Mesh>(
        build_mesh(dom, opt.h, {GradingCenter{xi_star_, opt.h_near, s_star_}}));
    op_ = std::make_shared<MeshedOperator>(mesh, a);
  }

  double d() const { return d_; }
  Vec2 xi_star() const { return xi_star_; }
  double s_star() const { return s_star_; }
  int evaluations() const { return evaluations_; }

  double min_depth(Vec2 y) const {
    return std::max(sep_min_, 2.5 * op_->mesh().local_edge_size(op_->mesh().to_local(y)));
  }
  double min_separation() const { return std::max(sep_min_, 2.0 * opt_.h_near); }

  SpikeConfig config(const Configuration& c) const {
    SpikeConfig cfg;
    cfg.p = p_;
    for (const Vec2& y : c.interior) cfg.spikes.push_back(interior_spike(y));
    for (double s : c.bparam) cfg.spikes.push_back(boundary_spike(dom_, s));
    return cfg;
  }

  double value(const Configuration& c) {
    ++evaluations_;
    const SpikeConfig cfg = config(c);
    std::vector<GreenData> greens;
    for (const Spike& s : cfg.spikes) greens.push_back(green(s));
    return energy_expansion(cfg, interactions_from(greens, cfg), a_);
  }

  void project(Configuration& c) const {
    for (Vec2& y : c.interior) {
      for (int pass = 0; pass < 3; ++pass) {
        if (distance(y, xi_star_) > d_) y = xi_star_ + d_ * normalized(y - xi_star_);
        const double md = min_depth(y);
        if (!dom_.contains(y) || dom_.dist_to_boundary(y).distance < md) {
          const double s = dom_.project_param(y);
          y = dom_.point(s) - md * dom_.normal(s);
        }
      }
    }
    for (double& s : c.bparam) {
      s = Domain::wrap(s);
      if (distance(dom_.point(s), xi_star_) <= d_) continue;
      // bisect back toward s*
      double lo = 0.0, hi = 1.0;
      const double ds = s - s_star_ - std::round(s - s_star_);
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (distance(dom_.point(s_star_ + mid * ds), xi_star_) <= d_) lo = mid; else hi = mid;
      }
      s = Domain::wrap(s_star_ + lo * ds);
    }
  }

  std::vector<Vec2> positions(const Configuration& c) const {
    std::vector<Vec2> out = c.interior;
    for (double s : c.bparam) out.push_back(dom_.point(s));
    return out;
  }

  double separation(const Configuration& c) const {
    const std::vector<Vec2> pos = positions(c);
    double best = INFINITY;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      for (std::size_t k = i + 1; k < pos.size(); ++k) best = std::min(best, distance(pos[i], pos[k]));
    }
    return best;
  }

  bool trapped(const Configuration& c) const {
    for (const Vec2& y : c.interior) {
      if (dom_.dist_to_boundary(y).distance < 1.01 * min_depth(y)) return true;
      if (distance(y, xi_star_) > 0.99 * d_) return true;
    }
    for (double s : c.bparam) {
      if (distance(dom_.point(s), xi_star_) > 0.99 * d_) return true;
    }
    return m_ > 1 && separation(c) < 1.01 * min_separation();
  }

  bool admissible(const Configuration& c) const {
    return m_ < 2 || separation(c) >= min_separation();
  }

 private:
  const GreenData& green(const Spike& s) {
    std::array<std::uint64_t, 3> key{};
    const double k0 = s.param ? *s.param : s.position.x;
    const double k1 = s.param ? 0.0 : s.position.y;
    std::memcpy(&key[0], &k0, sizeof(double));
    std::memcpy(&key[1], &k1, sizeof(double));
    key[2] = s.param ? 1 : 0;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 64) cache_.clear();
    GreenData gd = s.param ? regular_part_at_param(*op_, *s.param)
                           : regular_part(*op_, s.position, SourceKind::Interior);
    return cache_.emplace(key, std::move(gd)).first->second;
  }

  const Domain& dom_;
  const WeightField& a_;
  std::size_t m_, l_;
  double p_, s_star_;
  ClusteredOptions opt_;
  Vec2 xi_star_;
  double d_ = 0.0, sep_min_ = 0.0;
  std::shared_ptr<MeshedOperator> op_;
  std::map<std::array<std::uint64_t, 3>, GreenData> cache_;
  int evaluations_ = 0;
};

// packs interior (x, y) pairs then boundary arc-length coordinates
std::vector<double> pack(const Configuration& c, const Domain& dom) {
  std::vector<double> v;
  for (const Vec2& y : c.interior) {
    v.push_back(y.x);
    v.push_back(y.y);
  }
  for (double s : c.bparam) v.push_back(s * dom.perimeter());
  return v;
}

Configuration unpack(const std::vector<double>& v, std::size_t l, std::size_t nb, const Domain& dom) {
  Configuration c;
  for (std::size_t i = 0; i < l; ++i) c.interior.push_back({v[2 * i], v[2 * i + 1]});
  for (std::size_t k = 0; k < nb; ++k) c.bparam.push_back(v[2 * l + k] / dom.perimeter());
  return c;
}

}  // namespace

ClusteredResult find_critical_clustered(const Domain& dom, const WeightField& a, std::size_t m,
                                        std::size_t l, double p, double xi_star_param,
                                        const ClusteredOptions& opt) {
  if (m == 0) throw ConfigError("at least one spike is required");
  if (l > m) throw ConfigError("l (interior spikes) must not exceed m");
  if (!(p > 1.0)) throw ConfigError("exponent p must exceed 1");
  ClusteredProblem prob(dom, a, m, l, p, xi_star_param, opt);
  ClusteredResult res;

  const double s0 = prob.s_star();
  const Vec2 xs = prob.xi_star();
  const Vec2 nu = dom.normal(s0);
  {
    const Vec2 ga = a.grad(xs);
    const double scale = std::abs(a.eval(xs)) + norm(ga);
    if (std::abs(dot(ga, nu)) > 1e-6 * scale) {
      std::ostringstream msg;
      msg << "d_nu a(xi*) = " << dot(ga, nu) << " is not zero";
      res.warnings.push_back(msg.str());
    }
    const Vec2 d1 = dom.d1(s0);
    const double att = dot(a.hessian(xs) * d1, d1) + dot(ga, dom.d2(s0));
    const double ann = dot(a.hessian(xs) * nu, nu);
    if (!(att < 0.0) || !(ann < 0.0)) res.warnings.push_back("xi* is not a strict local maximum of a");
  }

  const std::size_t nb = m - l;
  const double sp = std::sqrt(p);
  Configuration init;
  for (std::size_t i = 0; i < l; ++i) {
    const double t = 1.0 + opt.rho * static_cast<double>(i);
    init.interior.push_back(xs - (t / sp) * nu);
  }
  for (std::size_t k = 0; k < nb; ++k) {
    double sigma = (static_cast<double>(k) - 0.5 * static_cast<double>(nb - 1)) * opt.rho / sp;
    if (l > 0) sigma += 0.5 * opt.rho / sp;
    init.bparam.push_back(s0 + sigma / dom.speed(s0));
  }
  prob.project(init);
  res.initial_value = prob.value(init);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, 0.5 * opt.rho / sp);
  const double fd = 2e-3 / sp;

  double best = -INFINITY;
  Configuration best_cfg = init;
  for (int start = 0; start <= opt.starts; ++start) {
    Configuration c = init;
    if (start > 0) {
      for (Vec2& y : c.interior) y += Vec2{noise(rng), noise(rng)};
      for (double& s : c.bparam) s += noise(rng) / dom.speed(s);
      prob.project(c);
    }
    if (!prob.admissible(c)) continue;
    double f = prob.value(c);
    double step = 0.05 / sp;
    for (int it = 0; it < opt.max_iter; ++it) {
      const std::vector<double> x = pack(c, dom);
      std::vector<double> g(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) {
        std::vector<double> xp = x, xm = x;
        xp[j] += fd;
        xm[j] -= fd;
        g[j] = (prob.value(unpack(xp, l, nb, dom)) - prob.value(unpack(xm, l, nb, dom))) / (2 * fd);
      }
      const double gn = vec_norm(g);
      if (!(gn > 0.0)) break;
      bool moved = false;
      for (int k = 0; k < 12; ++k, step *= 0.5) {
        std::vector<double> xn = x;
        for (std::size_t j = 0; j < x.size(); ++j) xn[j] += step * g[j] / gn;
        Configuration cn = unpack(xn, l, nb, dom);
        prob.project(cn);
        if (!prob.admissible(cn)) continue;
        const double fn = prob.value(cn);
        if (fn > f) {
          c = cn;
          f = fn;
          moved = true;
          step *= 2.0;
          break;
        }
      }
      if (!moved || step < 1e-6 / sp) break;
    }
    res.start_values.push_back(f);
    if (f > best) {
      best = f;
      best_cfg = c;
    }
  }
  res.value = best;
  res.spikes = prob.config(best_cfg).spikes;
  res.boundary_trapped = prob.trapped(best_cfg);
  res.min_separation = m > 1 ? prob.separation(best_cfg) : 0.0;
  res.evaluations = prob.evaluations();
  return res;
}

}  // namespace spikelab
