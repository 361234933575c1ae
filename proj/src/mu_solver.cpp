#include "spikelab/mu_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"

namespace spikelab {

std::size_t SpikeConfig::l() const {
  return static_cast<std::size_t>(std::count_if(spikes.begin(), spikes.end(), [](const Spike& s) {
    return s.kind == SourceKind::Interior;
  }));
}

double SpikeConfig::eps() const { return std::exp(-0.25 * p); }

double SpikeConfig::gamma() const {
  return std::pow(p, p / (p - 1.0)) * std::exp(-p / (2.0 * (p - 1.0)));
}

double SpikeConfig::kappa() const {
  const double mm = static_cast<double>(m());
  return 2.0 * (mm * mm + 1.0);
}

double SpikeConfig::separation_threshold() const { return std::pow(p, -kappa()); }

double SpikeConfig::amplitude(std::size_t i) const {
  return 1.0 / (gamma() * std::pow(mu.at(i), 2.0 / (p - 1.0)));
}

void SpikeConfig::validate(const Domain& dom) const {
  if (!(p > 1.0)) throw ConfigError("exponent p must exceed 1");
  if (spikes.empty()) throw ConfigError("at least one spike is required");
  const std::size_t nl = l();
  for (std::size_t i = 0; i < spikes.size(); ++i) {
    const Spike& s = spikes[i];
    if ((i < nl) != (s.kind == SourceKind::Interior)) {
      throw ConfigError("interior spikes must precede boundary spikes");
    }
    if (s.kind == SourceKind::Boundary) {
      if (!s.param) throw ConfigError("boundary spike without a curve parameter");
      if (distance(dom.point(*s.param), s.position) > 1e-12 * (1.0 + norm(s.position))) {
        throw ConfigError("boundary spike position does not match its curve parameter");
      }
    }
  }
  const double thr = separation_threshold();
  for (std::size_t i = 0; i < spikes.size(); ++i) {
    if (spikes[i].kind == SourceKind::Interior) {
      if (!dom.contains(spikes[i].position)) throw ConfigError("interior spike outside the domain");
      const double d = dom.dist_to_boundary(spikes[i].position).distance;
      if (!(d > thr)) {
        std::ostringstream msg;
        msg << "interior spike " << i << " at depth " << d << " violates clearance p^-kappa = " << thr;
        throw ConfigError(msg.str());
      }
    }
    for (std::size_t k = i + 1; k < spikes.size(); ++k) {
      if (!(distance(spikes[i].position, spikes[k].position) > thr)) {
        std::ostringstream msg;
        msg << "spikes " << i << " and " << k << " closer than p^-kappa = " << thr;
        throw ConfigError(msg.str());
      }
    }
  }
  if (!mu.empty() && mu.size() != spikes.size()) throw ConfigError("mu has the wrong length");
}

Spike boundary_spike(const Domain& dom, double s) {
  const double w = Domain::wrap(s);
  return {dom.point(w), SourceKind::Boundary, w};
}

Spike interior_spike(Vec2 y) { return {y, SourceKind::Interior, std::nullopt}; }

Vec2 spike_local(const Mesh& mesh, const Spike& s) {
  return s.param ? mesh.boundary_local(*s.param) : mesh.to_local(s.position);
}

std::vector<GreenData> spike_greens(const MeshedOperator& op, const SpikeConfig& cfg) {
  std::vector<GreenData> out;
  out.reserve(cfg.m());
  for (const Spike& s : cfg.spikes) {
    out.push_back(s.param ? regular_part_at_param(op, *s.param)
                          : regular_part(op, s.position, SourceKind::Interior));
  }
  return out;
}

Interactions interactions_from(const std::vector<GreenData>& greens, const SpikeConfig& cfg) {
  const std::size_t m = cfg.m();
  if (greens.size() != m) throw ConfigError("one Green's function per spike is required");
  Interactions in;
  in.robin.resize(m);
  in.green = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    in.robin[k] = greens[k].robin;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == k) continue;
      const Vec2 xi = spike_local(*greens[k].mesh, cfg.spikes[i]);
      in.green(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = greens[k].eval_local(xi);
    }
  }
  return in;
}

namespace {

// right-hand side of the matching system without the log 8 term, in log mu
std::vector<double> matching_rhs(const SpikeConfig& cfg, const Interactions& in,
                                 const std::vector<double>& lmu) {
  const AsymptoticConstants& ac = asymptotic_constants();
  const double p = cfg.p;
  const double A = 1.0 - ac.C1 / (4.0 * p) - ac.C2 / (4.0 * p * p);
  const double B = ac.C1 / p + ac.C2 / (p * p);
  const std::size_t m = cfg.m();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double ci = interaction_constant(cfg.spikes[i].kind);
    double v = A * ci * in.robin[i] + B * (-0.25 * p + lmu[i]);
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      const double ck = interaction_constant(cfg.spikes[k].kind);
      v += A * std::exp(2.0 * (lmu[i] - lmu[k]) / (p - 1.0)) * ck *
           in.green(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    out[i] = v;
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

}  // namespace

std::vector<double> mu_residual(const SpikeConfig& cfg, const Interactions& in,
                                const std::vector<double>& mu) {
  std::vector<double> lmu(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) lmu[i] = std::log(mu[i]);
  const std::vector<double> rhs = matching_rhs(cfg, in, lmu);
  std::vector<double> res(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) res[i] = 4.0 * lmu[i] + std::log(8.0) - rhs[i];
  return res;
}

std::vector<double> mu_limit(const SpikeConfig& cfg, const Interactions& in) {
  const std::size_t m = cfg.m();
  std::vector<double> mu(m);
  for (std::size_t i = 0; i < m; ++i) {
    double e = -0.75 + 0.25 * interaction_constant(cfg.spikes[i].kind) * in.robin[i];
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      e += 0.25 * interaction_constant(cfg.spikes[k].kind) *
           in.green(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    mu[i] = std::exp(e);
  }
  return mu;
}

MuResult solve_mu(const SpikeConfig& cfg, const Interactions& in, const MuOptions& opt) {
  if (!(cfg.p > 1.0)) throw ConfigError("exponent p must exceed 1");
  const std::size_t m = cfg.m();
  std::vector<double> lmu(m);
  const std::vector<double> start = mu_limit(cfg, in);
  for (std::size_t i = 0; i < m; ++i) lmu[i] = std::log(start[i]);

  MuResult out;
  const double log8 = std::log(8.0);
  int growth = 0;
  double prev = INFINITY;
  for (int it = 0; it <= opt.max_iter; ++it) {
    const std::vector<double> rhs = matching_rhs(cfg, in, lmu);
    double res = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = std::abs(4.0 * lmu[i] + log8 - rhs[i]);
      res = std::isfinite(r) ? std::max(res, r) : INFINITY;
    }
    out.history.push_back(res);
    if (!std::isfinite(res)) {
      std::ostringstream msg;
      msg << "concentration-parameter iteration overflowed after " << it
          << " iterations; the matching system does not contract for these spikes";
      throw SolverError(msg.str());
    }
    out.iterations = it;
    if (res <= opt.tol) break;
    growth = res > prev ? growth + 1 : 0;
    if (growth >= 3) {
      std::ostringstream msg;
      msg << "concentration-parameter iteration is not contracting (residual " << res
          << " after " << it << " iterations); use a larger p or better separated spikes";
      throw SolverError(msg.str());
    }
    prev = res;
    for (std::size_t i = 0; i < m; ++i) {
      const double target = 0.25 * (rhs[i] - log8);
      lmu[i] += opt.damping * (target - lmu[i]);
    }
    if (it == opt.max_iter) {
      std::ostringstream msg;
      msg << "concentration-parameter iteration stalled at residual " << res;
      throw SolverError(msg.str());
    }
  }
  out.mu.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.mu[i] = std::exp(lmu[i]);
  out.residual = max_abs(mu_residual(cfg, in, out.mu));
  return out;
}

}  // namespace spikelab
