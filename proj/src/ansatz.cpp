#include "spikelab/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"

namespace spikelab {

namespace {

double param_diff(double s, double s0) {
  double d = s - s0;
  d -= std::round(d);
  return d;
}

}  // namespace

ProfileSample spike_profile(const SpikeConfig& cfg, std::size_t i, Vec2 d) {
  const double p = cfg.p;
  const double delta = cfg.delta(i);
  const double amp = cfg.amplitude(i);
  const RadialProfile& w1 = omega1_profile();
  const RadialProfile& w2 = omega2_profile();
  const double r2 = norm2(d);
  const double r = std::sqrt(r2);
  const double rho = r / delta;
  ProfileSample out;
  out.value = amp * (std::log(8.0) + 2.0 * std::log(delta) - 2.0 * std::log(delta * delta + r2) +
                     w1(rho) / p + w2(rho) / (p * p));
  // omega'(rho) / rho is regular at the origin; d vanishes there anyway
  const double rr = std::max(rho, 1e-8);
  const double wd = (w1.derivative(rr) / p + w2.derivative(rr) / (p * p)) / rr;
  out.grad = amp * (-4.0 / (delta * delta + r2) + wd / (delta * delta)) * d;
  return out;
}

double bubble_with_corrections(const SpikeConfig& cfg, std::size_t i, Vec2 x) {
  return spike_profile(cfg, i, x - cfg.spikes.at(i).position).value;
}

double near_spike_profile(double p, double rho) {
  return p + bubble_profile(rho) + omega1_profile()(rho) / p + omega2_profile()(rho) / (p * p);
}

std::vector<GradingCenter> spike_centers(const Domain& dom, const SpikeConfig& cfg,
                                         double resolution) {
  std::vector<GradingCenter> out;
  for (std::size_t i = 0; i < cfg.m(); ++i) {
    const Spike& s = cfg.spikes[i];
    const double hmin = resolution * cfg.delta(i);
    if (s.param) {
      out.push_back({dom.point(*s.param), hmin, s.param});
    } else {
      out.push_back({s.position, hmin, std::nullopt});
    }
  }
  return out;
}

void require_spike_resolution(const Mesh& mesh, const SpikeConfig& cfg, std::size_t i) {
  const double h = mesh.local_edge_size(spike_local(mesh, cfg.spikes.at(i)));
  const double delta = cfg.delta(i);
  if (delta < 2.0 * h) {
    std::ostringstream msg;
    msg << "mesh does not resolve spike " << i << ": delta = " << delta << " but local size "
        << h << "; regrade with h_min <= " << 0.5 * delta;
    throw SolverError(msg.str());
  }
}

std::vector<double> projection_correction(const MeshedOperator& op, const SpikeConfig& cfg,
                                          std::size_t i) {
  const Mesh& mesh = op.mesh();
  const Domain& dom = mesh.domain;
  if (cfg.mu.size() != cfg.m()) throw ConfigError("concentration parameters are not set");
  require_spike_resolution(mesh, cfg, i);
  const Spike& spike = cfg.spikes[i];
  const Vec2 xi = spike_local(mesh, spike);
  const bool flat = op.weight().is_constant();

  const auto f = [&](Vec2 x) {
    const ProfileSample u = spike_profile(cfg, i, x - xi);
    return flat ? -u.value : dot(op.grad_log_a(x), u.grad) - u.value;
  };
  const auto g = [&](double s, Vec2 x, Vec2 nu) {
    const Vec2 d = spike.param ? dom.offset(*spike.param, param_diff(s, *spike.param)) : x - xi;
    return -dot(spike_profile(cfg, i, d).grad, nu);
  };
  Eigen::VectorXd rhs = op.load(f, SingularPoint{xi});
  rhs += op.boundary_load(g);
  const Eigen::VectorXd h = op.solve(rhs);
  return {h.data(), h.data() + h.size()};
}

double projection_discrepancy(const MeshedOperator& op, const SpikeConfig& cfg, std::size_t i,
                              const std::vector<double>& H_i, const GreenData& green) {
  if (green.mesh.get() != &op.mesh()) throw ConfigError("Green's data lives on another mesh");
  const AsymptoticConstants& ac = asymptotic_constants();
  const double p = cfg.p;
  const double A = 1.0 - ac.C1 / (4.0 * p) - ac.C2 / (4.0 * p * p);
  const double B = ac.C1 / p + ac.C2 / (p * p);
  const double delta = cfg.delta(i);
  const double amp = cfg.amplitude(i);
  const double c = interaction_constant(cfg.spikes[i].kind);
  const double shift = -std::log(8.0 * delta * delta) + B * std::log(delta);
  double worst = 0.0;
  for (std::size_t v = 0; v < H_i.size(); ++v) {
    worst = std::max(worst, std::abs(H_i[v] / amp - (A * c * green.H[v] + shift)));
  }
  return worst;
}

double AnsatzField::value(Vec2 local) const {
  double u = 0.0;
  for (std::size_t i = 0; i < per_spike.size(); ++i) {
    u += spike_profile(cfg, i, local - spike_local[i]).value + mesh->interpolate(per_spike[i].H, local);
  }
  return u;
}

ProfileSample AnsatzField::sample(Vec2 local, int t, const std::array<double, 3>& lambda,
                                  const std::vector<ElementGeometry>& elements) const {
  const auto& tri = mesh->triangles[static_cast<std::size_t>(t)];
  const ElementGeometry& eg = elements[static_cast<std::size_t>(t)];
  ProfileSample out;
  for (std::size_t i = 0; i < per_spike.size(); ++i) {
    const ProfileSample u = spike_profile(cfg, i, local - spike_local[i]);
    out.value += u.value;
    out.grad += u.grad;
    const std::vector<double>& H = per_spike[i].H;
    for (int k = 0; k < 3; ++k) {
      const double hk = H[static_cast<std::size_t>(tri[k])];
      out.value += lambda[k] * hk;
      out.grad += hk * eg.grad[k];
    }
  }
  return out;
}

double AnsatzField::max_value() const {
  return *std::max_element(nodal_values.begin(), nodal_values.end());
}

double AnsatzField::min_value() const {
  return *std::min_element(nodal_values.begin(), nodal_values.end());
}

void AnsatzField::export_csv(std::ostream& os) const {
  os << "x,y,u\n" << std::setprecision(15);
  for (std::size_t v = 0; v < nodal_values.size(); ++v) {
    const Vec2 w = mesh->world(mesh->nodes[v]);
    os << w.x << ',' << w.y << ',' << nodal_values[v] << '\n';
  }
}

SpikeSetup setup_spikes(const Domain& dom, const WeightField& weight, SpikeConfig cfg, double h,
                        double resolution, const MuOptions& mu_opt) {
  cfg.validate(dom);
  std::vector<std::pair<Vec2, SourceKind>> sources;
  for (const Spike& s : cfg.spikes) sources.emplace_back(s.position, s.kind);
  auto coarse = std::make_shared<Mesh>(build_mesh(dom, h, green_centers(dom, h, sources)));
  const MeshedOperator op0(coarse, weight);
  cfg.mu = solve_mu(cfg, interactions_from(spike_greens(op0, cfg), cfg), mu_opt).mu;

  SpikeSetup out;
  auto mesh = std::make_shared<Mesh>(build_mesh(dom, h, spike_centers(dom, cfg, resolution)));
  out.op = std::make_shared<MeshedOperator>(mesh, weight);
  out.greens = spike_greens(*out.op, cfg);
  out.interactions = interactions_from(out.greens, cfg);
  out.mu = solve_mu(cfg, out.interactions, mu_opt);
  cfg.mu = out.mu.mu;
  out.cfg = std::move(cfg);
  return out;
}

AnsatzField build_ansatz(const MeshedOperator& op, const SpikeConfig& cfg) {
  if (cfg.mu.size() != cfg.m()) throw ConfigError("concentration parameters are not set");
  const Mesh& mesh = op.mesh();
  AnsatzField af;
  af.cfg = cfg;
  af.mesh = op.mesh_ptr();
  const std::size_t n = mesh.num_nodes();
  af.nodal_values.assign(n, 0.0);
  for (std::size_t i = 0; i < cfg.m(); ++i) {
    const Vec2 xi = spike_local(mesh, cfg.spikes[i]);
    af.spike_local.push_back(xi);
    AnsatzField::Piece piece;
    piece.U.resize(n);
    for (std::size_t v = 0; v < n; ++v) piece.U[v] = spike_profile(cfg, i, mesh.nodes[v] - xi).value;
    piece.H = projection_correction(op, cfg, i);
    for (std::size_t v = 0; v < n; ++v) af.nodal_values[v] += piece.U[v] + piece.H[v];
    af.per_spike.push_back(std::move(piece));
  }
  // near-spike ball p^{-2 kappa}, clamped below by 10 local element sizes
  for (std::size_t i = 0; i < cfg.m(); ++i) {
    const Vec2 xi = af.spike_local[i];
    const double radius =
        std::max(std::pow(cfg.p, -2.0 * cfg.kappa()), 10.0 * mesh.local_edge_size(xi));
    const double amp = cfg.amplitude(i);
    const double delta = cfg.delta(i);
    double worst = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      const double r = distance(mesh.nodes[v], xi);
      if (r > radius) continue;
      worst = std::max(worst, std::abs(af.nodal_values[v] / amp - near_spike_profile(cfg.p, r / delta)));
    }
    af.defect.push_back(worst);
    af.defect_radius.push_back(radius);
  }
  return af;
}

}  // namespace spikelab
