#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spikelab/ansatz.hpp"

namespace spikelab {

/// J_p(u) = 1/2 int a (|grad u|^2 + u^2) - 1/(p+1) int a u_+^{p+1} for a P1 nodal field.
double energy_nodal(const MeshedOperator& op, double p, const std::vector<double>& u);

/// J_p(U_xi) with the spike profiles evaluated analytically; triangles near a spike use
/// the singular rule on subdivided triangles, the rest the 7-point rule.
double energy_quadrature(const MeshedOperator& op, const AnsatzField& af);

/// Two-term expansion
///   (e/2p) sum c_i a(xi_i) [1 - 2 log p/p + (K+2)/p - c_i H(xi_i,xi_i)/p - sum_k c_k G(xi_i,xi_k)/p].
double energy_expansion(const SpikeConfig& cfg, const Interactions& in, const WeightField& a);

struct LandscapePoint {
  std::vector<Spike> xi;
  double value_expansion = 0.0;
  double value_quadrature = 0.0;
  std::vector<double> gradient;
};

/// Bracketed objective for boundary anchors s (m of them, curve parameters) and interior
/// depths t (first l anchors):
///   (e/2p) {8 pi sum_{i<l} [a(s_i) + (4 a(s_i) log t_i - t_i d_nu a(s_i)) / p] + 4 pi sum_{k>=l} a(s_k)}
/// with interior spike i placed at s_i - (t_i/p) nu(s_i).
class SeparatedObjective {
 public:
  SeparatedObjective(Domain dom, WeightField a, std::size_t m, std::size_t l, double p,
                     std::optional<double> d = std::nullopt);

  std::size_t m() const { return m_; }
  std::size_t l() const { return l_; }
  double p() const { return p_; }
  double d() const { return d_; }
  const Domain& domain() const { return dom_; }
  const WeightField& weight() const { return a_; }

  /// Variables are (s_0..s_{m-1}, t_0..t_{l-1}).
  double value(const std::vector<double>& x) const;
  std::vector<double> gradient(const std::vector<double>& x) const;
  /// Central differences of the analytic gradient, symmetrised.
  std::vector<std::vector<double>> hessian(const std::vector<double>& x) const;

  double a_at(double s) const;
  double normal_derivative(double s) const;
  /// 4 a(s) / d_nu a(s); throws ConfigError when d_nu a(s) <= 0.
  double t_star(double s) const;
  /// |point(s_i) - point(s_k)| > 2d and d < t < 1/d.
  bool in_lambda(const std::vector<double>& x) const;
  /// Spike positions for the variables.
  std::vector<Spike> spikes(const std::vector<double>& x) const;

 private:
  Domain dom_;
  WeightField a_;
  std::size_t m_, l_;
  double p_, d_;
};

enum class CriticalKind { Maximum, Minimum, Saddle, Degenerate };
std::string to_string(CriticalKind k);

struct CriticalPoint {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> hessian_eigenvalues;
  CriticalKind kind = CriticalKind::Degenerate;
  bool converged = false;
  bool in_lambda = false;
  int iterations = 0;
};

/// Damped Newton on the gradient from each seed, with a Levenberg-Marquardt step when the
/// Newton step does not reduce |grad|. Interior depth seeds that are NaN are replaced by
/// t*(s). Unconverged seeds are reported, not thrown.
std::vector<CriticalPoint> find_critical_separated(const SeparatedObjective& obj,
                                                   const std::vector<std::vector<double>>& seeds,
                                                   int max_iter = 200, double tol = 1e-12);

struct ClusteredOptions {
  double h = 0.05;          ///< mesh size away from xi*
  double h_near = 0.005;    ///< mesh size at xi*
  std::optional<double> d;  ///< ball radius around xi*; default 0.1 diam
  int starts = 16;          ///< random perturbations of the initial configuration
  std::uint64_t seed = 1;
  int max_iter = 60;
  double rho = 0.5;  ///< spacing of the initial configuration, before the 1/sqrt(p) scaling
};

struct ClusteredResult {
  std::vector<Spike> spikes;
  double value = 0.0;
  double initial_value = 0.0;  ///< F_p at the unperturbed initial configuration
  bool boundary_trapped = false;
  double min_separation = 0.0;
  std::vector<double> start_values;
  int evaluations = 0;
  /// Warnings about the hypotheses on xi* (d_nu a != 0, not a local maximum).
  std::vector<std::string> warnings;
};

/// Maximises the expansion of F_p with Green's data from FEM over configurations of
/// l interior and m - l boundary spikes in B_d(xi*), by projected gradient ascent with
/// finite-difference gradients from the initial configuration and seeded perturbations.
ClusteredResult find_critical_clustered(const Domain& dom, const WeightField& a, std::size_t m,
                                        std::size_t l, double p, double xi_star_param,
                                        const ClusteredOptions& opt = {});

}  // namespace spikelab
