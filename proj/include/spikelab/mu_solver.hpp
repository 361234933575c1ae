#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spikelab/greens.hpp"

namespace spikelab {

struct Spike {
  Vec2 position;  ///< world coordinates
  SourceKind kind = SourceKind::Interior;
  std::optional<double> param;  ///< curve parameter for boundary spikes
};

/// Spike positions (interior spikes first), exponent p and concentration parameters.
struct SpikeConfig {
  double p = 0.0;
  std::vector<Spike> spikes;
  std::vector<double> mu;

  std::size_t m() const { return spikes.size(); }
  std::size_t l() const;
  /// e^{-p/4}
  double eps() const;
  /// p^{p/(p-1)} e^{-p/(2(p-1))}
  double gamma() const;
  /// 2 (m^2 + 1)
  double kappa() const;
  double delta(std::size_t i) const { return eps() * mu.at(i); }
  /// p^{-kappa}
  double separation_threshold() const;
  /// 1 / (gamma mu_i^{2/(p-1)})
  double amplitude(std::size_t i) const;

  /// Throws ConfigError on p <= 1, misordered kinds, boundary spikes off the curve, or
  /// spikes violating the p^{-kappa} separation and clearance.
  void validate(const Domain& dom) const;
};

/// Builds a boundary spike from a curve parameter.
Spike boundary_spike(const Domain& dom, double s);
Spike interior_spike(Vec2 y);

/// Robin values H(xi_i, xi_i) and cross values G(xi_i, xi_k) (k != i).
struct Interactions {
  std::vector<double> robin;
  Eigen::MatrixXd green;  ///< green(i, k) = G(xi_i, xi_k); zero diagonal
};

/// Local (mesh frame) position of spike i, exact for boundary spikes.
Vec2 spike_local(const Mesh& mesh, const Spike& s);

/// Computes one regular part per spike on the shared operator.
std::vector<GreenData> spike_greens(const MeshedOperator& op, const SpikeConfig& cfg);
Interactions interactions_from(const std::vector<GreenData>& greens, const SpikeConfig& cfg);

struct MuOptions {
  double damping = 0.5;
  double tol = 1e-12;
  int max_iter = 1000;
};

struct MuResult {
  std::vector<double> mu;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;  ///< residual per iteration
};

/// Residual of the matching system in log mu coordinates:
///   4 log mu_i + log 8 - [A c_i H_ii + B log delta_i + A sum_k (mu_i/mu_k)^{2/(p-1)} c_k G_ik]
/// with A = 1 - C1/4p - C2/4p^2, B = C1/p + C2/p^2.
std::vector<double> mu_residual(const SpikeConfig& cfg, const Interactions& in,
                                const std::vector<double>& mu);

/// p -> infinity limit exp(-3/4 + c_i H_ii / 4 + sum_k c_k G_ik / 4).
std::vector<double> mu_limit(const SpikeConfig& cfg, const Interactions& in);

/// Damped fixed point in log mu started from the limit formula. Throws SolverError when
/// the residual grows three iterations in a row.
MuResult solve_mu(const SpikeConfig& cfg, const Interactions& in, const MuOptions& opt = {});

}  // namespace spikelab
