#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikelab/ansatz.hpp"

namespace spikelab {

struct NewtonOptions {
  int max_iter = 40;
  double tol = 1e-9;  ///< on |R|_inf / max(|A u|_inf, |N(u)|_inf)
  int max_halvings = 30;
};

/// Discrete solution of -div(a grad u) + a u = a u_+^p with its Newton history.
struct SolutionField {
  double p = 0.0;
  std::shared_ptr<const MeshedOperator> op;
  std::vector<double> u;
  bool converged = false;
  int newton_iters = 0;
  double residual_norm = 0.0;
  std::vector<double> residual_history;
  std::string message;
};

/// Damped Newton on the weak residual with Jacobian int a (grad phi grad v + phi v - p u_+^{p-1} phi v),
/// halving the step until |R|_2 decreases. A stalled line search returns converged = false.
SolutionField newton_solve(std::shared_ptr<const MeshedOperator> op, std::vector<double> u0, double p,
                           const NewtonOptions& opt = {});

/// Weak residual R = A u - int a u_+^p phi and the scale used for the relative norm.
std::vector<double> weak_residual(const MeshedOperator& op, const std::vector<double>& u, double p,
                                  double* scale = nullptr);

struct SpikeDiagnostics {
  Vec2 center;    ///< ball center (world)
  Vec2 location;  ///< node of the local maximum in the ball (world)
  double peak = 0.0;
  double mass = 0.0;  ///< p int_{B_d} u^{p+1}, unweighted
};

struct SpikeMetrics {
  double d = 0.0;
  std::vector<SpikeDiagnostics> spikes;
  double outside_sup = 0.0;  ///< max of u over nodes outside every ball
};

/// Per-ball peak and mass. d defaults to half the minimal center distance, and to
/// 0.25 diam for a single spike. Throws ConfigError when the balls overlap.
SpikeMetrics spike_metrics(const MeshedOperator& op, double p, const std::vector<double>& u,
                           const std::vector<Vec2>& centers, std::optional<double> d = std::nullopt);

struct BranchStage {
  double p = 0.0;
  SpikeConfig cfg;
  SolutionField sol;
  SpikeMetrics metrics;
  double seconds = 0.0;
};

struct Branch {
  std::vector<BranchStage> stages;
  bool truncated = false;
  std::string message;
};

/// For each p in an increasing schedule: regrade, solve for mu, build the ansatz, and run
/// Newton from it. A stage that does not converge truncates the branch.
Branch continuation_in_p(const Domain& dom, const WeightField& weight, SpikeConfig cfg,
                         const std::vector<double>& schedule, double h, double resolution = 0.15,
                         const NewtonOptions& opt = {});

/// |[-div(a grad u) + a u - a u^p] - a [-Delta u - sum k_i/x_i d_i u + u - u^p]| at x for
/// a = x1^k1 x2^k2. The divergence form uses fluxes at half steps with a evaluated exactly;
/// derivatives of u are finite differences. Throws ConfigError unless x1, x2 > 0.
double lift_identity_check(int k1, int k2, const std::function<double(Vec2)>& u, Vec2 x, double p,
                           double h = 2e-4);

}  // namespace spikelab
