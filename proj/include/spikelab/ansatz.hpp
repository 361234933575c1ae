#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "spikelab/fem.hpp"
#include "spikelab/mu_solver.hpp"

namespace spikelab {

/// Value and gradient of one spike's profile U_i at an offset d = x - xi_i.
struct ProfileSample {
  double value = 0.0;
  Vec2 grad;
};

/// U_i = amp_i [U_{delta_i, xi_i} + omega1(z)/p + omega2(z)/p^2], z = d / delta_i,
/// evaluated at the offset d from the spike. Requires cfg.mu.
ProfileSample spike_profile(const SpikeConfig& cfg, std::size_t i, Vec2 d);
/// Same, at a world point.
double bubble_with_corrections(const SpikeConfig& cfg, std::size_t i, Vec2 x);

/// p + U_{1,0}(z) + omega1(z)/p + omega2(z)/p^2, the near-spike form of U_xi / amp_i.
double near_spike_profile(double p, double rho);

/// Grading centers resolving every delta_i with h_min = resolution * delta_i. Requires cfg.mu.
std::vector<GradingCenter> spike_centers(const Domain& dom, const SpikeConfig& cfg,
                                         double resolution = 0.15);

/// Throws SolverError unless the mesh resolves delta_i at spike i (delta_i >= 2 h_local).
void require_spike_resolution(const Mesh& mesh, const SpikeConfig& cfg, std::size_t i);

/// Nodal H_i solving -Delta_a H + H = grad log a . grad U_i - U_i with dH/dnu = -dU_i/dnu.
std::vector<double> projection_correction(const MeshedOperator& op, const SpikeConfig& cfg,
                                          std::size_t i);

/// sup over nodes of |H_i / amp_i - [A c_i H(x, xi_i) - log(8 delta_i^2) + B log delta_i]|
/// against the regular part computed on the same operator.
double projection_discrepancy(const MeshedOperator& op, const SpikeConfig& cfg, std::size_t i,
                              const std::vector<double>& H_i, const GreenData& green);

struct AnsatzField {
  SpikeConfig cfg;
  std::shared_ptr<const Mesh> mesh;
  std::vector<Vec2> spike_local;
  std::vector<double> nodal_values;
  struct Piece {
    std::vector<double> U;
    std::vector<double> H;
  };
  std::vector<Piece> per_spike;
  /// Per spike: max over nodes in the near-spike ball of |U_xi / amp_i - near_spike_profile|.
  std::vector<double> defect;
  std::vector<double> defect_radius;

  /// Analytic U_i plus interpolated H_i at a local point.
  double value(Vec2 local) const;
  /// Value and gradient inside triangle t; grad H_i is the P1 gradient on t.
  ProfileSample sample(Vec2 local, int t, const std::array<double, 3>& lambda,
                       const std::vector<ElementGeometry>& elements) const;
  double max_value() const;
  double min_value() const;

  /// "x,y,u" rows in world coordinates.
  void export_csv(std::ostream& os) const;
};

/// Operator on a mesh resolving every spike, with Green's data, interactions and mu.
struct SpikeSetup {
  SpikeConfig cfg;
  std::shared_ptr<const MeshedOperator> op;
  std::vector<GreenData> greens;
  Interactions interactions;
  MuResult mu;
};

/// Solves for mu on a mesh graded only for the Green's functions, regrades with
/// h_min = resolution * delta_i at every spike, then recomputes the Green's data and mu
/// on the final mesh.
SpikeSetup setup_spikes(const Domain& dom, const WeightField& weight, SpikeConfig cfg, double h,
                        double resolution = 0.15, const MuOptions& mu_opt = {});

/// Sums the per-spike pieces. Requires cfg.mu (from solve_mu) and a mesh resolving each
/// delta_i.
AnsatzField build_ansatz(const MeshedOperator& op, const SpikeConfig& cfg);

}  // namespace spikelab
