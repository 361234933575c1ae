#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "spikelab/ansatz.hpp"
#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"

using namespace spikelab;

namespace {

const double kSqrtE = std::exp(0.5);

SpikeConfig single(double p, Spike s, double mu = 1.0) {
  SpikeConfig c;
  c.p = p;
  c.spikes = {s};
  c.mu = {mu};
  return c;
}

}  // namespace

TEST(Ansatz, ProfileAtCenterAndFarField) {
  const SpikeConfig cfg = single(40.0, interior_spike({0.1, 0.2}), 1.3);
  const double delta = cfg.delta(0);
  const double amp = cfg.amplitude(0);
  const double center = amp * (std::log(8.0 / (delta * delta)) + omega1(0.0) / 40.0 +
                               omega2_profile()(0.0) / 1600.0);
  EXPECT_NEAR(bubble_with_corrections(cfg, 0, {0.1, 0.2}), center, 1e-12 * center);

  // far field: the bubble is -4 log r + log(8 delta^2) up to O(delta^2)
  const Vec2 x{0.6, -0.1};
  const double r = distance(x, cfg.spikes[0].position);
  EXPECT_NEAR(standard_bubble(delta, cfg.spikes[0].position, x),
              -4.0 * std::log(r) + std::log(8.0 * delta * delta), 3.0 * delta * delta / (r * r));
  const double rho = r / delta;
  const double expected = amp * (standard_bubble(delta, cfg.spikes[0].position, x) +
                                 omega1(rho) / 40.0 + omega2_profile()(rho) / 1600.0);
  EXPECT_NEAR(bubble_with_corrections(cfg, 0, x), expected, 1e-9 * std::abs(expected));
}

TEST(Ansatz, ProfileGradientMatchesFiniteDifferences) {
  const SpikeConfig cfg = single(20.0, interior_spike({0, 0}), 0.9);
  const double delta = cfg.delta(0);
  for (double rho : {0.3, 2.0, 40.0, 3000.0}) {
    const Vec2 d = rho * delta * Vec2{0.6, 0.8};
    const ProfileSample s = spike_profile(cfg, 0, d);
    const double h = 1e-5 * rho * delta;
    const double gx = (spike_profile(cfg, 0, d + Vec2{h, 0}).value -
                       spike_profile(cfg, 0, d - Vec2{h, 0}).value) / (2 * h);
    const double gy = (spike_profile(cfg, 0, d + Vec2{0, h}).value -
                       spike_profile(cfg, 0, d - Vec2{0, h}).value) / (2 * h);
    EXPECT_NEAR(s.grad.x, gx, 1e-5 * norm(s.grad)) << rho;
    EXPECT_NEAR(s.grad.y, gy, 1e-5 * norm(s.grad)) << rho;
  }
}

TEST(Ansatz, NearSpikeFormAgreesWithCorrectedBubble) {
  // with mu = 1, U_i / amp differs from p + U_{1,0} + ... by -2 log delta - p = -p/2
  const double p = 40.0;
  const SpikeConfig cfg = single(p, interior_spike({0, 0}), 1.0);
  const double delta = cfg.delta(0);
  const double amp = cfg.amplitude(0);
  for (double rho : {0.0, 0.5, 3.0, 50.0}) {
    const double lhs = spike_profile(cfg, 0, {rho * delta, 0}).value / amp;
    const double rhs = p + bubble_profile(rho) + omega1(rho) / p + omega2_profile()(rho) / (p * p);
    EXPECT_NEAR(lhs - rhs, -p / 2.0, 1e-6) << rho;
  }
}

TEST(Ansatz, CoarseMeshIsRefused) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const SpikeConfig cfg = single(40.0, boundary_spike(disk, 0.2));
  auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.1));
  const MeshedOperator op(mesh, WeightField());
  EXPECT_THROW(projection_correction(op, cfg, 0), SolverError);
}

TEST(Ansatz, ProjectionMatchesAsymptoticFormula) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  for (const bool boundary : {true, false}) {
    double prev = INFINITY;
    for (double p : {20.0, 40.0}) {
      SpikeConfig cfg;
      cfg.p = p;
      cfg.spikes = {boundary ? boundary_spike(disk, 0.1) : interior_spike({0.2, 0.1})};
      double disc[2];
      for (int k = 0; k < 2; ++k) {
        const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1 / (1 << k), 0.15 / (1 << k));
        const std::vector<double> H = projection_correction(*su.op, su.cfg, 0);
        disc[k] = projection_discrepancy(*su.op, su.cfg, 0, H, su.greens[0]);
        // the remainder is O(delta log(1/delta)) for boundary spikes
        const double delta = su.cfg.delta(0);
        EXPECT_LE(disc[k], 4.0 * delta * std::log(1.0 / delta)) << p;
      }
      // mesh-converged to within 1%
      EXPECT_NEAR(disc[0], disc[1], 1e-2 * disc[1]);
      EXPECT_LT(disc[1], 0.1 * prev);
      prev = disc[1];
    }
  }
}

TEST(Ansatz, ProjectionWithVariableWeight) {
  const Domain disk = Domain::disk({2, 0}, 1.0);
  const WeightField w = WeightField::monomial(1, 0);
  SpikeConfig cfg;
  cfg.p = 40.0;
  cfg.spikes = {boundary_spike(disk, 0.0)};
  const SpikeSetup su = setup_spikes(disk, w, cfg, 0.1);
  const std::vector<double> H = projection_correction(*su.op, su.cfg, 0);
  const double delta = su.cfg.delta(0);
  EXPECT_LE(projection_discrepancy(*su.op, su.cfg, 0, H, su.greens[0]),
            4.0 * delta * std::log(1.0 / delta));
}

TEST(Ansatz, BoundsAndPeakApproachSqrtE) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  double prev_peak = 0.0;
  std::vector<double> defects;
  for (double p : {20.0, 40.0, 80.0}) {
    SpikeConfig cfg;
    cfg.p = p;
    cfg.spikes = {boundary_spike(disk, 0.3)};
    const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1);
    const AnsatzField af = build_ansatz(*su.op, su.cfg);
    EXPECT_GT(af.min_value(), 0.0);
    EXPECT_LE(af.max_value(), 2.0 * kSqrtE + 0.05);
    const double peak = af.max_value();
    EXPECT_GT(peak, prev_peak);
    EXPECT_LT(peak, kSqrtE);
    prev_peak = peak;
    defects.push_back(af.defect[0]);
  }
  EXPECT_NEAR(prev_peak, kSqrtE, 0.05 * kSqrtE);
  // matching leaves no p-independent offset: fit defect = c + d/p
  const double c = (defects[2] * 80.0 - defects[1] * 40.0) / 40.0;
  EXPECT_LE(std::abs(c), 0.1);
  EXPECT_LT(defects[2], defects[0]);
}

TEST(Ansatz, FarFieldFollowsGreensFunction) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  SpikeConfig cfg;
  cfg.p = 40.0;
  cfg.spikes = {interior_spike({0.1, -0.2})};
  const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.05);
  const AnsatzField af = build_ansatz(*su.op, su.cfg);
  const AsymptoticConstants& ac = asymptotic_constants();
  const double A = 1.0 - ac.C1 / 160.0 - ac.C2 / 6400.0;
  const double scale = su.cfg.amplitude(0) * A * interaction_constant(SourceKind::Interior);
  const Mesh& m = *af.mesh;
  double worst = 0.0;
  for (std::size_t v = 0; v < m.num_nodes(); ++v) {
    if (distance(m.nodes[v], af.spike_local[0]) < 0.2) continue;
    worst = std::max(worst, std::abs(af.nodal_values[v] - scale * su.greens[0].eval_local(m.nodes[v])));
  }
  EXPECT_LE(worst, 1e-4 * af.max_value());
}
