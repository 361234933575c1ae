#include <chrono>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "spikelab/error.hpp"
#include "spikelab/reduced_energy.hpp"

using namespace spikelab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;

}  // namespace

TEST(Energy, ConstantFields) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.08));
  const MeshedOperator op(mesh, WeightField());
  const double p = 7.0;
  double area = 0.0;
  for (const auto& e : op.elements()) area += e.area;
  EXPECT_NEAR(energy_nodal(op, p, std::vector<double>(mesh->num_nodes(), 1.0)),
              area * (0.5 - 1.0 / (p + 1.0)), 1e-12);
  EXPECT_EQ(energy_nodal(op, p, std::vector<double>(mesh->num_nodes(), 0.0)), 0.0);
}

TEST(Energy, SingleBoundarySpikeNearLeadingTerm) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  SpikeConfig cfg;
  cfg.p = 40.0;
  cfg.spikes = {boundary_spike(disk, 0.3)};
  const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1);
  const AnsatzField af = build_ansatz(*su.op, su.cfg);
  // the -2 log p / p correction alone is 18% at p = 40, so compare against the leading
  // term with it included
  const double leading = kE / (2.0 * cfg.p) * 4.0 * kPi * (1.0 - 2.0 * std::log(cfg.p) / cfg.p);
  EXPECT_NEAR(energy_quadrature(*su.op, af), leading, 0.1 * leading);
}

TEST(Energy, ExpansionAgreesWithQuadrature) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  double prev = INFINITY;
  for (double p : {20.0, 40.0, 80.0}) {
    SpikeConfig cfg;
    cfg.p = p;
    cfg.spikes = {boundary_spike(disk, 0.3)};
    const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1);
    const AnsatzField af = build_ansatz(*su.op, su.cfg);
    const double quad = energy_quadrature(*su.op, af);
    const double expn = energy_expansion(su.cfg, su.interactions, WeightField());
    const double gap = std::abs(expn - quad) / std::abs(expn);
    EXPECT_LE(gap, 3.0 / p) << p;
    EXPECT_LT(gap, prev) << p;
    prev = gap;
  }
}

TEST(Energy, ExpansionIsPermutationInvariant) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const WeightField w = WeightField::monomial(1, 0, {2, 0});
  SpikeConfig cfg;
  cfg.p = 30.0;
  cfg.spikes = {boundary_spike(disk, 0.1), interior_spike({-0.3, 0.2}), boundary_spike(disk, 0.6)};
  auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.08));
  const MeshedOperator op(mesh, w);
  const double f = energy_expansion(cfg, interactions_from(spike_greens(op, cfg), cfg), w);
  SpikeConfig perm = cfg;
  std::swap(perm.spikes[0], perm.spikes[2]);
  std::swap(perm.spikes[1], perm.spikes[2]);
  const double g = energy_expansion(perm, interactions_from(spike_greens(op, perm), perm), w);
  EXPECT_NEAR(f, g, 1e-12 * std::abs(f));
}

TEST(Energy, CloseBoundarySpikesLowerTheExpansion) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.05, {{disk.point(0.0), 0.002, 0.0}}));
  const MeshedOperator op(mesh, WeightField());
  double prev = INFINITY;
  for (double ds : {0.2, 0.1, 0.05, 0.02}) {
    SpikeConfig cfg;
    cfg.p = 30.0;
    cfg.spikes = {boundary_spike(disk, 0.0), boundary_spike(disk, ds)};
    const double f = energy_expansion(cfg, interactions_from(spike_greens(op, cfg), cfg), WeightField());
    EXPECT_LT(f, prev) << ds;
    prev = f;
  }
}

TEST(Separated, GradientMatchesFiniteDifferences) {
  const Domain disk = Domain::disk({2, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField::monomial(1, 2, {0, 1.5}), 3, 2, 25.0);
  const std::vector<double> x{0.05, 0.4, 0.7, 3.0, 7.5};
  const std::vector<double> g = obj.gradient(x);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, x[j]);
    std::vector<double> xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (obj.value(xp) - obj.value(xm)) / (2 * h);
    EXPECT_NEAR(g[j], fd, 1e-6 * std::max(std::abs(g[j]), 1e-3)) << j;
  }
}

TEST(Separated, DepthOptimumIsAStrictMaximum) {
  const Domain disk = Domain::disk({2, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField::monomial(1, 0), 1, 1, 40.0);
  for (double s : {0.0, 0.1, 0.85}) {
    const double ts = obj.t_star(s);
    const Vec2 y = disk.point(s);
    EXPECT_NEAR(ts, 4.0 * y.x / disk.normal(s).x, 1e-12 * ts);
    EXPECT_NEAR(obj.gradient({s, ts})[1], 0.0, 1e-14);
    const auto H = obj.hessian({s, ts});
    EXPECT_LT(H[1][1], 0.0);
  }
}

TEST(Separated, ConstantWeightHasNoDepthOptimum) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField(), 1, 1, 40.0);
  EXPECT_THROW(obj.t_star(0.2), ConfigError);
  EXPECT_THROW(find_critical_separated(obj, {{0.2, NAN}}), ConfigError);
}

TEST(Separated, InteriorSpikeForLinearWeight) {
  // a = x1 on the disk centred at (2, 0): d_nu a > 0 only on the right half, and the
  // boundary maximum of a sits at s = 0, i.e. the point (3, 0)
  const Domain disk = Domain::disk({2, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField::monomial(1, 0), 1, 1, 40.0, 0.05);
  const auto cps = find_critical_separated(obj, {{0.03, NAN}});
  ASSERT_EQ(cps.size(), 1u);
  const CriticalPoint& cp = cps[0];
  EXPECT_TRUE(cp.converged);
  EXPECT_LE(cp.gradient_norm, 1e-8);
  EXPECT_NEAR(Domain::wrap(cp.x[0] + 0.5), 0.5, 1e-9);
  EXPECT_NEAR(cp.x[1], 12.0, 1e-6);
  EXPECT_NEAR(cp.x[1], obj.t_star(cp.x[0]), 1e-6);
  EXPECT_TRUE(cp.in_lambda);
  EXPECT_EQ(cp.kind, CriticalKind::Maximum);
  const auto sp = obj.spikes(cp.x);
  EXPECT_NEAR(sp[0].position.x, 3.0 - 12.0 / 40.0, 1e-9);
}

TEST(Separated, BoundarySpikesApproachExtremaOfTheWeight) {
  const Domain disk = Domain::disk({2, 0}, 1.0);
  for (double p : {20.0, 80.0}) {
    const SeparatedObjective obj(disk, WeightField::monomial(1, 0), 2, 0, p);
    const auto cps = find_critical_separated(obj, {{0.05, 0.45}});
    ASSERT_EQ(cps.size(), 1u);
    EXPECT_TRUE(cps[0].converged);
    EXPECT_NEAR(disk.point(cps[0].x[0]).x, 3.0, 1e-9);
    EXPECT_NEAR(disk.point(cps[0].x[1]).x, 1.0, 1e-9);
    EXPECT_EQ(cps[0].kind, CriticalKind::Saddle);
    EXPECT_TRUE(cps[0].in_lambda);
  }
}

TEST(Separated, RadialWeightGivesDegenerateFamily) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField::bump(1.0, 0.5, {0, 0}, 0.7), 1, 0, 30.0);
  const auto cps = find_critical_separated(obj, {{0.37}});
  EXPECT_TRUE(cps[0].converged);
  EXPECT_EQ(cps[0].kind, CriticalKind::Degenerate);
}

TEST(Separated, Validation) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  EXPECT_THROW(SeparatedObjective(disk, WeightField(), 1, 2, 30.0), ConfigError);
  EXPECT_THROW(SeparatedObjective(disk, WeightField(), 1, 0, 1.0), ConfigError);
}

namespace {

// boundary bump on the disk of radius 2 centred at its rightmost point: grad a = 0 there,
// so d_nu a(xi*) = 0 and xi* is a strict local maximum
WeightField cluster_weight() { return WeightField::bump(0.1, 1.0, {2, 0}, 0.5); }

ClusteredOptions cluster_options(int starts) {
  ClusteredOptions opt;
  opt.h = 0.1;
  opt.h_near = 0.002;
  opt.d = 0.8;
  opt.starts = starts;
  return opt;
}

}  // namespace

TEST(Clustered, SingleBoundarySpikeFindsTheMaximum) {
  const Domain disk = Domain::disk({0, 0}, 2.0);
  const ClusteredResult r = find_critical_clustered(disk, cluster_weight(), 1, 0, 60.0, 0.0, cluster_options(2));
  ASSERT_EQ(r.spikes.size(), 1u);
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_LT(distance(r.spikes[0].position, {2, 0}), 0.02);
  EXPECT_FALSE(r.boundary_trapped);
}

TEST(Clustered, HypothesisViolationIsWarned) {
  const Domain disk = Domain::disk({0, 0}, 2.0);
  ClusteredOptions opt = cluster_options(0);
  opt.max_iter = 1;
  const ClusteredResult r =
      find_critical_clustered(disk, WeightField::monomial(1, 0, {3, 0}), 1, 0, 30.0, 0.0, opt);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Clustered, InteriorAndBoundarySpikeCluster) {
  const Domain disk = Domain::disk({0, 0}, 2.0);
  double prev = INFINITY;
  for (double p : {60.0, 120.0}) {
    const ClusteredResult r = find_critical_clustered(disk, cluster_weight(), 2, 1, p, 0.0, cluster_options(1));
    ASSERT_EQ(r.spikes.size(), 2u);
    EXPECT_EQ(r.spikes[0].kind, SourceKind::Interior);
    EXPECT_EQ(r.spikes[1].kind, SourceKind::Boundary);
    EXPECT_FALSE(r.boundary_trapped) << p;
    EXPECT_GE(r.value, r.initial_value);
    EXPECT_LT(r.min_separation, prev);
    prev = r.min_separation;

    // collapsing the pair onto each other lowers F_p
    const double s = *r.spikes[1].param;
    auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.1, {{disk.point(s), 0.002, s}}));
    const MeshedOperator op(mesh, cluster_weight());
    SpikeConfig close;
    close.p = p;
    close.spikes = {interior_spike(disk.point(s) - 0.02 * disk.normal(s)), r.spikes[1]};
    const double f_close =
        energy_expansion(close, interactions_from(spike_greens(op, close), close), cluster_weight());
    EXPECT_LT(f_close, r.value);
  }
}
