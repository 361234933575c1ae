#include <cmath>
#include <memory>
#include <numbers>

#include <gsl/gsl_multiroots.h>
#include <gtest/gtest.h>

#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"
#include "spikelab/mu_solver.hpp"

using namespace spikelab;

namespace {

Interactions synthetic(std::vector<double> robin, Eigen::MatrixXd green) {
  Interactions in;
  in.robin = std::move(robin);
  in.green = std::move(green);
  return in;
}

SpikeConfig config(double p, std::vector<Spike> s) {
  SpikeConfig c;
  c.p = p;
  c.spikes = std::move(s);
  return c;
}

struct GslData {
  const SpikeConfig* cfg;
  const Interactions* in;
};

// the matching system written out independently, unknowns log mu
int gsl_system(const gsl_vector* x, void* params, gsl_vector* f) {
  const auto* d = static_cast<const GslData*>(params);
  const double p = d->cfg->p;
  const double c1 = 12.0 - 4.0 * std::log(8.0);
  const double c2 = asymptotic_constants().C2;
  const double A = 1.0 - c1 / (4 * p) - c2 / (4 * p * p);
  const double B = c1 / p + c2 / (p * p);
  const std::size_t m = d->cfg->m();
  for (std::size_t i = 0; i < m; ++i) {
    const double li = gsl_vector_get(x, i);
    const double ci = d->cfg->spikes[i].kind == SourceKind::Interior ? 8 * std::numbers::pi : 4 * std::numbers::pi;
    double rhs = A * ci * d->in->robin[i] + B * std::log(std::exp(-p / 4) * std::exp(li));
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      const double ck = d->cfg->spikes[k].kind == SourceKind::Interior ? 8 * std::numbers::pi : 4 * std::numbers::pi;
      const double ratio = std::exp(li - gsl_vector_get(x, k));
      rhs += A * std::pow(ratio, 2.0 / (p - 1)) * ck *
             d->in->green(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    gsl_vector_set(f, i, std::log(8.0 * std::exp(4 * li)) - rhs);
  }
  return GSL_SUCCESS;
}

std::vector<double> gsl_solve(const SpikeConfig& cfg, const Interactions& in) {
  GslData data{&cfg, &in};
  const std::size_t m = cfg.m();
  gsl_multiroot_function fn{&gsl_system, m, &data};
  gsl_vector* x = gsl_vector_alloc(m);
  gsl_vector_set_all(x, 0.0);
  gsl_multiroot_fsolver* s = gsl_multiroot_fsolver_alloc(gsl_multiroot_fsolver_hybrids, m);
  gsl_multiroot_fsolver_set(s, &fn, x);
  for (int it = 0; it < 500; ++it) {
    if (gsl_multiroot_fsolver_iterate(s)) break;
    if (gsl_multiroot_test_residual(s->f, 1e-14) == GSL_SUCCESS) break;
  }
  std::vector<double> mu(m);
  for (std::size_t i = 0; i < m; ++i) mu[i] = std::exp(gsl_vector_get(s->x, i));
  gsl_multiroot_fsolver_free(s);
  gsl_vector_free(x);
  return mu;
}

}  // namespace

TEST(SpikeConfig, ScalingConstants) {
  SpikeConfig c = config(40.0, {interior_spike({0, 0})});
  c.mu = {1.7};
  EXPECT_NEAR(c.eps(), std::exp(-10.0), 1e-14 * std::exp(-10.0));
  // gamma via eps: p^{p/(p-1)} eps^{2/(p-1)}
  const double alt = std::pow(40.0, 40.0 / 39.0) * std::pow(c.eps(), 2.0 / 39.0);
  EXPECT_NEAR(c.gamma() / alt, 1.0, 1e-14);
  EXPECT_NEAR(c.delta(0) / (1.7 * c.eps()), 1.0, 1e-14);
  EXPECT_EQ(c.kappa(), 4.0);
  EXPECT_EQ(config(40.0, {interior_spike({0, 0}), interior_spike({0.5, 0})}).kappa(), 10.0);
}

TEST(SpikeConfig, Validation) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  EXPECT_NO_THROW(config(20.0, {interior_spike({0, 0}), boundary_spike(disk, 0.2)}).validate(disk));
  EXPECT_THROW(config(20.0, {boundary_spike(disk, 0.2), interior_spike({0, 0})}).validate(disk),
               ConfigError);
  EXPECT_THROW(config(1.0, {interior_spike({0, 0})}).validate(disk), ConfigError);
  // p = 3, m = 2: threshold 3^-10 ~ 1.7e-5
  EXPECT_THROW(config(3.0, {interior_spike({0, 0}), interior_spike({1e-5, 0})}).validate(disk),
               ConfigError);
  EXPECT_NO_THROW(config(3.0, {interior_spike({0, 0}), interior_spike({1e-4, 0})}).validate(disk));
}

TEST(MuSolver, SingleInteriorSpikeApproachesLimit) {
  const Interactions in = synthetic({-0.25}, Eigen::MatrixXd::Zero(1, 1));
  const double limit = std::exp(-0.75 + 2.0 * std::numbers::pi * -0.25);
  double prev_gap = INFINITY;
  for (double p : {20.0, 40.0, 80.0, 160.0, 320.0}) {
    const SpikeConfig cfg = config(p, {interior_spike({0, 0})});
    const MuResult r = solve_mu(cfg, in);
    EXPECT_LE(r.residual, 1e-12);
    EXPECT_NEAR(mu_limit(cfg, in)[0], limit, 1e-15);
    const double gap = std::abs(r.mu[0] / limit - 1.0);
    const double lp = std::log(p);
    EXPECT_LE(gap, 2.0 * lp * lp / p) << p;
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
}

TEST(MuSolver, BoundarySpikeLimitUsesFourPi) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const Interactions in = synthetic({0.4}, Eigen::MatrixXd::Zero(1, 1));
  const SpikeConfig cfg = config(60.0, {boundary_spike(disk, 0.0)});
  EXPECT_NEAR(mu_limit(cfg, in)[0], std::exp(-0.75 + std::numbers::pi * 0.4), 1e-14);
}

TEST(MuSolver, ResidualDecreasesMonotonicallyAfterStart) {
  Eigen::MatrixXd g(3, 3);
  g << 0, 0.3, 0.1, 0.2, 0, 0.25, 0.12, 0.3, 0;
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const SpikeConfig cfg = config(30.0, {interior_spike({0, 0}), interior_spike({0.3, 0}),
                                        boundary_spike(disk, 0.5)});
  const MuResult r = solve_mu(cfg, synthetic({-0.2, 0.1, 0.5}, g));
  EXPECT_LE(r.residual, 1e-12);
  for (std::size_t k = 4; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1]);
  const double bound = 1e3 * std::pow(30.0, cfg.kappa());
  for (double mu : r.mu) {
    EXPECT_GE(mu, 1e-3);
    EXPECT_LE(mu, bound);
  }
}

TEST(MuSolver, NonContractionIsReported) {
  Eigen::MatrixXd g(2, 2);
  g << 0, 40.0, 40.0, 0;
  const SpikeConfig cfg = config(1.2, {interior_spike({0, 0}), interior_spike({0.5, 0})});
  EXPECT_THROW(solve_mu(cfg, synthetic({-3.0, 3.0}, g)), SolverError);
}

TEST(MuSolver, TwoSpikesOnDiskMatchIndependentRootFinder) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  SpikeConfig cfg = config(50.0, {interior_spike({-0.3, 0.1}), boundary_spike(disk, 0.1)});
  cfg.validate(disk);
  std::vector<std::pair<Vec2, SourceKind>> src;
  for (const Spike& s : cfg.spikes) src.emplace_back(s.position, s.kind);
  auto mesh = std::make_shared<Mesh>(build_mesh(disk, 0.05, green_centers(disk, 0.05, src)));
  const MeshedOperator op(mesh, WeightField());
  const Interactions in = interactions_from(spike_greens(op, cfg), cfg);
  // G is symmetric for a == 1 up to discretisation error
  EXPECT_NEAR(in.green(0, 1), in.green(1, 0), 5e-3 * std::abs(in.green(0, 1)));
  const MuResult r = solve_mu(cfg, in);
  EXPECT_LE(r.residual, 1e-12);
  const std::vector<double> oracle = gsl_solve(cfg, in);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.mu[i] / oracle[i], 1.0, 1e-12);
}

TEST(MuSolver, SensitivityToSpikeMotionIsModerate) {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const double p = 40.0;
  const auto log_mu = [&](Vec2 y) {
    const SpikeConfig cfg = config(p, {interior_spike(y)});
    auto mesh = std::make_shared<Mesh>(
        build_mesh(disk, 0.05, green_centers(disk, 0.05, {{y, SourceKind::Interior}})));
    const MeshedOperator op(mesh, WeightField());
    return std::log(solve_mu(cfg, interactions_from(spike_greens(op, cfg), cfg)).mu[0]);
  };
  const Vec2 y{0.4, 0.1};
  const double h = 1e-2;
  const double dx = (log_mu(y + Vec2{h, 0}) - log_mu(y - Vec2{h, 0})) / (2 * h);
  const double dy = (log_mu(y + Vec2{0, h}) - log_mu(y - Vec2{0, h})) / (2 * h);
  EXPECT_LE(std::hypot(dx, dy), 1e3 * std::pow(p, 4.0));
  EXPECT_TRUE(std::isfinite(dx) && std::isfinite(dy));
}
