// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"
#include "spikelab/experiment.hpp"
#include "spikelab/greens.hpp"
#include "spikelab/pde_verify.hpp"
#include "spikelab/reduced_energy.hpp"

using namespace spikelab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;
const double kC1 = 12.0 - 4.0 * std::log(8.0);

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double laplacian_fd(const std::function<double(double)>& w, double r) {
  const auto lap = [&](double h) {
    const double d2 = (w(r + h) - 2.0 * w(r) + w(r - h)) / (h * h);
    const double d1 = (w(r + h) - w(r - h)) / (2.0 * h);
    return d2 + d1 / r;
  };
  // step balances truncation against rounding in the closed-form values
  const double h = 1e-2 * std::max(0.1, r);
  return (4.0 * lap(0.5 * h) - lap(h)) / 3.0;
}

std::shared_ptr<MeshedOperator> green_op(const Domain& dom, const WeightField& w, double h,
                                         const std::vector<std::pair<Vec2, SourceKind>>& src) {
  auto mesh = std::make_shared<Mesh>(build_mesh(dom, h, green_centers(dom, h, src)));
  return std::make_shared<MeshedOperator>(mesh, w);
}

Outcome constants() {
  const auto t0 = std::chrono::steady_clock::now();
  const double c1 = constant_Cj(f1);
  const double t = seconds_since(t0);
  return {std::abs(c1 - kC1) <= 1e-6 && t < 1.0, fmt("C1 = %.10f (err %.2e), %.3f s", c1, std::abs(c1 - kC1), t)};
}

Outcome omega1_closed_form() {
  double worst = 0.0;
  for (double r = 0.1; r <= 100.0; r *= 1.05) {
    worst = std::max(worst, std::abs(laplacian_fd(omega1, r) + bubble_weight(r) * (omega1(r) - f1(r))));
  }
  const double fitted = tabulate_omega1().fitted_C;
  return {worst <= 1e-6 && std::abs(fitted - kC1) <= 1e-4,
          fmt("ODE residual %.2e, fitted C %.8f (err %.2e)", worst, fitted, std::abs(fitted - kC1))};
}

Outcome omega2_solver() {
  const RadialProfile p = solve_radial(f1);
  // remove the Z0 component by least squares, then take the sup
  double num = 0.0, den = 0.0;
  std::vector<double> diff(p.r.size()), z(p.r.size());
  for (std::size_t i = 0; i < p.r.size(); ++i) {
    const double r = p.r[i];
    diff[i] = p.value[i] - omega1(r);
    z[i] = (r * r - 1.0) / (r * r + 1.0);
    num += diff[i] * z[i];
    den += z[i] * z[i];
  }
  const double c = num / den;
  double sup = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) sup = std::max(sup, std::abs(diff[i] - c * z[i]));
  return {sup <= 1e-5, fmt("sup difference modulo Z0 %.2e (Z0 coefficient %.3e)", sup, c)};
}

Outcome reciprocity() {
  struct Case {
    const char* name;
    Domain dom;
    WeightField w;
  };
  const std::vector<Case> cases{{"a=1", Domain::disk({0, 0}, 1.0), WeightField()},
                                {"a=x1", Domain::disk({2, 0}, 1.0), WeightField::monomial(1, 0)}};
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(2024);
  for (const Case& c : cases) {
    const Vec2 center = c.dom.point(0.0) - c.dom.normal(0.0);
    std::uniform_real_distribution<double> u(-0.65, 0.65);
    std::vector<std::pair<Vec2, Vec2>> pairs;
    while (pairs.size() < 10) {
      const Vec2 a = center + Vec2{u(rng), u(rng)}, b = center + Vec2{u(rng), u(rng)};
      if (distance(a, center) > 0.7 || distance(b, center) > 0.7 || distance(a, b) < 0.2) continue;
      pairs.emplace_back(a, b);
    }
    std::vector<std::pair<Vec2, SourceKind>> src;
    for (const auto& [a, b] : pairs) {
      src.emplace_back(a, SourceKind::Interior);
      src.emplace_back(b, SourceKind::Interior);
    }
    double worst[2];
    for (int k = 0; k < 2; ++k) {
      const auto op = green_op(c.dom, c.w, 0.02 / (1 << k), src);
      worst[k] = 0.0;
      for (const auto& [y1, y2] : pairs) {
        const GreenData g1 = regular_part(*op, y1, SourceKind::Interior);
        const GreenData g2 = regular_part(*op, y2, SourceKind::Interior);
        const double lhs = c.w.eval(y2) * g1.eval(y2);
        const double rhs = c.w.eval(y1) * g2.eval(y1);
        worst[k] = std::max(worst[k], std::abs(lhs - rhs) / std::abs(rhs));
      }
    }
    const double order = std::log2(worst[0] / worst[1]);
    ok = ok && worst[0] <= 5e-3 && order >= 1.0;
    detail += fmt("%s: %.2e -> %.2e (order %.2f); ", c.name, worst[0], worst[1], order);
  }
  return {ok, detail};
}

Outcome robin_blow_up() {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const double s = 0.1;
  double lo = INFINITY, hi = -INFINITY;
  for (double depth : {0.1, 0.05, 0.025}) {
    const Vec2 y = disk.point(s) - depth * disk.normal(s);
    const auto op = green_op(disk, WeightField(), 0.05, {{y, SourceKind::Interior}});
    const double z = robin_function(*op, y, SourceKind::Interior).value - std::log(1.0 / (2.0 * depth)) / (2.0 * kPi);
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  return {hi - lo < 0.1, fmt("z in [%.4f, %.4f], spread %.4f", lo, hi, hi - lo)};
}

Outcome mu_system() {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  SpikeConfig cfg;
  cfg.spikes = {interior_spike({0.2, 0.1}), boundary_spike(disk, 0.6)};
  const auto op = green_op(disk, WeightField(), 0.05,
                           {{cfg.spikes[0].position, SourceKind::Interior}, {cfg.spikes[1].position, SourceKind::Boundary}});
  double gap[2], res = 0.0;
  for (int k = 0; k < 2; ++k) {
    cfg.p = 40.0 * (1 << k);
    const Interactions in = interactions_from(spike_greens(*op, cfg), cfg);
    const MuResult r = solve_mu(cfg, in);
    const std::vector<double> lim = mu_limit(cfg, in);
    res = std::max(res, r.residual);
    gap[k] = 0.0;
    for (std::size_t i = 0; i < lim.size(); ++i) gap[k] = std::max(gap[k], std::abs(r.mu[i] / lim[i] - 1.0));
  }
  const double factor = gap[0] / gap[1];
  return {res <= 1e-12 && factor >= 1.7, fmt("residual %.2e, gap %.3e -> %.3e (factor %.2f)", res, gap[0], gap[1], factor)};
}

Outcome ansatz_cross_check() {
  // literal trend check: the discrepancy must decrease both under h -> h/2 and p 20 -> 40
  const Domain disk = Domain::disk({0, 0}, 1.0);
  double disc[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      SpikeConfig cfg;
      cfg.p = 20.0 * (1 << i);
      cfg.spikes = {boundary_spike(disk, 0.1)};
      const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1 / (1 << k), 0.15 / (1 << k));
      const std::vector<double> H = projection_correction(*su.op, su.cfg, 0);
      disc[i][k] = projection_discrepancy(*su.op, su.cfg, 0, H, su.greens[0]);
    }
  }
  const bool in_p = disc[1][0] < disc[0][0] && disc[1][1] < disc[0][1];
  const bool in_h = disc[0][1] < disc[0][0] && disc[1][1] < disc[1][0];
  return {in_p && in_h, fmt("p=20: %.4e (h) %.4e (h/2); p=40: %.4e (h) %.4e (h/2)", disc[0][0], disc[0][1],
                            disc[1][0], disc[1][1])};
}

Outcome energy_expansion_gap() {
  const Domain disk = Domain::disk({0, 0}, 1.0);
  double prev = INFINITY;
  bool ok = true;
  std::string detail;
  for (double p : {20.0, 40.0, 80.0}) {
    SpikeConfig cfg;
    cfg.p = p;
    cfg.spikes = {boundary_spike(disk, 0.3)};
    const SpikeSetup su = setup_spikes(disk, WeightField(), cfg, 0.1);
    const AnsatzField af = build_ansatz(*su.op, su.cfg);
    const double quad = energy_quadrature(*su.op, af);
    const double expn = energy_expansion(su.cfg, su.interactions, WeightField());
    const double gap = std::abs(expn - quad) / std::abs(expn);
    ok = ok && gap <= 3.0 / p && gap < prev;
    prev = gap;
    detail += fmt("p=%g gap %.3e (bound %.3e); ", p, gap, 3.0 / p);
  }
  return {ok, detail};
}

Outcome separated_critical_point() {
  const Domain disk = Domain::disk({2, 0}, 1.0);
  const SeparatedObjective obj(disk, WeightField::monomial(1, 0), 1, 1, 40.0, 0.05);
  const auto cps = find_critical_separated(obj, {{0.03, NAN}});
  if (cps.size() != 1) return {false, fmt("%zu critical points", cps.size())};
  const CriticalPoint& cp = cps[0];
  const double t_err = std::abs(cp.x[1] - obj.t_star(cp.x[0]));
  return {cp.converged && t_err <= 1e-6 && cp.gradient_norm <= 1e-8,
          fmt("s = %.9f, t = %.9f, |t - t*| %.2e, |grad| %.2e", cp.x[0], cp.x[1], t_err, cp.gradient_norm)};
}

Outcome branches() {
  const auto t0 = std::chrono::steady_clock::now();
  const Domain disk = Domain::disk({0, 0}, 1.0);
  const double sqrt_e = std::exp(0.5);
  const std::vector<double> schedule{20, 30, 45, 67, 100};
  bool ok = true;
  std::string detail;
  for (const bool interior : {false, true}) {
    SpikeConfig cfg;
    cfg.spikes = {interior ? interior_spike({0, 0}) : boundary_spike(disk, 0.0)};
    const Branch br = continuation_in_p(disk, WeightField(), cfg, schedule, 0.05);
    const double target = (interior ? 8.0 : 4.0) * kPi * kE;
    if (br.truncated || br.stages.size() != schedule.size()) {
      ok = false;
      detail += std::string(interior ? "interior" : "boundary") + ": truncated (" + br.message + "); ";
      continue;
    }
    bool monotone = true;
    for (std::size_t k = 0; k < br.stages.size(); ++k) {
      if (!br.stages[k].sol.converged) monotone = false;
      if (k > 0) {
        const auto& a = br.stages[k - 1].metrics.spikes[0];
        const auto& b = br.stages[k].metrics.spikes[0];
        if (!(b.peak > a.peak && b.mass > a.mass)) monotone = false;
      }
    }
    const auto& last = br.stages.back().metrics.spikes[0];
    const double peak_err = std::abs(last.peak / sqrt_e - 1.0);
    const double mass_err = std::abs(last.mass / target - 1.0);
    ok = ok && monotone && peak_err <= 0.1 && mass_err <= 0.2;
    detail += fmt("%s: peak %.4f (%.1f%%), mass %.2f vs %.2f (%.1f%%), %s; ", interior ? "interior" : "boundary",
                  last.peak, 100 * peak_err, last.mass, target, 100 * mass_err, monotone ? "monotone" : "not monotone");
  }
  const double t = seconds_since(t0);
  ok = ok && t <= 1800.0;
  return {ok, detail + fmt("%.0f s", t)};
}

Outcome clustered() {
  const ExperimentConfig cfg = preset("bump-cluster");
  std::vector<double> lp, ls;
  bool trapped = false;
  std::string detail;
  for (double p : cfg.p_schedule) {
    const ClusteredResult r =
        find_critical_clustered(cfg.domain, cfg.weight, cfg.m, cfg.l, p, cfg.xi_star_s, cfg.clustered);
    trapped = trapped || r.boundary_trapped;
    lp.push_back(std::log(p));
    ls.push_back(std::log(r.min_separation));
    detail += fmt("p=%g sep %.4e%s; ", p, r.min_separation, r.boundary_trapped ? " (trapped)" : "");
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lp.size(); ++i) mx += lp[i] / lp.size(), my += ls[i] / ls.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lp.size(); ++i) sxy += (lp[i] - mx) * (ls[i] - my), sxx += (lp[i] - mx) * (lp[i] - mx);
  const double slope = sxy / sxx;
  return {!trapped && slope < 0.0, detail + fmt("slope %.3f", slope)};
}

Outcome lift() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(0.3, 1.7);
  const std::vector<std::function<double(Vec2)>> fields{
      [](Vec2 x) { return 1.5 + std::sin(x.x) * std::cos(2.0 * x.y) + 0.1 * x.x * x.y; },
      [](Vec2 x) { return std::exp(-0.5 * (x.x * x.x + x.y * x.y)) + 0.3; },
  };
  double worst = 0.0;
  for (auto [k1, k2] : {std::pair{1, 0}, {1, 1}, {2, 3}}) {
    for (const auto& u : fields) {
      for (int n = 0; n < 100; ++n) worst = std::max(worst, lift_identity_check(k1, k2, u, {coord(rng), coord(rng)}, 4.0));
    }
  }
  return {worst <= 1e-6, fmt("worst residual %.2e", worst)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / fmt("spikelab_acceptance_%d", static_cast<int>(::getpid()));
  std::string detail;
  bool ok = true;
  for (const char* command : {"lift-check", "mu"}) {
    ExperimentConfig cfg = preset("disk-boundary-spike");
    cfg.seed = 17;
    const auto a = base / command / "a", b = base / command / "b";
    run_experiment(command, cfg, a);
    run_experiment(command, cfg, b);
    const std::string ra = slurp(a / "report.json"), rb = slurp(b / "report.json");
    const bool same = !ra.empty() && ra == rb;
    ok = ok && same;
    detail += fmt("%s: %zu bytes, %s; ", command, ra.size(), same ? "identical" : "differ");
  }
  std::filesystem::remove_all(base);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"constants C1", constants},
      {"omega1 closed form", omega1_closed_form},
      {"radial solver reproduces omega1", omega2_solver},
      {"Green's reciprocity", reciprocity},
      {"Robin boundary blow-up", robin_blow_up},
      {"mu system", mu_system},
      {"projection cross-check", ansatz_cross_check},
      {"energy expansion vs quadrature", energy_expansion_gap},
      {"separated critical point", separated_critical_point},
      {"Newton branches", branches},
      {"clustered regime", clustered},
      {"lift identity", lift},
      {"determinism", determinism},
  };
  int failed = 0, n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", n - failed, n);
  return failed == 0 ? 0 : 1;
}
