#include "spikelab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "spikelab/ansatz.hpp"
#include "spikelab/bubble.hpp"
#include "spikelab/error.hpp"
#include "spikelab/greens.hpp"
#include "spikelab/pde_verify.hpp"

namespace spikelab {

using nlohmann::json;
namespace fs = std::filesystem;

double round15(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return std::strtod(buf, nullptr);
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

double get_number(const json& j, const std::string& key, const std::string& field) {
  if (!j.contains(key)) field_error(field + "." + key, "missing");
  if (!j.at(key).is_number()) field_error(field + "." + key, "must be a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& field) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) field_error(field + "." + key, "must be a number");
  return j.at(key).get<double>();
}

Vec2 get_vec(const json& j, const std::string& key, const std::string& field) {
  if (!j.contains(key)) field_error(field + "." + key, "missing");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    field_error(field + "." + key, "must be a pair of numbers");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

Vec2 vec_or(const json& j, const std::string& key, Vec2 fallback, const std::string& field) {
  return j.contains(key) ? get_vec(j, key, field) : fallback;
}

Domain parse_domain(const json& j) {
  if (!j.is_object()) field_error("domain", "must be a table");
  const std::string type = j.value("type", "disk");
  try {
    if (type == "disk") {
      const double r = get_number(j, "radius", "domain");
      if (!(r > 0.0)) field_error("domain.radius", "must be positive");
      return Domain::disk(vec_or(j, "center", {0, 0}, "domain"), r);
    }
    if (type == "ellipse") {
      return Domain::ellipse(vec_or(j, "center", {0, 0}, "domain"), get_number(j, "semi_x", "domain"),
                             get_number(j, "semi_y", "domain"));
    }
    if (type == "smoothed_rect") {
      return Domain::smoothed_rect(vec_or(j, "center", {0, 0}, "domain"),
                                   get_number(j, "half_width", "domain"),
                                   get_number(j, "half_height", "domain"),
                                   get_number(j, "corner_radius", "domain"));
    }
    if (type == "spline") {
      if (!j.contains("knots") || !j.at("knots").is_array()) field_error("domain.knots", "must be a list of points");
      std::vector<Vec2> knots;
      for (std::size_t k = 0; k < j.at("knots").size(); ++k) {
        const json& kn = j.at("knots")[k];
        if (!kn.is_array() || kn.size() != 2) field_error("domain.knots", "each knot must be a pair");
        knots.push_back({kn[0].get<double>(), kn[1].get<double>()});
      }
      return Domain::spline(std::move(knots));
    }
  } catch (const GeometryError& e) {
    field_error("domain", e.what());
  }
  field_error("domain.type", "unknown type '" + type + "' (disk, ellipse, smoothed_rect, spline)");
}

WeightField parse_weight(const json& j, const std::string& field) {
  if (!j.is_object()) field_error(field, "must be a table");
  const std::string type = j.value("type", "constant");
  if (type == "constant") {
    const double v = number_or(j, "value", 1.0, field);
    if (!(v > 0.0)) field_error(field + ".value", "must be positive");
    return WeightField::constant(v);
  }
  if (type == "monomial") {
    const double k1 = number_or(j, "k1", 0.0, field), k2 = number_or(j, "k2", 0.0, field);
    if (k1 < 0.0 || k2 < 0.0) field_error(field, "exponents must be nonnegative");
    return WeightField::monomial(k1, k2, vec_or(j, "offset", {0, 0}, field));
  }
  if (type == "bump") {
    const double base = get_number(j, "base", field), amp = get_number(j, "amplitude", field);
    const double sigma = get_number(j, "sigma", field);
    if (!(base > 0.0)) field_error(field + ".base", "must be positive");
    if (amp < 0.0) field_error(field + ".amplitude", "must be nonnegative");
    if (!(sigma > 0.0)) field_error(field + ".sigma", "must be positive");
    return WeightField::bump(base, amp, get_vec(j, "center", field), sigma);
  }
  if (type == "product") {
    if (!j.contains("factors") || !j.at("factors").is_array() || j.at("factors").empty()) {
      field_error(field + ".factors", "must be a nonempty list");
    }
    WeightField w = parse_weight(j.at("factors")[0], field + ".factors[0]");
    for (std::size_t k = 1; k < j.at("factors").size(); ++k) {
      w = WeightField::product(w, parse_weight(j.at("factors")[k], field + ".factors[" + std::to_string(k) + "]"));
    }
    return w;
  }
  field_error(field + ".type", "unknown type '" + type + "' (constant, monomial, bump, product)");
}

// monomial factors need x_i + b_i > 0 on the closure of the domain wherever k_i != 0
void check_quadrant(const json& j, const Domain& dom, const std::string& field) {
  const std::string type = j.value("type", "constant");
  if (type == "product") {
    for (std::size_t k = 0; k < j.at("factors").size(); ++k) {
      check_quadrant(j.at("factors")[k], dom, field + ".factors[" + std::to_string(k) + "]");
    }
    return;
  }
  if (type != "monomial") return;
  const Vec2 off = vec_or(j, "offset", {0, 0}, field);
  const BBox bb = dom.bbox();
  if (number_or(j, "k1", 0.0, field) != 0.0 && !(bb.lo.x + off.x > 0.0)) {
    field_error(field, "monomial weight needs x1 + b1 > 0 on the domain (positive quadrant); min is " +
                           std::to_string(bb.lo.x + off.x));
  }
  if (number_or(j, "k2", 0.0, field) != 0.0 && !(bb.lo.y + off.y > 0.0)) {
    field_error(field, "monomial weight needs x2 + b2 > 0 on the domain (positive quadrant); min is " +
                           std::to_string(bb.lo.y + off.y));
  }
}

json vec_json(Vec2 v) { return json::array({round15(v.x), round15(v.y)}); }

json spike_json(const Spike& s) {
  json j{{"kind", to_string(s.kind)}, {"x", vec_json(s.position)}};
  if (s.param) j["s"] = round15(*s.param);
  return j;
}

json check(const std::string& name, double value, double tolerance, bool pass) {
  return json{{"name", name}, {"value", round15(value)}, {"tolerance", round15(tolerance)}, {"pass", pass}};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << std::setprecision(15);
  return os;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
}

struct Context {
  const ExperimentConfig& cfg;
  fs::path out;
  json report;
  std::vector<std::string> artifacts;

  void stage(const std::string& name, const std::function<void(json&)>& body) {
    json st{{"name", name}};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(st);
      st["status"] = "ok";
    } catch (const std::exception& e) {
      st["status"] = "failed";
      st["message"] = e.what();
      report["status"] = "failed";
    }
    // wall time goes to stderr only; the report must be reproducible
    std::cerr << name << ": " << st["status"].get<std::string>() << " ("
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
    report["stages"].push_back(std::move(st));
  }

  void artifact(const std::string& name) { artifacts.push_back(name); }
};

SpikeConfig spike_config(const ExperimentConfig& cfg, double p) {
  SpikeConfig sc;
  sc.p = p;
  sc.spikes = configured_spikes(cfg);
  return sc;
}

void add_check(json& st, json c) {
  st["checks"].push_back(c);
}

// ---------------------------------------------------------------- subcommands

void cmd_constants(Context& ctx) {
  ctx.stage("constants", [&](json& st) {
    const AsymptoticConstants& ac = asymptotic_constants();
    const double mass = bubble_mass();
    json c{{"C1", round15(ac.C1)}, {"C2", round15(ac.C2)}, {"K", round15(ac.K)}, {"bubble_mass", round15(mass)}};
    write_json(ctx.out / "constants.json", c);
    ctx.artifact("constants.json");
    st["values"] = c;
    const double c1 = 12.0 - 4.0 * std::log(8.0);
    add_check(st, check("C1 = 12 - 4 log 8", std::abs(ac.C1 - c1), 1e-6, std::abs(ac.C1 - c1) <= 1e-6));
    add_check(st, check("bubble mass = 8 pi", std::abs(mass - 8 * kPi), 1e-8, std::abs(mass - 8 * kPi) <= 1e-8));
  });
}

void cmd_greens(Context& ctx) {
  ctx.stage("greens", [&](json& st) {
    const ExperimentConfig& cfg = ctx.cfg;
    const SpikeConfig sc = spike_config(cfg, cfg.p_schedule.front());
    std::vector<std::pair<Vec2, SourceKind>> sources;
    for (const Spike& s : sc.spikes) sources.emplace_back(s.position, s.kind);
    auto mesh = std::make_shared<Mesh>(build_mesh(cfg.domain, cfg.h, green_centers(cfg.domain, cfg.h, sources)));
    const MeshedOperator op(mesh, cfg.weight);
    const std::vector<GreenData> greens = spike_greens(op, sc);
    std::ofstream os = open_out(ctx.out / "greens.csv");
    os << "source,x,y,H,G\n";
    json robin = json::array();
    for (std::size_t i = 0; i < greens.size(); ++i) {
      const GreenData& g = greens[i];
      for (std::size_t v = 0; v < mesh->num_nodes(); ++v) {
        const Vec2 x = mesh->world(mesh->nodes[v]);
        os << i << ',' << x.x << ',' << x.y << ',' << g.H[v] << ',';
        if (distance(mesh->nodes[v], g.source_local) >= 0.1 * g.local_size) os << g.eval_local(mesh->nodes[v]);
        os << '\n';
      }
      robin.push_back(json{{"source", spike_json(sc.spikes[i])},
                           {"robin", round15(g.robin)},
                           {"robin_fit_rms", round15(g.robin_error)},
                           {"solve_residual_ok", g.residual <= 1e-10}});
    }
    ctx.artifact("greens.csv");
    st["nodes"] = mesh->num_nodes();
    st["sources"] = robin;
  });
}

void cmd_mu(Context& ctx) {
  ctx.stage("mu", [&](json& st) {
    const ExperimentConfig& cfg = ctx.cfg;
    json runs = json::array();
    for (double p : cfg.p_schedule) {
      const SpikeSetup su = setup_spikes(cfg.domain, cfg.weight, spike_config(cfg, p), cfg.h, cfg.resolution);
      const std::vector<double> lim = mu_limit(su.cfg, su.interactions);
      json r{{"p", round15(p)}, {"iterations", su.mu.iterations}, {"residual", round15(su.mu.residual)}};
      for (std::size_t i = 0; i < su.cfg.m(); ++i) {
        r["mu"].push_back(round15(su.mu.mu[i]));
        r["mu_limit"].push_back(round15(lim[i]));
        r["robin"].push_back(round15(su.interactions.robin[i]));
      }
      add_check(st, check("mu residual at p = " + std::to_string(static_cast<int>(p)), su.mu.residual, 1e-12,
                          su.mu.residual <= 1e-12));
      runs.push_back(std::move(r));
    }
    write_json(ctx.out / "mu.json", json{{"runs", runs}});
    ctx.artifact("mu.json");
    st["runs"] = runs;
  });
}

void cmd_ansatz(Context& ctx) {
  ctx.stage("ansatz", [&](json& st) {
    const ExperimentConfig& cfg = ctx.cfg;
    const double p = cfg.p_schedule.front();
    const SpikeSetup su = setup_spikes(cfg.domain, cfg.weight, spike_config(cfg, p), cfg.h, cfg.resolution);
    const AnsatzField af = build_ansatz(*su.op, su.cfg);
    std::ofstream os = open_out(ctx.out / "ansatz.csv");
    af.export_csv(os);
    ctx.artifact("ansatz.csv");
    const double quad = energy_quadrature(*su.op, af);
    const double expn = energy_expansion(su.cfg, su.interactions, cfg.weight);
    const double gap = std::abs(expn - quad) / std::abs(expn);
    st["p"] = round15(p);
    st["nodes"] = su.op->size();
    st["max"] = round15(af.max_value());
    st["min"] = round15(af.min_value());
    for (std::size_t i = 0; i < su.cfg.m(); ++i) {
      st["mu"].push_back(round15(su.cfg.mu[i]));
      st["defect"].push_back(round15(af.defect[i]));
    }
    st["energy_quadrature"] = round15(quad);
    st["energy_expansion"] = round15(expn);
    add_check(st, check("ansatz bounded by 2 sqrt(e)", af.max_value(), 2 * std::exp(0.5),
                        af.max_value() <= 2 * std::exp(0.5) && af.min_value() > 0.0));
    add_check(st, check("relative energy gap <= 3/p", gap, 3.0 / p, gap <= 3.0 / p));
  });
}

std::vector<std::vector<double>> separated_seeds(const SeparatedObjective& obj) {
  // local maxima of a along the boundary, strongest first
  const int n = 512;
  std::vector<std::pair<double, double>> peaks;
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / n;
    const double a0 = obj.a_at(s), am = obj.a_at(s - 1.0 / n), ap = obj.a_at(s + 1.0 / n);
    if (a0 >= am && a0 > ap) peaks.emplace_back(a0, s);
  }
  std::sort(peaks.begin(), peaks.end(), [](auto& x, auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
  std::vector<double> anchors;
  for (std::size_t k = 0; k < obj.m(); ++k) {
    anchors.push_back(k < peaks.size() ? peaks[k].second
                                       : static_cast<double>(k) / static_cast<double>(obj.m()));
  }
  std::vector<double> seed = anchors;
  for (std::size_t i = 0; i < obj.l(); ++i) seed.push_back(NAN);
  return {seed};
}

void cmd_landscape(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double p = cfg.p_schedule.front();
  if (cfg.regime == "separated") {
    ctx.stage("landscape_scan", [&](json& st) {
      // F_p along the boundary for the first anchor, others at their configured places
      std::ofstream os = open_out(ctx.out / "landscape.csv");
      os << "s,x,y,F_expansion,F_quadrature\n";
      const int n = std::max(cfg.landscape_samples, 1);
      for (int k = 0; k < n; ++k) {
        const double s = static_cast<double>(k) / n;
        SpikeConfig sc = spike_config(cfg, p);
        Spike& first = sc.spikes.front();
        if (first.kind == SourceKind::Boundary) {
          first = boundary_spike(cfg.domain, s);
        } else {
          // keep the configured depth
          const double depth = cfg.domain.dist_to_boundary(first.position).distance;
          first = interior_spike(cfg.domain.point(s) - depth * cfg.domain.normal(s));
        }
        const SpikeSetup su = setup_spikes(cfg.domain, cfg.weight, sc, cfg.h, cfg.resolution);
        const AnsatzField af = build_ansatz(*su.op, su.cfg);
        os << s << ',' << first.position.x << ',' << first.position.y << ','
           << energy_expansion(su.cfg, su.interactions, cfg.weight) << ',' << energy_quadrature(*su.op, af) << '\n';
      }
      ctx.artifact("landscape.csv");
      st["samples"] = n;
    });
    ctx.stage("critical_points", [&](json& st) {
      const SeparatedObjective obj(cfg.domain, cfg.weight, cfg.m, cfg.l, p, cfg.lambda_d);
      const auto cps = find_critical_separated(obj, separated_seeds(obj));
      json list = json::array();
      for (const CriticalPoint& cp : cps) {
        json c{{"kind", to_string(cp.kind)},
               {"converged", cp.converged},
               {"in_lambda", cp.in_lambda},
               {"iterations", cp.iterations},
               {"value", round15(cp.value)},
               {"gradient_norm_ok", cp.gradient_norm <= 1e-8}};
        for (double x : cp.x) c["variables"].push_back(round15(x));
        for (double e : cp.hessian_eigenvalues) c["hessian_eigenvalues"].push_back(round15(e));
        for (const Spike& s : obj.spikes(cp.x)) c["spikes"].push_back(spike_json(s));
        for (std::size_t i = 0; i < cfg.l; ++i) {
          const double ts = obj.t_star(cp.x[i]);
          c["t_star"].push_back(round15(ts));
          add_check(st, check("depth matches 4a/d_nu a", std::abs(cp.x[cfg.m + i] - ts), 1e-6,
                              std::abs(cp.x[cfg.m + i] - ts) <= 1e-6));
        }
        add_check(st, check("gradient norm", cp.gradient_norm, 1e-8, cp.gradient_norm <= 1e-8));
        list.push_back(std::move(c));
      }
      write_json(ctx.out / "critical_points.json",
                 json{{"regime", "separated"}, {"p", round15(p)}, {"d", round15(obj.d())}, {"points", list}});
      ctx.artifact("critical_points.json");
      st["points"] = list;
    });
  } else {
    ctx.stage("clustered", [&](json& st) {
      json runs = json::array();
      std::vector<double> seps;
      for (double pp : cfg.p_schedule) {
        ClusteredOptions opt = cfg.clustered;
        opt.seed = cfg.seed;
        const ClusteredResult r = find_critical_clustered(cfg.domain, cfg.weight, cfg.m, cfg.l, pp, cfg.xi_star_s, opt);
        json c{{"p", round15(pp)},
               {"value", round15(r.value)},
               {"initial_value", round15(r.initial_value)},
               {"boundary_trapped", r.boundary_trapped},
               {"min_separation", round15(r.min_separation)},
               {"warnings", r.warnings}};
        for (const Spike& s : r.spikes) c["spikes"].push_back(spike_json(s));
        for (double v : r.start_values) c["start_values"].push_back(round15(v));
        add_check(st, check("not boundary-trapped at p = " + std::to_string(static_cast<int>(pp)),
                            r.boundary_trapped ? 1.0 : 0.0, 0.0, !r.boundary_trapped));
        add_check(st, check("max F >= F(xi0) at p = " + std::to_string(static_cast<int>(pp)),
                            r.value - r.initial_value, 0.0, r.value >= r.initial_value));
        seps.push_back(r.min_separation);
        runs.push_back(std::move(c));
      }
      if (seps.size() >= 2 && cfg.m > 1) {
        const double slope = std::log(seps.back() / seps.front()) /
                             std::log(cfg.p_schedule.back() / cfg.p_schedule.front());
        st["separation_slope"] = round15(slope);
        add_check(st, check("separation log-log slope < 0", slope, 0.0, slope < 0.0));
      }
      write_json(ctx.out / "critical_points.json", json{{"regime", "clustered"}, {"runs", runs}});
      ctx.artifact("critical_points.json");
      st["runs"] = runs;
    });
  }
}

void cmd_verify(Context& ctx) {
  ctx.stage("verify", [&](json& st) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Branch br = continuation_in_p(cfg.domain, cfg.weight, spike_config(cfg, cfg.p_schedule.front()),
                                        cfg.p_schedule, cfg.h, cfg.resolution);
    json stages = json::array();
    std::ofstream csv = open_out(ctx.out / "solution.csv");
    csv << "x,y,u\n";
    for (const BranchStage& s : br.stages) {
      json j{{"p", round15(s.p)},
             {"converged", s.sol.converged},
             {"newton_iters", s.sol.newton_iters},
             {"residual_ok", s.sol.residual_norm <= 1e-9}};
      if (!s.sol.converged) j["message"] = s.sol.message;
      for (const SpikeDiagnostics& d : s.metrics.spikes) {
        j["peak"].push_back(round15(d.peak));
        j["mass"].push_back(round15(d.mass));
        j["location"].push_back(vec_json(d.location));
      }
      j["outside_sup"] = round15(s.metrics.outside_sup);
      stages.push_back(std::move(j));
    }
    if (!br.stages.empty() && br.stages.back().sol.converged) {
      const SolutionField& sol = br.stages.back().sol;
      const Mesh& m = sol.op->mesh();
      for (std::size_t v = 0; v < m.num_nodes(); ++v) {
        const Vec2 w = m.world(m.nodes[v]);
        csv << w.x << ',' << w.y << ',' << sol.u[v] << '\n';
      }
    }
    ctx.artifact("solution.csv");
    write_json(ctx.out / "branch.json", json{{"stages", stages}, {"truncated", br.truncated}});
    ctx.artifact("branch.json");
    st["stages"] = stages;
    if (br.truncated) throw SolverError(br.message);
    // spike-wise trend checks against sqrt(e) and the limiting masses
    const double sqrt_e = std::exp(0.5);
    for (std::size_t i = 0; i < cfg.m; ++i) {
      bool peak_mono = true, mass_mono = true;
      for (std::size_t k = 1; k < br.stages.size(); ++k) {
        peak_mono &= br.stages[k].metrics.spikes[i].peak > br.stages[k - 1].metrics.spikes[i].peak;
        mass_mono &= br.stages[k].metrics.spikes[i].mass > br.stages[k - 1].metrics.spikes[i].mass;
      }
      const SpikeDiagnostics& last = br.stages.back().metrics.spikes[i];
      const double target = interaction_constant(br.stages.back().cfg.spikes[i].kind) * kE;
      const std::string tag = "spike " + std::to_string(i) + ": ";
      add_check(st, check(tag + "peaks monotone", peak_mono ? 1.0 : 0.0, 0.0, peak_mono));
      add_check(st, check(tag + "final peak vs sqrt(e)", std::abs(last.peak - sqrt_e) / sqrt_e, 0.1,
                          std::abs(last.peak - sqrt_e) <= 0.1 * sqrt_e));
      add_check(st, check(tag + "masses monotone", mass_mono ? 1.0 : 0.0, 0.0, mass_mono));
      add_check(st, check(tag + "final mass vs c e", std::abs(last.mass - target) / target, 0.2,
                          std::abs(last.mass - target) <= 0.2 * target));
    }
  });
}

void cmd_lift(Context& ctx) {
  ctx.stage("lift-check", [&](json& st) {
    const ExperimentConfig& cfg = ctx.cfg;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> coord(0.3, 1.7);
    const auto u = [](Vec2 x) { return 1.5 + std::sin(x.x) * std::cos(2.0 * x.y) + 0.1 * x.x * x.y; };
    json rows = json::array();
    for (const auto& [k1, k2] : cfg.lift_exponents) {
      double worst = 0.0;
      for (int n = 0; n < cfg.lift_points; ++n) {
        worst = std::max(worst, lift_identity_check(k1, k2, u, {coord(rng), coord(rng)}, 3.0));
      }
      // printed at 3 digits: the value is rounding-level noise
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", worst);
      rows.push_back(json{{"k", json::array({k1, k2})}, {"max_residual", std::strtod(buf, nullptr)}});
      add_check(st, check("lift residual k = (" + std::to_string(k1) + "," + std::to_string(k2) + ")", worst,
                          1e-6, worst <= 1e-6));
    }
    write_json(ctx.out / "lift.json", json{{"points", cfg.lift_points}, {"rows", rows}});
    ctx.artifact("lift.json");
    st["rows"] = rows;
  });
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["domain"] = domain_spec;
  j["weight"] = weight_spec;
  j["spikes"]["m"] = m;
  j["spikes"]["l"] = l;
  if (!spikes.empty()) {
    for (const SpikeSpec& s : spikes) {
      json e{{"kind", to_string(s.kind)}};
      if (s.x) e["x"] = vec_json(*s.x);
      if (s.s) e["s"] = round15(*s.s);
      j["spikes"]["positions"].push_back(e);
    }
  } else {
    j["spikes"]["positions"] = "auto";
  }
  for (double p : p_schedule) j["p_schedule"].push_back(round15(p));
  j["mesh"] = {{"h", round15(h)}, {"resolution", round15(resolution)}};
  j["regime"] = regime;
  if (lambda_d) j["lambda_d"] = round15(*lambda_d);
  j["clustered"] = {{"xi_star_s", round15(xi_star_s)},
                    {"h", round15(clustered.h)},
                    {"h_near", round15(clustered.h_near)},
                    {"starts", clustered.starts},
                    {"max_iter", clustered.max_iter},
                    {"rho", round15(clustered.rho)}};
  if (clustered.d) j["clustered"]["d"] = round15(*clustered.d);
  j["landscape_samples"] = landscape_samples;
  for (const auto& [a, b] : lift_exponents) j["lift"]["exponents"].push_back(json::array({a, b}));
  j["lift"]["points"] = lift_points;
  j["seed"] = seed;
  return j;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) field_error("config", "must be a table");
  ExperimentConfig c;
  c.domain_spec = j.value("domain", json{{"type", "disk"}, {"radius", 1.0}});
  c.domain = parse_domain(c.domain_spec);
  c.weight_spec = j.value("weight", json{{"type", "constant"}, {"value", 1.0}});
  c.weight = parse_weight(c.weight_spec, "weight");
  check_quadrant(c.weight_spec, c.domain, "weight");

  const json sp = j.value("spikes", json::object());
  const auto count = [](const json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
  if (sp.contains("m") && !count(sp.at("m"))) field_error("spikes.m", "must be a positive integer");
  if (sp.contains("l") && !count(sp.at("l"))) field_error("spikes.l", "must be a nonnegative integer");
  c.m = sp.value("m", std::size_t{1});
  c.l = sp.value("l", std::size_t{0});
  if (c.m == 0) field_error("spikes.m", "must be at least 1");
  if (c.l > c.m) {
    field_error("spikes.l", "number of interior spikes l = " + std::to_string(c.l) +
                                " must not exceed the total m = " + std::to_string(c.m));
  }
  if (sp.contains("positions") && !(sp.at("positions").is_string() && sp.at("positions") == "auto")) {
    const json& pos = sp.at("positions");
    if (!pos.is_array() || pos.size() != c.m) {
      field_error("spikes.positions", "must be \"auto\" or a list of m = " + std::to_string(c.m) + " entries");
    }
    std::size_t interior = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const std::string f = "spikes.positions[" + std::to_string(k) + "]";
      SpikeSpec s;
      const std::string kind = pos[k].value("kind", "boundary");
      if (kind == "interior") {
        s.kind = SourceKind::Interior;
        s.x = get_vec(pos[k], "x", f);
        if (!c.domain.contains(*s.x)) field_error(f + ".x", "interior spike lies outside the domain");
        ++interior;
      } else if (kind == "boundary") {
        s.kind = SourceKind::Boundary;
        s.s = Domain::wrap(get_number(pos[k], "s", f));
      } else {
        field_error(f + ".kind", "must be interior or boundary");
      }
      c.spikes.push_back(s);
    }
    if (interior != c.l) {
      field_error("spikes.positions", "has " + std::to_string(interior) + " interior entries but l = " +
                                          std::to_string(c.l));
    }
    // interior spikes first, matching the (s, t) ordering of the separated search
    std::stable_sort(c.spikes.begin(), c.spikes.end(),
                     [](const SpikeSpec& a, const SpikeSpec& b) { return a.kind == SourceKind::Interior && b.kind != SourceKind::Interior; });
  }

  if (j.contains("p")) {
    c.p_schedule = {get_number(j, "p", "config")};
  } else if (j.contains("p_schedule")) {
    if (!j.at("p_schedule").is_array() || j.at("p_schedule").empty()) field_error("p_schedule", "must be a nonempty list");
    c.p_schedule.clear();
    for (const json& v : j.at("p_schedule")) {
      if (!v.is_number()) field_error("p_schedule", "entries must be numbers");
      c.p_schedule.push_back(v.get<double>());
    }
  }
  for (std::size_t k = 0; k < c.p_schedule.size(); ++k) {
    if (!(c.p_schedule[k] > 1.0)) field_error("p", "exponent must exceed 1 (got " + std::to_string(c.p_schedule[k]) + ")");
    if (c.p_schedule[k] > 200.0) field_error("p", "exponents above 200 overflow u^(p+1)");
    if (k > 0 && !(c.p_schedule[k] > c.p_schedule[k - 1])) field_error("p_schedule", "must be increasing");
  }

  const json mesh = j.value("mesh", json::object());
  c.h = number_or(mesh, "h", c.h, "mesh");
  c.resolution = number_or(mesh, "resolution", c.resolution, "mesh");
  if (!(c.h > 0.0)) field_error("mesh.h", "must be positive");
  if (!(c.resolution > 0.0 && c.resolution < 1.0)) field_error("mesh.resolution", "must lie in (0, 1)");

  c.regime = j.value("regime", "separated");
  if (c.regime != "separated" && c.regime != "clustered") field_error("regime", "must be separated or clustered");
  if (j.contains("lambda_d")) {
    c.lambda_d = get_number(j, "lambda_d", "config");
    if (!(*c.lambda_d > 0.0)) field_error("lambda_d", "must be positive");
  }
  const json cl = j.value("clustered", json::object());
  c.xi_star_s = Domain::wrap(number_or(cl, "xi_star_s", 0.0, "clustered"));
  c.clustered.h = number_or(cl, "h", c.h, "clustered");
  c.clustered.h_near = number_or(cl, "h_near", c.clustered.h_near, "clustered");
  c.clustered.starts = static_cast<int>(number_or(cl, "starts", c.clustered.starts, "clustered"));
  c.clustered.max_iter = static_cast<int>(number_or(cl, "max_iter", c.clustered.max_iter, "clustered"));
  c.clustered.rho = number_or(cl, "rho", c.clustered.rho, "clustered");
  if (cl.contains("d")) c.clustered.d = get_number(cl, "d", "clustered");
  if (c.clustered.starts < 0) field_error("clustered.starts", "must be nonnegative");
  if (!(c.clustered.h_near > 0.0 && c.clustered.h_near <= c.clustered.h)) {
    field_error("clustered.h_near", "must lie in (0, clustered.h]");
  }

  c.landscape_samples = j.value("landscape_samples", c.landscape_samples);
  if (j.contains("lift")) {
    const json& lf = j.at("lift");
    if (lf.contains("exponents")) {
      c.lift_exponents.clear();
      for (const json& e : lf.at("exponents")) {
        if (!e.is_array() || e.size() != 2) field_error("lift.exponents", "entries must be [k1, k2]");
        c.lift_exponents.emplace_back(e[0].get<int>(), e[1].get<int>());
      }
    }
    c.lift_points = lf.value("points", c.lift_points);
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0) field_error("seed", "must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::vector<std::string> preset_names() {
  return {"disk-boundary-spike", "disk-interior-spike", "linear-weight-interior", "bump-cluster"};
}

ExperimentConfig preset(const std::string& name) {
  json j;
  if (name == "disk-boundary-spike" || name == "disk-interior-spike") {
    const bool interior = name == "disk-interior-spike";
    j = {{"domain", {{"type", "disk"}, {"center", {0, 0}}, {"radius", 1.0}}},
         {"weight", {{"type", "constant"}, {"value", 1.0}}},
         {"spikes", {{"m", 1}, {"l", interior ? 1 : 0}}},
         {"p_schedule", {20, 30, 45, 67, 100}},
         {"mesh", {{"h", 0.05}}}};
    j["spikes"]["positions"] = interior ? json::array({{{"kind", "interior"}, {"x", {0, 0}}}})
                                        : json::array({{{"kind", "boundary"}, {"s", 0.0}}});
  } else if (name == "linear-weight-interior") {
    j = {{"domain", {{"type", "disk"}, {"center", {2, 0}}, {"radius", 1.0}}},
         {"weight", {{"type", "monomial"}, {"k1", 1}, {"k2", 0}}},
         {"spikes", {{"m", 1}, {"l", 1}, {"positions", json::array({{{"kind", "interior"}, {"x", {2.7, 0}}}})}}},
         {"p", 40},
         {"lambda_d", 0.05},
         {"landscape_samples", 8}};
  } else if (name == "bump-cluster") {
    j = {{"domain", {{"type", "disk"}, {"center", {0, 0}}, {"radius", 2.0}}},
         {"weight", {{"type", "bump"}, {"base", 0.1}, {"amplitude", 1.0}, {"center", {2, 0}}, {"sigma", 0.5}}},
         {"spikes", {{"m", 2}, {"l", 1}}},
         {"p_schedule", {30, 60, 120}},
         {"regime", "clustered"},
         {"mesh", {{"h", 0.1}}},
         {"clustered", {{"xi_star_s", 0.0}, {"h_near", 0.002}, {"d", 0.8}, {"starts", 16}}}};
  } else {
    std::string known;
    for (const std::string& n : preset_names()) known += " " + n;
    throw ConfigError("unknown preset '" + name + "'; known:" + known);
  }
  return parse_config(j);
}

std::vector<Spike> configured_spikes(const ExperimentConfig& cfg) {
  std::vector<Spike> out;
  if (!cfg.spikes.empty()) {
    for (const SpikeSpec& s : cfg.spikes) {
      out.push_back(s.kind == SourceKind::Interior ? interior_spike(*s.x) : boundary_spike(cfg.domain, *s.s));
    }
    return out;
  }
  if (cfg.l > 0) {
    throw ConfigError("spikes.positions: interior spikes need explicit positions outside the landscape search");
  }
  for (std::size_t k = 0; k < cfg.m; ++k) {
    out.push_back(boundary_spike(cfg.domain, static_cast<double>(k) / static_cast<double>(cfg.m)));
  }
  return out;
}

json run_experiment(const std::string& command, const ExperimentConfig& cfg, const fs::path& out) {
  static const std::vector<std::string> commands{"constants", "greens", "mu", "ansatz", "landscape", "verify", "lift-check"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
    throw ConfigError("unknown subcommand '" + command + "'");
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory " + out.string() + ": " + ec.message());

  Context ctx{cfg, out, json::object(), {}};
  ctx.report["command"] = command;
  ctx.report["seed"] = cfg.seed;
  ctx.report["config"] = cfg.to_json();
  ctx.report["status"] = "ok";
  ctx.report["stages"] = json::array();
  if (command == "constants") cmd_constants(ctx);
  if (command == "greens") cmd_greens(ctx);
  if (command == "mu") cmd_mu(ctx);
  if (command == "ansatz") cmd_ansatz(ctx);
  if (command == "landscape") cmd_landscape(ctx);
  if (command == "verify") cmd_verify(ctx);
  if (command == "lift-check") cmd_lift(ctx);
  bool all_pass = true;
  for (const json& st : ctx.report["stages"]) {
    if (!st.contains("checks")) continue;
    for (const json& c : st["checks"]) all_pass &= c["pass"].get<bool>();
  }
  ctx.report["checks_pass"] = all_pass;
  ctx.report["artifacts"] = ctx.artifacts;
  write_json(out / "report.json", ctx.report);
  return ctx.report;
}

}  // namespace spikelab
