#include "spikelab/greens.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "spikelab/error.hpp"

namespace spikelab {

namespace {

// signed parameter difference in (-1/2, 1/2]
double param_diff(double s, double s0) {
  double d = s - s0;
  d -= std::round(d);
  return d;
}

}  // namespace

double interaction_constant(SourceKind kind) {
  return kind == SourceKind::Interior ? 8.0 * std::numbers::pi : 4.0 * std::numbers::pi;
}

double log_coefficient(SourceKind kind) { return 4.0 / interaction_constant(kind); }

std::string to_string(SourceKind kind) {
  return kind == SourceKind::Interior ? "interior" : "boundary";
}

double GreenData::regular_local(Vec2 x_local) const { return mesh->interpolate(H, x_local); }

double GreenData::regular(Vec2 x_world) const { return regular_local(mesh->to_local(x_world)); }

double GreenData::eval_local(Vec2 x_local) const {
  const double r = distance(x_local, source_local);
  if (r < 0.1 * local_size) {
    std::ostringstream msg;
    msg << "green_eval: |x - y| = " << r << " is below a tenth of the mesh size " << local_size
        << " at the source";
    throw SolverError(msg.str());
  }
  return regular_local(x_local) - log_coefficient(kind) * std::log(r);
}

double GreenData::eval(Vec2 x_world) const { return eval_local(mesh->to_local(x_world)); }

double green_eval(const GreenData& gd, Vec2 x_world) { return gd.eval(x_world); }

RobinValue quadratic_fit_at(const Mesh& mesh, const std::vector<double>& field, Vec2 center,
                            double radius) {
  std::vector<int> pick;
  for (int attempt = 0; attempt < 20; ++attempt, radius *= 1.5) {
    pick.clear();
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
      if (distance(mesh.nodes[v], center) <= radius) pick.push_back(static_cast<int>(v));
    }
    if (pick.size() >= 12) break;
  }
  if (pick.size() < 6) throw SolverError("quadratic fit: fewer than 6 nodes near the source");
  const auto n = static_cast<Eigen::Index>(pick.size());
  Eigen::MatrixXd A(n, 6);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 d = (mesh.nodes[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])] - center) / radius;
    A.row(i) << 1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y;
    b[i] = field[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  const double rss = (A * c - b).squaredNorm();
  RobinValue out;
  out.value = c[0];
  out.error = n > 6 ? std::sqrt(rss / static_cast<double>(n - 6)) : 0.0;
  return out;
}

namespace {

GreenData solve_regular_part(const MeshedOperator& op, Vec2 y, SourceKind kind,
                             std::optional<double> param) {
  const Mesh& mesh = op.mesh();
  const Domain& dom = mesh.domain;
  GreenData gd;
  gd.kind = kind;
  gd.param = param;
  gd.mesh = op.mesh_ptr();
  if (param) {
    gd.source = dom.point(*param);
    gd.source_local = mesh.boundary_local(*param);
  } else {
    gd.source = y;
    gd.source_local = mesh.to_local(y);
  }
  gd.local_size = mesh.local_edge_size(gd.source_local);

  if (!param) {
    if (!dom.contains(y)) throw ConfigError("interior Green's source lies outside the domain");
    const double depth = dom.dist_to_boundary(y).distance;
    if (depth < 2.0 * gd.local_size) {
      std::ostringstream msg;
      msg << "interior source at depth " << depth << " is within 2 local element sizes ("
          << gd.local_size << ") of the boundary; grade the mesh finer there";
      throw SolverError(msg.str());
    }
  }

  const double k = log_coefficient(kind);
  const Vec2 yl = gd.source_local;
  const auto f = [&](Vec2 x) {
    const Vec2 d = x - yl;
    const double r2 = norm2(d);
    if (r2 == 0.0) return 0.0;
    return k * 0.5 * std::log(r2) - k * dot(d, op.grad_log_a(x)) / r2;
  };
  const auto g = [&](double s, Vec2 x, Vec2 nu) {
    // for a boundary source use the exact curve offset so that (x-y).nu / |x-y|^2 keeps
    // its bounded limit as x -> y
    const Vec2 d = param ? dom.offset(*param, param_diff(s, *param)) : x - yl;
    const double r2 = norm2(d);
    if (r2 == 0.0) return k * 0.5 * dom.curvature(s);
    return k * dot(d, nu) / r2;
  };
  Eigen::VectorXd rhs = op.load(f, SingularPoint{yl});
  rhs += op.boundary_load(g);
  const Eigen::VectorXd h = op.solve(rhs);
  gd.residual = op.relative_residual(h, rhs);
  gd.H.assign(h.data(), h.data() + h.size());
  const RobinValue rv = quadratic_fit_at(mesh, gd.H, yl, 5.0 * gd.local_size);
  gd.robin = rv.value;
  gd.robin_error = rv.error;
  return gd;
}

}  // namespace

GreenData regular_part(const MeshedOperator& op, Vec2 y, SourceKind kind) {
  if (kind == SourceKind::Boundary) {
    return solve_regular_part(op, y, kind, op.mesh().domain.project_param(y));
  }
  return solve_regular_part(op, y, kind, std::nullopt);
}

GreenData regular_part_at_param(const MeshedOperator& op, double s) {
  return solve_regular_part(op, op.mesh().domain.point(s), SourceKind::Boundary,
                            Domain::wrap(s));
}

RobinValue robin_function(const MeshedOperator& op, Vec2 y, SourceKind kind) {
  const GreenData gd = regular_part(op, y, kind);
  return {gd.robin, gd.robin_error};
}

std::vector<GradingCenter> green_centers(const Domain& dom, double h,
                                         const std::vector<std::pair<Vec2, SourceKind>>& sources) {
  std::vector<GradingCenter> out;
  for (const auto& [y, kind] : sources) {
    if (kind == SourceKind::Boundary) {
      const double s = dom.project_param(y);
      out.push_back({dom.point(s), h / 8.0, s});
    } else {
      const double depth = dom.dist_to_boundary(y).distance;
      out.push_back({y, std::min(h / 8.0, depth / 4.0), std::nullopt});
    }
  }
  return out;
}

}  // namespace spikelab
