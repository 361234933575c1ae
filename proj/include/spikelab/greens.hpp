#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikelab/fem.hpp"

namespace spikelab {

enum class SourceKind { Interior, Boundary };

/// c = 8 pi for interior sources, 4 pi for boundary sources.
double interaction_constant(SourceKind kind);
/// Coefficient of -log|x - y| in G: 4 / c, i.e. 1/(2 pi) or 1/pi.
double log_coefficient(SourceKind kind);
std::string to_string(SourceKind kind);

/// Regular part H(., y) of the Neumann Green's function of -Delta_a + 1, as a nodal field,
/// together with the Robin value H(y, y).
struct GreenData {
  Vec2 source;        ///< world coordinates
  Vec2 source_local;  ///< mesh-local coordinates
  SourceKind kind = SourceKind::Interior;
  std::optional<double> param;  ///< curve parameter for boundary sources
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> H;
  double robin = 0.0;
  double robin_error = 0.0;  ///< rms residual of the local quadratic fit
  double local_size = 0.0;   ///< mesh size at the source
  double residual = 0.0;     ///< relative residual of the linear solve

  /// H(x, y) by barycentric interpolation.
  double regular(Vec2 x_world) const;
  double regular_local(Vec2 x_local) const;
  /// G(x, y) = H(x, y) - (4/c) log|x - y|; throws when |x - y| < local_size / 10.
  double eval(Vec2 x_world) const;
  double eval_local(Vec2 x_local) const;
};

/// Solves -Delta_a H + H = (4/c) log|x-y| - (4/c) (x-y).grad log a / |x-y|^2 with
/// dH/dnu = (4/c) (x-y).nu / |x-y|^2. Boundary sources are projected onto the curve.
/// The mesh should be graded at y (and, for boundary sources, have a node there).
GreenData regular_part(const MeshedOperator& op, Vec2 y, SourceKind kind);
/// Boundary source given by its curve parameter.
GreenData regular_part_at_param(const MeshedOperator& op, double s);

double green_eval(const GreenData& gd, Vec2 x_world);

struct RobinValue {
  double value = 0.0;
  double error = 0.0;
};
RobinValue robin_function(const MeshedOperator& op, Vec2 y, SourceKind kind);

/// Least-squares quadratic fit of a nodal field over the nodes within `radius` of
/// `center` (local coordinates); returns the fitted value at the center and the rms
/// residual. The radius grows until at least 12 nodes are available.
RobinValue quadratic_fit_at(const Mesh& mesh, const std::vector<double>& field, Vec2 center,
                            double radius);

/// Mesh grading suited to Green's function solves at the given sources: size
/// min(h, depth/4) at interior sources and h/8 at boundary sources.
std::vector<GradingCenter> green_centers(const Domain& dom, double h,
                                         const std::vector<std::pair<Vec2, SourceKind>>& sources);

}  // namespace spikelab
