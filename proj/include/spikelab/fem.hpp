#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "spikelab/mesh.hpp"
#include "spikelab/quadrature.hpp"
#include "spikelab/weight.hpp"

namespace spikelab {

/// Per-triangle data for P1 elements: area and gradients of the barycentric coordinates.
struct ElementGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad;
};

/// Singular point for load integration; triangles within `near_factor` of their own
/// longest edge from it get subdivided quadrature, the triangle containing it a Duffy rule.
struct SingularPoint {
  Vec2 local;
  double near_factor = 3.0;
  int levels = 3;
};

/// P1 discretisation of u -> -div(a grad u) + a u with natural boundary conditions.
/// Weak form: int a (grad u . grad v + u v) = int a f v + oint a g v.
///
/// The Cholesky factorisation is computed in the constructor; afterwards the object is
/// immutable and may be shared by concurrent solves.
class MeshedOperator {
 public:
  MeshedOperator(std::shared_ptr<const Mesh> mesh, WeightField weight);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const WeightField& weight() const { return weight_; }
  /// a at a local point.
  double a(Vec2 local) const { return weight_.eval(mesh_->world(local)); }
  Vec2 grad_log_a(Vec2 local) const { return weight_.grad_log(mesh_->world(local)); }

  const Eigen::SparseMatrix<double>& matrix() const { return system_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
  const Eigen::SparseMatrix<double>& mass() const { return mass_; }
  const std::vector<ElementGeometry>& elements() const { return elements_; }
  std::size_t size() const { return mesh_->num_nodes(); }

  /// int a f phi_j over the domain; f takes local coordinates.
  Eigen::VectorXd load(const std::function<double(Vec2)>& f,
                       const std::optional<SingularPoint>& singular = std::nullopt) const;
  /// oint a g phi_j along the boundary curve; g(s, local point, outward normal).
  Eigen::VectorXd boundary_load(const std::function<double(double, Vec2, Vec2)>& g,
                                int points = 6) const;

  /// Solve with the cached factorisation plus iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd neumann_solve(const std::function<double(Vec2)>& f,
                                const std::function<double(double, Vec2, Vec2)>& g,
                                const std::optional<SingularPoint>& singular = std::nullopt) const;

  /// ||A u - b||_inf / ||b||_inf.
  double relative_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rhs) const;
  /// L2 norm of u_h - exact over the mesh (7-point rule).
  double l2_error(const Eigen::VectorXd& u, const std::function<double(Vec2)>& exact) const;
  /// Smallest eigenvalue of the assembled matrix by inverse iteration.
  double smallest_eigenvalue(int iterations = 50) const;

  Eigen::VectorXd nodal(const std::function<double(Vec2)>& f) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  WeightField weight_;
  std::vector<ElementGeometry> elements_;
  Eigen::SparseMatrix<double> stiffness_, mass_, system_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

}  // namespace spikelab
