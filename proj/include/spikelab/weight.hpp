#pragma once

#include <memory>
#include <string>

#include "spikelab/vec2.hpp"

namespace spikelab {

/// Positive smooth coefficient a(x) of the weighted operator.
///
/// Kinds: constant, monomial (x1 + b1)^k1 (x2 + b2)^k2, a Gaussian bump on a
/// positive base, and pointwise products of those.
class WeightField {
 public:
  WeightField();  ///< a == 1

  static WeightField constant(double value);
  static WeightField monomial(double k1, double k2, Vec2 offset = {});
  /// base + amplitude * exp(-|x - center|^2 / (2 sigma^2)).
  static WeightField bump(double base, double amplitude, Vec2 center, double sigma);
  static WeightField product(const WeightField& a, const WeightField& b);

  std::string kind() const;
  /// Human-readable description, stable across runs.
  std::string describe() const;

  double eval(Vec2 x) const;
  Vec2 grad(Vec2 x) const;
  Sym2 hessian(Vec2 x) const;
  Vec2 grad_log(Vec2 x) const { return grad(x) / eval(x); }

  bool is_constant() const;
  /// For monomial factors: exponents that require a positive coordinate.
  bool requires_positive_x1() const;
  bool requires_positive_x2() const;

  struct Impl;

 private:
  explicit WeightField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace spikelab
