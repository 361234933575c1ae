#include "spikelab/weight.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spikelab/error.hpp"

namespace spikelab {

enum class WeightKind { Constant, Monomial, Bump, Product };

struct WeightField::Impl {
  WeightKind kind = WeightKind::Constant;
  double c = 1.0;
  double k1 = 0.0, k2 = 0.0;
  Vec2 offset;
  double base = 1.0, amp = 0.0, sigma = 1.0;
  Vec2 center;
  std::shared_ptr<const Impl> lhs, rhs;
};

namespace {

using Impl = WeightField::Impl;

// power x^k with derivatives, for x > 0 or integer k
struct Pow {
  double v, d, dd;
};

Pow power(double x, double k) {
  if (k == 0.0) return {1.0, 0.0, 0.0};
  return {std::pow(x, k), k * std::pow(x, k - 1.0), k * (k - 1.0) * std::pow(x, k - 2.0)};
}

double eval_impl(const Impl& w, Vec2 x) {
  switch (w.kind) {
    case WeightKind::Constant:
      return w.c;
    case WeightKind::Monomial:
      return power(x.x + w.offset.x, w.k1).v * power(x.y + w.offset.y, w.k2).v;
    case WeightKind::Bump:
      return w.base + w.amp * std::exp(-norm2(x - w.center) / (2.0 * w.sigma * w.sigma));
    case WeightKind::Product:
      return eval_impl(*w.lhs, x) * eval_impl(*w.rhs, x);
  }
  return 0.0;
}

Vec2 grad_impl(const Impl& w, Vec2 x) {
  switch (w.kind) {
    case WeightKind::Constant:
      return {};
    case WeightKind::Monomial: {
      const Pow p1 = power(x.x + w.offset.x, w.k1);
      const Pow p2 = power(x.y + w.offset.y, w.k2);
      return {p1.d * p2.v, p1.v * p2.d};
    }
    case WeightKind::Bump: {
      const double s2 = w.sigma * w.sigma;
      const Vec2 r = x - w.center;
      const double g = w.amp * std::exp(-norm2(r) / (2.0 * s2));
      return (-g / s2) * r;
    }
    case WeightKind::Product:
      return eval_impl(*w.rhs, x) * grad_impl(*w.lhs, x) +
             eval_impl(*w.lhs, x) * grad_impl(*w.rhs, x);
  }
  return {};
}

Sym2 hessian_impl(const Impl& w, Vec2 x) {
  switch (w.kind) {
    case WeightKind::Constant:
      return {};
    case WeightKind::Monomial: {
      const Pow p1 = power(x.x + w.offset.x, w.k1);
      const Pow p2 = power(x.y + w.offset.y, w.k2);
      return {p1.dd * p2.v, p1.d * p2.d, p1.v * p2.dd};
    }
    case WeightKind::Bump: {
      const double s2 = w.sigma * w.sigma;
      const Vec2 r = x - w.center;
      const double g = w.amp * std::exp(-norm2(r) / (2.0 * s2));
      return {g * (r.x * r.x / (s2 * s2) - 1.0 / s2), g * r.x * r.y / (s2 * s2),
              g * (r.y * r.y / (s2 * s2) - 1.0 / s2)};
    }
    case WeightKind::Product: {
      const double a = eval_impl(*w.lhs, x), b = eval_impl(*w.rhs, x);
      const Vec2 ga = grad_impl(*w.lhs, x), gb = grad_impl(*w.rhs, x);
      const Sym2 ha = hessian_impl(*w.lhs, x), hb = hessian_impl(*w.rhs, x);
      return b * ha + a * hb + 2.0 * sym_outer(ga, gb);
    }
  }
  return {};
}

void describe_impl(const Impl& w, std::ostream& os) {
  switch (w.kind) {
    case WeightKind::Constant:
      os << "constant(" << w.c << ")";
      break;
    case WeightKind::Monomial:
      os << "monomial(k1=" << w.k1 << ", k2=" << w.k2 << ", offset=" << w.offset << ")";
      break;
    case WeightKind::Bump:
      os << "bump(base=" << w.base << ", amplitude=" << w.amp << ", center=" << w.center
         << ", sigma=" << w.sigma << ")";
      break;
    case WeightKind::Product:
      os << "product(";
      describe_impl(*w.lhs, os);
      os << ", ";
      describe_impl(*w.rhs, os);
      os << ")";
      break;
  }
}

bool needs_positive(const Impl& w, bool first) {
  switch (w.kind) {
    case WeightKind::Monomial: {
      const double k = first ? w.k1 : w.k2;
      return k != 0.0;
    }
    case WeightKind::Product:
      return needs_positive(*w.lhs, first) || needs_positive(*w.rhs, first);
    default:
      return false;
  }
}

}  // namespace

WeightField::WeightField() : impl_(std::make_shared<Impl>()) {}

WeightField WeightField::constant(double value) {
  if (!(value > 0.0)) throw ConfigError("constant weight must be positive");
  auto w = std::make_shared<Impl>();
  w->c = value;
  return WeightField(w);
}

WeightField WeightField::monomial(double k1, double k2, Vec2 offset) {
  auto w = std::make_shared<Impl>();
  w->kind = WeightKind::Monomial;
  w->k1 = k1;
  w->k2 = k2;
  w->offset = offset;
  return WeightField(w);
}

WeightField WeightField::bump(double base, double amplitude, Vec2 center, double sigma) {
  if (!(base > 0.0) || !(sigma > 0.0) || base + std::min(amplitude, 0.0) <= 0.0) {
    throw ConfigError("bump weight needs base > 0, sigma > 0 and base + amplitude > 0");
  }
  auto w = std::make_shared<Impl>();
  w->kind = WeightKind::Bump;
  w->base = base;
  w->amp = amplitude;
  w->center = center;
  w->sigma = sigma;
  return WeightField(w);
}

WeightField WeightField::product(const WeightField& a, const WeightField& b) {
  auto w = std::make_shared<Impl>();
  w->kind = WeightKind::Product;
  w->lhs = a.impl_;
  w->rhs = b.impl_;
  return WeightField(w);
}

std::string WeightField::kind() const {
  switch (impl_->kind) {
    case WeightKind::Constant:
      return "constant";
    case WeightKind::Monomial:
      return "monomial";
    case WeightKind::Bump:
      return "bump";
    case WeightKind::Product:
      return "product";
  }
  return "unknown";
}

std::string WeightField::describe() const {
  std::ostringstream os;
  describe_impl(*impl_, os);
  return os.str();
}

double WeightField::eval(Vec2 x) const { return eval_impl(*impl_, x); }
Vec2 WeightField::grad(Vec2 x) const { return grad_impl(*impl_, x); }
Sym2 WeightField::hessian(Vec2 x) const { return hessian_impl(*impl_, x); }

bool WeightField::is_constant() const { return impl_->kind == WeightKind::Constant; }
bool WeightField::requires_positive_x1() const { return needs_positive(*impl_, true); }
bool WeightField::requires_positive_x2() const { return needs_positive(*impl_, false); }

}  // namespace spikelab
