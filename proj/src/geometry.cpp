#include "spikelab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "spikelab/error.hpp"

namespace spikelab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

class EllipseCurve final : public BoundaryCurve {
 public:
  EllipseCurve(Vec2 center, double ax, double ay, bool circle)
      : c_(center), ax_(ax), ay_(ay), circle_(circle) {}

  std::string kind() const override { return circle_ ? "disk" : "ellipse"; }
  Vec2 point(double s) const override {
    const double t = kTwoPi * s;
    return {c_.x + ax_ * std::cos(t), c_.y + ay_ * std::sin(t)};
  }
  Vec2 d1(double s) const override {
    const double t = kTwoPi * s;
    return kTwoPi * Vec2{-ax_ * std::sin(t), ay_ * std::cos(t)};
  }
  Vec2 d2(double s) const override {
    const double t = kTwoPi * s;
    return (kTwoPi * kTwoPi) * Vec2{-ax_ * std::cos(t), -ay_ * std::sin(t)};
  }
  Vec2 d3(double s) const override {
    const double t = kTwoPi * s;
    return (kTwoPi * kTwoPi * kTwoPi) * Vec2{ax_ * std::sin(t), -ay_ * std::cos(t)};
  }
  // cos(t+h)-cos(t) = -2 sin(t+h/2) sin(h/2), sin(t+h)-sin(t) = 2 cos(t+h/2) sin(h/2)
  Vec2 offset(double s0, double ds) const override {
    const double t = kTwoPi * (s0 + 0.5 * ds);
    const double sh = 2.0 * std::sin(0.5 * kTwoPi * ds);
    return {-ax_ * std::sin(t) * sh, ay_ * std::cos(t) * sh};
  }

 private:
  Vec2 c_;
  double ax_, ay_;
  bool circle_;
};

// Arc-length parametrised rectangle with quarter-circle corners, starting at
// the midpoint of the right edge.
class SmoothedRectCurve final : public BoundaryCurve {
 public:
  SmoothedRectCurve(Vec2 center, double hw, double hh, double r) : c_(center), r_(r) {
    const double ex = hw - r;
    const double ey = hh - r;
    const double arc = 0.5 * std::numbers::pi * r;
    // Straight pieces store start point and direction; arcs store corner center and start angle.
    pieces_ = {
        {false, {hw, 0.0}, {0.0, 1.0}, ey, 0.0},
        {true, {ex, ey}, {}, arc, 0.0},
        {false, {ex, hh}, {-1.0, 0.0}, 2.0 * ex, 0.0},
        {true, {-ex, ey}, {}, arc, 0.5 * std::numbers::pi},
        {false, {-hw, ey}, {0.0, -1.0}, 2.0 * ey, 0.0},
        {true, {-ex, -ey}, {}, arc, std::numbers::pi},
        {false, {-ex, -hh}, {1.0, 0.0}, 2.0 * ex, 0.0},
        {true, {ex, -ey}, {}, arc, 1.5 * std::numbers::pi},
        {false, {hw, -ey}, {0.0, 1.0}, ey, 0.0},
    };
    double acc = 0.0;
    for (auto& p : pieces_) {
      p.start = acc;
      acc += p.length;
    }
    length_ = acc;
  }

  std::string kind() const override { return "smoothed_rect"; }

  Vec2 point(double s) const override {
    const auto [k, u] = locate(s);
    const Piece& p = pieces_[k];
    if (!p.arc) return c_ + p.anchor + u * p.dir;
    const double phi = p.phi0 + u / r_;
    return c_ + p.anchor + r_ * Vec2{std::cos(phi), std::sin(phi)};
  }
  Vec2 d1(double s) const override {
    const auto [k, u] = locate(s);
    const Piece& p = pieces_[k];
    if (!p.arc) return length_ * p.dir;
    const double phi = p.phi0 + u / r_;
    return length_ * Vec2{-std::sin(phi), std::cos(phi)};
  }
  Vec2 d2(double s) const override {
    const auto [k, u] = locate(s);
    const Piece& p = pieces_[k];
    if (!p.arc) return {};
    const double phi = p.phi0 + u / r_;
    return (length_ * length_ / r_) * Vec2{-std::cos(phi), -std::sin(phi)};
  }
  Vec2 d3(double s) const override {
    const auto [k, u] = locate(s);
    const Piece& p = pieces_[k];
    if (!p.arc) return {};
    const double phi = p.phi0 + u / r_;
    return (length_ * length_ * length_ / (r_ * r_)) * Vec2{std::sin(phi), -std::cos(phi)};
  }
  Vec2 offset(double s0, double ds) const override {
    const auto [k0, u0] = locate(s0);
    const double s1 = Domain::wrap(s0 + ds);
    const auto [k1, u1] = locate(s1);
    if (k0 != k1 || std::abs(ds) >= 0.5) return point(s1) - point(s0);
    const Piece& p = pieces_[k0];
    const double du = ds * length_;
    if (!p.arc) return du * p.dir;
    const double mid = p.phi0 + (u0 + 0.5 * du) / r_;
    const double sh = 2.0 * r_ * std::sin(0.5 * du / r_);
    return {-std::sin(mid) * sh, std::cos(mid) * sh};
  }

 private:
  struct Piece {
    bool arc;
    Vec2 anchor;
    Vec2 dir;
    double length;
    double phi0;
    double start = 0.0;
  };

  std::pair<std::size_t, double> locate(double s) const {
    const double sigma = s * length_;
    std::size_t k = 0;
    while (k + 1 < pieces_.size() && sigma >= pieces_[k + 1].start) ++k;
    return {k, sigma - pieces_[k].start};
  }

  Vec2 c_;
  double r_;
  std::vector<Piece> pieces_;
  double length_ = 0.0;
};

// Periodic interpolating cubic spline; knot k sits at s = k/N.
class SplineCurve final : public BoundaryCurve {
 public:
  explicit SplineCurve(std::vector<Vec2> knots) : p_(std::move(knots)) {
    const int n = static_cast<int>(p_.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd rhs(n, 2);
    for (int k = 0; k < n; ++k) {
      a(k, (k + n - 1) % n) += 1.0;
      a(k, k) += 4.0;
      a(k, (k + 1) % n) += 1.0;
      const Vec2 r = 6.0 * (p_[(k + 1) % n] - 2.0 * p_[k] + p_[(k + n - 1) % n]);
      rhs(k, 0) = r.x;
      rhs(k, 1) = r.y;
    }
    const Eigen::MatrixXd m = a.partialPivLu().solve(rhs);
    m_.resize(n);
    for (int k = 0; k < n; ++k) m_[k] = {m(k, 0), m(k, 1)};
  }

  std::string kind() const override { return "spline"; }

  Vec2 point(double s) const override {
    const auto [k, t] = locate(s);
    const Vec2 a = p_[k], b = p_[next(k)], ma = m_[k], mb = m_[next(k)];
    const double u = 1.0 - t;
    return u * a + t * b + ((u * u * u - u) / 6.0) * ma + ((t * t * t - t) / 6.0) * mb;
  }
  Vec2 d1(double s) const override {
    const auto [k, t] = locate(s);
    const Vec2 a = p_[k], b = p_[next(k)], ma = m_[k], mb = m_[next(k)];
    const double u = 1.0 - t;
    const Vec2 d = (b - a) + ((1.0 - 3.0 * u * u) / 6.0) * ma + ((3.0 * t * t - 1.0) / 6.0) * mb;
    return n() * d;
  }
  Vec2 d2(double s) const override {
    const auto [k, t] = locate(s);
    return (n() * n()) * ((1.0 - t) * m_[k] + t * m_[next(k)]);
  }
  Vec2 d3(double s) const override {
    const auto [k, t] = locate(s);
    (void)t;
    return (n() * n() * n()) * (m_[next(k)] - m_[k]);
  }

 private:
  double n() const { return static_cast<double>(p_.size()); }
  std::size_t next(std::size_t k) const { return (k + 1) % p_.size(); }
  std::pair<std::size_t, double> locate(double s) const {
    const double u = s * n();
    auto k = static_cast<std::size_t>(std::floor(u));
    if (k >= p_.size()) k = p_.size() - 1;
    return {k, u - static_cast<double>(k)};
  }

  std::vector<Vec2> p_;
  std::vector<Vec2> m_;
};

constexpr int kSamples = 2048;

}  // namespace

Vec2 BoundaryCurve::offset(double s0, double ds) const {
  if (std::abs(ds) > 1e-4) return point(Domain::wrap(s0 + ds)) - point(s0);
  return ds * d1(s0) + (ds * ds / 2.0) * d2(s0) + (ds * ds * ds / 6.0) * d3(s0);
}

double Domain::wrap(double s) {
  double w = s - std::floor(s);
  if (w >= 1.0) w = 0.0;
  return w;
}

Domain::Domain(std::shared_ptr<const BoundaryCurve> curve, Vec2 shift)
    : curve_(std::move(curve)), shift_(shift) {
  sample();
}

Domain Domain::disk(Vec2 center, double radius) {
  if (!(radius > 0.0)) throw GeometryError("disk radius must be positive");
  return Domain(std::make_shared<EllipseCurve>(center, radius, radius, true), {});
}

Domain Domain::ellipse(Vec2 center, double semi_x, double semi_y) {
  if (!(semi_x > 0.0 && semi_y > 0.0)) throw GeometryError("ellipse semi-axes must be positive");
  return Domain(std::make_shared<EllipseCurve>(center, semi_x, semi_y, false), {});
}

Domain Domain::smoothed_rect(Vec2 center, double half_width, double half_height,
                             double corner_radius) {
  if (!(corner_radius > 0.0) || corner_radius > std::min(half_width, half_height)) {
    throw GeometryError("smoothed_rect corner radius must lie in (0, min(half_width, half_height)]");
  }
  return Domain(
      std::make_shared<SmoothedRectCurve>(center, half_width, half_height, corner_radius), {});
}

Domain Domain::spline(std::vector<Vec2> knots) {
  if (knots.size() < 4) throw GeometryError("spline boundary needs at least 4 knots");
  double signed_area = 0.0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    signed_area += cross(knots[k], knots[(k + 1) % knots.size()]);
  }
  if (signed_area <= 0.0) throw GeometryError("spline knots must be in counterclockwise order");
  Domain d(std::make_shared<SplineCurve>(std::move(knots)), {});
  if (!d.is_simple()) throw GeometryError("spline boundary self-intersects");
  return d;
}

Domain Domain::translated(Vec2 shift) const {
  Domain d = *this;
  d.shift_ = shift_ + shift;
  d.bbox_.lo += shift;
  d.bbox_.hi += shift;
  for (auto& p : d.sample_points_) p += shift;
  return d;
}

void Domain::sample() {
  sample_params_.resize(kSamples);
  sample_points_.resize(kSamples);
  bbox_.lo = {INFINITY, INFINITY};
  bbox_.hi = {-INFINITY, -INFINITY};
  for (int k = 0; k < kSamples; ++k) {
    const double s = static_cast<double>(k) / kSamples;
    sample_params_[k] = s;
    sample_points_[k] = point(s);
    bbox_.lo = {std::min(bbox_.lo.x, sample_points_[k].x), std::min(bbox_.lo.y, sample_points_[k].y)};
    bbox_.hi = {std::max(bbox_.hi.x, sample_points_[k].x), std::max(bbox_.hi.y, sample_points_[k].y)};
  }
  diameter_ = 0.0;
  std::size_t far_a = 0, far_b = 0;
  // coarse pair search on every 8th sample, then refine
  for (std::size_t i = 0; i < sample_points_.size(); i += 8) {
    for (std::size_t j = i + 8; j < sample_points_.size(); j += 8) {
      const double dd = distance(sample_points_[i], sample_points_[j]);
      if (dd > diameter_) {
        diameter_ = dd;
        far_a = i;
        far_b = j;
      }
    }
  }
  // polish the farthest pair by alternating golden-section searches
  {
    double sa = sample_params_[far_a], sb = sample_params_[far_b];
    const auto argmax = [&](double center, Vec2 other) {
      double lo = center - 8.0 / kSamples, hi = center + 8.0 / kSamples;
      const double r = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int k = 0; k < 60; ++k) {
        const double m1 = hi - r * (hi - lo), m2 = lo + r * (hi - lo);
        if (distance(point(m1), other) > distance(point(m2), other)) hi = m2; else lo = m1;
      }
      return 0.5 * (lo + hi);
    };
    for (int it = 0; it < 4; ++it) {
      sa = argmax(sa, point(sb));
      sb = argmax(sb, point(sa));
    }
    diameter_ = std::max(diameter_, distance(point(sa), point(sb)));
  }
  // Three-point Gauss-Legendre per sample panel for perimeter and enclosed area.
  const double g = std::sqrt(0.6);
  const double xs[3] = {-g, 0.0, g};
  const double ws[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  perimeter_ = 0.0;
  area_ = 0.0;
  max_curvature_ = 0.0;
  const double h = 1.0 / kSamples;
  for (int k = 0; k < kSamples; ++k) {
    const double mid = (k + 0.5) * h;
    for (int q = 0; q < 3; ++q) {
      const double s = mid + 0.5 * h * xs[q];
      const Vec2 d = curve_->d1(s);
      perimeter_ += 0.5 * h * ws[q] * norm(d);
      area_ += 0.25 * h * ws[q] * cross(curve_->point(s), d);
    }
    max_curvature_ = std::max(max_curvature_, std::abs(curvature(sample_params_[k])));
  }
}

double Domain::curvature(double s) const {
  const Vec2 a = d1(s);
  const Vec2 b = d2(s);
  const double sp = norm(a);
  return cross(a, b) / (sp * sp * sp);
}

Vec2 Domain::normal_derivative(double s) const {
  return (curvature(s) * speed(s)) * tangent(s);
}

BoundaryPoint Domain::boundary_point(double s) const {
  BoundaryPoint bp;
  bp.param = wrap(s);
  bp.position = point(bp.param);
  bp.tangent = tangent(bp.param);
  bp.normal = {bp.tangent.y, -bp.tangent.x};
  return bp;
}

double Domain::tubular_radius() const {
  if (tubular_override_) return *tubular_override_;
  if (max_curvature_ <= 0.0) return 0.45 * diameter();
  return 0.45 / max_curvature_;
}

int Domain::winding_number(Vec2 y) const {
  double total = 0.0;
  for (int k = 0; k < kSamples; ++k) {
    const Vec2 a = sample_points_[k] - y;
    const Vec2 b = sample_points_[(k + 1) % kSamples] - y;
    total += std::atan2(cross(a, b), dot(a, b));
  }
  return static_cast<int>(std::lround(total / kTwoPi));
}

bool Domain::contains(Vec2 y) const {
  // Near the boundary the sampled polygon is not accurate enough; use the
  // projection side instead.
  double best = INFINITY;
  for (const Vec2& p : sample_points_) best = std::min(best, norm2(p - y));
  const double panel = perimeter_ / kSamples;
  if (std::sqrt(best) < 4.0 * panel) {
    const double s = project_param(y);
    return dot(y - point(s), normal(s)) < 0.0;
  }
  return winding_number(y) != 0;
}

bool Domain::is_simple(int samples) const {
  std::vector<Vec2> pts(samples);
  for (int k = 0; k < samples; ++k) pts[k] = point(static_cast<double>(k) / samples);
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); };
  for (int i = 0; i < samples; ++i) {
    const Vec2 a = pts[i], b = pts[(i + 1) % samples];
    for (int j = i + 2; j < samples; ++j) {
      if (i == 0 && j == samples - 1) continue;
      const Vec2 c = pts[j], d = pts[(j + 1) % samples];
      const double o1 = orient(a, b, c), o2 = orient(a, b, d);
      const double o3 = orient(c, d, a), o4 = orient(c, d, b);
      if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
          o4 != 0) {
        return false;
      }
    }
  }
  return true;
}

double Domain::refine_projection(Vec2 y, double s_guess, double bracket) const {
  // Minimise f(s) = |gamma(s) - y|^2 / 2 over [s_guess - bracket, s_guess + bracket].
  const Vec2 base = point(s_guess) - y;
  auto diff = [&](double ds) { return base + offset(s_guess, ds); };
  auto fprime = [&](double ds) { return dot(diff(ds), d1(s_guess + ds)); };
  auto fsecond = [&](double ds) {
    return norm2(d1(s_guess + ds)) + dot(diff(ds), d2(s_guess + ds));
  };

  double ds = 0.0;
  bool ok = false;
  for (int it = 0; it < 50; ++it) {
    const double f2 = fsecond(ds);
    if (!(f2 > 0.0)) break;
    const double step = -fprime(ds) / f2;
    ds += step;
    if (std::abs(ds) > bracket) break;
    if (std::abs(step) < 1e-15) {
      ok = true;
      break;
    }
  }
  if (ok) return wrap(s_guess + ds);

  // Golden-section fallback on the squared distance, then a Newton polish.
  auto f = [&](double t) { return norm2(diff(t)); };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -bracket, hi = bracket;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-13) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  ds = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double f2v = fsecond(ds);
    if (!(f2v > 0.0)) break;
    const double step = -fprime(ds) / f2v;
    if (std::abs(step) > 1e-10) break;
    ds += step;
  }
  return wrap(s_guess + ds);
}

BoundaryProjection Domain::dist_to_boundary(Vec2 y) const {
  std::vector<double> d2s(kSamples);
  for (int k = 0; k < kSamples; ++k) d2s[k] = norm2(sample_points_[k] - y);
  std::vector<int> minima;
  for (int k = 0; k < kSamples; ++k) {
    const double prev = d2s[(k + kSamples - 1) % kSamples];
    const double next = d2s[(k + 1) % kSamples];
    if (d2s[k] <= prev && d2s[k] <= next) minima.push_back(k);
  }
  std::sort(minima.begin(), minima.end(), [&](int a, int b) { return d2s[a] < d2s[b]; });
  if (minima.size() > 8) minima.resize(8);

  const double bracket = 2.0 / kSamples;
  struct Cand {
    double s, d;
  };
  std::vector<Cand> cands;
  for (int k : minima) {
    const double s = refine_projection(y, sample_params_[k], bracket);
    cands.push_back({s, distance(point(s), y)});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
  const double dmin = cands.front().d;
  const double tol = 1e-9 * (1.0 + dmin);
  double s_best = cands.front().s;
  bool unique = true;
  for (const Cand& c : cands) {
    if (c.d - dmin > tol) continue;
    double gap = std::abs(c.s - s_best);
    gap = std::min(gap, 1.0 - gap);
    if (gap > 1e-6) {
      unique = false;
      s_best = std::min(s_best, c.s);
    }
  }
  BoundaryProjection out;
  out.nearest = boundary_point(s_best);
  out.distance = distance(out.nearest.position, y);
  out.unique = unique;
  return out;
}

double Domain::project_param(Vec2 y) const { return dist_to_boundary(y).nearest.param; }

Vec2 Domain::reflect_across_boundary(Vec2 y) const {
  const BoundaryProjection pr = dist_to_boundary(y);
  const double d0 = tubular_radius();
  if (pr.distance >= d0) {
    std::ostringstream msg;
    msg << "point " << y << " lies at distance " << pr.distance
        << " from the boundary, outside the tubular neighbourhood of radius d0=" << d0;
    throw GeometryError(msg.str());
  }
  return y + (2.0 * pr.distance) * pr.nearest.normal;
}

}  // namespace spikelab
