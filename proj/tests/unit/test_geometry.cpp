#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "spikelab/error.hpp"
#include "spikelab/geometry.hpp"
#include "spikelab/weight.hpp"

using namespace spikelab;

namespace {

std::vector<Domain> sample_domains() {
  return {Domain::disk({0, 0}, 1.0), Domain::ellipse({0.5, -0.2}, 2.0, 1.0),
          Domain::smoothed_rect({0, 0}, 1.5, 1.0, 0.3),
          Domain::spline({{1.0, 0.0}, {0.8, 0.7}, {0.0, 1.1}, {-0.9, 0.6}, {-1.2, -0.1},
                          {-0.5, -0.9}, {0.4, -0.8}})};
}

}  // namespace

TEST(Geometry, UnitDiskDistanceRadial) {
  const Domain d = Domain::disk({0, 0}, 1.0);
  const auto pr = d.dist_to_boundary({0.5, 0.0});
  EXPECT_NEAR(pr.distance, 0.5, 1e-14);
  EXPECT_NEAR(pr.nearest.position.x, 1.0, 1e-14);
  EXPECT_NEAR(pr.nearest.position.y, 0.0, 1e-14);
  EXPECT_TRUE(pr.unique);
}

TEST(Geometry, UnitDiskCenterIsAmbiguous) {
  const Domain d = Domain::disk({0, 0}, 1.0);
  const auto pr = d.dist_to_boundary({0.0, 0.0});
  EXPECT_NEAR(pr.distance, 1.0, 1e-14);
  EXPECT_FALSE(pr.unique);
}

TEST(Geometry, EllipseDistanceMatchesDenseSampling) {
  const Domain d = Domain::ellipse({0, 0}, 2.0, 1.0);
  const Vec2 y{0.0, 0.4};
  double brute = INFINITY;
  const int n = 1'000'000;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    brute = std::min(brute, std::hypot(2.0 * std::cos(t) - y.x, std::sin(t) - y.y));
  }
  EXPECT_NEAR(d.dist_to_boundary(y).distance, brute, 1e-8);
}

TEST(Geometry, ReflectionOnDisk) {
  const Domain d = Domain::disk({0, 0}, 1.0);
  const Vec2 a = d.reflect_across_boundary({0.9, 0.0});
  EXPECT_NEAR(a.x, 1.1, 1e-14);
  EXPECT_NEAR(a.y, 0.0, 1e-14);
  const Vec2 b = d.reflect_across_boundary({0.0, 0.8});
  EXPECT_NEAR(b.x, 0.0, 1e-14);
  EXPECT_NEAR(b.y, 1.2, 1e-14);
}

TEST(Geometry, ReflectionNearFlatEdgeOfSmoothedRect) {
  const Domain d = Domain::smoothed_rect({0, 0}, 1.5, 1.0, 0.3);
  const Vec2 y{0.2, 1.0 - 0.05};
  const Vec2 ys = d.reflect_across_boundary(y);
  EXPECT_NEAR(distance(y, ys), 0.1, 1e-10);
  EXPECT_NEAR(distance(y, ys), 2.0 * d.dist_to_boundary(y).distance, 1e-10);
  EXPECT_FALSE(d.contains(ys));
}

TEST(Geometry, ReflectionOutsideTubeNamesRadius) {
  const Domain d = Domain::disk({0, 0}, 1.0);
  try {
    d.reflect_across_boundary({0.1, 0.0});
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("d0"), std::string::npos);
  }
  Domain wide = d;
  wide.set_tubular_radius(0.95);
  EXPECT_NO_THROW(wide.reflect_across_boundary({0.1, 0.0}));
}

TEST(Geometry, ReflectionIdentityOnRandomTubePoints) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const Domain& d : sample_domains()) {
    const double d0 = d.tubular_radius();
    for (int k = 0; k < 50; ++k) {
      const double s = uni(rng);
      const double depth = d0 * (0.02 + 0.9 * uni(rng));
      const Vec2 y = d.point(s) - depth * d.normal(s);
      if (!d.contains(y)) continue;
      const auto pr = d.dist_to_boundary(y);
      if (pr.distance >= d0) continue;
      const Vec2 ys = d.reflect_across_boundary(y);
      EXPECT_NEAR(distance(y, ys) - 2.0 * pr.distance, 0.0, 1e-10) << d.kind();
    }
  }
}

TEST(Geometry, FrameIsOrthonormal) {
  for (const Domain& d : sample_domains()) {
    for (int k = 0; k < 400; ++k) {
      const BoundaryPoint bp = d.boundary_point(k / 400.0);
      EXPECT_NEAR(norm(bp.normal), 1.0, 1e-12);
      EXPECT_NEAR(dot(bp.normal, bp.tangent), 0.0, 1e-12);
    }
  }
}

TEST(Geometry, NormalPointsOutward) {
  for (const Domain& d : sample_domains()) {
    for (int k = 0; k < 64; ++k) {
      const double s = k / 64.0;
      const Vec2 out = d.point(s) + 1e-3 * d.normal(s);
      const Vec2 in = d.point(s) - 1e-3 * d.normal(s);
      EXPECT_FALSE(d.contains(out)) << d.kind() << " s=" << s;
      EXPECT_TRUE(d.contains(in)) << d.kind() << " s=" << s;
    }
  }
}

TEST(Geometry, WindingNumberIsOneInside) {
  std::mt19937 rng(11);
  for (const Domain& d : sample_domains()) {
    const BBox bb = d.bbox();
    std::uniform_real_distribution<double> ux(bb.lo.x, bb.hi.x), uy(bb.lo.y, bb.hi.y);
    int inside = 0;
    for (int k = 0; k < 200 && inside < 40; ++k) {
      const Vec2 y{ux(rng), uy(rng)};
      if (d.dist_to_boundary(y).distance < 0.05) continue;
      const int w = d.winding_number(y);
      EXPECT_TRUE(w == 0 || w == 1);
      if (w == 1) ++inside;
    }
    EXPECT_GT(inside, 5);
  }
}

TEST(Geometry, BuiltinsAreSimple) {
  for (const Domain& d : sample_domains()) EXPECT_TRUE(d.is_simple()) << d.kind();
}

TEST(Geometry, PerimeterAndArea) {
  const Domain disk = Domain::disk({3, 4}, 2.0);
  EXPECT_NEAR(disk.perimeter(), 4.0 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(disk.area(), 4.0 * std::numbers::pi, 1e-12);
  const Domain rect = Domain::smoothed_rect({0, 0}, 1.5, 1.0, 0.3);
  EXPECT_NEAR(rect.perimeter(), 4 * 1.2 + 4 * 0.7 + 2 * std::numbers::pi * 0.3, 1e-9);
  EXPECT_NEAR(rect.area(), 3.0 * 2.0 - (4.0 - std::numbers::pi) * 0.09, 1e-5);
}

TEST(Geometry, DerivativesMatchFiniteDifferences) {
  for (const Domain& d : sample_domains()) {
    for (int k = 0; k < 37; ++k) {
      const double s = (k + 0.31) / 37.0;
      const double e = 1e-6;
      const Vec2 fd1 = (d.point(s + e) - d.point(s - e)) / (2 * e);
      const Vec2 fd2 = (d.d1(s + e) - d.d1(s - e)) / (2 * e);
      EXPECT_NEAR(norm(fd1 - d.d1(s)) / norm(d.d1(s)), 0.0, 1e-7) << d.kind();
      EXPECT_NEAR(norm(fd2 - d.d2(s)), 0.0, 1e-5 * (1.0 + norm(d.d2(s)))) << d.kind();
    }
  }
}

TEST(Geometry, OffsetIsAccurateForTinySteps) {
  for (const Domain& d : sample_domains()) {
    const double s0 = 0.137;
    for (double ds : {1e-3, 1e-5, 1e-8, 1e-12, -1e-13}) {
      const Vec2 off = d.offset(s0, ds);
      // first-order term dominates: |off - ds*d1| <= C ds^2
      const Vec2 lin = ds * d.d1(s0);
      EXPECT_LE(norm(off - lin), 2.0 * ds * ds * (1.0 + norm(d.d2(s0)))) << d.kind() << " ds=" << ds;
      EXPECT_GT(norm(off), 0.0);
    }
  }
}

TEST(Geometry, TranslationMovesEverything) {
  const Domain d = Domain::disk({0, 0}, 1.0);
  const Domain t = d.translated({2.0, 0.0});
  EXPECT_NEAR(t.point(0.0).x, 3.0, 1e-15);
  EXPECT_TRUE(t.contains({2.0, 0.0}));
  EXPECT_FALSE(t.contains({0.0, 0.0}));
  EXPECT_NEAR(t.bbox().lo.x, 1.0, 1e-6);
  EXPECT_NEAR(t.dist_to_boundary({2.5, 0.0}).distance, 0.5, 1e-14);
}

TEST(Geometry, TubularRadiusFromCurvature) {
  const Domain e = Domain::ellipse({0, 0}, 2.0, 1.0);
  // max curvature of the ellipse is a/b^2 = 2
  EXPECT_NEAR(e.max_curvature(), 2.0, 1e-9);
  EXPECT_NEAR(e.tubular_radius(), 0.225, 1e-9);
}

TEST(Weight, GradientsMatchFiniteDifferences) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.5);
  const std::vector<WeightField> ws = {
      WeightField::constant(2.0), WeightField::monomial(1, 0), WeightField::monomial(2, 3),
      WeightField::bump(1.0, 0.8, {1.0, 1.0}, 0.4),
      WeightField::product(WeightField::monomial(1, 1), WeightField::bump(1.0, -0.5, {2, 1}, 0.7))};
  for (const auto& w : ws) {
    for (int k = 0; k < 20; ++k) {
      const Vec2 x{u(rng), u(rng)};
      const double e = 1e-6;
      const Vec2 fd{(w.eval(x + Vec2{e, 0}) - w.eval(x - Vec2{e, 0})) / (2 * e),
                    (w.eval(x + Vec2{0, e}) - w.eval(x - Vec2{0, e})) / (2 * e)};
      const Vec2 g = w.grad(x);
      EXPECT_LE(norm(fd - g), 1e-6 * std::max(1.0, norm(g))) << w.describe();
      const Vec2 gx = (w.grad(x + Vec2{e, 0}) - w.grad(x - Vec2{e, 0})) / (2 * e);
      const Vec2 gy = (w.grad(x + Vec2{0, e}) - w.grad(x - Vec2{0, e})) / (2 * e);
      const Sym2 hs = w.hessian(x);
      const double scale = std::max(1.0, std::abs(hs.xx) + std::abs(hs.yy) + std::abs(hs.xy));
      EXPECT_NEAR(hs.xx, gx.x, 1e-5 * scale);
      EXPECT_NEAR(hs.xy, gx.y, 1e-5 * scale);
      EXPECT_NEAR(hs.xy, gy.x, 1e-5 * scale);
      EXPECT_NEAR(hs.yy, gy.y, 1e-5 * scale);
      EXPECT_GT(w.eval(x), 0.0);
    }
  }
}
