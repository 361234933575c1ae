#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikelab/vec2.hpp"

namespace spikelab {

/// A point on the boundary curve together with its local frame.
struct BoundaryPoint {
  double param = 0.0;  ///< curve parameter in [0, 1)
  Vec2 position;
  Vec2 normal;   ///< unit outward normal
  Vec2 tangent;  ///< unit tangent, counterclockwise
};

/// Result of projecting an interior point onto the boundary.
struct BoundaryProjection {
  double distance = 0.0;
  BoundaryPoint nearest;
  /// False when a second, distinct minimiser is within tolerance of the first.
  bool unique = true;
};

struct BBox {
  Vec2 lo;
  Vec2 hi;
  double diameter() const { return norm(hi - lo); }
};

/// Closed C^2 curve s -> point, periodic with period 1, traversed counterclockwise.
class BoundaryCurve {
 public:
  virtual ~BoundaryCurve() = default;
  virtual std::string kind() const = 0;
  virtual Vec2 point(double s) const = 0;
  virtual Vec2 d1(double s) const = 0;
  virtual Vec2 d2(double s) const = 0;
  virtual Vec2 d3(double s) const = 0;
  /// point(s0 + ds) - point(s0), accurate relative to |ds| even when ds is tiny.
  virtual Vec2 offset(double s0, double ds) const;
};

/// The planar domain, represented by its boundary curve and an optional translation.
///
/// Values are immutable after construction; sampled quantities (bounding box,
/// curvature bound, perimeter, area) are computed once in the constructor.
class Domain {
 public:
  static Domain disk(Vec2 center, double radius);
  static Domain ellipse(Vec2 center, double semi_x, double semi_y);
  /// Axis-aligned rectangle whose corners are replaced by quarter circles.
  static Domain smoothed_rect(Vec2 center, double half_width, double half_height,
                              double corner_radius);
  /// Periodic cubic spline through the given knots (counterclockwise order).
  static Domain spline(std::vector<Vec2> knots);

  Domain translated(Vec2 shift) const;

  std::string kind() const { return curve_->kind(); }
  Vec2 shift() const { return shift_; }

  Vec2 point(double s) const { return curve_->point(wrap(s)) + shift_; }
  Vec2 d1(double s) const { return curve_->d1(wrap(s)); }
  Vec2 d2(double s) const { return curve_->d2(wrap(s)); }
  Vec2 d3(double s) const { return curve_->d3(wrap(s)); }
  Vec2 offset(double s0, double ds) const { return curve_->offset(wrap(s0), ds); }

  double speed(double s) const { return norm(d1(s)); }
  Vec2 tangent(double s) const { return normalized(d1(s)); }
  Vec2 normal(double s) const {
    const Vec2 t = tangent(s);
    return {t.y, -t.x};
  }
  /// Signed curvature, positive where the domain is locally convex.
  double curvature(double s) const;
  /// d(normal)/ds.
  Vec2 normal_derivative(double s) const;
  BoundaryPoint boundary_point(double s) const;

  BBox bbox() const { return bbox_; }
  /// Largest distance between two boundary points.
  double diameter() const { return diameter_; }
  double perimeter() const { return perimeter_; }
  double area() const { return area_; }
  double max_curvature() const { return max_curvature_; }

  /// Radius of the tubular neighbourhood in which reflection is defined.
  double tubular_radius() const;
  void set_tubular_radius(double d0) { tubular_override_ = d0; }

  int winding_number(Vec2 y) const;
  bool contains(Vec2 y) const;
  /// Sampled segment-intersection test of the boundary polygon.
  bool is_simple(int samples = 512) const;

  BoundaryProjection dist_to_boundary(Vec2 y) const;
  /// Nearest boundary parameter to y (y may lie on either side of the curve).
  double project_param(Vec2 y) const;
  Vec2 reflect_across_boundary(Vec2 y) const;

  static double wrap(double s);

 private:
  Domain(std::shared_ptr<const BoundaryCurve> curve, Vec2 shift);
  void sample();
  double refine_projection(Vec2 y, double s_guess, double bracket) const;

  std::shared_ptr<const BoundaryCurve> curve_;
  Vec2 shift_;
  std::vector<double> sample_params_;
  std::vector<Vec2> sample_points_;
  BBox bbox_;
  double perimeter_ = 0.0;
  double diameter_ = 0.0;
  double area_ = 0.0;
  double max_curvature_ = 0.0;
  std::optional<double> tubular_override_;
};

}  // namespace spikelab
