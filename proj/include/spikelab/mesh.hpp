#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "spikelab/geometry.hpp"

namespace spikelab {

/// Point toward which the mesh is graded, with the target element size there.
struct GradingCenter {
  Vec2 point;  ///< world coordinates
  double h_min = 0.0;
  /// Set for points on the boundary; the point is then taken as dom.point(param).
  std::optional<double> boundary_param;
};

struct BoundaryEdge {
  int a = 0, b = 0;      ///< node indices, counterclockwise along the boundary
  double sa = 0.0;       ///< curve parameter of node a
  double ds = 0.0;       ///< parameter increment from a to b (positive)
  Vec2 normal;           ///< outward unit normal of the chord
};

struct Location {
  int tri = -1;
  std::array<double, 3> lambda{};
  bool inside = false;  ///< false when the point was clamped to a boundary triangle
};

/// Triangulation of the domain stored in a local frame: node coordinates are
/// world - origin. Grading centers resolve scales far below the coordinate magnitude
/// because the first center is the origin and boundary nodes are placed by exact curve
/// offsets from it.
class Mesh {
 public:
  Vec2 origin;
  std::optional<double> origin_param;  ///< set when the origin lies on the boundary
  Domain domain;
  double h = 0.0;
  double grading = 0.3;  ///< size growth per unit distance from a center
  std::vector<GradingCenter> centers;

  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary;
  std::vector<double> node_param;  ///< curve parameter of boundary nodes, NaN otherwise

  explicit Mesh(Domain dom) : domain(std::move(dom)) {}

  Vec2 world(Vec2 local) const { return origin + local; }
  Vec2 to_local(Vec2 world_pt) const;
  /// Local coordinates of the boundary point with parameter s.
  Vec2 boundary_local(double s) const;
  /// Target size function in local coordinates.
  double size_at(Vec2 local) const;
  /// Local coordinates of grading center k.
  Vec2 center_local(std::size_t k) const;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  double area(int t) const;
  double min_angle_deg() const;
  double min_area() const;
  double boundary_length() const;
  /// Shortest edge incident to the node nearest to `local`.
  double local_edge_size(Vec2 local) const;
  int nearest_node(Vec2 local) const;

  Location locate(Vec2 local) const;
  /// Piecewise linear interpolation of a nodal field at a local point.
  double interpolate(const std::vector<double>& field, Vec2 local) const;

  /// "nodes N / triangles M", then world coordinates, then index triples.
  void export_text(std::ostream& os) const;

  void build_locator();

 private:
  struct Grid {
    Vec2 lo;
    double cell = 1.0;
    int nx = 0, ny = 0;
    std::vector<int> seed;  // triangle index per cell, -1 if empty
  };
  Grid grid_;
  std::vector<std::array<int, 3>> adjacency_;  // neighbour opposite vertex i, -1 on the boundary
};

/// Delaunay-refined triangulation with element size min(h, h_c + g |x - c|) and minimum
/// angle above 20 degrees. The first center (if any) becomes the local origin.
Mesh build_mesh(const Domain& dom, double h, const std::vector<GradingCenter>& centers = {},
                double grading = 0.3);

}  // namespace spikelab
