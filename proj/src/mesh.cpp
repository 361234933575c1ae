#include "spikelab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "spikelab/error.hpp"
#include "spikelab/predicates.hpp"

namespace spikelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double wrap_signed(double ds) {
  ds -= std::round(ds);
  return ds;
}

struct Tri {
  std::array<int, 3> v;
  std::array<int, 3> n{-1, -1, -1};  // neighbour across the edge opposite v[i]
  bool alive = true;
};

Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ba = b - a, ca = c - a;
  const double d = 2.0 * cross(ba, ca);
  const double bl = norm2(ba), cl = norm2(ca);
  return a + Vec2{(ca.y * bl - ba.y * cl) / d, (ba.x * cl - ca.x * bl) / d};
}

// Incremental constrained Delaunay triangulation with Ruppert-style refinement.
// Boundary segments are the edges with no neighbour once the exterior is removed.
class Triangulator {
 public:
  explicit Triangulator(const Mesh& mesh) : mesh_(mesh) {}

  void run(const std::vector<double>& boundary_params);

  std::vector<Vec2> pts;
  std::vector<double> param;
  std::vector<Tri> tris;

 private:
  enum class WalkResult { Inside, HitBoundary, Lost };
  struct Walk {
    WalkResult result;
    int tri;
    int edge;
  };

  Walk walk(int start, Vec2 p) const;
  int insert_point(Vec2 p, double prm, int seed, int split_edge);
  bool edge_exists(int a, int b) const;
  void remove_exterior(const std::vector<int>& loop);
  void refine();
  bool split_segment(int t, int i);
  double size_at(Vec2 p) const { return mesh_.size_at(p); }
  bool is_bad(int t) const;
  void touch(int t) { vtri_[tris[t].v[0]] = vtri_[tris[t].v[1]] = vtri_[tris[t].v[2]] = t; }

  const Mesh& mesh_;
  std::vector<int> vtri_;
  std::deque<int> queue_;
  bool constrained_ = false;
  int hint_ = 0;
  std::size_t max_vertices_ = 4'000'000;
};

Triangulator::Walk Triangulator::walk(int start, Vec2 p) const {
  int t = start;
  const std::size_t limit = 4 * tris.size() + 100;
  for (std::size_t step = 0; step < limit; ++step) {
    const Tri& tr = tris[t];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = static_cast<int>((k + step) % 3);
      const Vec2 a = pts[tr.v[(i + 1) % 3]], b = pts[tr.v[(i + 2) % 3]];
      if (orient2d(a, b, p) < 0) {
        if (tr.n[i] < 0) return {WalkResult::HitBoundary, t, i};
        t = tr.n[i];
        moved = true;
        break;
      }
    }
    if (!moved) return {WalkResult::Inside, t, -1};
  }
  return {WalkResult::Lost, t, -1};
}

// Bowyer-Watson insertion restricted to the region reachable from `seed` without crossing
// boundary segments. When split_edge >= 0, that edge of the seed triangle is a boundary
// segment being replaced by the two halves through p.
int Triangulator::insert_point(Vec2 p, double prm, int seed, int split_edge) {
  std::vector<int> cavity;
  std::unordered_set<int> in_cavity;
  auto grow = [&](std::unordered_set<int> const& banned) {
    cavity.clear();
    in_cavity.clear();
    std::vector<int> stack{seed};
    in_cavity.insert(seed);
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity.push_back(t);
      for (int i = 0; i < 3; ++i) {
        const int nb = tris[t].n[i];
        if (nb < 0 || in_cavity.count(nb) || banned.count(nb)) continue;
        const Tri& tn = tris[nb];
        if (incircle(pts[tn.v[0]], pts[tn.v[1]], pts[tn.v[2]], p) > 0) {
          in_cavity.insert(nb);
          stack.push_back(nb);
        }
      }
    }
  };

  struct BEdge {
    int a, b, outside, owner;
  };
  std::vector<BEdge> edges;
  std::unordered_set<int> banned;
  for (int attempt = 0;; ++attempt) {
    grow(banned);
    edges.clear();
    int bad_owner = -1;
    for (int t : cavity) {
      for (int i = 0; i < 3; ++i) {
        const int nb = tris[t].n[i];
        if (nb >= 0 && in_cavity.count(nb)) continue;
        if (t == seed && i == split_edge) continue;
        const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
        if (orient2d(pts[a], pts[b], p) <= 0) bad_owner = t;
        edges.push_back({a, b, nb, t});
      }
    }
    if (bad_owner < 0) break;
    if (bad_owner == seed || attempt > 64) {
      return -1;
    }
    banned.insert(bad_owner);
  }

  const int vid = static_cast<int>(pts.size());
  pts.push_back(p);
  param.push_back(prm);
  vtri_.push_back(-1);

  std::unordered_map<int, int> by_start, by_end;
  std::vector<int> created;
  for (const BEdge& e : edges) {
    Tri nt;
    nt.v = {e.a, e.b, vid};
    nt.n[2] = e.outside;
    const int id = static_cast<int>(tris.size());
    tris.push_back(nt);
    created.push_back(id);
    by_start[e.a] = id;
    by_end[e.b] = id;
    if (e.outside >= 0) {
      Tri& out = tris[e.outside];
      for (int j = 0; j < 3; ++j) {
        if (out.n[j] == e.owner) {
          const int oa = out.v[(j + 1) % 3], ob = out.v[(j + 2) % 3];
          if ((oa == e.b && ob == e.a)) out.n[j] = id;
        }
      }
    }
  }
  for (int id : created) {
    Tri& t = tris[id];
    auto s = by_start.find(t.v[1]);  // triangle whose edge starts at b shares (b, p)
    t.n[0] = s == by_start.end() ? -1 : s->second;
    auto e = by_end.find(t.v[0]);  // triangle whose edge ends at a shares (p, a)
    t.n[1] = e == by_end.end() ? -1 : e->second;
  }
  for (int t : cavity) tris[t].alive = false;
  for (int id : created) {
    touch(id);
    queue_.push_back(id);
  }
  hint_ = created.front();
  return vid;
}

bool Triangulator::edge_exists(int a, int b) const {
  // Rotate around a starting from a known incident triangle.
  const int start = vtri_[a];
  if (start < 0) return false;
  std::unordered_set<int> seen;
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    if (!seen.insert(t).second) continue;
    const Tri& tr = tris[t];
    int ia = -1;
    for (int i = 0; i < 3; ++i) {
      if (tr.v[i] == a) ia = i;
    }
    if (ia < 0) continue;
    for (int i = 0; i < 3; ++i) {
      if (tr.v[i] == b) return true;
    }
    // neighbours across the two edges incident to a
    for (int i = 0; i < 3; ++i) {
      if (i == ia) continue;
      if (tr.n[i] >= 0 && !seen.count(tr.n[i])) stack.push_back(tr.n[i]);
    }
  }
  return false;
}

void Triangulator::remove_exterior(const std::vector<int>& loop) {
  std::unordered_set<std::uint64_t> segs;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    segs.insert(edge_key(loop[k], loop[(k + 1) % loop.size()]));
  }
  std::vector<char> outside(tris.size(), 0);
  std::vector<int> stack;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (!tris[t].alive) continue;
    for (int v : tris[t].v) {
      if (v < 3) {
        stack.push_back(static_cast<int>(t));
        outside[t] = 1;
        break;
      }
    }
  }
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    const Tri& tr = tris[t];
    for (int i = 0; i < 3; ++i) {
      const int nb = tr.n[i];
      if (nb < 0 || outside[nb]) continue;
      if (segs.count(edge_key(tr.v[(i + 1) % 3], tr.v[(i + 2) % 3]))) continue;
      outside[nb] = 1;
      stack.push_back(nb);
    }
  }
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (tris[t].alive && outside[t]) tris[t].alive = false;
  }
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (!tris[t].alive) continue;
    for (int i = 0; i < 3; ++i) {
      const int nb = tris[t].n[i];
      if (nb >= 0 && !tris[nb].alive) {
        tris[t].n[i] = -1;
        if (!segs.count(edge_key(tris[t].v[(i + 1) % 3], tris[t].v[(i + 2) % 3]))) {
          throw MeshError("exterior removal exposed a non-boundary edge");
        }
      }
    }
    touch(static_cast<int>(t));
    hint_ = static_cast<int>(t);
  }
  constrained_ = true;
}

bool Triangulator::split_segment(int t, int i) {
  const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
  const double sa = param[a], sb = param[b];
  double ds = Domain::wrap(sb - sa);
  if (!(ds > 0.0)) throw MeshError("degenerate boundary segment");
  const double sm = Domain::wrap(sa + 0.5 * ds);
  const Vec2 m = mesh_.boundary_local(sm);
  const int v = insert_point(m, sm, t, i);
  if (v < 0) {
    std::ostringstream msg;
    msg << "boundary segment split failed near " << mesh_.world(m)
        << "; boundary resolution too coarse for its curvature";
    throw MeshError(msg.str());
  }
  return true;
}

bool Triangulator::is_bad(int t) const {
  const Tri& tr = tris[t];
  const Vec2 a = pts[tr.v[0]], b = pts[tr.v[1]], c = pts[tr.v[2]];
  const double la = norm2(b - c), lb = norm2(c - a), lc = norm2(a - b);
  const double lmax = std::sqrt(std::max({la, lb, lc}));
  const double lmin = std::sqrt(std::min({la, lb, lc}));
  const Vec2 centroid = (a + b + c) / 3.0;
  if (lmax > 1.5 * size_at(centroid)) return true;
  const double area2 = std::abs(cross(b - a, c - a));
  const double radius = std::sqrt(la * lb * lc) / (2.0 * area2);
  return radius > std::numbers::sqrt2 * lmin;
}

void Triangulator::refine() {
  queue_.clear();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (tris[t].alive) queue_.push_back(static_cast<int>(t));
  }
  while (!queue_.empty()) {
    const int t = queue_.front();
    queue_.pop_front();
    if (!tris[t].alive || !is_bad(t)) continue;
    if (pts.size() > max_vertices_) throw MeshError("mesh refinement exceeded the vertex budget");
    const Tri& tr = tris[t];
    const Vec2 c = circumcenter(pts[tr.v[0]], pts[tr.v[1]], pts[tr.v[2]]);
    const Walk w = walk(t, c);
    if (w.result == WalkResult::HitBoundary) {
      split_segment(w.tri, w.edge);
      if (tris[t].alive) queue_.push_back(t);
      continue;
    }
    if (w.result == WalkResult::Lost) throw MeshError("point location failed during refinement");
    // Encroachment: circumcenter inside the diametral circle of a boundary segment near it.
    int enc_t = -1, enc_i = -1;
    {
      std::vector<int> stack{w.tri};
      std::unordered_set<int> seen{w.tri};
      while (!stack.empty() && enc_t < 0) {
        const int u = stack.back();
        stack.pop_back();
        const Tri& tu = tris[u];
        for (int i = 0; i < 3; ++i) {
          const int nb = tu.n[i];
          if (nb < 0) {
            const Vec2 a = pts[tu.v[(i + 1) % 3]], b = pts[tu.v[(i + 2) % 3]];
            if (dot(a - c, b - c) < 0.0) {
              enc_t = u;
              enc_i = i;
              break;
            }
            continue;
          }
          if (seen.count(nb)) continue;
          const Tri& tn = tris[nb];
          if (incircle(pts[tn.v[0]], pts[tn.v[1]], pts[tn.v[2]], c) > 0) {
            seen.insert(nb);
            stack.push_back(nb);
          }
        }
      }
    }
    if (enc_t >= 0) {
      split_segment(enc_t, enc_i);
      if (tris[t].alive) queue_.push_back(t);
      continue;
    }
    // Refuse to place a point on top of an existing vertex.
    bool duplicate = false;
    for (int v : tris[w.tri].v) {
      if (pts[v] == c) duplicate = true;
    }
    if (duplicate) continue;
    if (insert_point(c, kNaN, w.tri, -1) < 0) {
      throw MeshError("cavity construction failed during refinement");
    }
  }
}

void Triangulator::run(const std::vector<double>& boundary_params) {
  std::vector<Vec2> bpts;
  bpts.reserve(boundary_params.size());
  for (double s : boundary_params) bpts.push_back(mesh_.boundary_local(s));

  Vec2 lo{INFINITY, INFINITY}, hi{-INFINITY, -INFINITY};
  for (const Vec2& p : bpts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const Vec2 mid = 0.5 * (lo + hi);
  const double d = std::max(hi.x - lo.x, hi.y - lo.y);
  pts = {mid + Vec2{-20.0 * d, -10.0 * d}, mid + Vec2{20.0 * d, -10.0 * d},
         mid + Vec2{0.0, 20.0 * d}};
  param = {kNaN, kNaN, kNaN};
  vtri_ = {0, 0, 0};
  tris.clear();
  tris.push_back(Tri{{0, 1, 2}});

  // Unconstrained insertion of the boundary vertices.
  std::vector<int> loop;
  for (std::size_t k = 0; k < bpts.size(); ++k) {
    const Walk w = walk(hint_, bpts[k]);
    if (w.result != WalkResult::Inside) throw MeshError("boundary vertex location failed");
    const int v = insert_point(bpts[k], boundary_params[k], w.tri, -1);
    if (v < 0) throw MeshError("boundary vertex insertion failed");
    loop.push_back(v);
  }

  // Recover boundary segments by splitting those missing from the triangulation.
  for (int round = 0;; ++round) {
    if (round > 60) throw MeshError("boundary recovery did not terminate");
    std::vector<int> next;
    bool changed = false;
    for (std::size_t k = 0; k < loop.size(); ++k) {
      const int a = loop[k], b = loop[(k + 1) % loop.size()];
      next.push_back(a);
      if (edge_exists(a, b)) continue;
      const double ds = Domain::wrap(param[b] - param[a]);
      const double sm = Domain::wrap(param[a] + 0.5 * ds);
      const Vec2 m = mesh_.boundary_local(sm);
      const Walk w = walk(hint_, m);
      if (w.result != WalkResult::Inside) throw MeshError("boundary recovery failed");
      const int v = insert_point(m, sm, w.tri, -1);
      if (v < 0) throw MeshError("boundary recovery failed");
      next.push_back(v);
      changed = true;
    }
    loop = std::move(next);
    if (!changed) break;
  }
  remove_exterior(loop);

  // Interior grading centers become vertices.
  for (std::size_t k = 0; k < mesh_.centers.size(); ++k) {
    if (mesh_.centers[k].boundary_param) continue;
    const Vec2 c = mesh_.center_local(k);
    const Walk w = walk(hint_, c);
    if (w.result != WalkResult::Inside) {
      throw MeshError("interior grading center lies outside the meshed region");
    }
    if (insert_point(c, kNaN, w.tri, -1) < 0) throw MeshError("grading center insertion failed");
  }

  refine();
}

}  // namespace

Vec2 Mesh::to_local(Vec2 world_pt) const { return world_pt - origin; }

Vec2 Mesh::boundary_local(double s) const {
  if (origin_param) return domain.offset(*origin_param, wrap_signed(s - *origin_param));
  return domain.point(s) - origin;
}

Vec2 Mesh::center_local(std::size_t k) const {
  const GradingCenter& c = centers[k];
  if (c.boundary_param) return boundary_local(*c.boundary_param);
  return c.point - origin;
}

double Mesh::size_at(Vec2 local) const {
  double s = h;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    s = std::min(s, centers[k].h_min + grading * norm(local - center_local(k)));
  }
  return s;
}

double Mesh::area(int t) const {
  const auto& tr = triangles[t];
  return 0.5 * cross(nodes[tr[1]] - nodes[tr[0]], nodes[tr[2]] - nodes[tr[0]]);
}

double Mesh::min_angle_deg() const {
  double best = 180.0;
  for (const auto& tr : triangles) {
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = nodes[tr[i]], b = nodes[tr[(i + 1) % 3]], c = nodes[tr[(i + 2) % 3]];
      const double ang = std::atan2(std::abs(cross(b - a, c - a)), dot(b - a, c - a));
      best = std::min(best, ang * 180.0 / std::numbers::pi);
    }
  }
  return best;
}

double Mesh::min_area() const {
  double best = INFINITY;
  for (std::size_t t = 0; t < triangles.size(); ++t) best = std::min(best, area(static_cast<int>(t)));
  return best;
}

double Mesh::boundary_length() const {
  double total = 0.0;
  for (const auto& e : boundary) total += distance(nodes[e.a], nodes[e.b]);
  return total;
}

int Mesh::nearest_node(Vec2 local) const {
  const Location loc = locate(local);
  const auto& tr = triangles[loc.tri];
  int best = tr[0];
  double bd = INFINITY;
  for (int v : tr) {
    const double d = norm2(nodes[v] - local);
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

double Mesh::local_edge_size(Vec2 local) const {
  const Location loc = locate(local);
  double shortest = INFINITY;
  const auto& tr = triangles[loc.tri];
  for (int i = 0; i < 3; ++i) shortest = std::min(shortest, distance(nodes[tr[i]], nodes[tr[(i + 1) % 3]]));
  return shortest;
}

void Mesh::build_locator() {
  // Adjacency from shared edges.
  adjacency_.assign(triangles.size(), {-1, -1, -1});
  std::unordered_map<std::uint64_t, std::pair<int, int>> owner;
  owner.reserve(triangles.size() * 3);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int i = 0; i < 3; ++i) {
      const std::uint64_t key = edge_key(triangles[t][(i + 1) % 3], triangles[t][(i + 2) % 3]);
      auto it = owner.find(key);
      if (it == owner.end()) {
        owner.emplace(key, std::make_pair(static_cast<int>(t), i));
      } else {
        adjacency_[t][i] = it->second.first;
        adjacency_[it->second.first][it->second.second] = static_cast<int>(t);
      }
    }
  }
  Vec2 lo{INFINITY, INFINITY}, hi{-INFINITY, -INFINITY};
  for (const Vec2& p : nodes) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double w = std::max(hi.x - lo.x, 1e-300), hgt = std::max(hi.y - lo.y, 1e-300);
  const int cells = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(triangles.size()))));
  grid_.cell = std::max(w, hgt) / cells;
  grid_.lo = lo;
  grid_.nx = static_cast<int>(w / grid_.cell) + 1;
  grid_.ny = static_cast<int>(hgt / grid_.cell) + 1;
  grid_.seed.assign(static_cast<std::size_t>(grid_.nx) * grid_.ny, -1);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const Vec2 c = (nodes[triangles[t][0]] + nodes[triangles[t][1]] + nodes[triangles[t][2]]) / 3.0;
    const int ix = std::clamp(static_cast<int>((c.x - lo.x) / grid_.cell), 0, grid_.nx - 1);
    const int iy = std::clamp(static_cast<int>((c.y - lo.y) / grid_.cell), 0, grid_.ny - 1);
    grid_.seed[static_cast<std::size_t>(iy) * grid_.nx + ix] = static_cast<int>(t);
  }
}

Location Mesh::locate(Vec2 p) const {
  if (triangles.empty()) throw MeshError("locate on an empty mesh");
  auto bary = [&](int t) {
    const auto& tr = triangles[t];
    const Vec2 a = nodes[tr[0]], b = nodes[tr[1]], c = nodes[tr[2]];
    const double area2 = cross(b - a, c - a);
    return std::array<double, 3>{cross(b - p, c - p) / area2, cross(c - p, a - p) / area2,
                                 cross(a - p, b - p) / area2};
  };
  int start = 0;
  if (!grid_.seed.empty()) {
    const int ix = std::clamp(static_cast<int>((p.x - grid_.lo.x) / grid_.cell), 0, grid_.nx - 1);
    const int iy = std::clamp(static_cast<int>((p.y - grid_.lo.y) / grid_.cell), 0, grid_.ny - 1);
    for (int r = 0; r < std::max(grid_.nx, grid_.ny) && start == 0; ++r) {
      for (int jy = std::max(0, iy - r); jy <= std::min(grid_.ny - 1, iy + r); ++jy) {
        for (int jx = std::max(0, ix - r); jx <= std::min(grid_.nx - 1, ix + r); ++jx) {
          const int s = grid_.seed[static_cast<std::size_t>(jy) * grid_.nx + jx];
          if (s >= 0) {
            start = s;
            goto found;
          }
        }
      }
    }
  found:;
  }
  if (!adjacency_.empty()) {
    int t = start;
    for (std::size_t step = 0; step < 4 * triangles.size() + 16; ++step) {
      const auto& tr = triangles[t];
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = static_cast<int>((k + step) % 3);
        if (orient2d(nodes[tr[(i + 1) % 3]], nodes[tr[(i + 2) % 3]], p) < 0) {
          if (adjacency_[t][i] < 0) {
            // Walked out through the boundary; accept if p is only a sagitta away.
            Location loc{t, bary(t), false};
            const Vec2 a = nodes[tr[(i + 1) % 3]], b = nodes[tr[(i + 2) % 3]];
            const double dist = std::abs(cross(b - a, p - a)) / norm(b - a);
            if (dist <= 0.25 * norm(b - a)) return loc;
            goto brute;
          }
          t = adjacency_[t][i];
          moved = true;
          break;
        }
      }
      if (!moved) return Location{t, bary(t), true};
    }
  }
brute:
  int best = 0;
  double best_min = -INFINITY;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto l = bary(static_cast<int>(t));
    const double m = std::min({l[0], l[1], l[2]});
    if (m > best_min) {
      best_min = m;
      best = static_cast<int>(t);
    }
  }
  return Location{best, bary(best), best_min >= -1e-12};
}

double Mesh::interpolate(const std::vector<double>& field, Vec2 local) const {
  const Location loc = locate(local);
  const auto& tr = triangles[loc.tri];
  return loc.lambda[0] * field[tr[0]] + loc.lambda[1] * field[tr[1]] + loc.lambda[2] * field[tr[2]];
}

void Mesh::export_text(std::ostream& os) const {
  os << "nodes " << nodes.size() << " / triangles " << triangles.size() << '\n';
  os.precision(17);
  for (const Vec2& p : nodes) {
    const Vec2 w = world(p);
    os << w.x << ' ' << w.y << '\n';
  }
  for (const auto& t : triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

namespace {

// Boundary parameters marched from each boundary anchor toward the next, forward from
// one end and backward from the other, always advancing the finer side.
std::vector<double> march_boundary(const Mesh& mesh, std::vector<double> anchors) {
  const Domain& dom = mesh.domain;
  if (anchors.empty()) anchors.push_back(0.0);
  std::sort(anchors.begin(), anchors.end());
  auto step_from = [&](double s, double dir) {
    const double sp = dom.speed(s);
    const double h0 = mesh.size_at(mesh.boundary_local(s)) / sp;
    const double s1 = s + dir * h0;
    const double h1 = mesh.size_at(mesh.boundary_local(s1)) / dom.speed(s1);
    return std::min(h0, h1);
  };
  std::vector<double> out;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double sa = anchors[k];
    double sb = k + 1 < anchors.size() ? anchors[k + 1] : anchors[0] + 1.0;
    if (sb <= sa) sb += 1.0;
    std::vector<double> fwd{sa}, bwd{sb};
    for (int guard = 0;; ++guard) {
      if (guard > 10'000'000) throw MeshError("boundary marching did not terminate");
      const double f = fwd.back(), b = bwd.back();
      const double hf = step_from(f, 1.0), hb = step_from(b, -1.0);
      const double gap = b - f;
      if (gap <= 1.2 * std::max(hf, hb)) {
        if (gap < 0.3 * std::min(hf, hb)) {
          if (fwd.size() > 1) {
            fwd.pop_back();
          } else if (bwd.size() > 1) {
            bwd.pop_back();
          }
        }
        break;
      }
      if (hf <= hb) {
        fwd.push_back(f + hf);
      } else {
        bwd.push_back(b - hb);
      }
    }
    for (double s : fwd) out.push_back(Domain::wrap(s));
    for (auto it = bwd.rbegin(); it + 1 != bwd.rend(); ++it) out.push_back(Domain::wrap(*it));
  }
  return out;
}

}  // namespace

Mesh build_mesh(const Domain& dom, double h, const std::vector<GradingCenter>& centers,
                double grading) {
  if (!(h > 0.0)) throw MeshError("mesh size h must be positive");
  Mesh mesh(dom);
  mesh.h = h;
  mesh.grading = grading;
  mesh.centers = centers;
  for (auto& c : mesh.centers) {
    if (c.boundary_param) {
      c.boundary_param = Domain::wrap(*c.boundary_param);
      c.point = dom.point(*c.boundary_param);
    }
    if (!(c.h_min > 0.0) || c.h_min > h) {
      throw MeshError("grading center h_min must lie in (0, h]");
    }
  }
  if (!mesh.centers.empty()) {
    mesh.origin = mesh.centers.front().point;
    mesh.origin_param = mesh.centers.front().boundary_param;
  } else {
    const BBox bb = dom.bbox();
    mesh.origin = 0.5 * (bb.lo + bb.hi);
  }
  // Coordinates are relative to the origin, so the usable resolution at a center scales
  // with its distance from the origin rather than with the absolute coordinates.
  for (std::size_t k = 0; k < mesh.centers.size(); ++k) {
    const double scale = norm(mesh.center_local(k));
    if (mesh.centers[k].h_min < 1e-9 * scale || mesh.centers[k].h_min < 1e-15 * dom.diameter()) {
      std::ostringstream msg;
      msg << "grading request h_min=" << mesh.centers[k].h_min << " at " << mesh.centers[k].point
          << " is below double-precision resolution";
      throw MeshError(msg.str());
    }
    if (!mesh.centers[k].boundary_param) {
      if (!dom.contains(mesh.centers[k].point)) {
        throw MeshError("interior grading center lies outside the domain");
      }
    }
  }

  std::vector<double> anchors;
  for (const auto& c : mesh.centers) {
    if (c.boundary_param) anchors.push_back(*c.boundary_param);
  }
  const std::vector<double> bparams = march_boundary(mesh, anchors);
  if (bparams.size() < 8) throw MeshError("boundary resolution too coarse (fewer than 8 vertices)");

  Triangulator tri(mesh);
  tri.run(bparams);

  // Compact: drop the three bounding vertices and dead triangles.
  std::vector<int> remap(tri.pts.size(), -1);
  for (const Tri& t : tri.tris) {
    if (!t.alive) continue;
    for (int v : t.v) {
      if (v < 3) throw MeshError("bounding vertex survived exterior removal");
      remap[v] = 0;
    }
  }
  int next = 0;
  for (std::size_t v = 0; v < tri.pts.size(); ++v) {
    if (remap[v] == 0) {
      remap[v] = next++;
      mesh.nodes.push_back(tri.pts[v]);
      mesh.node_param.push_back(tri.param[v]);
    }
  }
  for (const Tri& t : tri.tris) {
    if (!t.alive) continue;
    mesh.triangles.push_back({remap[t.v[0]], remap[t.v[1]], remap[t.v[2]]});
    for (int i = 0; i < 3; ++i) {
      if (t.n[i] >= 0) continue;
      BoundaryEdge e;
      e.a = remap[t.v[(i + 1) % 3]];
      e.b = remap[t.v[(i + 2) % 3]];
      e.sa = mesh.node_param[e.a];
      e.ds = Domain::wrap(mesh.node_param[e.b] - e.sa);
      const Vec2 chord = mesh.nodes[e.b] - mesh.nodes[e.a];
      e.normal = normalized(Vec2{chord.y, -chord.x});
      mesh.boundary.push_back(e);
    }
  }
  std::sort(mesh.boundary.begin(), mesh.boundary.end(),
            [](const BoundaryEdge& x, const BoundaryEdge& y) { return x.sa < y.sa; });
  mesh.build_locator();
  return mesh;
}

}  // namespace spikelab
