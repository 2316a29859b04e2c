// Bounding-volume hierarchy over mesh triangles. Nodes carry both an AABB
// (used by nearest-triangle queries) and an enclosing sphere built so that
// every descendant triangle's sphere is contained in its ancestors' spheres;
// the probe-SDF pruning in proximity.hpp relies on that containment.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace sweptdock {

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

namespace detail {

/// Minimal enclosing sphere of a triangle: circumcircle if the triangle is
/// acute, otherwise the diametral sphere of its longest edge.
inline Sphere triangle_sphere(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, bc = c - b;
  double d_ab = ab.squaredNorm(), d_ac = ac.squaredNorm(), d_bc = bc.squaredNorm();
  // Longest edge as diameter candidate.
  Sphere s;
  if (d_ab >= d_ac && d_ab >= d_bc) {
    s.center = 0.5 * (a + b);
    s.radius = 0.5 * std::sqrt(d_ab);
    if ((c - s.center).squaredNorm() <= s.radius * s.radius * (1.0 + 1e-12)) return s;
  } else if (d_ac >= d_bc) {
    s.center = 0.5 * (a + c);
    s.radius = 0.5 * std::sqrt(d_ac);
    if ((b - s.center).squaredNorm() <= s.radius * s.radius * (1.0 + 1e-12)) return s;
  } else {
    s.center = 0.5 * (b + c);
    s.radius = 0.5 * std::sqrt(d_bc);
    if ((a - s.center).squaredNorm() <= s.radius * s.radius * (1.0 + 1e-12)) return s;
  }
  // Acute: circumcenter c0 = a + (|ac|^2 (n x ab) + |ab|^2 (ac x n)) / (2 |n|^2).
  const Vec3 n = ab.cross(ac);
  double nn = n.squaredNorm();
  Vec3 center = a + (d_ac * n.cross(ab) + d_ab * ac.cross(n)) / (2.0 * nn);
  double r = std::max({(center - a).norm(), (center - b).norm(), (center - c).norm()});
  return Sphere{center, r};
}

/// Smallest sphere containing both input spheres.
inline Sphere merge_spheres(const Sphere& s1, const Sphere& s2) {
  Vec3 d = s2.center - s1.center;
  double dist = d.norm();
  if (dist + s2.radius <= s1.radius) return s1;
  if (dist + s1.radius <= s2.radius) return s2;
  double radius = 0.5 * (dist + s1.radius + s2.radius);
  Vec3 center = s1.center;
  if (dist > 1e-15) center += (radius - s1.radius) / dist * d;
  return Sphere{center, radius};
}

}  // namespace detail

struct BvhNode {
  Aabb box;
  Sphere sphere;
  int left = -1;    // internal nodes: children indices
  int right = -1;
  int begin = 0;    // leaves: range into Bvh::triangle_order
  int count = 0;

  bool is_leaf() const { return count > 0; }
};

class Bvh {
 public:
  static constexpr int kLeafSize = 4;

  Bvh() = default;

  explicit Bvh(const TriMesh& mesh) { build(mesh); }

  void build(const TriMesh& mesh) {
    nodes_.clear();
    order_.resize(mesh.triangles.size());
    std::iota(order_.begin(), order_.end(), 0);
    tri_spheres_.resize(mesh.triangles.size());
    centroids_.resize(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      auto [a, b, c] = mesh.triangle_vertices(static_cast<int>(t));
      tri_spheres_[t] = detail::triangle_sphere(a, b, c);
      centroids_[t] = (a + b + c) / 3.0;
    }
    if (!order_.empty()) build_node(mesh, 0, static_cast<int>(order_.size()));
    centroids_.clear();
    centroids_.shrink_to_fit();
  }

  const std::vector<BvhNode>& nodes() const { return nodes_; }
  const std::vector<int>& triangle_order() const { return order_; }
  const Sphere& triangle_sphere(int t) const { return tri_spheres_[static_cast<std::size_t>(t)]; }
  bool empty() const { return nodes_.empty(); }

 private:
  int build_node(const TriMesh& mesh, int begin, int end) {
    int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    Aabb box;
    for (int i = begin; i < end; ++i) {
      auto [a, b, c] = mesh.triangle_vertices(order_[static_cast<std::size_t>(i)]);
      box.expand(a);
      box.expand(b);
      box.expand(c);
    }

    if (end - begin <= kLeafSize) {
      Sphere sphere =
          tri_spheres_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
      for (int i = begin + 1; i < end; ++i) {
        sphere = detail::merge_spheres(
            sphere, tri_spheres_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
      }
      nodes_[static_cast<std::size_t>(index)] = BvhNode{box, sphere, -1, -1, begin, end - begin};
      return index;
    }

    int axis = 0;
    Vec3 extent = box.extent();
    if (extent.y() > extent.x()) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int lhs, int rhs) {
                       double cl = centroids_[static_cast<std::size_t>(lhs)][axis];
                       double cr = centroids_[static_cast<std::size_t>(rhs)][axis];
                       if (cl != cr) return cl < cr;
                       return lhs < rhs;  // deterministic total order
                     });

    int left = build_node(mesh, begin, mid);
    int right = build_node(mesh, mid, end);
    // The parent sphere merges the child spheres (not the triangle spheres
    // directly): minimal merges of subsets are not nested, and the pruning
    // test needs every descendant sphere inside its ancestors'.
    Sphere sphere = detail::merge_spheres(nodes_[static_cast<std::size_t>(left)].sphere,
                                          nodes_[static_cast<std::size_t>(right)].sphere);
    nodes_[static_cast<std::size_t>(index)] = BvhNode{box, sphere, left, right, 0, 0};
    return index;
  }

  std::vector<BvhNode> nodes_;
  std::vector<int> order_;
  std::vector<Sphere> tri_spheres_;
  std::vector<Vec3> centroids_;
};

/// Closest point on triangle (a,b,c) to p. Ericson, Real-Time Collision
/// Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct NearestTriangle {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 point = Vec3::Zero();
  int triangle = -1;
};

/// Exact nearest point on the mesh surface via AABB branch-and-bound.
inline NearestTriangle nearest_triangle(const TriMesh& mesh, const Bvh& bvh, const Vec3& x) {
  NearestTriangle best;
  if (bvh.empty()) return best;
  double best_sq = std::numeric_limits<double>::infinity();

  // Explicit stack, nearer child visited first.
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  const auto& nodes = bvh.nodes();
  while (top > 0) {
    int ni = stack[--top];
    const BvhNode& node = nodes[static_cast<std::size_t>(ni)];
    if (node.box.squared_distance(x) >= best_sq) continue;
    if (node.is_leaf()) {
      for (int i = node.begin; i < node.begin + node.count; ++i) {
        int t = bvh.triangle_order()[static_cast<std::size_t>(i)];
        auto [a, b, c] = mesh.triangle_vertices(t);
        Vec3 q = closest_point_on_triangle(x, a, b, c);
        double sq = (q - x).squaredNorm();
        if (sq < best_sq) {
          best_sq = sq;
          best.point = q;
          best.triangle = t;
        }
      }
    } else {
      double dl = nodes[static_cast<std::size_t>(node.left)].box.squared_distance(x);
      double dr = nodes[static_cast<std::size_t>(node.right)].box.squared_distance(x);
      int first = node.left, second = node.right;
      if (dr < dl) std::swap(first, second);
      stack[top++] = second;  // farther pushed first
      stack[top++] = first;
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

/// Unsigned distance from x to the mesh surface.
inline double unsigned_distance(const TriMesh& mesh, const Bvh& bvh, const Vec3& x) {
  if (mesh.empty()) throw invalid_input("unsigned_distance: empty mesh");
  return nearest_triangle(mesh, bvh, x).distance;
}

/// Generalized winding number of the mesh around x (1 inside a watertight
/// mesh, 0 outside). Solid angles via van Oosterom-Strackee.
inline double winding_number(const TriMesh& mesh, const Vec3& x) {
  double total = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Vec3 a = mesh.vertices[static_cast<std::size_t>(tri[0])] - x;
    const Vec3 b = mesh.vertices[static_cast<std::size_t>(tri[1])] - x;
    const Vec3 c = mesh.vertices[static_cast<std::size_t>(tri[2])] - x;
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    double numerator = a.dot(b.cross(c));
    double denominator = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(numerator, denominator);
  }
  return total / (4.0 * kPi);
}

/// Signed distance to a watertight mesh: negative inside (winding >= 0.5).
/// Watertightness is the caller's precondition; see MeshSdfField for the
/// checked construction path.
inline double signed_distance(const TriMesh& mesh, const Bvh& bvh, const Vec3& x) {
  double d = unsigned_distance(mesh, bvh, x);
  return winding_number(mesh, x) >= 0.5 ? -d : d;
}

/// Signed-distance field over a verified-watertight mesh.
class MeshSdfField {
 public:
  MeshSdfField(const TriMesh& mesh, const Bvh& bvh) : mesh_(&mesh), bvh_(&bvh) {
    if (!is_watertight(mesh)) {
      throw invalid_input("signed distance field requires a watertight (closed 2-manifold) mesh");
    }
  }

  double operator()(const Vec3& x) const { return signed_distance(*mesh_, *bvh_, x); }

 private:
  const TriMesh* mesh_;
  const Bvh* bvh_;
};

}  // namespace sweptdock
