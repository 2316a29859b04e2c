// Minimum signed distance between the posed probe SDF and the object mesh.
// BVH nodes and triangles are pruned with the circumsphere test
// f_p(center) < r_sphere + epsilon (plus best-so-far tightening), and each
// surviving triangle is minimized with a Frank-Wolfe iteration over its
// barycentric simplex.

#pragma once

#include "sweptdock/bvh.hpp"
#include "sweptdock/core.hpp"
#include "sweptdock/mesh.hpp"
#include "sweptdock/sdf.hpp"
#include "sweptdock/se3.hpp"

#include <optional>

namespace sweptdock {

struct FwParams {
  int max_iter = 64;
  double tol = 1e-5;           // Frank-Wolfe gap, mm
  bool open_loop_step = false;  // true: classic 2/(iter+2) steps; false: line search
};

struct DistanceResult {
  double signed_distance = 0.0;  // d*, mm; negative means penetration
  Vec3 witness = Vec3::Zero();   // x* on the mesh (mesh frame)
  Vec3 normal = Vec3::UnitZ();   // outward probe-SDF normal at x* (mesh frame)
  Vec3 distance_vector = Vec3::Zero();  // v = -d* n*
  Vec3 point_on_mesh = Vec3::Zero();    // p_obj = x*
  Vec3 point_on_probe = Vec3::Zero();   // nearest point on the probe surface
  int triangle = -1;
};

namespace proxdetail {

/// Line-search depth. Screening keeps distances cheap while pruning
/// triangles; the polish profile resolves the winning triangle's value to
/// ~1e-10 so downstream finite differences of d stay clean.
struct SearchDepth {
  int scan = 4;
  int golden_iters = 8;
  double min_width = 1e-4;
  double stall = 1e-12;
};

inline SearchDepth screening_depth() { return {}; }
inline SearchDepth polish_depth() { return {8, 24, 1e-9, 1e-15}; }

/// Minimizes the 1D slice f(x + t (v - x)) over t in [0, 1]: a coarse scan
/// locates the best bracket (SDF slices can be bimodal, e.g. a chord across
/// a cylinder cap sees both rim crossings), then golden-section refines it.
template <typename F>
double line_search(const F& f, double f0, double f1, const SearchDepth& depth) {
  constexpr double kInvPhi = 0.6180339887498949;
  double best_t = 0.0;
  double best_f = f0;
  if (f1 < best_f) {
    best_f = f1;
    best_t = 1.0;
  }
  for (int i = 1; i < depth.scan; ++i) {
    double t = static_cast<double>(i) / depth.scan;
    double ft = f(t);
    if (ft < best_f) {
      best_f = ft;
      best_t = t;
    }
  }
  double a = std::max(0.0, best_t - 1.0 / depth.scan);
  double b = std::min(1.0, best_t + 1.0 / depth.scan);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < depth.golden_iters && (b - a) > depth.min_width; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  double t = 0.5 * (a + b);
  if (f(t) <= best_f) return t;
  return best_t;
}

}  // namespace proxdetail

/// Minimizes the probe SDF over one triangle (vertices in the probe's local
/// frame). Restarted from each vertex and the centroid; the best candidate
/// point and value are returned. Triangles that sit inside a single linear
/// branch of the SDF (constant gradient at all four probes) are solved
/// exactly by the vertex minimum, which is the hot case for flat contact
/// under the cylinder cap.
inline std::pair<Vec3, double> fw_triangle_min(const SdfShape& probe, const Vec3& a, const Vec3& b,
                                               const Vec3& c, int max_iter = 64, double tol = 1e-5,
                                               bool open_loop_step = false) {
  const Vec3 centroid = (a + b + c) / 3.0;
  const SdfSample sa = probe.eval(a), sb = probe.eval(b), sc = probe.eval(c),
                  sm = probe.eval(centroid);

  Vec3 best_x = a;
  double best_d = sa.value;
  if (sb.value < best_d) {
    best_d = sb.value;
    best_x = b;
  }
  if (sc.value < best_d) {
    best_d = sc.value;
    best_x = c;
  }
  if (sm.value < best_d) {
    best_d = sm.value;
    best_x = centroid;
  }

  // Constant gradient across the triangle: f is linear on its hull, so the
  // minimum sits at a vertex and the search is already done.
  const double kGradTol = 1e-18;
  if ((sa.gradient - sb.gradient).squaredNorm() < kGradTol &&
      (sa.gradient - sc.gradient).squaredNorm() < kGradTol &&
      (sa.gradient - sm.gradient).squaredNorm() < kGradTol) {
    return {best_x, best_d};
  }

  const Vec3 starts[4] = {a, b, c, centroid};
  const double start_values[4] = {sa.value, sb.value, sc.value, sm.value};
  const double vertex_values[3] = {sa.value, sb.value, sc.value};
  const Vec3* vertices[3] = {&a, &b, &c};
  const proxdetail::SearchDepth depth = proxdetail::screening_depth();

  for (int s = 0; s < 4; ++s) {
    Vec3 x = starts[s];
    double fx = start_values[s];
    for (int iter = 0; iter < max_iter; ++iter) {
      const Vec3 g = probe.eval(x).gradient;
      // Linear minimization oracle over the simplex: best vertex.
      int lmo = 0;
      double gv = g.dot(a);
      if (g.dot(b) < gv) {
        lmo = 1;
        gv = g.dot(b);
      }
      if (g.dot(c) < gv) {
        lmo = 2;
        gv = g.dot(c);
      }
      const double gap = g.dot(x) - gv;
      if (gap <= tol) break;

      const Vec3 dir = *vertices[lmo] - x;
      double step;
      if (open_loop_step) {
        step = 2.0 / (iter + 2.0);
      } else {
        auto slice = [&](double t) { return probe.value(x + t * dir); };
        step = proxdetail::line_search(slice, fx, vertex_values[lmo], depth);
        if (step <= 0.0) break;  // no improvement along the direction
      }
      x += step * dir;
      const double fx_new = probe.value(x);
      const bool stalled = fx - fx_new < depth.stall * (1.0 + std::abs(fx));
      fx = fx_new;
      if (stalled && !open_loop_step) break;
    }
    if (fx < best_d) {
      best_d = fx;
      best_x = x;
    }
  }
  return {best_x, best_d};
}

namespace proxdetail {

/// Deep single-start refinement of a screened candidate: the same
/// Frank-Wolfe iteration, but with a high-precision line search so the
/// returned value is stable to ~1e-10 against pose perturbations.
inline std::pair<Vec3, double> fw_polish(const SdfShape& probe, const Vec3& a, const Vec3& b,
                                         const Vec3& c, const Vec3& start, int max_iter) {
  const SearchDepth depth = polish_depth();
  const double fa = probe.value(a), fb = probe.value(b), fc = probe.value(c);
  const double vertex_values[3] = {fa, fb, fc};
  const Vec3* vertices[3] = {&a, &b, &c};

  Vec3 x = start;
  double fx = probe.value(x);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Vec3 g = probe.eval(x).gradient;
    int lmo = 0;
    double gv = g.dot(a);
    if (g.dot(b) < gv) {
      lmo = 1;
      gv = g.dot(b);
    }
    if (g.dot(c) < gv) {
      lmo = 2;
      gv = g.dot(c);
    }
    if (g.dot(x) - gv <= 1e-12) break;

    const Vec3 dir = *vertices[lmo] - x;
    auto slice = [&](double t) { return probe.value(x + t * dir); };
    double step = line_search(slice, fx, vertex_values[lmo], depth);
    if (step <= 0.0) break;
    x += step * dir;
    const double fx_new = probe.value(x);
    const bool stalled = fx - fx_new < depth.stall * (1.0 + std::abs(fx));
    fx = fx_new;
    if (stalled) break;
  }
  for (int v = 0; v < 3; ++v) {
    if (vertex_values[v] < fx) {
      fx = vertex_values[v];
      x = *vertices[v];
    }
  }
  return {x, fx};
}

}  // namespace proxdetail

/// Smallest signed distance between the probe (posed by probe_pose in the
/// mesh frame) and the mesh. Returns nullopt when every triangle is pruned,
/// i.e. clearance is at least epsilon everywhere. Witness data is reported
/// in the mesh frame.
inline std::optional<DistanceResult> min_distance(const SdfShape& probe, const Pose& probe_pose,
                                                  const TriMesh& mesh, const Bvh& bvh,
                                                  double epsilon, const FwParams& fw = {}) {
  if (epsilon <= 0.0) throw invalid_input("min_distance: epsilon must be positive");
  if (bvh.empty()) return std::nullopt;

  const Pose to_local = probe_pose.inverse();
  const auto& nodes = bvh.nodes();

  // Screening pass keeps the few best triangles; they are re-minimized with
  // the precise line search afterwards. The margin covers the screening
  // value noise so a near-tied runner-up cannot be dropped by mistake.
  constexpr int kFinalists = 6;
  constexpr double kFinalistMargin = 1e-4;
  struct Finalist {
    double value = std::numeric_limits<double>::infinity();
    int triangle = -1;
    Vec3 point = Vec3::Zero();
  };
  Finalist finalists[kFinalists];
  double best_d = std::numeric_limits<double>::infinity();

  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const BvhNode& node = nodes[static_cast<std::size_t>(stack[--top])];
    const double center_value = probe.value(to_local * node.sphere.center);
    if (center_value >= node.sphere.radius + epsilon) continue;        // clearance >= epsilon
    if (center_value - node.sphere.radius >= best_d + kFinalistMargin) continue;
    if (node.is_leaf()) {
      for (int i = node.begin; i < node.begin + node.count; ++i) {
        const int t = bvh.triangle_order()[static_cast<std::size_t>(i)];
        const Sphere& ts = bvh.triangle_sphere(t);
        const double tri_center_value = probe.value(to_local * ts.center);
        if (tri_center_value >= ts.radius + epsilon) continue;
        if (tri_center_value - ts.radius >= best_d + kFinalistMargin) continue;
        auto [va, vb, vc] = mesh.triangle_vertices(t);
        auto [x_local, d] = fw_triangle_min(probe, to_local * va, to_local * vb, to_local * vc,
                                            fw.max_iter, fw.tol, fw.open_loop_step);
        if (d < finalists[kFinalists - 1].value) {
          int slot = kFinalists - 1;
          finalists[slot] = Finalist{d, t, x_local};
          while (slot > 0 && finalists[slot].value < finalists[slot - 1].value) {
            std::swap(finalists[slot], finalists[slot - 1]);
            --slot;
          }
          best_d = finalists[0].value;
        }
      }
    } else {
      // Nearer child first tightens best_d sooner.
      const BvhNode& ln = nodes[static_cast<std::size_t>(node.left)];
      const BvhNode& rn = nodes[static_cast<std::size_t>(node.right)];
      const double dl = probe.value(to_local * ln.sphere.center) - ln.sphere.radius;
      const double dr = probe.value(to_local * rn.sphere.center) - rn.sphere.radius;
      int first = node.left, second = node.right;
      if (dr < dl) std::swap(first, second);
      stack[top++] = second;
      stack[top++] = first;
    }
  }

  // Precise re-minimization of the finalists (ties included).
  double best_polished = std::numeric_limits<double>::infinity();
  Vec3 best_x_local = Vec3::Zero();
  int best_tri = -1;
  for (const Finalist& finalist : finalists) {
    if (finalist.triangle < 0) continue;
    if (finalist.value > finalists[0].value + kFinalistMargin) break;
    auto [va, vb, vc] = mesh.triangle_vertices(finalist.triangle);
    auto [x_local, d] = proxdetail::fw_polish(probe, to_local * va, to_local * vb, to_local * vc,
                                              finalist.point, fw.max_iter);
    if (d < best_polished) {
      best_polished = d;
      best_x_local = x_local;
      best_tri = finalist.triangle;
    }
  }

  // No surviving triangle means every triangle is certified at clearance
  // >= epsilon; a surviving triangle whose minimized value still lands at or
  // beyond epsilon means the same thing (the sphere test is conservative,
  // e.g. for triangles much larger than the probe).
  if (best_tri < 0 || best_polished >= epsilon) return std::nullopt;

  DistanceResult result;
  result.signed_distance = best_polished;
  result.triangle = best_tri;

  const SdfSample sample = probe.eval(best_x_local);
  const Vec3 n_local = sample.gradient;
  // One projection step along -grad reaches the probe surface; a second
  // evaluation re-projects the residual of curved regions.
  Vec3 p_probe_local = best_x_local - best_d * n_local;
  const SdfSample correction = probe.eval(p_probe_local);
  p_probe_local -= correction.value * correction.gradient;

  result.witness = probe_pose * best_x_local;
  result.normal = probe_pose.q * n_local;
  result.distance_vector = -best_polished * result.normal;
  result.point_on_mesh = result.witness;
  result.point_on_probe = probe_pose * p_probe_local;
  return result;
}

}  // namespace sweptdock
