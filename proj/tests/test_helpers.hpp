// Shared fixtures and independent oracles for the test suite. Everything in
// here deliberately avoids the library's accelerated code paths: distances
// are brute force over all triangles, inside/outside uses ray parity,
// correlation is the direct O(N^6) sum, and integrals use adaptive Simpson.

#pragma once

#include "sweptdock/sweptdock.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using namespace sweptdock;

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

inline TriMesh make_unit_cube(const Vec3& center = Vec3::Zero(), double side = 1.0) {
  TriMesh mesh;
  const double h = 0.5 * side;
  for (int corner = 0; corner < 8; ++corner) {
    mesh.vertices.emplace_back(center.x() + (corner & 1 ? h : -h),
                               center.y() + (corner & 2 ? h : -h),
                               center.z() + (corner & 4 ? h : -h));
  }
  // Each face wound so the normal points outward.
  const int faces[6][4] = {
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  };
  for (const auto& f : faces) {
    mesh.triangles.push_back({f[0], f[1], f[2]});
    mesh.triangles.push_back({f[0], f[2], f[3]});
  }
  return mesh;
}

/// Watertight spherical cap of radius R sitting on z = 0 (dome up), closed
/// with a bottom disk. Fine tessellation for the analytic drop-cutter tests.
inline TriMesh make_hemisphere(double radius, int rings = 48, int segments = 96) {
  TriMesh mesh;
  // Apex.
  mesh.vertices.emplace_back(0.0, 0.0, radius);
  for (int r = 1; r <= rings; ++r) {
    double polar = 0.5 * kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      double azimuth = 2.0 * kPi * s / segments;
      mesh.vertices.emplace_back(radius * std::sin(polar) * std::cos(azimuth),
                                 radius * std::sin(polar) * std::sin(azimuth),
                                 radius * std::cos(polar));
    }
  }
  auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) {
    mesh.triangles.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  }
  for (int r = 1; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      mesh.triangles.push_back({a, c, d});
      mesh.triangles.push_back({a, d, b});
    }
  }
  // Bottom disk (normal -z).
  int center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, 0.0);
  for (int s = 0; s < segments; ++s) {
    mesh.triangles.push_back({center, ring_vertex(rings, s + 1), ring_vertex(rings, s)});
  }
  return mesh;
}

/// Binary STL bytes for a mesh (used to exercise the reader).
inline std::string stl_binary_bytes(const TriMesh& mesh) {
  std::string bytes(80, '\0');
  auto push_u32 = [&](std::uint32_t v) { bytes.append(reinterpret_cast<const char*>(&v), 4); };
  auto push_f32 = [&](float v) { bytes.append(reinterpret_cast<const char*>(&v), 4); };
  push_u32(static_cast<std::uint32_t>(mesh.triangles.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto [a, b, c] = mesh.triangle_vertices(static_cast<int>(t));
    Vec3 n = (b - a).cross(c - a).normalized();
    for (const Vec3& v : {n, a, b, c}) {
      push_f32(static_cast<float>(v.x()));
      push_f32(static_cast<float>(v.y()));
      push_f32(static_cast<float>(v.z()));
    }
    bytes.append(2, '\0');
  }
  return bytes;
}

inline std::string write_temp_file(const std::string& name, const std::string& bytes) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return path.string();
}

// ---------------------------------------------------------------------------
// Brute-force mesh distance oracles
// ---------------------------------------------------------------------------

inline double brute_unsigned_distance(const TriMesh& mesh, const Vec3& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto [a, b, c] = mesh.triangle_vertices(static_cast<int>(t));
    best = std::min(best, (closest_point_on_triangle(x, a, b, c) - x).norm());
  }
  return best;
}

/// Parity of ray-triangle crossings along +x (Moller-Trumbore). The ray
/// direction is slightly irrational to dodge edge-on hits on the fixtures.
inline bool brute_inside_by_ray_parity(const TriMesh& mesh, const Vec3& x) {
  const Vec3 dir = Vec3(0.9351262, 0.2596152, 0.2403369).normalized();
  int crossings = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto [a, b, c] = mesh.triangle_vertices(static_cast<int>(t));
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 s = x - a;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double ray_t = e2.dot(q) * inv;
    if (ray_t > 0.0) ++crossings;
  }
  return (crossings % 2) == 1;
}

inline double brute_signed_distance(const TriMesh& mesh, const Vec3& x) {
  double d = brute_unsigned_distance(mesh, x);
  return brute_inside_by_ray_parity(mesh, x) ? -d : d;
}

// ---------------------------------------------------------------------------
// Direct correlation oracle (O(N^6))
// ---------------------------------------------------------------------------

inline CorrelationResult direct_correlation(const ScalarGrid& object, const OccupancyGrid& swept) {
  const auto& ol = object.lattice;
  const auto& sl = swept.lattice;
  CorrelationResult best;
  best.best_score = -std::numeric_limits<double>::infinity();
  for (int dx = -(ol.dims[0] - 1); dx <= sl.dims[0] - 1; ++dx) {
    for (int dy = -(ol.dims[1] - 1); dy <= sl.dims[1] - 1; ++dy) {
      for (int dz = -(ol.dims[2] - 1); dz <= sl.dims[2] - 1; ++dz) {
        double score = 0.0;
        for (int ix = 0; ix < ol.dims[0]; ++ix) {
          const int jx = ix + dx;
          if (jx < 0 || jx >= sl.dims[0]) continue;
          for (int iy = 0; iy < ol.dims[1]; ++iy) {
            const int jy = iy + dy;
            if (jy < 0 || jy >= sl.dims[1]) continue;
            for (int iz = 0; iz < ol.dims[2]; ++iz) {
              const int jz = iz + dz;
              if (jz < 0 || jz >= sl.dims[2]) continue;
              score += object.at(ix, iy, iz) * swept.at(jx, jy, jz);
            }
          }
        }
        if (score > best.best_score) {
          best.best_score = score;
          best.best_shift = {dx, dy, dz};
        }
      }
    }
  }
  best.translation = Vec3(sl.spacing * best.best_shift[0], sl.spacing * best.best_shift[1],
                          sl.spacing * best.best_shift[2]) +
                     sl.origin - ol.origin;
  return best;
}

// ---------------------------------------------------------------------------
// Numeric utilities
// ---------------------------------------------------------------------------

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 24) {
  std::function<double(double, double, double, double, double, double, int)> recurse =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
        const double fl = f(lmid), fr = f(rmid);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
        if (d <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
          return left + right + (left + right - whole) / 15.0;
        }
        return recurse(lo, mid, flo, fl, fmid, left, d - 1) +
               recurse(mid, hi, fmid, fr, fhi, right, d - 1);
      };
  const double mid = 0.5 * (a + b);
  const double fa = f(a), fm = f(mid), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return recurse(a, b, fa, fm, fb, whole, depth);
}

/// Rotation-matrix logarithm (test-side, by way of Eigen's AngleAxis).
inline Vec3 matrix_log_rotation(const Mat3& rotation) {
  Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

inline Quat random_unit_quat(Rng& rng) {
  Quat q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
  q.normalize();
  return q;
}

inline Vec3 random_vec(Rng& rng, double scale) {
  return Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

/// Test-local sphere SDF (exact, convex).
class SphereSdf final : public SdfShape {
 public:
  SphereSdf(const Vec3& center, double radius) : center_(center), radius_(radius) {}

  SdfSample eval(const Vec3& x) const override {
    SdfSample s;
    Vec3 d = x - center_;
    double n = d.norm();
    s.value = n - radius_;
    s.gradient = n > 1e-14 ? Vec3(d / n) : Vec3::UnitX();
    return s;
  }

  double bounding_radius() const override { return center_.norm() + radius_; }

  Aabb local_aabb() const override {
    Aabb box;
    box.expand(center_ - Vec3::Constant(radius_));
    box.expand(center_ + Vec3::Constant(radius_));
    return box;
  }

  std::string describe() const override { return "sphere(test)"; }

 private:
  Vec3 center_;
  double radius_;
};

/// Test-local linear SDF f(x) = n . x + offset (a half-space).
class PlaneSdf final : public SdfShape {
 public:
  PlaneSdf(const Vec3& normal, double offset) : normal_(normal.normalized()), offset_(offset) {}

  SdfSample eval(const Vec3& x) const override { return {normal_.dot(x) + offset_, normal_}; }
  double bounding_radius() const override { return 1e6; }
  Aabb local_aabb() const override {
    Aabb box;
    box.expand(Vec3::Constant(-1e6));
    box.expand(Vec3::Constant(1e6));
    return box;
  }
  std::string describe() const override { return "plane(test)"; }

 private:
  Vec3 normal_;
  double offset_;
};

}  // namespace testutil
