// Voxel lattices for the grid-correlation search: the banded object grid
// (surface reward, shallow-penetration tolerance, deep-penetration penalty,
// gated to the touchable surface) and the binary swept-occupancy grid
// stamped from the probe SDF along the trajectory.

#pragma once

#include "sweptdock/bvh.hpp"
#include "sweptdock/core.hpp"
#include "sweptdock/mesh.hpp"
#include "sweptdock/parallel.hpp"
#include "sweptdock/sdf.hpp"
#include "sweptdock/se3.hpp"

#include <cstring>
#include <deque>
#include <fstream>
#include <vector>

namespace sweptdock {

/// Integer lattice: voxel k maps to world x = spacing * k + origin.
struct Lattice {
  double spacing = 0.2;
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> dims{0, 0, 0};

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(iz);
  }

  Vec3 world(int ix, int iy, int iz) const {
    return Vec3(spacing * ix + origin.x(), spacing * iy + origin.y(), spacing * iz + origin.z());
  }

  bool in_bounds(int ix, int iy, int iz) const {
    return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims[0] && iy < dims[1] && iz < dims[2];
  }

  /// Smallest lattice at this spacing whose voxel centers cover `box`.
  static Lattice covering(const Aabb& box, double spacing) {
    Lattice lat;
    lat.spacing = spacing;
    lat.origin = box.min;
    Vec3 extent = box.extent();
    for (int k = 0; k < 3; ++k) {
      lat.dims[static_cast<std::size_t>(k)] =
          std::max(1, static_cast<int>(std::ceil(extent[k] / spacing)) + 1);
    }
    return lat;
  }
};

struct ScalarGrid {
  Lattice lattice;
  std::vector<double> values;

  double at(int ix, int iy, int iz) const { return values[lattice.index(ix, iy, iz)]; }

  /// Trilinear interpolation; zero outside the sample support.
  double sample(const Vec3& x) const {
    const double fx = (x.x() - lattice.origin.x()) / lattice.spacing;
    const double fy = (x.y() - lattice.origin.y()) / lattice.spacing;
    const double fz = (x.z() - lattice.origin.z()) / lattice.spacing;
    const int ix = static_cast<int>(std::floor(fx));
    const int iy = static_cast<int>(std::floor(fy));
    const int iz = static_cast<int>(std::floor(fz));
    if (ix < 0 || iy < 0 || iz < 0 || ix + 1 >= lattice.dims[0] || iy + 1 >= lattice.dims[1] ||
        iz + 1 >= lattice.dims[2]) {
      return 0.0;
    }
    const double tx = fx - ix, ty = fy - iy, tz = fz - iz;
    auto v = [&](int dx, int dy, int dz) { return at(ix + dx, iy + dy, iz + dz); };
    const double c00 = v(0, 0, 0) * (1 - tz) + v(0, 0, 1) * tz;
    const double c01 = v(0, 1, 0) * (1 - tz) + v(0, 1, 1) * tz;
    const double c10 = v(1, 0, 0) * (1 - tz) + v(1, 0, 1) * tz;
    const double c11 = v(1, 1, 0) * (1 - tz) + v(1, 1, 1) * tz;
    return (c00 * (1 - ty) + c01 * ty) * (1 - tx) + (c10 * (1 - ty) + c11 * ty) * tx;
  }
};

struct OccupancyGrid {
  Lattice lattice;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(int ix, int iy, int iz) const { return bits[lattice.index(ix, iy, iz)]; }
};

struct ObjectGridParams {
  double tau_out = 0.5;       // outer reward band, mm
  double tau_in = 0.2;        // tolerated shallow penetration, mm
  double deep_value = -50.0;  // cell value for deep penetration (negative)
  double spacing = 0.2;       // mm
  double pad = -1.0;          // lattice padding; < 0 selects max(tau_out, 2*spacing)

  double effective_pad() const { return pad >= 0.0 ? pad : std::max(tau_out, 2.0 * spacing); }

  void validate() const {
    if (tau_out <= 0.0 || tau_in <= 0.0) throw invalid_input("object grid bands must be positive");
    if (deep_value >= 0.0) throw invalid_input("deep penetration value must be negative");
    if (spacing <= 0.0) throw invalid_input("grid spacing must be positive");
  }
};

/// Banded reward template over the object signed distance: linear reward
/// band outside, linear tolerance band for shallow penetration, fixed
/// penalty deeper than tau_in, zero beyond tau_out.
inline double banded_template_value(double object_sdf, const ObjectGridParams& p) {
  if (object_sdf >= p.tau_out) return 0.0;
  if (object_sdf >= 0.0) return 1.0 - object_sdf / p.tau_out;
  if (object_sdf > -p.tau_in) return 1.0 + object_sdf / p.tau_in;
  return p.deep_value;
}

/// Feathered gate around the touchable surface: 1 on it, 0 beyond tau_out.
inline double touch_mask_value(double touch_distance, const ObjectGridParams& p) {
  return std::max(0.0, 1.0 - std::abs(touch_distance) / p.tau_out);
}

namespace detail {

/// Inside/outside for every voxel center of `lattice` w.r.t. a watertight
/// mesh. Winding numbers are evaluated directly only in a one-voxel shell
/// around the surface; farther voxels inherit the sign from any neighbor,
/// which is exact because the sign cannot flip within the clearance radius.
inline std::vector<std::uint8_t> classify_inside(const TriMesh& mesh, const Lattice& lattice,
                                                 const std::vector<double>& unsigned_dist,
                                                 int threads) {
  const std::size_t n = lattice.cell_count();
  const double shell = lattice.spacing * 1.0001;
  std::vector<std::uint8_t> state(n, 2);  // 0 outside, 1 inside, 2 unknown

  std::vector<std::size_t> shell_cells;
  for (std::size_t i = 0; i < n; ++i) {
    if (unsigned_dist[i] <= shell) shell_cells.push_back(i);
  }
  std::vector<std::uint8_t> shell_inside(shell_cells.size(), 0);
  parallel_for(shell_cells.size(), threads, [&](int, std::size_t si) {
    std::size_t i = shell_cells[si];
    int iz = static_cast<int>(i % static_cast<std::size_t>(lattice.dims[2]));
    std::size_t rest = i / static_cast<std::size_t>(lattice.dims[2]);
    int iy = static_cast<int>(rest % static_cast<std::size_t>(lattice.dims[1]));
    int ix = static_cast<int>(rest / static_cast<std::size_t>(lattice.dims[1]));
    shell_inside[si] = winding_number(mesh, lattice.world(ix, iy, iz)) >= 0.5 ? 1 : 0;
  });
  std::deque<std::size_t> queue;
  for (std::size_t si = 0; si < shell_cells.size(); ++si) {
    state[shell_cells[si]] = shell_inside[si];
    queue.push_back(shell_cells[si]);
  }

  auto flood = [&](std::deque<std::size_t>& q) {
    const int dz = 1;
    const int dy = lattice.dims[2];
    const int dx = lattice.dims[1] * lattice.dims[2];
    const std::array<int, 6> steps{dz, -dz, dy, -dy, dx, -dx};
    while (!q.empty()) {
      std::size_t i = q.front();
      q.pop_front();
      int iz = static_cast<int>(i % static_cast<std::size_t>(lattice.dims[2]));
      std::size_t rest = i / static_cast<std::size_t>(lattice.dims[2]);
      int iy = static_cast<int>(rest % static_cast<std::size_t>(lattice.dims[1]));
      int ix = static_cast<int>(rest / static_cast<std::size_t>(lattice.dims[1]));
      for (int s = 0; s < 6; ++s) {
        int jx = ix, jy = iy, jz = iz;
        if (s == 0) ++jz;
        if (s == 1) --jz;
        if (s == 2) ++jy;
        if (s == 3) --jy;
        if (s == 4) ++jx;
        if (s == 5) --jx;
        if (!lattice.in_bounds(jx, jy, jz)) continue;
        std::size_t j = i + static_cast<std::size_t>(steps[static_cast<std::size_t>(s)]);
        if (state[j] != 2) continue;
        if (unsigned_dist[j] <= shell) continue;  // shell cells were classified directly
        state[j] = state[i];
        q.push_back(j);
      }
    }
  };
  flood(queue);

  // Grids with no shell cells (entirely inside or outside) fall back to a
  // direct evaluation seed per remaining component.
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] != 2) continue;
    int iz = static_cast<int>(i % static_cast<std::size_t>(lattice.dims[2]));
    std::size_t rest = i / static_cast<std::size_t>(lattice.dims[2]);
    int iy = static_cast<int>(rest % static_cast<std::size_t>(lattice.dims[1]));
    int ix = static_cast<int>(rest / static_cast<std::size_t>(lattice.dims[1]));
    state[i] = winding_number(mesh, lattice.world(ix, iy, iz)) >= 0.5 ? 1 : 0;
    std::deque<std::size_t> q{i};
    flood(q);
  }
  return state;
}

}  // namespace detail

/// Builds the object grid O = min(banded template, touch mask) on the padded
/// AABB of the object mesh. The object mesh must be watertight; the
/// touchable mesh is an open subset of its surface.
inline ScalarGrid build_object_grid(const TriMesh& object, const Bvh& object_bvh,
                                    const TriMesh& touchable, const Bvh& touchable_bvh,
                                    const ObjectGridParams& params, int threads = 0) {
  params.validate();
  if (object.empty()) throw invalid_input("build_object_grid: empty object mesh");
  if (touchable.empty()) throw invalid_input("build_object_grid: empty touchable mesh");
  if (!is_watertight(object)) {
    throw invalid_input("build_object_grid: object mesh is not watertight");
  }

  Aabb box = object.bounds();
  box.pad(params.effective_pad());
  ScalarGrid grid;
  grid.lattice = Lattice::covering(box, params.spacing);
  const std::size_t n = grid.lattice.cell_count();
  grid.values.assign(n, 0.0);

  std::vector<double> object_dist(n), touch_dist(n);
  const auto& lat = grid.lattice;
  parallel_for(n, threads, [&](int, std::size_t i) {
    int iz = static_cast<int>(i % static_cast<std::size_t>(lat.dims[2]));
    std::size_t rest = i / static_cast<std::size_t>(lat.dims[2]);
    int iy = static_cast<int>(rest % static_cast<std::size_t>(lat.dims[1]));
    int ix = static_cast<int>(rest / static_cast<std::size_t>(lat.dims[1]));
    Vec3 x = lat.world(ix, iy, iz);
    object_dist[i] = unsigned_distance(object, object_bvh, x);
    touch_dist[i] = unsigned_distance(touchable, touchable_bvh, x);
  });

  std::vector<std::uint8_t> inside = detail::classify_inside(object, lat, object_dist, threads);

  parallel_for(n, threads, [&](int, std::size_t i) {
    double f_o = inside[i] ? -object_dist[i] : object_dist[i];
    grid.values[i] = std::min(banded_template_value(f_o, params), touch_mask_value(touch_dist[i], params));
  });
  return grid;
}

/// Stamps probe occupancy along the trajectory: bit = 1 iff any pose covers
/// the voxel center. The lattice covers the union of per-pose probe AABBs
/// padded by `pad`.
inline OccupancyGrid build_swept_grid(const SdfShape& probe, const std::vector<Pose>& trajectory,
                                      double spacing, double pad, int threads = 0) {
  if (trajectory.empty()) throw invalid_input("build_swept_grid: empty trajectory");
  if (spacing <= 0.0) throw invalid_input("build_swept_grid: spacing must be positive");

  const Aabb local = probe.local_aabb();
  auto pose_box = [&](const Pose& pose) {
    Aabb box;
    for (int corner = 0; corner < 8; ++corner) {
      Vec3 c(corner & 1 ? local.max.x() : local.min.x(),
             corner & 2 ? local.max.y() : local.min.y(),
             corner & 4 ? local.max.z() : local.min.z());
      box.expand(pose * c);
    }
    return box;
  };

  Aabb total;
  for (const auto& pose : trajectory) total.expand(pose_box(pose));
  total.pad(pad);

  OccupancyGrid grid;
  grid.lattice = Lattice::covering(total, spacing);
  grid.bits.assign(grid.lattice.cell_count(), 0);
  const auto& lat = grid.lattice;

  // Bits are only ever set, so the pose order cannot change the result;
  // parallelizing over poses would race on bytes, so poses run serially.
  for (const auto& pose : trajectory) {
    Aabb box = pose_box(pose);
    Pose inv = pose.inverse();
    int lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max(0, static_cast<int>(std::ceil((box.min[k] - lat.origin[k]) / spacing)));
      hi[k] = std::min(lat.dims[k] - 1,
                       static_cast<int>(std::floor((box.max[k] - lat.origin[k]) / spacing)));
    }
    for (int ix = lo[0]; ix <= hi[0]; ++ix) {
      for (int iy = lo[1]; iy <= hi[1]; ++iy) {
        std::size_t base = lat.index(ix, iy, lo[2]);
        for (int iz = lo[2]; iz <= hi[2]; ++iz, ++base) {
          if (grid.bits[base]) continue;
          if (probe.value(inv * lat.world(ix, iy, iz)) <= 0.0) grid.bits[base] = 1;
        }
      }
    }
  }
  (void)threads;
  return grid;
}

/// Tight AABB (in world coordinates) of the grid's nonzero cells.
inline Aabb nonzero_support(const ScalarGrid& grid) {
  Aabb box;
  const auto& lat = grid.lattice;
  for (int ix = 0; ix < lat.dims[0]; ++ix) {
    for (int iy = 0; iy < lat.dims[1]; ++iy) {
      for (int iz = 0; iz < lat.dims[2]; ++iz) {
        if (grid.at(ix, iy, iz) != 0.0) box.expand(lat.world(ix, iy, iz));
      }
    }
  }
  return box;
}

/// Resamples the grid rotated by q about the world-frame anchor point:
/// out(x) = in(R^-1 (x - a) + a), trilinear, zero outside the source.
/// The output lattice is the rotated support's AABB padded by one voxel.
/// `support` should be nonzero_support(grid) (precompute when rotating the
/// same grid many times); an empty box falls back to the full lattice box.
inline ScalarGrid rotate_resample_object_grid(const ScalarGrid& grid, const Quat& q,
                                              const Vec3& anchor, Aabb support = Aabb{},
                                              int threads = 1) {
  const auto& lat = grid.lattice;
  if (support.empty()) {
    support.expand(lat.world(0, 0, 0));
    support.expand(lat.world(lat.dims[0] - 1, lat.dims[1] - 1, lat.dims[2] - 1));
  }
  Quat rot = q.normalized();
  Aabb rotated;
  for (int corner = 0; corner < 8; ++corner) {
    Vec3 c(corner & 1 ? support.max.x() : support.min.x(),
           corner & 2 ? support.max.y() : support.min.y(),
           corner & 4 ? support.max.z() : support.min.z());
    rotated.expand(rot * (c - anchor) + anchor);
  }
  rotated.pad(lat.spacing);

  ScalarGrid out;
  out.lattice = Lattice::covering(rotated, lat.spacing);
  out.values.assign(out.lattice.cell_count(), 0.0);
  Quat inv = rot.conjugate();
  const auto& olat = out.lattice;
  parallel_for(static_cast<std::size_t>(olat.dims[0]), threads, [&](int, std::size_t sx) {
    int ix = static_cast<int>(sx);
    for (int iy = 0; iy < olat.dims[1]; ++iy) {
      for (int iz = 0; iz < olat.dims[2]; ++iz) {
        Vec3 x = olat.world(ix, iy, iz);
        out.values[olat.index(ix, iy, iz)] = grid.sample(inv * (x - anchor) + anchor);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Debug dump: 64-byte header (magic, dims, spacing, origin) + float32 cells,
// little-endian, z fastest. Enough for external inspection tooling.
// ---------------------------------------------------------------------------

inline constexpr char kGridDumpMagic[8] = {'S', 'W', 'D', 'G', 'R', 'I', 'D', '1'};

inline void dump_grid(const std::string& path, const Lattice& lattice,
                      const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open grid dump for writing: " + path);
  char header[64] = {};
  std::memcpy(header, kGridDumpMagic, 8);
  std::uint32_t dims[3] = {static_cast<std::uint32_t>(lattice.dims[0]),
                           static_cast<std::uint32_t>(lattice.dims[1]),
                           static_cast<std::uint32_t>(lattice.dims[2])};
  std::memcpy(header + 8, dims, 12);
  double meta[4] = {lattice.spacing, lattice.origin.x(), lattice.origin.y(), lattice.origin.z()};
  std::memcpy(header + 24, meta, 32);
  out.write(header, 64);
  std::vector<float> cells(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) cells[i] = static_cast<float>(values[i]);
  out.write(reinterpret_cast<const char*>(cells.data()),
            static_cast<std::streamsize>(cells.size() * sizeof(float)));
}

inline void dump_grid(const std::string& path, const ScalarGrid& grid) {
  dump_grid(path, grid.lattice, grid.values);
}

inline void dump_grid(const std::string& path, const OccupancyGrid& grid) {
  std::vector<double> values(grid.bits.begin(), grid.bits.end());
  dump_grid(path, grid.lattice, values);
}

inline ScalarGrid load_grid_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open grid dump: " + path);
  char header[64];
  in.read(header, 64);
  if (in.gcount() != 64 || std::memcmp(header, kGridDumpMagic, 8) != 0) {
    throw io_error(path + ": not a grid dump (bad magic)");
  }
  std::uint32_t dims[3];
  std::memcpy(dims, header + 8, 12);
  double meta[4];
  std::memcpy(meta, header + 24, 32);
  ScalarGrid grid;
  grid.lattice.spacing = meta[0];
  grid.lattice.origin = Vec3(meta[1], meta[2], meta[3]);
  grid.lattice.dims = {static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                       static_cast<int>(dims[2])};
  std::vector<float> cells(grid.lattice.cell_count());
  in.read(reinterpret_cast<char*>(cells.data()),
          static_cast<std::streamsize>(cells.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != cells.size() * sizeof(float)) {
    throw io_error(path + ": grid dump truncated");
  }
  grid.values.assign(cells.begin(), cells.end());
  return grid;
}

}  // namespace sweptdock
