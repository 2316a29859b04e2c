#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <deque>

using namespace sweptdock;
using namespace testutil;

namespace {

struct CubeFixture {
  TriMesh object = make_unit_cube(Vec3::Zero(), 2.0);  // [-1,1]^3
  TriMesh touchable;
  ObjectGridParams params;

  CubeFixture() {
    touchable = extract_submesh(object, {10, 11});  // +z face
    // Spacing chosen so the probed world points below land exactly on
    // lattice nodes (origin -1.5 after the 0.5 padding).
    params.spacing = 0.05;
    // defaults: tau_out 0.5, tau_in 0.2, deep -50, pad -> max(0.5, 0.1)
  }
};

int voxel_index_near(const Lattice& lat, const Vec3& x, int axis) {
  return static_cast<int>(std::lround((x[axis] - lat.origin[axis]) / lat.spacing));
}

double grid_value_at(const ScalarGrid& grid, const Vec3& x) {
  const auto& lat = grid.lattice;
  return grid.at(voxel_index_near(lat, x, 0), voxel_index_near(lat, x, 1),
                 voxel_index_near(lat, x, 2));
}

std::size_t count_components(const OccupancyGrid& grid) {
  const auto& lat = grid.lattice;
  std::vector<std::uint8_t> seen(grid.bits.size(), 0);
  std::size_t components = 0;
  for (int ix = 0; ix < lat.dims[0]; ++ix) {
    for (int iy = 0; iy < lat.dims[1]; ++iy) {
      for (int iz = 0; iz < lat.dims[2]; ++iz) {
        std::size_t start = lat.index(ix, iy, iz);
        if (!grid.bits[start] || seen[start]) continue;
        ++components;
        std::deque<std::array<int, 3>> queue{{ix, iy, iz}};
        seen[start] = 1;
        while (!queue.empty()) {
          auto [cx, cy, cz] = queue.front();
          queue.pop_front();
          const int deltas[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                    {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& d : deltas) {
            int nx = cx + d[0], ny = cy + d[1], nz = cz + d[2];
            if (!lat.in_bounds(nx, ny, nz)) continue;
            std::size_t j = lat.index(nx, ny, nz);
            if (grid.bits[j] && !seen[j]) {
              seen[j] = 1;
              queue.push_back({nx, ny, nz});
            }
          }
        }
      }
    }
  }
  return components;
}

}  // namespace

TEST_CASE("banded template branches") {
  ObjectGridParams p;  // tau_out 0.5, tau_in 0.2, deep -50
  CHECK(banded_template_value(0.0, p) == Catch::Approx(1.0));
  CHECK(banded_template_value(0.25, p) == Catch::Approx(0.5));
  CHECK(banded_template_value(0.5, p) == Catch::Approx(0.0));
  CHECK(banded_template_value(0.8, p) == Catch::Approx(0.0));
  CHECK(banded_template_value(-0.1, p) == Catch::Approx(0.5));
  CHECK(banded_template_value(-0.2, p) == Catch::Approx(-50.0));
  CHECK(banded_template_value(-0.9, p) == Catch::Approx(-50.0));

  CHECK(touch_mask_value(0.0, p) == Catch::Approx(1.0));
  CHECK(touch_mask_value(0.25, p) == Catch::Approx(0.5));
  CHECK(touch_mask_value(0.7, p) == Catch::Approx(0.0));
}

TEST_CASE("object grid on the cube fixture: exact cell values") {
  CubeFixture fix;
  Bvh object_bvh(fix.object), touch_bvh(fix.touchable);
  ScalarGrid grid = build_object_grid(fix.object, object_bvh, fix.touchable, touch_bvh,
                                      fix.params, 2);

  // Deep interior keeps the penalty through the mask.
  CHECK(grid_value_at(grid, Vec3(0, 0, 0)) == Catch::Approx(-50.0));
  // On the touchable surface: template and mask both 1.
  CHECK(grid_value_at(grid, Vec3(0, 0, 1.0)) == Catch::Approx(1.0));
  // Outer band above the touchable face: both linear at 0.5.
  CHECK(grid_value_at(grid, Vec3(0, 0, 1.25)) == Catch::Approx(0.5));
  // Near the bottom face, far from the touchable face: gated to zero.
  CHECK(grid_value_at(grid, Vec3(0, 0, -1.25)) == Catch::Approx(0.0));
  // Shallow penetration near the touchable face.
  CHECK(grid_value_at(grid, Vec3(0, 0, 0.9)) ==
        Catch::Approx(std::min(0.5, touch_mask_value(0.1, fix.params))));
  // Far outside.
  CHECK(grid_value_at(grid, Vec3(-1.5, -1.5, -1.5)) == Catch::Approx(0.0));

  // Range invariant: never above 1, deep cells exactly the penalty value.
  double lo = 1e300, hi = -1e300;
  for (double v : grid.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi <= 1.0 + 1e-12);
  CHECK(lo == Catch::Approx(-50.0));
}

TEST_CASE("object grid rejects non-watertight objects and empty meshes") {
  CubeFixture fix;
  TriMesh open = fix.object;
  open.triangles.pop_back();
  Bvh open_bvh(open), touch_bvh(fix.touchable);
  CHECK_THROWS_AS(
      build_object_grid(open, open_bvh, fix.touchable, touch_bvh, fix.params, 1),
      invalid_input);
}

TEST_CASE("swept grid: occupied volume matches the cylinder volume") {
  CylinderProbe probe(0.7, 10.0);
  std::vector<Pose> traj{Pose::identity()};
  const double h = 0.07;  // 0.1 * radius
  OccupancyGrid grid = build_swept_grid(probe, traj, h, 0.2, 1);
  std::size_t occupied = 0;
  for (auto b : grid.bits) occupied += b;
  const double volume = static_cast<double>(occupied) * h * h * h;
  const double expected = kPi * 0.7 * 0.7 * 20.0;
  CHECK(std::abs(volume - expected) / expected < 0.05);

  // Idempotence: stamping the same pose twice changes nothing.
  OccupancyGrid twice = build_swept_grid(probe, {Pose::identity(), Pose::identity()}, h, 0.2, 1);
  CHECK(twice.bits == grid.bits);
}

TEST_CASE("swept grid: well-separated poses give two components") {
  CylinderProbe probe(0.7, 10.0);
  std::vector<Pose> traj{Pose::identity(), Pose(Quat::Identity(), Vec3(4.0, 0, 0))};
  OccupancyGrid grid = build_swept_grid(probe, traj, 0.2, 0.5, 1);
  CHECK(count_components(grid) == 2);
}

TEST_CASE("swept grid is monotone under added poses") {
  CylinderProbe probe(0.5, 3.0);
  std::vector<Pose> small{Pose::identity()};
  std::vector<Pose> big{Pose::identity(), Pose(Quat::Identity(), Vec3(1.0, 0.5, 0))};
  OccupancyGrid g1 = build_swept_grid(probe, small, 0.2, 0.4, 1);
  OccupancyGrid g2 = build_swept_grid(probe, big, 0.2, 0.4, 1);
  const auto& l1 = g1.lattice;
  const auto& l2 = g2.lattice;
  for (int ix = 0; ix < l1.dims[0]; ++ix) {
    for (int iy = 0; iy < l1.dims[1]; ++iy) {
      for (int iz = 0; iz < l1.dims[2]; ++iz) {
        if (!g1.at(ix, iy, iz)) continue;
        Vec3 x = l1.world(ix, iy, iz);
        int jx = static_cast<int>(std::lround((x.x() - l2.origin.x()) / l2.spacing));
        int jy = static_cast<int>(std::lround((x.y() - l2.origin.y()) / l2.spacing));
        int jz = static_cast<int>(std::lround((x.z() - l2.origin.z()) / l2.spacing));
        REQUIRE(l2.in_bounds(jx, jy, jz));
        CHECK(g2.at(jx, jy, jz) == 1);
      }
    }
  }
}

TEST_CASE("swept grid rejects empty trajectories") {
  CylinderProbe probe(0.7, 10.0);
  CHECK_THROWS_AS(build_swept_grid(probe, {}, 0.2, 0.5, 1), invalid_input);
}

namespace {

ScalarGrid sine_hump_grid(double h) {
  // Smooth field vanishing at the box boundary, zero outside.
  const Vec3 size(1.0, 2.0, 0.5);
  Aabb box;
  box.expand(Vec3::Zero());
  box.expand(size);
  ScalarGrid grid;
  grid.lattice = Lattice::covering(box, h);
  grid.values.assign(grid.lattice.cell_count(), 0.0);
  for (int ix = 0; ix < grid.lattice.dims[0]; ++ix) {
    for (int iy = 0; iy < grid.lattice.dims[1]; ++iy) {
      for (int iz = 0; iz < grid.lattice.dims[2]; ++iz) {
        Vec3 v = grid.lattice.world(ix, iy, iz);
        if (v.x() < 0 || v.y() < 0 || v.z() < 0 || v.x() > size.x() || v.y() > size.y() ||
            v.z() > size.z()) {
          continue;
        }
        grid.values[grid.lattice.index(ix, iy, iz)] = std::sin(kPi * v.x() / size.x()) *
                                                      std::sin(kPi * v.y() / size.y()) *
                                                      std::sin(kPi * v.z() / size.z());
      }
    }
  }
  return grid;
}

double analytic_hump(const Vec3& v) {
  const Vec3 size(1.0, 2.0, 0.5);
  if (v.x() < 0 || v.y() < 0 || v.z() < 0 || v.x() > size.x() || v.y() > size.y() ||
      v.z() > size.z()) {
    return 0.0;
  }
  return std::sin(kPi * v.x() / size.x()) * std::sin(kPi * v.y() / size.y()) *
         std::sin(kPi * v.z() / size.z());
}

}  // namespace

TEST_CASE("rotate_resample: identity rotation reproduces the grid") {
  ScalarGrid grid = sine_hump_grid(0.05);
  Aabb support = nonzero_support(grid);
  ScalarGrid out = rotate_resample_object_grid(grid, Quat::Identity(), Vec3(0.5, 1.0, 0.25),
                                               support, 1);
  const auto& lat = grid.lattice;
  for (int ix = 0; ix < lat.dims[0]; ix += 2) {
    for (int iy = 0; iy < lat.dims[1]; iy += 2) {
      for (int iz = 0; iz < lat.dims[2]; ++iz) {
        Vec3 x = lat.world(ix, iy, iz);
        CHECK(out.sample(x) == Catch::Approx(grid.at(ix, iy, iz)).margin(1e-12));
      }
    }
  }
}

TEST_CASE("rotate_resample: 90-degree rotation matches the analytic field") {
  const double h = 0.05;
  ScalarGrid grid = sine_hump_grid(h);
  const Vec3 anchor(0.5, 1.0, 0.25);
  const Quat rot = so3_exp(Vec3(0, 0, kPi / 2));
  ScalarGrid out = rotate_resample_object_grid(grid, rot, anchor, nonzero_support(grid), 1);

  // |grad f| <= sqrt((pi/1)^2 + (pi/2)^2 + (2 pi)^2) ~= 7.2.
  const double bound = 0.5 * 7.2 * h;
  const Quat inv = rot.conjugate();
  const auto& lat = out.lattice;
  double worst = 0.0;
  for (int ix = 0; ix < lat.dims[0]; ++ix) {
    for (int iy = 0; iy < lat.dims[1]; ++iy) {
      for (int iz = 0; iz < lat.dims[2]; ++iz) {
        Vec3 x = lat.world(ix, iy, iz);
        double expected = analytic_hump(inv * (x - anchor) + anchor);
        worst = std::max(worst, std::abs(out.at(ix, iy, iz) - expected));
      }
    }
  }
  CHECK(worst <= bound);
}

TEST_CASE("rotate_resample: two 180-degree rotations recover the field") {
  const double h = 0.05;
  ScalarGrid grid = sine_hump_grid(h);
  const Vec3 anchor(0.5, 1.0, 0.25);
  const Quat rot = so3_exp(Vec3(kPi, 0, 0));
  ScalarGrid once = rotate_resample_object_grid(grid, rot, anchor, nonzero_support(grid), 1);
  ScalarGrid back = rotate_resample_object_grid(once, rot, anchor, nonzero_support(once), 1);
  const double bound = 2.0 * 0.5 * 7.2 * h;
  const auto& lat = grid.lattice;
  for (int ix = 0; ix < lat.dims[0]; ++ix) {
    for (int iy = 0; iy < lat.dims[1]; ++iy) {
      for (int iz = 0; iz < lat.dims[2]; ++iz) {
        CHECK(std::abs(back.sample(lat.world(ix, iy, iz)) - grid.at(ix, iy, iz)) <= bound);
      }
    }
  }
}

TEST_CASE("rotate_resample error shrinks about linearly in h") {
  const Quat rot = so3_exp(Vec3(0.3, 0.5, 0.4));
  const Vec3 anchor(0.5, 1.0, 0.25);
  auto mean_error = [&](double h) {
    ScalarGrid grid = sine_hump_grid(h);
    ScalarGrid out = rotate_resample_object_grid(grid, rot, anchor, nonzero_support(grid), 1);
    const Quat inv = rot.conjugate();
    double total = 0.0;
    std::size_t n = 0;
    const auto& lat = out.lattice;
    for (int ix = 0; ix < lat.dims[0]; ++ix) {
      for (int iy = 0; iy < lat.dims[1]; ++iy) {
        for (int iz = 0; iz < lat.dims[2]; ++iz) {
          Vec3 x = lat.world(ix, iy, iz);
          total += std::abs(out.at(ix, iy, iz) - analytic_hump(inv * (x - anchor) + anchor));
          ++n;
        }
      }
    }
    return total / static_cast<double>(n);
  };
  double coarse = mean_error(0.08);
  double fine = mean_error(0.04);
  CHECK(coarse / fine >= 1.6);  // at least first-order convergence
}

TEST_CASE("grid dump round-trips through the debug format") {
  ScalarGrid grid = sine_hump_grid(0.1);
  auto path = std::filesystem::temp_directory_path() / "sd_grid.bin";
  dump_grid(path.string(), grid);
  ScalarGrid loaded = load_grid_dump(path.string());
  REQUIRE(loaded.lattice.dims == grid.lattice.dims);
  CHECK(loaded.lattice.spacing == Catch::Approx(grid.lattice.spacing));
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    CHECK(loaded.values[i] == Catch::Approx(grid.values[i]).margin(1e-6));
  }
}
