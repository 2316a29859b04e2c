// Synthetic experiment harness: drop-cutter contact trajectories against a
// mesh, Gaussian pose noise, sparse-contact dropout, pose-error metrics, and
// the noise/sparsity robustness sweeps. Contact stations are found by
// bisecting the probe's approach offset against the proximity query, so
// every emitted contact pose is certified to |d| <= contact_tol.

#pragma once

#include "sweptdock/bvh.hpp"
#include "sweptdock/core.hpp"
#include "sweptdock/mesh.hpp"
#include "sweptdock/pipeline.hpp"
#include "sweptdock/proximity.hpp"
#include "sweptdock/rng.hpp"
#include "sweptdock/sdf.hpp"
#include "sweptdock/se3.hpp"

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace sweptdock {

// ---------------------------------------------------------------------------
// Watertight heightfield solids and the built-in test meshes
// ---------------------------------------------------------------------------

/// Closed solid between z = base_z and the height surface z = height(x, y):
/// top and bottom grids plus four walls, consistently oriented outward.
/// height() must stay above base_z everywhere.
inline TriMesh heightfield_solid(double width, double depth, double cell,
                                 const std::function<double(double, double)>& height,
                                 double base_z) {
  const int nx = std::max(2, static_cast<int>(std::lround(width / cell)));
  const int ny = std::max(2, static_cast<int>(std::lround(depth / cell)));
  const double dx = width / nx;
  const double dy = depth / ny;
  const double x0 = -0.5 * width;
  const double y0 = -0.5 * depth;

  TriMesh mesh;
  const int row = nx + 1;
  const int top_count = row * (ny + 1);
  mesh.vertices.reserve(static_cast<std::size_t>(top_count) * 2);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      double x = x0 + i * dx, y = y0 + j * dy;
      mesh.vertices.emplace_back(x, y, height(x, y));
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices.emplace_back(x0 + i * dx, y0 + j * dy, base_z);
    }
  }
  auto top = [&](int i, int j) { return j * row + i; };
  auto bottom = [&](int i, int j) { return top_count + j * row + i; };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({top(i, j), top(i + 1, j), top(i + 1, j + 1)});
      mesh.triangles.push_back({top(i, j), top(i + 1, j + 1), top(i, j + 1)});
      mesh.triangles.push_back({bottom(i, j), bottom(i + 1, j + 1), bottom(i + 1, j)});
      mesh.triangles.push_back({bottom(i, j), bottom(i, j + 1), bottom(i + 1, j + 1)});
    }
  }
  for (int i = 0; i < nx; ++i) {
    mesh.triangles.push_back({bottom(i, 0), bottom(i + 1, 0), top(i + 1, 0)});
    mesh.triangles.push_back({bottom(i, 0), top(i + 1, 0), top(i, 0)});
    mesh.triangles.push_back({bottom(i + 1, ny), bottom(i, ny), top(i, ny)});
    mesh.triangles.push_back({bottom(i + 1, ny), top(i, ny), top(i + 1, ny)});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.triangles.push_back({bottom(0, j + 1), bottom(0, j), top(0, j)});
    mesh.triangles.push_back({bottom(0, j + 1), top(0, j), top(0, j + 1)});
    mesh.triangles.push_back({bottom(nx, j), bottom(nx, j + 1), top(nx, j + 1)});
    mesh.triangles.push_back({bottom(nx, j), top(nx, j + 1), top(nx, j)});
  }
  return mesh;
}

/// Built-in desk-scale test objects (longest side 5-6 mm): a ridged
/// spherical dome, a stepped workpiece block, and a smooth free-form wave
/// field. All are deliberately asymmetric so the registration pose is
/// unique.
inline TriMesh make_builtin_mesh(const std::string& name) {
  if (name == "ridge_dome") {
    auto h = [](double x, double y) {
      double px = x - 0.2, py = y + 0.15;
      double rho = std::hypot(px, py);
      double phi = std::atan2(py, px);
      double cap = std::sqrt(std::max(0.0, 2.1 * 2.1 - rho * rho));
      double window = std::exp(-0.5 * (rho - 1.3) * (rho - 1.3) / (0.55 * 0.55));
      double ridges = window * (0.26 * std::cos(3.0 * phi + 0.7) + 0.15 * std::cos(5.0 * phi - 1.1));
      return 0.35 + cap + ridges;
    };
    return heightfield_solid(5.0, 5.0, 0.125, h, -0.5);
  }
  if (name == "step_block") {
    auto h = [](double x, double y) {
      auto smoothstep = [](double edge, double w, double v) {
        double t = std::clamp((v - edge) / w + 0.5, 0.0, 1.0);
        return t * t * (3.0 - 2.0 * t);
      };
      double z = 0.6;
      z += 0.55 * smoothstep(-1.2, 0.12, x);
      z += 0.60 * smoothstep(0.3, 0.12, x);
      z += 0.55 * smoothstep(1.7, 0.12, x);
      // Diagonal groove breaks the block's front/back near-symmetry.
      double groove = (x - 1.1 * y - 0.4) / 1.487;  // distance to the groove line
      z -= 0.35 * std::exp(-0.5 * groove * groove / (0.22 * 0.22));
      return z;
    };
    return heightfield_solid(5.5, 4.2, 0.11, h, -0.5);
  }
  if (name == "wave_field") {
    auto h = [](double x, double y) {
      double z = 1.25 + 0.45 * std::sin(1.25 * x + 0.4) * std::cos(0.95 * y - 0.2);
      z += 0.75 * std::exp(-(((x - 1.2) * (x - 1.2)) + ((y - 0.8) * (y - 0.8))) / (0.9 * 0.9));
      z += 0.55 * std::exp(-(((x + 1.7) * (x + 1.7)) + ((y + 1.0) * (y + 1.0))) / (0.7 * 0.7));
      z -= 0.35 * std::exp(-(((x + 0.4) * (x + 0.4)) + ((y - 1.3) * (y - 1.3))) / (0.6 * 0.6));
      return z;
    };
    return heightfield_solid(6.0, 4.6, 0.115, h, -0.5);
  }
  throw invalid_input("unknown builtin mesh '" + name +
                      "' (available: ridge_dome, step_block, wave_field)");
}

inline const std::vector<std::string>& builtin_mesh_names() {
  static const std::vector<std::string> names{"ridge_dome", "step_block", "wave_field"};
  return names;
}

// ---------------------------------------------------------------------------
// Drop-cutter trajectory generation
// ---------------------------------------------------------------------------

struct TrajectorySegment {
  Vec3 approach = Vec3(0, 0, -1);  // probe travel direction, toward the object
  Vec3 sweep = Vec3(1, 0, 0);      // fast scan axis (projected orthogonal to approach)
  double line_spacing = 1.0;       // mm between scan lines
  double sample_spacing = 0.1;     // mm between stations along a line
};

struct TrajectorySpec {
  std::vector<TrajectorySegment> segments;
  double contact_tol = 1e-4;   // bisection tolerance, mm
  double clearance = 0.5;      // free travel above the AABB, mm
  double lateral_margin = 0.2; // scan overhang beyond the AABB + probe radius, mm

  void validate(double grid_spacing) const {
    if (segments.empty()) throw invalid_input("trajectory spec has no segments");
    for (const auto& seg : segments) {
      if (seg.sample_spacing > 0.5 * grid_spacing + 1e-12) {
        throw invalid_input("sample spacing must be <= h/2 to keep the swept grid gap-free");
      }
      if (seg.line_spacing <= 0.0 || seg.sample_spacing <= 0.0) {
        throw invalid_input("trajectory spacings must be positive");
      }
    }
  }
};

/// Three segments with different contact directions: straight down and two
/// tilted approaches at different azimuths.
inline TrajectorySpec default_trajectory_spec(double grid_spacing, double line_spacing = 1.0) {
  auto tilted = [](double tilt_deg, double azimuth_deg) {
    double t = deg2rad(tilt_deg), a = deg2rad(azimuth_deg);
    return Vec3(std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), -std::cos(t));
  };
  TrajectorySpec spec;
  double ds = 0.5 * grid_spacing;
  spec.segments.push_back({Vec3(0, 0, -1), Vec3(1, 0, 0), line_spacing, ds});
  spec.segments.push_back({tilted(14.0, 25.0), Vec3(0, 1, 0), line_spacing, ds});
  spec.segments.push_back({tilted(14.0, 145.0), Vec3(1, 0, 0), line_spacing, ds});
  return spec;
}

struct GeneratedTrajectory {
  std::vector<Pose> poses;
  std::vector<std::uint8_t> contact;  // 1 where the station reached the surface
  TriMesh touchable;                  // sub-mesh of contacted triangles
};

/// Serpentine drop-cutter: at each station the probe (axis anti-parallel to
/// the approach) is lowered along the approach axis to first contact, solved
/// by bisection on the offset. Stations that never contact within the travel
/// range emit the deepest reached pose as a non-contact sample.
inline GeneratedTrajectory generate_trajectory(const TriMesh& mesh, const Bvh& bvh,
                                               const CylinderProbe& probe,
                                               const TrajectorySpec& spec,
                                               double query_epsilon = 1.0) {
  if (mesh.empty()) throw invalid_input("generate_trajectory: empty mesh");
  GeneratedTrajectory out;
  std::set<int> contacted;
  const Aabb box = mesh.bounds();
  FwParams fw;

  for (const auto& seg : spec.segments) {
    const Vec3 up = (-seg.approach).normalized();
    Vec3 fast = seg.sweep - seg.sweep.dot(up) * up;
    if (fast.norm() < 1e-9) throw invalid_input("segment sweep direction parallel to approach");
    fast.normalize();
    const Vec3 side = up.cross(fast);

    // Probe local +z maps to `up`.
    Quat orientation = Quat::FromTwoVectors(Vec3::UnitZ(), up);

    double u_min = std::numeric_limits<double>::infinity(), u_max = -u_min;
    double v_min = u_min, v_max = -u_min;
    double w_min = u_min, w_max = -u_min;
    for (int corner = 0; corner < 8; ++corner) {
      Vec3 c(corner & 1 ? box.max.x() : box.min.x(), corner & 2 ? box.max.y() : box.min.y(),
             corner & 4 ? box.max.z() : box.min.z());
      u_min = std::min(u_min, c.dot(fast));
      u_max = std::max(u_max, c.dot(fast));
      v_min = std::min(v_min, c.dot(side));
      v_max = std::max(v_max, c.dot(side));
      w_min = std::min(w_min, c.dot(up));
      w_max = std::max(w_max, c.dot(up));
    }
    const double margin = probe.radius() + spec.lateral_margin;
    u_min -= margin;
    u_max += margin;
    v_min -= margin;
    v_max += margin;

    auto center_at = [&](double u, double v, double tip_w) {
      return u * fast + v * side + (tip_w + probe.half_length()) * up;
    };
    auto penetrating = [&](double u, double v, double tip_w) {
      Pose pose(orientation, center_at(u, v, tip_w));
      auto hit = min_distance(probe, pose, mesh, bvh, query_epsilon, fw);
      return hit && hit->signed_distance < 0.0;
    };

    const int lines = std::max(1, static_cast<int>(std::floor((v_max - v_min) / seg.line_spacing)) + 1);
    const int stations = std::max(1, static_cast<int>(std::floor((u_max - u_min) / seg.sample_spacing)) + 1);
    for (int j = 0; j < lines; ++j) {
      const double v = v_min + j * seg.line_spacing;
      for (int si = 0; si < stations; ++si) {
        // Serpentine: odd lines scan backwards.
        const int i = (j % 2 == 0) ? si : stations - 1 - si;
        const double u = u_min + i * seg.sample_spacing;

        double free_w = w_max + spec.clearance;  // tip above the box: no contact
        double pen_w = w_min;                    // tip at the box bottom plane
        if (!penetrating(u, v, pen_w)) {
          out.poses.emplace_back(orientation, center_at(u, v, pen_w));
          out.contact.push_back(0);
          continue;
        }
        while (free_w - pen_w > spec.contact_tol) {
          const double mid = 0.5 * (free_w + pen_w);
          if (penetrating(u, v, mid)) {
            pen_w = mid;
          } else {
            free_w = mid;
          }
        }
        Pose pose(orientation, center_at(u, v, free_w));
        out.poses.push_back(pose);
        out.contact.push_back(1);
        auto hit = min_distance(probe, pose, mesh, bvh, query_epsilon, fw);
        if (hit) contacted.insert(hit->triangle);
      }
    }
  }

  out.touchable = extract_submesh(mesh, std::vector<int>(contacted.begin(), contacted.end()));
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory perturbations
// ---------------------------------------------------------------------------

/// i.i.d. zero-mean Gaussian offsets (std sigma per axis) on each pose's
/// position; orientations are untouched.
inline std::vector<Pose> add_pose_noise(const std::vector<Pose>& trajectory, double sigma,
                                        std::uint64_t seed) {
  if (sigma < 0.0) throw invalid_input("noise sigma must be >= 0");
  if (sigma == 0.0) return trajectory;
  Rng rng(seed);
  std::vector<Pose> out = trajectory;
  for (auto& pose : out) {
    pose.p += sigma * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  }
  return out;
}

/// Lifts a seeded random subset of (1 - contact_fraction) * N poses along
/// their local probe axis by a uniform amount in [lift, 2*lift], breaking
/// contact for those samples.
inline std::vector<Pose> sparsify_contacts(const std::vector<Pose>& trajectory,
                                           double contact_fraction, double lift,
                                           std::uint64_t seed) {
  if (!(contact_fraction > 0.0 && contact_fraction <= 1.0)) {
    throw invalid_input("contact fraction must be in (0, 1]");
  }
  if (lift <= 0.0) throw invalid_input("lift must be positive");
  std::vector<Pose> out = trajectory;
  const std::size_t n = out.size();
  const std::size_t lifted =
      static_cast<std::size_t>(std::llround((1.0 - contact_fraction) * static_cast<double>(n)));
  if (lifted == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < lifted; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  for (std::size_t k = 0; k < lifted; ++k) {
    Pose& pose = out[order[k]];
    const double amount = rng.uniform(lift, 2.0 * lift);
    pose.p += amount * (pose.q * Vec3::UnitZ());  // probe axis points away from the surface
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

struct PoseError {
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
};

inline PoseError pose_error(const Pose& estimate, const Pose& truth, const Vec3& geometry_center_point) {
  PoseError err;
  err.translation_mm = ((estimate * geometry_center_point) - (truth * geometry_center_point)).norm();
  err.rotation_deg = rad2deg(rotation_angle_between(estimate.q, truth.q));
  return err;
}

inline PoseError pose_error(const Pose& estimate, const Pose& truth, const TriMesh& mesh) {
  return pose_error(estimate, truth, geometry_center(mesh));
}

/// Uniform random rotation plus a translation uniform in a centered cube.
inline Pose random_pose(Rng& rng, double max_translation) {
  Quat q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
  q.normalize();
  Vec3 t(rng.uniform(-max_translation, max_translation),
         rng.uniform(-max_translation, max_translation),
         rng.uniform(-max_translation, max_translation));
  return Pose(q, t);
}

// ---------------------------------------------------------------------------
// Robustness sweeps
// ---------------------------------------------------------------------------

enum class SweepKind { noise, sparsity };

struct SweepParams {
  SweepKind kind = SweepKind::noise;
  std::vector<double> levels;      // sigma (mm) or contact fraction
  int repeats = 5;
  double baseline_sigma = 0.02;    // noise applied during sparsity sweeps, mm
  double lift = 0.5;               // sparsity lift, mm
  std::uint64_t seed = 1;
};

struct SweepRow {
  std::string kind;
  double level = 0.0;
  int repeat = 0;
  double translation_err_mm = 0.0;
  double rotation_err_deg = 0.0;
  double seconds = 0.0;
  std::string status = "ok";
};

/// One registration per (level, repeat) cell with a fresh seeded
/// perturbation of the clean world-frame trajectory. Failures are recorded
/// per row, never fatal.
inline std::vector<SweepRow> run_sweep(const PreparedObject& prep, const SdfShape& probe,
                                       const std::vector<Pose>& clean_world_trajectory,
                                       const Pose& truth, const SearchParams& search,
                                       const SweepParams& sweep) {
  if (sweep.levels.empty()) throw invalid_input("sweep requires at least one level");
  if (sweep.repeats < 1) throw invalid_input("sweep repeats must be >= 1");

  std::vector<SweepRow> rows;
  const char* kind_name = sweep.kind == SweepKind::noise ? "noise" : "sparsity";
  for (std::size_t li = 0; li < sweep.levels.size(); ++li) {
    for (int rep = 0; rep < sweep.repeats; ++rep) {
      SweepRow row;
      row.kind = kind_name;
      row.level = sweep.levels[li];
      row.repeat = rep;
      const std::uint64_t cell_seed =
          mix_seed(sweep.seed, li * 1000003ULL + static_cast<std::uint64_t>(rep));
      const auto t0 = std::chrono::steady_clock::now();
      try {
        std::vector<Pose> traj = clean_world_trajectory;
        if (sweep.kind == SweepKind::sparsity) {
          traj = sparsify_contacts(traj, sweep.levels[li], sweep.lift, mix_seed(cell_seed, 1));
          traj = add_pose_noise(traj, sweep.baseline_sigma, mix_seed(cell_seed, 2));
        } else {
          traj = add_pose_noise(traj, sweep.levels[li], mix_seed(cell_seed, 2));
        }
        RegistrationResult reg = register_object(prep, probe, traj, search);
        PoseError err = pose_error(reg.final_pose, truth, prep.anchor);
        row.translation_err_mm = err.translation_mm;
        row.rotation_err_deg = err.rotation_deg;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back(row);
    }
  }
  return rows;
}

struct SweepAggregate {
  double level = 0.0;
  int ok_count = 0;
  double translation_mean = 0.0, translation_std = 0.0;
  double rotation_mean = 0.0, rotation_std = 0.0;
};

inline std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRow>& rows) {
  std::vector<SweepAggregate> out;
  for (const auto& row : rows) {
    if (out.empty() || out.back().level != row.level) {
      out.push_back(SweepAggregate{row.level, 0, 0, 0, 0, 0});
    }
  }
  for (auto& agg : out) {
    double ts = 0, ts2 = 0, rs = 0, rs2 = 0;
    int n = 0;
    for (const auto& row : rows) {
      if (row.level != agg.level || row.status != "ok") continue;
      ts += row.translation_err_mm;
      ts2 += row.translation_err_mm * row.translation_err_mm;
      rs += row.rotation_err_deg;
      rs2 += row.rotation_err_deg * row.rotation_err_deg;
      ++n;
    }
    agg.ok_count = n;
    if (n > 0) {
      agg.translation_mean = ts / n;
      agg.rotation_mean = rs / n;
      if (n > 1) {
        agg.translation_std = std::sqrt(std::max(0.0, (ts2 - ts * ts / n) / (n - 1)));
        agg.rotation_std = std::sqrt(std::max(0.0, (rs2 - rs * rs / n) / (n - 1)));
      }
    }
  }
  return out;
}

}  // namespace sweptdock
