#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace sweptdock;
using namespace testutil;

namespace {

/// Reduced search parameters for unit-test runtimes: coarser grid, shorter
/// probe, smaller candidate sets. Desk-scale accuracy targets shift with h.
SearchParams quick_params() {
  SearchParams params;
  params.n_global = 2500;
  params.n_local = 600;
  params.grid.spacing = 0.3;
  params.threads = 2;
  return params;
}

struct PipelineFixture {
  TriMesh mesh;
  CylinderProbe probe{0.7, 3.0};
  SearchParams params = quick_params();
  PreparedObject prep;
  std::vector<Pose> model_trajectory;

  explicit PipelineFixture(const std::string& mesh_name = "wave_field") {
    mesh = make_builtin_mesh(mesh_name);
    Bvh bvh(mesh);
    TrajectorySpec spec = default_trajectory_spec(params.grid.spacing, 1.2);
    GeneratedTrajectory gen = generate_trajectory(mesh, bvh, probe, spec);
    model_trajectory = gen.poses;
    prep = PreparedObject::build(mesh, gen.touchable, params);
  }

  std::vector<Pose> world_trajectory(const Pose& truth) const {
    std::vector<Pose> out;
    out.reserve(model_trajectory.size());
    for (const auto& pose : model_trajectory) out.push_back(truth * pose);
    return out;
  }
};

}  // namespace

TEST_CASE("pose convention round-trip") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    Quat q = random_unit_quat(rng);
    Vec3 t = random_vec(rng, 10.0);
    Vec3 anchor = random_vec(rng, 3.0);
    Pose pose = pose_from_hypothesis(q, t, anchor);
    // x_world = R (x - a) + a + t.
    Vec3 x = random_vec(rng, 5.0);
    Vec3 direct = q * (x - anchor) + anchor + t;
    CHECK((pose * x - direct).norm() < 1e-9);
    CHECK((hypothesis_translation(pose, anchor) - t).norm() < 1e-9);
  }
}

TEST_CASE("planted orientation wins the rotate-correlate search") {
  PipelineFixture fix;
  Rng rng(102);
  Quat truth_q = random_unit_quat(rng);
  Pose truth = pose_from_hypothesis(truth_q, Vec3(2.0, -1.0, 3.0), fix.prep.anchor);
  std::vector<Pose> trajectory = fix.world_trajectory(truth);

  OccupancyGrid swept = build_swept_grid(fix.probe, trajectory, fix.params.grid.spacing,
                                         fix.params.grid.effective_pad(), 2);
  auto canvas = SweptCorrelator::canvas_for(
      pipedetail::max_rotated_dims(fix.prep.grid_support, fix.prep.anchor,
                                   fix.params.grid.spacing),
      swept.lattice.dims, true);
  SweptCorrelator correlator(swept, canvas);

  std::vector<Quat> candidates = super_fibonacci(500);
  candidates.push_back(truth_q);  // inject the ground truth as index 500
  auto [best, diag] = pipedetail::best_orientation(fix.prep, correlator, candidates, fix.params,
                                                   Stage::global);
  CHECK(quat_geodesic_distance(best.q, truth_q) < 1e-12);
  // And the recovered translation is close to the planted one.
  CHECK((best.t - Vec3(2.0, -1.0, 3.0)).norm() < 3.0 * fix.params.grid.spacing);
}

TEST_CASE("local search never regresses and n_l = 0 keeps the incumbent") {
  PipelineFixture fix;
  Pose truth = Pose::identity();
  std::vector<Pose> trajectory = fix.world_trajectory(truth);
  OccupancyGrid swept = build_swept_grid(fix.probe, trajectory, fix.params.grid.spacing,
                                         fix.params.grid.effective_pad(), 2);
  auto canvas = SweptCorrelator::canvas_for(
      pipedetail::max_rotated_dims(fix.prep.grid_support, fix.prep.anchor,
                                   fix.params.grid.spacing),
      swept.lattice.dims, true);
  SweptCorrelator correlator(swept, canvas);

  SearchParams params = fix.params;
  params.n_global = 600;
  auto [global_best, gd] = global_search(fix.prep, correlator, params);

  SearchParams no_local = params;
  no_local.n_local = 0;
  auto [kept, kd] = local_search(fix.prep, correlator, global_best, no_local);
  CHECK(kept.stage == Stage::local);
  CHECK(kept.score == global_best.score);
  CHECK(quat_geodesic_distance(kept.q, global_best.q) == 0.0);

  SearchParams with_local = params;
  with_local.n_local = 300;
  auto [local_best, ld] = local_search(fix.prep, correlator, global_best, with_local);
  CHECK(local_best.score >= global_best.score);
  // Ball restriction: the winner stays within theta of the incumbent.
  CHECK(quat_geodesic_distance(local_best.q, global_best.q) <= params.theta + 1e-9);
}

TEST_CASE("self-registration: identity fixture converges to identity") {
  PipelineFixture fix("ridge_dome");
  std::vector<Pose> trajectory = fix.world_trajectory(Pose::identity());
  RegistrationResult result = register_object(fix.prep, fix.probe, trajectory, fix.params);

  REQUIRE(result.stages.size() == 3);
  PoseError err = pose_error(result.final_pose, Pose::identity(), fix.prep.anchor);
  CHECK(err.translation_mm < 0.02);
  CHECK(err.rotation_deg < 0.2);

  // Stage errors do not increase through the cascade.
  PoseError global_err =
      pose_error(pose_from_hypothesis(result.stages[0].q, result.stages[0].t, fix.prep.anchor),
                 Pose::identity(), fix.prep.anchor);
  PoseError local_err =
      pose_error(pose_from_hypothesis(result.stages[1].q, result.stages[1].t, fix.prep.anchor),
                 Pose::identity(), fix.prep.anchor);
  CHECK(local_err.rotation_deg <= global_err.rotation_deg + 1e-9);
  CHECK(err.translation_mm <= local_err.translation_mm + 1e-9);
}

TEST_CASE("registration recovers a displaced pose at reduced search scale") {
  PipelineFixture fix;
  Rng rng(103);
  for (int trial = 0; trial < 2; ++trial) {
    Pose truth = random_pose(rng, 10.0);  // arbitrary rotation, +-10 mm
    std::vector<Pose> trajectory = fix.world_trajectory(truth);
    std::vector<Pose> noisy = add_pose_noise(trajectory, 0.02, 1000 + trial);

    RegistrationResult result = register_object(fix.prep, fix.probe, noisy, fix.params);
    PoseError err = pose_error(result.final_pose, truth, fix.prep.anchor);
    CHECK(err.translation_mm < 0.1);
    CHECK(err.rotation_deg < 1.0);
  }
}

TEST_CASE("registration is deterministic across thread counts") {
  PipelineFixture fix("step_block");
  Pose truth = pose_from_hypothesis(so3_exp(Vec3(0.3, -0.5, 0.9)), Vec3(1, -2, 0.5),
                                    fix.prep.anchor);
  std::vector<Pose> trajectory = fix.world_trajectory(truth);

  SearchParams p1 = fix.params;
  p1.n_global = 400;
  p1.n_local = 150;
  p1.threads = 1;
  SearchParams p2 = p1;
  p2.threads = 2;

  RegistrationResult r1 = register_object(fix.prep, fix.probe, trajectory, p1);
  RegistrationResult r2 = register_object(fix.prep, fix.probe, trajectory, p2);
  REQUIRE(r1.stages.size() == r2.stages.size());
  for (std::size_t s = 0; s < r1.stages.size(); ++s) {
    CHECK(r1.stages[s].score == r2.stages[s].score);
    CHECK(r1.stages[s].t == r2.stages[s].t);
    CHECK(r1.stages[s].q.coeffs() == r2.stages[s].q.coeffs());
  }
  CHECK(r1.final_pose.p == r2.final_pose.p);
}

TEST_CASE("refined registration is equivariant under rigid trajectory motion") {
  PipelineFixture fix;
  std::vector<Pose> trajectory = fix.world_trajectory(Pose::identity());
  RegistrationResult base = register_object(fix.prep, fix.probe, trajectory, fix.params);

  Rng rng(104);
  Pose rigid(random_unit_quat(rng), random_vec(rng, 5.0));
  std::vector<Pose> moved;
  for (const auto& pose : trajectory) moved.push_back(rigid * pose);
  RegistrationResult shifted = register_object(fix.prep, fix.probe, moved, fix.params);

  Pose expected = rigid * base.final_pose;
  PoseError err = pose_error(shifted.final_pose, expected, fix.prep.anchor);
  CHECK(err.translation_mm < 0.01);
  CHECK(err.rotation_deg < 0.1);
}

TEST_CASE("stage prefixes: global only and global+local") {
  PipelineFixture fix;
  std::vector<Pose> trajectory = fix.world_trajectory(Pose::identity());
  SearchParams params = fix.params;
  params.n_global = 300;
  params.n_local = 100;

  StageSelection only_global{false, false};
  RegistrationResult g = register_object(fix.prep, fix.probe, trajectory, params, only_global);
  REQUIRE(g.stages.size() == 1);
  CHECK(g.stages[0].stage == Stage::global);

  StageSelection no_refine{true, false};
  RegistrationResult gl = register_object(fix.prep, fix.probe, trajectory, params, no_refine);
  REQUIRE(gl.stages.size() == 2);
  CHECK(gl.stages[1].stage == Stage::local);
}
