// Three-stage registration: FFT grid correlation over the global
// Super-Fibonacci orientation set, the same search restricted to a geodesic
// ball around the best orientation, then continuous Lie-algebra refinement.
//
// Pose convention, used consistently by grid rotation, translation recovery
// and refinement anchoring:  x_world = R (x_model - a) + a + t,  with a the
// object geometry center. Under it the correlation shift recovers t exactly.

#pragma once

#include "sweptdock/bvh.hpp"
#include "sweptdock/core.hpp"
#include "sweptdock/fft_correlate.hpp"
#include "sweptdock/grids.hpp"
#include "sweptdock/mesh.hpp"
#include "sweptdock/parallel.hpp"
#include "sweptdock/proximity.hpp"
#include "sweptdock/refine.hpp"
#include "sweptdock/scoring.hpp"
#include "sweptdock/sdf.hpp"
#include "sweptdock/se3.hpp"
#include "sweptdock/so3.hpp"

#include <chrono>
#include <memory>
#include <vector>

namespace sweptdock {

enum class Stage { global, local, refine };

inline const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::global: return "global";
    case Stage::local: return "local";
    case Stage::refine: return "refine";
  }
  return "?";
}

struct StageHypothesis {
  Quat q = Quat::Identity();
  Vec3 t = Vec3::Zero();
  double score = 0.0;  // correlation score (grid stages) or J* (refine);
                       // comparable only within a stage
  Stage stage = Stage::global;
  double seconds = 0.0;
};

struct SearchParams {
  int n_global = 20000;
  int n_local = 5000;
  double theta = deg2rad(5.0);  // geodesic ball radius on the quaternion
                                // sphere; covers rotations up to 2*theta
  ObjectGridParams grid;        // spacing h, bands, deep penalty, padding
  ScoringParams scoring;
  SolverParams solver;
  FwParams fw;
  SamplerBases bases;
  int cdf_table_size = 4096;
  double lambda = 1e-3;
  double bound_translation = 1.0;  // mm
  double bound_rotation = 0.0873;  // rad
  double epsilon = 1.0;            // proximity cutoff, mm
  bool fft_smooth_sizes = true;
  int threads = 0;

  void validate() const {
    if (n_global < 1) throw invalid_input("n_global must be >= 1");
    if (n_local < 0) throw invalid_input("n_local must be >= 0");
    if (!(theta > 0.0 && theta < 0.5 * kPi)) throw invalid_input("theta must be in (0, pi/2)");
    grid.validate();
    scoring.validate();
  }
};

/// Pose from a stage hypothesis under the pipeline convention.
inline Pose pose_from_hypothesis(const Quat& q, const Vec3& t, const Vec3& anchor) {
  Quat rot = q.normalized();
  return Pose(rot, t + anchor - rot * anchor);
}

/// Hypothesis translation of a pose: t = T(a) - a.
inline Vec3 hypothesis_translation(const Pose& pose, const Vec3& anchor) {
  return pose * anchor - anchor;
}

/// Object-side inputs that are independent of the trajectory; sweeps build
/// this once per mesh and reuse it across every perturbed registration.
struct PreparedObject {
  TriMesh object;
  TriMesh touchable;
  Bvh object_bvh;
  Bvh touchable_bvh;
  Vec3 anchor = Vec3::Zero();
  ScalarGrid object_grid;
  Aabb grid_support;  // tight AABB of the nonzero object-grid cells

  static PreparedObject build(TriMesh object_mesh, TriMesh touchable_mesh,
                              const SearchParams& params) {
    params.validate();
    PreparedObject prep;
    prep.object = std::move(object_mesh);
    prep.touchable = std::move(touchable_mesh);
    prep.object_bvh.build(prep.object);
    prep.touchable_bvh.build(prep.touchable);
    prep.anchor = geometry_center(prep.object);
    prep.object_grid = build_object_grid(prep.object, prep.object_bvh, prep.touchable,
                                         prep.touchable_bvh, params.grid, params.threads);
    prep.grid_support = nonzero_support(prep.object_grid);
    if (prep.grid_support.empty()) prep.grid_support.expand(prep.anchor);
    return prep;
  }
};

struct StageDiagnostics {
  bool near_tie = false;   // runner-up within 1% of the winner
  int runner_index = -1;
  double runner_score = 0.0;
};

struct RegistrationResult {
  std::vector<StageHypothesis> stages;
  Pose final_pose;
  StageDiagnostics global_diag;
  StageDiagnostics local_diag;
  int refine_iterations = 0;
  double grid_build_seconds = 0.0;
  double total_seconds = 0.0;
};

namespace pipedetail {

/// Worst-case voxel extent of the object grid's support under rotation about
/// the anchor: the support fits inside a ball of radius max|corner - anchor|.
inline std::array<int, 3> max_rotated_dims(const Aabb& support, const Vec3& anchor,
                                           double spacing) {
  double radius = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    Vec3 c(corner & 1 ? support.max.x() : support.min.x(),
           corner & 2 ? support.max.y() : support.min.y(),
           corner & 4 ? support.max.z() : support.min.z());
    radius = std::max(radius, (c - anchor).norm());
  }
  // rotate_resample pads the rotated AABB by one voxel on each side.
  int cells = static_cast<int>(std::ceil(2.0 * (radius + spacing) / spacing)) + 2;
  return {cells, cells, cells};
}

struct CandidateOutcome {
  double score = -std::numeric_limits<double>::infinity();
  std::array<int, 3> shift{0, 0, 0};
  Vec3 translation = Vec3::Zero();
};

/// Rotate-correlate-score every candidate orientation; deterministic winner
/// (strictly greater score, so ties keep the lowest index).
inline std::pair<StageHypothesis, StageDiagnostics> best_orientation(
    const PreparedObject& prep, const SweptCorrelator& correlator,
    const std::vector<Quat>& candidates, const SearchParams& params, Stage stage) {
  const int threads = resolve_thread_count(params.threads);
  std::vector<CandidateOutcome> outcomes(candidates.size());

  std::vector<std::unique_ptr<CorrelationWorkspace>> workspaces(
      static_cast<std::size_t>(threads));
  for (auto& ws : workspaces) ws = std::make_unique<CorrelationWorkspace>(correlator.canvas());

  parallel_for(candidates.size(), threads, [&](int tid, std::size_t i) {
    ScalarGrid rotated = rotate_resample_object_grid(prep.object_grid, candidates[i], prep.anchor,
                                                     prep.grid_support, 1);
    CorrelationResult r = correlator.correlate(rotated, *workspaces[static_cast<std::size_t>(tid)]);
    outcomes[i] = CandidateOutcome{r.best_score, r.best_shift, r.translation};
  });

  std::size_t best = 0;
  std::size_t runner = candidates.size();
  for (std::size_t i = 1; i < outcomes.size(); ++i) {
    if (outcomes[i].score > outcomes[best].score) {
      runner = best;
      best = i;
    } else if (runner >= outcomes.size() || outcomes[i].score > outcomes[runner].score) {
      runner = i;
    }
  }

  StageHypothesis hyp;
  hyp.q = candidates[best];
  hyp.t = outcomes[best].translation;
  hyp.score = outcomes[best].score;
  hyp.stage = stage;

  StageDiagnostics diag;
  if (runner < outcomes.size() && outcomes[best].score > 0.0 &&
      outcomes[runner].score >= 0.99 * outcomes[best].score) {
    diag.near_tie = true;
    diag.runner_index = static_cast<int>(runner);
    diag.runner_score = outcomes[runner].score;
  }
  return {hyp, diag};
}

}  // namespace pipedetail

/// Global stage: n_global Super-Fibonacci orientations, best correlation.
inline std::pair<StageHypothesis, StageDiagnostics> global_search(
    const PreparedObject& prep, const SweptCorrelator& correlator, const SearchParams& params) {
  auto candidates = super_fibonacci(static_cast<std::size_t>(params.n_global), params.bases);
  return pipedetail::best_orientation(prep, correlator, candidates, params, Stage::global);
}

/// Local stage: geodesic ball around the incumbent, which is always
/// re-evaluated as candidate 0 so the result never regresses.
inline std::pair<StageHypothesis, StageDiagnostics> local_search(
    const PreparedObject& prep, const SweptCorrelator& correlator, const StageHypothesis& best,
    const SearchParams& params) {
  if (params.n_local == 0) {
    StageHypothesis keep = best;
    keep.stage = Stage::local;
    keep.seconds = 0.0;
    return {keep, StageDiagnostics{}};
  }
  RadialCdfTable table(params.theta, params.cdf_table_size);
  std::vector<Quat> candidates;
  candidates.reserve(static_cast<std::size_t>(params.n_local) + 1);
  candidates.push_back(best.q);
  auto ball = geoball_sf(static_cast<std::size_t>(params.n_local), best.q, params.theta, table,
                         params.bases);
  candidates.insert(candidates.end(), ball.begin(), ball.end());
  return pipedetail::best_orientation(prep, correlator, candidates, params, Stage::local);
}

/// Which stage prefix to run.
struct StageSelection {
  bool local = true;
  bool refine = true;
};

/// Full registration on a prepared object. The swept grid and its spectrum
/// are computed once; only the object grid rotates across candidates.
inline RegistrationResult register_object(const PreparedObject& prep, const SdfShape& probe,
                                          const std::vector<Pose>& trajectory,
                                          const SearchParams& params,
                                          const StageSelection& stages = {}) {
  params.validate();
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  auto seconds_since = [](clock::time_point from) {
    return std::chrono::duration<double>(clock::now() - from).count();
  };

  OccupancyGrid swept = build_swept_grid(probe, trajectory, params.grid.spacing,
                                         params.grid.effective_pad(), params.threads);
  auto canvas = SweptCorrelator::canvas_for(
      pipedetail::max_rotated_dims(prep.grid_support, prep.anchor, params.grid.spacing),
      swept.lattice.dims, params.fft_smooth_sizes);
  SweptCorrelator correlator(swept, canvas);

  RegistrationResult result;
  result.grid_build_seconds = seconds_since(t_start);

  auto t_stage = clock::now();
  auto [global_best, global_diag] = global_search(prep, correlator, params);
  global_best.seconds = seconds_since(t_stage);
  result.stages.push_back(global_best);
  result.global_diag = global_diag;
  StageHypothesis incumbent = global_best;

  if (stages.local) {
    t_stage = clock::now();
    auto [local_best, local_diag] = local_search(prep, correlator, incumbent, params);
    local_best.seconds = seconds_since(t_stage);
    result.stages.push_back(local_best);
    result.local_diag = local_diag;
    incumbent = local_best;
  }

  if (stages.refine) {
    t_stage = clock::now();
    RefineProblem prob;
    prob.initial = pose_from_hypothesis(incumbent.q, incumbent.t, prep.anchor);
    prob.anchor = prep.anchor;
    prob.trajectory = &trajectory;
    prob.probe = &probe;
    prob.mesh = &prep.object;
    prob.bvh = &prep.object_bvh;
    prob.lambda = params.lambda;
    prob.bound_translation = params.bound_translation;
    prob.bound_rotation = params.bound_rotation;
    prob.epsilon = params.epsilon;
    prob.scoring = params.scoring;
    prob.fw = params.fw;
    prob.threads = params.threads;

    RefineResult refined = solve(prob, params.solver);
    StageHypothesis hyp;
    hyp.q = refined.refined.q;
    hyp.t = hypothesis_translation(refined.refined, prep.anchor);
    hyp.score = refined.objective_value;
    hyp.stage = Stage::refine;
    hyp.seconds = seconds_since(t_stage);
    result.stages.push_back(hyp);
    result.refine_iterations = refined.iterations;
  }

  const StageHypothesis& last = result.stages.back();
  result.final_pose = pose_from_hypothesis(last.q, last.t, prep.anchor);
  result.total_seconds = seconds_since(t_start);
  return result;
}

/// Convenience overload that prepares the object first.
inline RegistrationResult register_object(const TriMesh& object, const TriMesh& touchable,
                                          const SdfShape& probe,
                                          const std::vector<Pose>& trajectory,
                                          const SearchParams& params,
                                          const StageSelection& stages = {}) {
  PreparedObject prep = PreparedObject::build(object, touchable, params);
  return register_object(prep, probe, trajectory, params, stages);
}

}  // namespace sweptdock
