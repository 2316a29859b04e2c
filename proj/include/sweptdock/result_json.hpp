// JSON serialization of registration results:
//   stage_results[]{stage,qw,qx,qy,qz,tx,ty,tz,score,seconds},
//   final_pose{...}, params{...} echo, diagnostics.
// With timing disabled every wall-clock field is written as 0 so reruns of
// identical inputs produce byte-identical files.

#pragma once

#include "sweptdock/config.hpp"
#include "sweptdock/pipeline.hpp"
#include "sweptdock/se3.hpp"

#include <json.hpp>

#include <string>

namespace sweptdock {

inline nlohmann::json pose_json(const Quat& q_raw, const Vec3& t) {
  Quat q = canonicalized(q_raw.normalized());
  return nlohmann::json{{"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
                        {"tx", t.x()}, {"ty", t.y()}, {"tz", t.z()}};
}

inline nlohmann::json config_json(const Config& cfg) {
  return nlohmann::json{
      {"rho", cfg.rho},
      {"h", cfg.h},
      {"n_g", cfg.n_g},
      {"n_l", cfg.n_l},
      {"theta_deg", cfg.theta_deg},
      {"lambda", cfg.lambda},
      {"tau_out1", cfg.tau_out1},
      {"tau_in1", cfg.tau_in1},
      {"tau_out2", cfg.tau_out2},
      {"tau_in2", cfg.tau_in2},
      {"slope_k", cfg.slope_k},
      {"epsilon", cfg.epsilon},
      {"b_t", cfg.b_t},
      {"b_r_deg", cfg.b_r_deg},
      {"printed_cubic_coeffs", cfg.printed_cubic_coeffs},
      {"pad", cfg.pad},
      {"fft_smooth_sizes", cfg.fft_smooth_sizes},
      {"solver_max_iter", cfg.solver_max_iter},
      {"solver_memory", cfg.solver_memory},
      {"solver_pg_tol", cfg.solver_pg_tol},
      {"solver_step_tol", cfg.solver_step_tol},
      {"fw_max_iter", cfg.fw_max_iter},
      {"fw_tol", cfg.fw_tol},
      {"fw_open_loop", cfg.fw_open_loop},
      {"cdf_table_size", cfg.cdf_table_size},
      {"threads", cfg.threads},
      {"sf_phi", cfg.sf_phi},
      {"sf_psi", cfg.sf_psi},
      {"geoball_gamma", cfg.geoball_gamma},
  };
}

inline nlohmann::json registration_result_json(const RegistrationResult& result,
                                               const Config& config, bool include_timing,
                                               const std::string& timestamp = "") {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : result.stages) {
    nlohmann::json s = pose_json(stage.q, stage.t);
    s["stage"] = stage_name(stage.stage);
    s["score"] = stage.score;
    s["seconds"] = include_timing ? stage.seconds : 0.0;
    stages.push_back(std::move(s));
  }

  nlohmann::json doc;
  doc["stage_results"] = std::move(stages);
  doc["final_pose"] = pose_json(result.final_pose.q, result.final_pose.p);
  doc["params"] = config_json(config);
  doc["diagnostics"] = {
      {"global_near_tie", result.global_diag.near_tie},
      {"local_near_tie", result.local_diag.near_tie},
      {"refine_iterations", result.refine_iterations},
      {"grid_build_seconds", include_timing ? result.grid_build_seconds : 0.0},
      {"total_seconds", include_timing ? result.total_seconds : 0.0},
  };
  if (!timestamp.empty()) doc["timestamp"] = timestamp;
  return doc;
}

}  // namespace sweptdock
