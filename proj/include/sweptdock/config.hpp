// Flat "key = value" configuration ('#' comments). Defaults are the
// experiment parameter set; unknown keys are rejected so typos cannot
// silently fall back to defaults. User-facing angles are degrees.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace sweptdock {

struct Config {
  // Grid-search parameters.
  double rho = -50.0;      // deep-penetration cell value (negative)
  double h = 0.2;          // grid spacing, mm
  int n_g = 20000;         // global orientation samples
  int n_l = 5000;          // local (geodesic ball) samples
  double theta_deg = 5.0;  // ball radius on the quaternion sphere, degrees
                           // (covers rotations up to 2*theta)
  double tau_out1 = 0.5;   // object-grid outer band, mm
  double tau_in1 = 0.2;    // object-grid inner band, mm

  // Refinement parameters.
  double lambda = 1e-3;
  double tau_out2 = 0.2;   // scoring outer threshold, mm
  double tau_in2 = 0.03;   // scoring inner threshold, mm
  double slope_k = 15.0;   // scoring penalty slope
  double epsilon = 1.0;    // proximity cutoff, mm
  double b_t = 1.0;        // translation bound, mm
  double b_r_deg = 5.0;    // rotation bound, degrees
  bool printed_cubic_coeffs = false;  // audit switch, see ScoringParams

  // Artifact defaults.
  double pad = -1.0;            // grid padding; negative selects max(tau_out1, 2h)
  bool fft_smooth_sizes = true; // round canvases to {2,3,5,7}-smooth sizes
  int solver_max_iter = 200;
  int solver_memory = 10;
  double solver_pg_tol = 1e-8;
  double solver_step_tol = 1e-10;
  int fw_max_iter = 64;
  double fw_tol = 1e-5;
  bool fw_open_loop = false;
  int cdf_table_size = 4096;
  int threads = 0;  // 0 = hardware concurrency

  // Low-discrepancy bases (research knobs; leave alone for normal use).
  double sf_phi = SamplerBases{}.phi;
  double sf_psi = SamplerBases{}.psi;
  double geoball_gamma = SamplerBases{}.gamma;

  void validate() const {
    to_search_params().validate();
    if (rho >= 0.0) throw invalid_input("config: rho must be negative (deep-penetration penalty)");
    if (h <= 0.0) throw invalid_input("config: h must be positive");
    if (n_g < 1) throw invalid_input("config: n_g must be >= 1");
    if (n_l < 0) throw invalid_input("config: n_l must be >= 0");
    if (epsilon <= 0.0) throw invalid_input("config: epsilon must be positive");
    if (threads < 0) throw invalid_input("config: threads must be >= 0");
  }

  SearchParams to_search_params() const {
    SearchParams p;
    p.n_global = n_g;
    p.n_local = n_l;
    p.theta = deg2rad(theta_deg);
    p.grid.tau_out = tau_out1;
    p.grid.tau_in = tau_in1;
    p.grid.deep_value = rho;
    p.grid.spacing = h;
    p.grid.pad = pad;
    p.scoring.tau_out = tau_out2;
    p.scoring.tau_in = tau_in2;
    p.scoring.slope = slope_k;
    p.scoring.printed_coefficients = printed_cubic_coeffs;
    p.solver.max_iterations = solver_max_iter;
    p.solver.memory = solver_memory;
    p.solver.projected_gradient_tol = solver_pg_tol;
    p.solver.step_tol = solver_step_tol;
    p.fw.max_iter = fw_max_iter;
    p.fw.tol = fw_tol;
    p.fw.open_loop_step = fw_open_loop;
    p.bases.phi = sf_phi;
    p.bases.psi = sf_psi;
    p.bases.gamma = geoball_gamma;
    p.cdf_table_size = cdf_table_size;
    p.lambda = lambda;
    p.bound_translation = b_t;
    p.bound_rotation = deg2rad(b_r_deg);
    p.epsilon = epsilon;
    p.fft_smooth_sizes = fft_smooth_sizes;
    p.threads = threads;
    return p;
  }
};

namespace configdetail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw invalid_input("config: boolean key '" + key + "' has non-boolean value '" + v + "'");
}

}  // namespace configdetail

inline void apply_config_entry(Config& cfg, const std::string& key, const std::string& value) {
  auto num = [&]() {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw invalid_input("config: key '" + key + "' has non-numeric value '" + value + "'");
    }
  };
  auto integer = [&]() {
    double v = num();
    if (v != std::floor(v)) throw invalid_input("config: key '" + key + "' expects an integer");
    return static_cast<int>(v);
  };

  if (key == "rho") cfg.rho = num();
  else if (key == "h") cfg.h = num();
  else if (key == "n_g") cfg.n_g = integer();
  else if (key == "n_l") cfg.n_l = integer();
  else if (key == "theta_deg") cfg.theta_deg = num();
  else if (key == "lambda") cfg.lambda = num();
  else if (key == "tau_out1") cfg.tau_out1 = num();
  else if (key == "tau_in1") cfg.tau_in1 = num();
  else if (key == "tau_out2") cfg.tau_out2 = num();
  else if (key == "tau_in2") cfg.tau_in2 = num();
  else if (key == "slope_k") cfg.slope_k = num();
  else if (key == "epsilon") cfg.epsilon = num();
  else if (key == "b_t") cfg.b_t = num();
  else if (key == "b_r_deg") cfg.b_r_deg = num();
  else if (key == "printed_cubic_coeffs") cfg.printed_cubic_coeffs = configdetail::parse_bool(value, key);
  else if (key == "pad") cfg.pad = num();
  else if (key == "fft_smooth_sizes") cfg.fft_smooth_sizes = configdetail::parse_bool(value, key);
  else if (key == "solver_max_iter") cfg.solver_max_iter = integer();
  else if (key == "solver_memory") cfg.solver_memory = integer();
  else if (key == "solver_pg_tol") cfg.solver_pg_tol = num();
  else if (key == "solver_step_tol") cfg.solver_step_tol = num();
  else if (key == "fw_max_iter") cfg.fw_max_iter = integer();
  else if (key == "fw_tol") cfg.fw_tol = num();
  else if (key == "fw_open_loop") cfg.fw_open_loop = configdetail::parse_bool(value, key);
  else if (key == "cdf_table_size") cfg.cdf_table_size = integer();
  else if (key == "threads") cfg.threads = integer();
  else if (key == "sf_phi") cfg.sf_phi = num();
  else if (key == "sf_psi") cfg.sf_psi = num();
  else if (key == "geoball_gamma") cfg.geoball_gamma = num();
  else throw invalid_input("config: unknown key '" + key + "'");
}

inline Config parse_config(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string text = configdetail::trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw invalid_input(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = configdetail::trim(text.substr(0, eq));
    std::string value = configdetail::trim(text.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw invalid_input(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_config_entry(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  return parse_config(in, path);
}

}  // namespace sweptdock
