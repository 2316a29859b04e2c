// sweptdock command-line front end.
//
// Subcommands:
//   register      align an object mesh to a recorded probe trajectory
//   simulate      generate a synthetic contact trajectory with ground truth
//   sweep         noise / sparse-contact robustness sweeps
//   dump-samples  emit orientation samples as CSV for uniformity analysis
//
// Exit codes: 0 success, 2 missing/invalid input, 3 solver abort.

#include "sweptdock/sweptdock.hpp"
#include "sweptdock/result_json.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

namespace {

using namespace sweptdock;

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

TriMesh load_mesh_arg(const std::string& spec) {
  constexpr const char* kPrefix = "builtin:";
  if (spec.rfind(kPrefix, 0) == 0) return make_builtin_mesh(spec.substr(std::strlen(kPrefix)));
  return load_mesh(spec);
}

Pose load_pose_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open pose file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, true, true);
  Quat q(doc.at("qw").get<double>(), doc.at("qx").get<double>(), doc.at("qy").get<double>(),
         doc.at("qz").get<double>());
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw invalid_input(path + ": pose quaternion is not unit length");
  }
  return Pose(q, Vec3(doc.at("tx").get<double>(), doc.at("ty").get<double>(),
                      doc.at("tz").get<double>()));
}

void save_pose_json(const std::string& path, const Pose& pose) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open pose file for writing: " + path);
  out << pose_json(pose.q, pose.p).dump(2) << "\n";
}

struct CommonOptions {
  std::string config_path;
  int threads = -1;  // -1: use config value
  bool no_timestamp = false;

  Config load() const {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    if (threads >= 0) cfg.threads = threads;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "flat key = value parameter file");
  cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)")
      ->envname("SWEPTDOCK_THREADS");
  cmd->add_flag("--no-timestamp", opts.no_timestamp,
                "omit the timestamp and zero all timing fields (byte-reproducible output)");
}

StageSelection parse_stages(const std::string& stages) {
  if (stages == "global") return {false, false};
  if (stages == "global,local") return {true, false};
  if (stages == "global,local,refine") return {true, true};
  throw invalid_input("--stages must be a prefix: 'global', 'global,local' or "
                      "'global,local,refine' (got '" + stages + "')");
}

struct SimulationSetup {
  TriMesh mesh;
  std::unique_ptr<SdfShape> probe_shape;
  const CylinderProbe* probe = nullptr;
  Pose truth;
  std::vector<Pose> clean_world;  // certified-contact trajectory under truth
  TriMesh touchable;
  std::vector<std::uint8_t> contact;
};

SimulationSetup build_simulation(const std::string& mesh_arg, const std::string& probe_spec,
                                 const std::string& pose_arg, double line_spacing,
                                 std::uint64_t seed, const Config& cfg) {
  SimulationSetup sim;
  sim.mesh = load_mesh_arg(mesh_arg);
  if (!is_watertight(sim.mesh)) {
    throw invalid_input("simulation mesh must be watertight");
  }
  sim.probe_shape = parse_probe_spec(probe_spec);
  sim.probe = dynamic_cast<const CylinderProbe*>(sim.probe_shape.get());
  if (!sim.probe) throw invalid_input("trajectory generation requires a cylinder probe");

  if (pose_arg == "identity") {
    sim.truth = Pose::identity();
  } else if (pose_arg == "random") {
    Rng rng(mix_seed(seed, 0xABCDEF));
    sim.truth = random_pose(rng, 10.0);
  } else {
    sim.truth = load_pose_json(pose_arg);
  }

  Bvh bvh(sim.mesh);
  TrajectorySpec spec = default_trajectory_spec(cfg.h, line_spacing);
  spec.validate(cfg.h);
  GeneratedTrajectory gen = generate_trajectory(sim.mesh, bvh, *sim.probe, spec, cfg.epsilon);
  sim.touchable = gen.touchable;
  sim.contact = gen.contact;
  sim.clean_world.reserve(gen.poses.size());
  for (const auto& pose : gen.poses) sim.clean_world.push_back(sim.truth * pose);
  return sim;
}

void write_sweep_rows(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open sweep report for writing: " + path);
  out << "kind,level,repeat,trans_err_mm,rot_err_deg,seconds,status\n";
  char line[256];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%s,%.17g,%d,%.17g,%.17g,%.6f,%s\n", row.kind.c_str(),
                  row.level, row.repeat, row.translation_err_mm, row.rotation_err_deg,
                  row.seconds, row.status.c_str());
    out << line;
  }
}

void write_sweep_aggregate(const std::string& path, const std::string& kind,
                           const std::vector<SweepAggregate>& aggregates) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open sweep aggregate for writing: " + path);
  out << "kind,level,ok_count,trans_mean_mm,trans_std_mm,rot_mean_deg,rot_std_deg\n";
  char line[256];
  for (const auto& agg : aggregates) {
    std::snprintf(line, sizeof(line), "%s,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", kind.c_str(),
                  agg.level, agg.ok_count, agg.translation_mean, agg.translation_std,
                  agg.rotation_mean, agg.rotation_std);
    out << line;
  }
}

int cmd_register(const std::string& object_path, const std::string& touchable_path,
                 const std::string& probe_spec, const std::string& traj_path,
                 const std::string& out_path, const std::string& stages_arg,
                 const CommonOptions& common) {
  Config cfg = common.load();
  StageSelection stages = parse_stages(stages_arg);

  TriMesh object = load_mesh_arg(object_path);
  TriMesh touchable = load_mesh_arg(touchable_path);
  auto probe = parse_probe_spec(probe_spec);
  std::vector<Pose> trajectory = load_trajectory_csv(traj_path);

  SearchParams params = cfg.to_search_params();
  PreparedObject prep = PreparedObject::build(std::move(object), std::move(touchable), params);

  RegistrationResult result;
  try {
    result = register_object(prep, *probe, trajectory, params, stages);
  } catch (const solver_error& e) {
    std::string diag_path = out_path + ".diag.txt";
    std::ofstream diag(diag_path);
    diag << "solver abort: " << e.what() << "\n";
    std::cerr << "error: solver abort (" << e.what() << "); diagnostics written to " << diag_path
              << "\n";
    return 3;
  }

  nlohmann::json doc = registration_result_json(result, cfg, !common.no_timestamp,
                                                common.no_timestamp ? "" : utc_timestamp());
  std::ofstream out(out_path);
  if (!out) throw io_error("cannot open result file for writing: " + out_path);
  out << doc.dump(2) << "\n";

  for (const auto& stage : result.stages) {
    Quat q = canonicalized(stage.q.normalized());
    std::printf("stage %-6s score %12.6f  t = (%8.4f, %8.4f, %8.4f)  q = (%7.4f, %7.4f, %7.4f, %7.4f)  %.2fs\n",
                stage_name(stage.stage), stage.score, stage.t.x(), stage.t.y(), stage.t.z(),
                q.w(), q.x(), q.y(), q.z(), stage.seconds);
  }
  std::printf("result written to %s\n", out_path.c_str());
  return 0;
}

int cmd_simulate(const std::string& mesh_arg, const std::string& probe_spec,
                 const std::string& pose_arg, double noise_sigma, double contact_fraction,
                 double lift, double line_spacing, std::uint64_t seed,
                 const std::string& out_prefix, const CommonOptions& common) {
  Config cfg = common.load();
  if (noise_sigma < 0.0) throw invalid_input("--noise-sigma must be >= 0");

  SimulationSetup sim =
      build_simulation(mesh_arg, probe_spec, pose_arg, line_spacing, seed, cfg);

  std::vector<Pose> trajectory = sim.clean_world;
  if (contact_fraction < 1.0) {
    trajectory = sparsify_contacts(trajectory, contact_fraction, lift, mix_seed(seed, 1));
  }
  trajectory = add_pose_noise(trajectory, noise_sigma, mix_seed(seed, 2));

  save_trajectory_csv(out_prefix + "_trajectory.csv", trajectory);
  save_obj(out_prefix + "_touchable.obj", sim.touchable);
  save_pose_json(out_prefix + "_truth.json", sim.truth);

  std::size_t contacts = 0;
  for (auto c : sim.contact) contacts += c;
  std::printf("simulated %zu poses (%zu contact stations) -> %s_{trajectory.csv,touchable.obj,truth.json}\n",
              trajectory.size(), contacts, out_prefix.c_str());
  return 0;
}

int cmd_sweep(const std::string& kind_arg, const std::vector<double>& levels, int repeats,
              const std::string& mesh_arg, const std::string& probe_spec,
              const std::string& pose_arg, double lift, double baseline_sigma,
              double line_spacing, std::uint64_t seed, const std::string& out_prefix,
              const CommonOptions& common) {
  Config cfg = common.load();
  SweepParams sweep;
  if (kind_arg == "noise") {
    sweep.kind = SweepKind::noise;
  } else if (kind_arg == "sparsity") {
    sweep.kind = SweepKind::sparsity;
  } else {
    throw invalid_input("--kind must be 'noise' or 'sparsity'");
  }
  sweep.levels = levels;
  sweep.repeats = repeats;
  sweep.lift = lift;
  sweep.baseline_sigma = baseline_sigma;
  sweep.seed = seed;

  SimulationSetup sim =
      build_simulation(mesh_arg, probe_spec, pose_arg, line_spacing, seed, cfg);

  SearchParams params = cfg.to_search_params();
  PreparedObject prep = PreparedObject::build(sim.mesh, sim.touchable, params);
  std::vector<SweepRow> rows =
      run_sweep(prep, *sim.probe_shape, sim.clean_world, sim.truth, params, sweep);

  write_sweep_rows(out_prefix + "_sweep.csv", rows);
  write_sweep_aggregate(out_prefix + "_sweep_agg.csv", kind_arg, aggregate_sweep(rows));

  std::size_t ok = 0;
  for (const auto& row : rows) {
    std::printf("%s level %-8g repeat %d: %s", row.kind.c_str(), row.level, row.repeat,
                row.status.c_str());
    if (row.status == "ok") {
      ++ok;
      std::printf("  err = %.4f mm / %.4f deg  (%.1fs)", row.translation_err_mm,
                  row.rotation_err_deg, row.seconds);
    }
    std::printf("\n");
  }
  std::printf("sweep report written to %s_sweep.csv (aggregate: %s_sweep_agg.csv)\n",
              out_prefix.c_str(), out_prefix.c_str());
  return ok == 0 ? 1 : 0;
}

int cmd_dump_samples(std::size_t n, const std::string& mode, const std::vector<double>& q0_raw,
                     double theta_deg, int table_size, const std::string& out_path) {
  std::vector<Quat> samples;
  if (mode == "global") {
    samples = super_fibonacci(n);
  } else if (mode == "geoball") {
    Quat q0(q0_raw[0], q0_raw[1], q0_raw[2], q0_raw[3]);
    if (q0.norm() < 1e-9) throw invalid_input("--q0 must be a nonzero quaternion");
    q0.normalize();
    // theta is the quaternion-sphere geodesic radius; the sampled ball
    // contains rotations up to 2*theta from q0.
    RadialCdfTable table(deg2rad(theta_deg), table_size);
    samples = geoball_sf(n, q0, deg2rad(theta_deg), table);
  } else {
    throw invalid_input("--mode must be 'global' or 'geoball'");
  }

  std::ofstream out(out_path);
  if (!out) throw io_error("cannot open sample dump for writing: " + out_path);
  out << "i,qw,qx,qy,qz\n";
  char line[192];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Quat q = canonicalized(samples[i]);
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", i, q.w(), q.x(), q.y(),
                  q.z());
    out << line;
  }
  std::printf("%zu samples written to %s\n", samples.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sweptdock: contact-based object registration by swept-volume docking"};
  app.require_subcommand(1);

  // register
  auto* reg = app.add_subcommand("register", "register an object mesh to a probe trajectory");
  std::string reg_object, reg_touchable, reg_probe, reg_traj, reg_out = "result.json";
  std::string reg_stages = "global,local,refine";
  CommonOptions reg_common;
  reg->add_option("--object", reg_object, "watertight object mesh (.stl/.obj or builtin:<name>)")
      ->required();
  reg->add_option("--touchable", reg_touchable, "touchable-surface sub-mesh")->required();
  reg->add_option("--probe", reg_probe, "probe spec, e.g. cylinder:r=0.7,l=20")->required();
  reg->add_option("--traj", reg_traj, "trajectory CSV (i,px,py,pz,qw,qx,qy,qz)")->required();
  reg->add_option("--out", reg_out, "result JSON path");
  reg->add_option("--stages", reg_stages, "stage prefix to run: global | global,local | global,local,refine");
  add_common(reg, reg_common);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic contact trajectory");
  std::string sim_mesh, sim_probe = "cylinder:r=0.7,l=20", sim_pose = "random";
  std::string sim_prefix = "sim";
  double sim_sigma = 0.02, sim_fraction = 1.0, sim_lift = 0.5, sim_line_spacing = 1.0;
  std::uint64_t sim_seed = 1;
  CommonOptions sim_common;
  sim->add_option("--mesh", sim_mesh, "object mesh (.stl/.obj or builtin:<name>)")->required();
  sim->add_option("--probe", sim_probe, "probe spec (cylinder:r=<mm>,l=<mm>)");
  sim->add_option("--pose", sim_pose, "ground-truth pose: 'random', 'identity' or a pose JSON path");
  sim->add_option("--noise-sigma", sim_sigma, "Gaussian position noise std, mm");
  sim->add_option("--contact-fraction", sim_fraction, "fraction of poses kept in contact (0,1]");
  sim->add_option("--lift", sim_lift, "sparse-contact lift distance, mm");
  sim->add_option("--line-spacing", sim_line_spacing, "scan line spacing, mm");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out-prefix", sim_prefix, "output file prefix");
  add_common(sim, sim_common);

  // sweep
  auto* swp = app.add_subcommand("sweep", "noise / sparsity robustness sweep");
  std::string swp_kind = "noise", swp_mesh, swp_probe = "cylinder:r=0.7,l=20", swp_pose = "random";
  std::string swp_prefix = "sweep";
  std::vector<double> swp_levels;
  int swp_repeats = 5;
  double swp_lift = 0.5, swp_baseline_sigma = 0.02, swp_line_spacing = 1.0;
  std::uint64_t swp_seed = 1;
  CommonOptions swp_common;
  swp->add_option("--kind", swp_kind, "noise | sparsity")->required();
  swp->add_option("--levels", swp_levels, "comma-separated levels (sigma mm or contact fraction)")
      ->required()
      ->delimiter(',');
  swp->add_option("--repeats", swp_repeats, "repeats per level");
  swp->add_option("--mesh", swp_mesh, "object mesh (.stl/.obj or builtin:<name>)")->required();
  swp->add_option("--probe", swp_probe, "probe spec");
  swp->add_option("--pose", swp_pose, "ground-truth pose: 'random', 'identity' or a JSON path");
  swp->add_option("--lift", swp_lift, "sparsity lift distance, mm");
  swp->add_option("--baseline-sigma", swp_baseline_sigma, "noise applied during sparsity sweeps, mm");
  swp->add_option("--line-spacing", swp_line_spacing, "scan line spacing, mm");
  swp->add_option("--seed", swp_seed, "random seed");
  swp->add_option("--out-prefix", swp_prefix, "output file prefix");
  add_common(swp, swp_common);

  // dump-samples
  auto* dump = app.add_subcommand("dump-samples", "emit orientation samples as CSV");
  std::size_t dump_n = 1000;
  std::string dump_mode = "global", dump_out = "samples.csv";
  std::vector<double> dump_q0{1.0, 0.0, 0.0, 0.0};
  double dump_theta = 5.0;
  int dump_table = 4096;
  dump->add_option("--n", dump_n, "sample count");
  dump->add_option("--mode", dump_mode, "global | geoball");
  dump->add_option("--q0", dump_q0, "ball center quaternion w,x,y,z")->delimiter(',')->expected(4);
  dump->add_option("--theta-deg", dump_theta,
                   "geodesic ball radius on the quaternion sphere, degrees "
                   "(rotation angles reach 2*theta)");
  dump->add_option("--table-size", dump_table, "radial CDF table size");
  dump->add_option("--out", dump_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) {
      return cmd_register(reg_object, reg_touchable, reg_probe, reg_traj, reg_out, reg_stages,
                          reg_common);
    }
    if (sim->parsed()) {
      return cmd_simulate(sim_mesh, sim_probe, sim_pose, sim_sigma, sim_fraction, sim_lift,
                          sim_line_spacing, sim_seed, sim_prefix, sim_common);
    }
    if (swp->parsed()) {
      return cmd_sweep(swp_kind, swp_levels, swp_repeats, swp_mesh, swp_probe, swp_pose, swp_lift,
                       swp_baseline_sigma, swp_line_spacing, swp_seed, swp_prefix, swp_common);
    }
    if (dump->parsed()) {
      return cmd_dump_samples(dump_n, dump_mode, dump_q0, dump_theta, dump_table, dump_out);
    }
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const solver_error& e) {
    std::cerr << "error: solver abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
