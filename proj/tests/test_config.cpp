#include "test_helpers.hpp"

#include "sweptdock/result_json.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace sweptdock;
using namespace testutil;

TEST_CASE("config defaults carry the standard parameter set") {
  Config cfg;
  CHECK(cfg.rho == -50.0);
  CHECK(cfg.h == 0.2);
  CHECK(cfg.n_g == 20000);
  CHECK(cfg.n_l == 5000);
  CHECK(cfg.theta_deg == 5.0);
  CHECK(cfg.lambda == 1e-3);
  CHECK(cfg.tau_out1 == 0.5);
  CHECK(cfg.tau_in1 == 0.2);
  CHECK(cfg.tau_out2 == 0.2);
  CHECK(cfg.tau_in2 == 0.03);
  CHECK(cfg.slope_k == 15.0);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config parsing: overrides, comments, errors") {
  std::istringstream in(
      "# experiment overrides\n"
      "n_g = 4000\n"
      "h = 0.25   # coarser grid\n"
      "theta_deg = 4\n"
      "\n"
      "fw_open_loop = true\n");
  Config cfg = parse_config(in, "<test>");
  CHECK(cfg.n_g == 4000);
  CHECK(cfg.h == 0.25);
  CHECK(cfg.theta_deg == 4.0);
  CHECK(cfg.fw_open_loop);

  std::istringstream unknown("nonexistent_key = 1\n");
  CHECK_THROWS_AS(parse_config(unknown, "<test>"), invalid_input);

  std::istringstream bad_value("n_g = many\n");
  CHECK_THROWS_AS(parse_config(bad_value, "<test>"), invalid_input);

  std::istringstream bad_sign("rho = 50\n");
  CHECK_THROWS_AS(parse_config(bad_sign, "<test>"), invalid_input);

  std::istringstream no_eq("n_g 4000\n");
  CHECK_THROWS_AS(parse_config(no_eq, "<test>"), invalid_input);
}

TEST_CASE("config maps onto search parameters with angle conversion") {
  Config cfg;
  cfg.theta_deg = 4.0;
  cfg.b_r_deg = 6.0;
  cfg.rho = -25.0;
  SearchParams params = cfg.to_search_params();
  CHECK(params.theta == Catch::Approx(deg2rad(4.0)));
  CHECK(params.bound_rotation == Catch::Approx(deg2rad(6.0)));
  CHECK(params.grid.deep_value == -25.0);
  CHECK(params.scoring.tau_out == cfg.tau_out2);
}

TEST_CASE("config echo in the result JSON reproduces every effective parameter") {
  Config cfg;
  cfg.n_g = 1234;
  cfg.lambda = 5e-4;
  nlohmann::json echo = config_json(cfg);
  CHECK(echo.at("n_g") == 1234);
  CHECK(echo.at("lambda") == 5e-4);
  // Round-trip: feed the echo back through the parser.
  std::ostringstream text;
  for (auto it = echo.begin(); it != echo.end(); ++it) {
    text << it.key() << " = " << it.value().dump() << "\n";
  }
  std::istringstream in(text.str());
  Config back = parse_config(in, "<echo>");
  CHECK(back.n_g == cfg.n_g);
  CHECK(back.lambda == cfg.lambda);
  CHECK(back.h == cfg.h);
  CHECK(back.sf_psi == cfg.sf_psi);
  CHECK(back.fw_open_loop == cfg.fw_open_loop);
}

TEST_CASE("result JSON carries the documented schema") {
  RegistrationResult result;
  StageHypothesis hyp;
  hyp.q = so3_exp(Vec3(0, 0, 0.5));
  hyp.t = Vec3(1, 2, 3);
  hyp.score = 42.0;
  hyp.stage = Stage::global;
  hyp.seconds = 1.5;
  result.stages.push_back(hyp);
  result.final_pose = Pose(hyp.q, Vec3(4, 5, 6));

  nlohmann::json doc = registration_result_json(result, Config{}, true, "2020-01-01T00:00:00Z");
  REQUIRE(doc.contains("stage_results"));
  const auto& s = doc["stage_results"][0];
  for (const char* key : {"stage", "qw", "qx", "qy", "qz", "tx", "ty", "tz", "score", "seconds"}) {
    CHECK(s.contains(key));
  }
  CHECK(s["stage"] == "global");
  CHECK(s["seconds"] == 1.5);
  CHECK(doc["final_pose"].contains("qw"));
  CHECK(doc["params"].contains("n_g"));
  CHECK(doc["timestamp"] == "2020-01-01T00:00:00Z");

  nlohmann::json quiet = registration_result_json(result, Config{}, false);
  CHECK(quiet["stage_results"][0]["seconds"] == 0.0);
  CHECK_FALSE(quiet.contains("timestamp"));
  // Canonical quaternion sign on every output path.
  CHECK(quiet["stage_results"][0]["qw"].get<double>() >= 0.0);
}

TEST_CASE("trajectory CSV round-trip and validation errors") {
  std::vector<Pose> traj;
  Rng rng(111);
  for (int i = 0; i < 50; ++i) {
    traj.emplace_back(random_unit_quat(rng), random_vec(rng, 20.0));
  }
  auto path = std::filesystem::temp_directory_path() / "sd_traj.csv";
  save_trajectory_csv(path.string(), traj);
  std::vector<Pose> loaded = load_trajectory_csv(path.string());
  REQUIRE(loaded.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK((loaded[i].p - traj[i].p).norm() == 0.0);
    CHECK(quat_geodesic_distance(loaded[i].q, traj[i].q) < 1e-15);
  }

  // A quaternion off unit norm by more than 1e-6 names the offending row.
  std::string bad =
      "i,px,py,pz,qw,qx,qy,qz\n"
      "0,0,0,0,1,0,0,0\n"
      "1,0,0,0,1.001,0,0,0\n";
  std::string bad_path = write_temp_file("sd_badtraj.csv", bad);
  try {
    load_trajectory_csv(bad_path);
    FAIL("expected io_error");
  } catch (const io_error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }

  std::string short_row = "i,px,py,pz,qw,qx,qy,qz\n0,1,2\n";
  CHECK_THROWS_AS(load_trajectory_csv(write_temp_file("sd_shortrow.csv", short_row)), io_error);
}
