#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "earol/pipeline.hpp"

using namespace earol;

namespace {

const std::string kScenarioDir = EAROL_SCENARIO_DIR;

Scenario small_odometry_scenario() {
  Scenario s = Scenario::load(kScenarioDir + "/maze_small.scn");
  // shrink for unit-test runtime: first leg of the course only
  s.duration = 12.0;
  s.sensor.points_per_scan = 6000;
  return s;
}

}  // namespace

TEST_CASE("zero-noise odometry stays within centimeters") {
  RunOptions opts;
  opts.mode = RunMode::kOdometry;
  const RunResult res = run_scenario(small_odometry_scenario(), opts);
  REQUIRE(res.metrics.scans > 80);
  REQUIRE_FALSE(res.diverged);
  REQUIRE(res.metrics.ate_rmse < 0.01);
  REQUIRE(std::abs(res.metrics.calib_pitch_deg - 20.0) < 0.01);
}

TEST_CASE("odometry replays bit-identically for a fixed seed") {
  RunOptions opts;
  opts.mode = RunMode::kOdometry;
  const Scenario s = small_odometry_scenario();
  const RunResult a = run_scenario(s, opts);
  const RunResult b = run_scenario(s, opts);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE((a.records[i].est_position - b.records[i].est_position).norm() == 0.0);
    REQUIRE(a.records[i].total_entropy == b.records[i].total_entropy);
    REQUIRE(a.records[i].matched == b.records[i].matched);
  }
}

TEST_CASE("entropy series is monotone on a static world") {
  RunOptions opts;
  opts.mode = RunMode::kOdometry;
  const RunResult res = run_scenario(small_odometry_scenario(), opts);
  REQUIRE(res.metrics.entropy_monotone_violations == 0);
  REQUIRE(res.metrics.entropy_final < res.metrics.entropy_initial);
}

TEST_CASE("track mode detects and follows the ring target") {
  Scenario s = Scenario::load(kScenarioDir + "/track_maze.scn");
  s.duration = 20.0;
  s.sensor.points_per_scan = 8000;
  RunOptions opts;
  opts.mode = RunMode::kTrack;
  opts.yaw_policy = YawPolicy::kPerceptionAware;
  const RunResult res = run_scenario(s, opts);
  REQUIRE(res.metrics.detection_rate > 0.3);
  // perception-aware yaw keeps the target angle bounded most of the time
  int in_fov = 0, target_steps = 0;
  for (const auto& r : res.records) {
    if (r.target_angle >= 0.0) {
      ++target_steps;
      if (r.target_angle < 60.0 * kPi / 180.0) ++in_fov;
    }
  }
  REQUIRE(target_steps > 50);
  REQUIRE(static_cast<double>(in_fov) / target_steps > 0.5);
}

TEST_CASE("run artifacts land in the output directory and rerun identically") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "earol_test_out";
  fs::remove_all(dir);
  Scenario s = small_odometry_scenario();
  s.duration = 6.0;
  RunOptions opts;
  opts.mode = RunMode::kOdometry;
  opts.out_dir = dir.string();
  run_scenario(s, opts);
  for (const char* name : {"estimated.csv", "ground_truth.csv", "metrics.txt",
                           "map.ply", "entropy_final.pgm", "entropy_series.csv",
                           "yaw_sequence.csv"}) {
    REQUIRE(fs::exists(dir / name));
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const std::string metrics_a = slurp(dir / "metrics.txt");
  run_scenario(s, opts);
  REQUIRE(slurp(dir / "metrics.txt") == metrics_a);
  fs::remove_all(dir);
}

TEST_CASE("plan mode writes a 50 Hz trajectory that clears obstacles") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "earol_plan_out";
  fs::remove_all(dir);
  const Scenario s = Scenario::load(kScenarioDir + "/plan_corridor.scn");
  RunOptions opts;
  opts.mode = RunMode::kPlan;
  opts.out_dir = dir.string();
  run_scenario(s, opts);
  REQUIRE(fs::exists(dir / "trajectory.csv"));
  const auto metrics = read_metrics((dir / "metrics.txt").string());
  double min_clearance = -1.0, feas = -1.0;
  for (const auto& [k, v] : metrics) {
    if (k == "min_clearance") min_clearance = std::stod(v);
    if (k == "feasibility_penalty") feas = std::stod(v);
  }
  REQUIRE(min_clearance >= s.limits.clearance - 0.05);
  REQUIRE(feas == 0.0);
  // 50 Hz sampling: consecutive stamps 0.02 s apart
  std::ifstream in(dir / "trajectory.csv");
  std::string line;
  std::getline(in, line);  // header
  std::getline(in, line);
  REQUIRE(line.substr(0, 2) == "0,");
  std::getline(in, line);
  REQUIRE(line.substr(0, 5) == "0.02,");
  fs::remove_all(dir);
}

TEST_CASE("metrics comparison requires matching seeds") {
  std::vector<std::pair<std::string, std::string>> a{{"seed", "1"},
                                                     {"track_cum", "2.0"}};
  std::vector<std::pair<std::string, std::string>> b{{"seed", "2"},
                                                     {"track_cum", "4.0"}};
  REQUIRE_THROWS_AS(compare_metrics(a, b), std::invalid_argument);
  b[0].second = "1";
  const auto rows = compare_metrics(a, b);
  bool found = false;
  for (const auto& e : rows) {
    if (e.key == "track_cum") {
      found = true;
      REQUIRE(e.delta == Catch::Approx(-2.0));
      REQUIRE(e.pct == Catch::Approx(-50.0));
    }
  }
  REQUIRE(found);
}

TEST_CASE("identical runs compare to zero deltas") {
  Scenario s = small_odometry_scenario();
  s.duration = 6.0;
  RunOptions opts;
  opts.mode = RunMode::kOdometry;
  namespace fs = std::filesystem;
  const fs::path da = fs::temp_directory_path() / "earol_cmp_a";
  const fs::path db = fs::temp_directory_path() / "earol_cmp_b";
  fs::remove_all(da);
  fs::remove_all(db);
  opts.out_dir = da.string();
  run_scenario(s, opts);
  opts.out_dir = db.string();
  run_scenario(s, opts);
  const auto rows = compare_metrics(read_metrics((da / "metrics.txt").string()),
                                    read_metrics((db / "metrics.txt").string()));
  for (const auto& e : rows) REQUIRE(e.delta == 0.0);
  fs::remove_all(da);
  fs::remove_all(db);
}
