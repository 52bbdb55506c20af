#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dyntamp/harness.hpp"
#include "dyntamp/util.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include <cmath>
#include <sstream>

using namespace dyntamp;
namespace fs = std::filesystem;

TEST_CASE("load_scenario: seven-object fixture resolves fully") {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_7obj.json");
  CHECK(scn.name == "set_table_7obj");
  CHECK(scn.workspace.objects.size() == 7);
  CHECK(scn.workspace.surfaces.size() == 3);
  CHECK(scn.goal.size() == 7);
  CHECK(scn.actions.size() == 63);
  CHECK(scn.human.mode == "degraded");
  CHECK(scn.human.fraction == doctest::Approx(0.3));
  CHECK(scn.cfg.trigger_period == 10);
  // the kinematic tree has every declared frame
  CHECK(scn.workspace.tree.has("cup_green"));
  CHECK(scn.workspace.tree.has(kin::kGripper));
}

TEST_CASE("load_scenario: minimal one-object fixture loads") {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_1obj.json");
  CHECK(scn.workspace.objects.size() == 1);
  CHECK(scn.goal.size() == 1);
}

TEST_CASE("load_scenario: dangling references are named") {
  // clone the scenario and rename an object to an undeclared constant
  std::string text = read_file(kFixtures + "/scenarios/set_table_1obj.json");
  size_t pos = text.find("cup_green");
  REQUIRE(pos != std::string::npos);
  while (pos != std::string::npos) {
    text.replace(pos, 9, "cup_black");
    pos = text.find("cup_green", pos);
  }
  // goal still references cup_green, geometry declares cup_black
  fs::create_directories("/tmp/dyntamp_fixtures/scenarios");
  write_file("/tmp/dyntamp_fixtures/scenarios/bad.json", text);
  // domain/problem paths are relative to the scenario file
  fs::create_directories("/tmp/dyntamp_fixtures/domains");
  fs::create_directories("/tmp/dyntamp_fixtures/problems");
  fs::create_directories("/tmp/dyntamp_fixtures/trajectories");
  fs::copy_file(kFixtures + "/domains/set_table.pddl",
                "/tmp/dyntamp_fixtures/domains/set_table.pddl",
                fs::copy_options::overwrite_existing);
  fs::copy_file(kFixtures + "/problems/set_table_1obj.pddl",
                "/tmp/dyntamp_fixtures/problems/set_table_1obj.pddl",
                fs::copy_options::overwrite_existing);
  fs::copy_file(kFixtures + "/trajectories/ambient_walk.csv",
                "/tmp/dyntamp_fixtures/trajectories/ambient_walk.csv",
                fs::copy_options::overwrite_existing);
  try {
    harness::load_scenario("/tmp/dyntamp_fixtures/scenarios/bad.json");
    FAIL("expected a schema error");
  } catch (const harness::SchemaError& e) {
    CHECK(std::string(e.what()).find("cup_black") != std::string::npos);
  }
}

TEST_CASE("task_iou agrees with direct set arithmetic") {
  std::set<std::string> human = {"a", "b", "c"};
  std::set<std::string> goal = {"b", "c", "d"};
  CHECK(harness::task_iou(human, goal) == doctest::Approx(2.0 / 4.0));
  CHECK(harness::task_iou({}, goal) == doctest::Approx(0.0));
  CHECK(harness::task_iou({}, {}) == doctest::Approx(1.0));
  CHECK(harness::task_iou(goal, goal) == doctest::Approx(1.0));
}

TEST_CASE("run_batch + emit_report: files, rows, aggregates, determinism") {
  std::vector<std::string> paths = {kFixtures + "/suite/suite_00.json",
                                    kFixtures + "/suite/suite_03.json"};
  std::vector<uint64_t> seeds = {11};
  harness::BatchResult batch = harness::run_batch(paths, 1, seeds, 2);
  REQUIRE(batch.runs.size() == 4);  // 2 scenarios x 2 modes

  // single-mode baseline ratio is exactly 1.0
  int singles = 0;
  for (const auto& r : batch.runs)
    if (r.mode == "single" && r.metrics.path_length > 0) {
      CHECK(r.metrics.path_ratio == doctest::Approx(1.0));
      ++singles;
    }
  CHECK(singles == 2);

  const std::string out = "/tmp/dyntamp_report";
  fs::remove_all(out);
  harness::emit_report(batch, out);
  for (const char* f : {"summary.json", "runs.csv", "timings.csv",
                        "time_over_skeleton_length.csv", "time_over_task_progress.csv",
                        "skeleton_length_over_progress.csv", "plan_events.csv"})
    CHECK(fs::exists(join_path(out, f)));

  // per-run analysis files carry one row per run
  auto line_count = [](const std::string& p) {
    std::ifstream in(p);
    int n = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++n;
    return n - 1;  // minus header
  };
  CHECK(line_count(join_path(out, "runs.csv")) == 4);
  CHECK(line_count(join_path(out, "time_over_skeleton_length.csv")) == 4);
  CHECK(line_count(join_path(out, "time_over_task_progress.csv")) == 4);
  CHECK(line_count(join_path(out, "skeleton_length_over_progress.csv")) == 4);

  // aggregates recompute from runs.csv within 1e-12
  {
    std::ifstream in(join_path(out, "runs.csv"));
    std::string line;
    std::getline(in, line);  // header
    double sum = 0, sumsq = 0;
    int n = 0;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells[1] != "dynamic") continue;
      double v = std::stod(cells[10]);  // path_length
      sum += v;
      sumsq += v * v;
      ++n;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    auto summary = read_file(join_path(out, "summary.json"));
    // parse the reported mean from summary.json
    auto j = nlohmann::json::parse(summary);
    CHECK(std::abs(j["dynamic"]["path_length"]["mean"].get<double>() - mean) < 1e-12);
    CHECK(std::abs(j["dynamic"]["path_length"]["std"].get<double>() -
                   std::sqrt(std::max(0.0, var))) < 1e-9);
  }

  // reproducibility: identical seeds give byte-identical runs.csv
  harness::BatchResult batch2 = harness::run_batch(paths, 1, seeds, 2);
  CHECK(harness::runs_csv(batch) == harness::runs_csv(batch2));
}

TEST_CASE("emit_report: empty table and unwritable directory") {
  harness::BatchResult empty;
  CHECK_THROWS_AS(harness::emit_report(empty, "/tmp/dyntamp_empty"),
                  std::invalid_argument);

  harness::BatchResult one;
  one.runs.emplace_back();
  one.runs[0].scenario = "x";
  one.runs[0].mode = "single";
  CHECK_THROWS_AS(harness::emit_report(one, "/proc/definitely/not/writable"),
                  std::runtime_error);
}

TEST_CASE("run_scenario: seven-object fixture splits the work") {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_7obj.json");
  harness::RunRecord rec = harness::run_scenario(scn, lgp::Mode::kDynamic, 101);
  REQUIRE(rec.metrics.success);
  CHECK(rec.metrics.safety_violations == 0);
  // the scripted human ferries the three plates; the robot must cover the
  // residual objects and both placements union to the goal
  std::set<std::string> placed = rec.report.robot_placed_goal;
  for (const auto& o : rec.report.human_placed_goal) placed.insert(o);
  CHECK(placed == harness::goal_objects_of(scn.goal));
  CHECK(rec.report.robot_placed_goal.size() >= 4);
  CHECK(rec.report.human_placed_goal.size() >= 1);
}

TEST_CASE("run_scenario: hierarchical fixture produces a cooperative run") {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_3obj_pred.json");
  harness::RunRecord rec = harness::run_scenario(scn, lgp::Mode::kDynamic, 1);
  CHECK(rec.metrics.success);
  CHECK(rec.metrics.safety_violations == 0);
  // the union of placements covers the goal
  std::set<std::string> placed = rec.report.robot_placed_goal;
  for (const auto& o : rec.report.human_placed_goal) placed.insert(o);
  CHECK(placed == harness::goal_objects_of(scn.goal));
}
