#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyntamp/lgp.hpp"
#include "dyntamp/prediction.hpp"

namespace dyntamp::harness {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HumanSourceSpec {
  std::string mode;        // replay | degraded | hierarchical
  std::string trajectory;  // CSV path (replay, degraded)
  double fraction = 0;     // degraded removal fraction
  std::string model;       // IRL model path (hierarchical)
  // goal targets for hierarchical rollouts: class -> count at the first
  // location (the table) required before the human stops
  std::map<std::string, int> goal_counts;
};

struct Scenario {
  std::string name;
  std::string path;  // scenario file, for error reporting
  pddl::Domain domain;
  std::vector<pddl::GroundedAction> actions;
  sym::State init_declared;
  sym::State goal;
  kin::Workspace workspace;
  HumanSourceSpec human;
  lgp::Mode default_mode = lgp::Mode::kDynamic;
  lgp::InstanceConfig cfg;

  lgp::Instance instance() const;
};

// Loads and fully resolves a scenario: parses domain/problem, grounds the
// action set, constructs the kinematic tree and validates every geometry
// reference against the domain constants.
Scenario load_scenario(const std::string& path);

// Per-run metrics; wall-clock timings live next to the deterministic fields
// but are written to a separate CSV so runs.csv stays byte-reproducible.
struct Metrics {
  bool success = false;
  int steps = 0;
  double sim_seconds = 0;
  int replan_count = 0;
  int reopt_count = 0;
  int solved_nlp_count = 0;
  int initial_skeleton_length = 0;
  double path_length = 0;
  double path_ratio = -1;  // filled by run_batch; single baseline = 1.0
  double time_reduction_sim = -1;   // human-alone steps / collaborative steps
  double time_reduction_wall = -1;  // including planning pauses
  double task_iou = -1;
  double min_clearance = 0;
  int safety_violations = 0;
  int human_objects = 0;
  int robot_objects = 0;
  // wall-clock (timings.csv only)
  double symbolic_plan_time_mean = 0;  // mean over replan events [s]
  double total_solution_time = 0;      // all planning wall time [s]
};

struct RunRecord {
  std::string scenario;
  std::string mode;  // "single" | "dynamic"
  uint64_t seed = 0;
  Metrics metrics;
  lgp::RunReport report;
};

// Executes one scenario in the given mode. The seed drives degradation
// windows and hierarchical rollouts.
RunRecord run_scenario(const Scenario& scn, lgp::Mode mode, uint64_t seed);

struct BatchResult {
  std::vector<RunRecord> runs;  // sorted by (scenario, seed, mode)
};

// Runs every scenario in both modes for each seed, fanning out across
// workers; results are deterministic given the seeds.
BatchResult run_batch(const std::vector<std::string>& scenario_paths,
                      int repeats, const std::vector<uint64_t>& seeds,
                      int workers = 0);

// Writes summary.json, runs.csv, timings.csv, plan_events.csv and the three
// per-run analysis CSVs (time over skeleton length / task progress, skeleton
// length over progress). Throws on an empty table or unwritable directory.
void emit_report(const BatchResult& batch, const std::string& out_dir);

// The deterministic per-run table (also what emit_report writes to runs.csv).
std::string runs_csv(const BatchResult& batch);

// Task IoU of a run: |human ∩ goal-objects| / |human ∪ goal-objects| over the
// objects the human picked and the objects named in the goal.
double task_iou(const std::set<std::string>& human_moved,
                const std::set<std::string>& goal_objects);

std::set<std::string> goal_objects_of(const sym::State& goal);

}  // namespace dyntamp::harness
