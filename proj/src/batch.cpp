#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "dyntamp/harness.hpp"
#include "dyntamp/util.hpp"
#include "json.hpp"

namespace dyntamp::harness {

using nlohmann::json;

BatchResult run_batch(const std::vector<std::string>& scenario_paths, int repeats,
                      const std::vector<uint64_t>& seeds, int workers) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (static_cast<int>(seeds.size()) < repeats)
    throw std::invalid_argument("need at least `repeats` seeds");

  struct Task {
    size_t scenario_idx;
    uint64_t seed;
    lgp::Mode mode;
  };
  std::vector<Scenario> scenarios;
  scenarios.reserve(scenario_paths.size());
  for (const auto& p : scenario_paths) scenarios.push_back(load_scenario(p));

  std::vector<Task> tasks;
  for (size_t i = 0; i < scenarios.size(); ++i)
    for (int r = 0; r < repeats; ++r)
      for (lgp::Mode mode : {lgp::Mode::kSingle, lgp::Mode::kDynamic})
        tasks.push_back({i, seeds[static_cast<size_t>(r)], mode});

  std::vector<RunRecord> records(tasks.size());
  std::vector<char> failed(tasks.size(), 0);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        records[i] = run_scenario(scenarios[task.scenario_idx], task.mode, task.seed);
      } catch (const std::exception& e) {
        // per-run failures are recorded and the batch continues
        failed[i] = 1;
        records[i].scenario = scenarios[task.scenario_idx].name;
        records[i].mode = task.mode == lgp::Mode::kSingle ? "single" : "dynamic";
        records[i].seed = task.seed;
        log_warn(strf("run %s/%s/seed=%llu failed: %s", records[i].scenario.c_str(),
                      records[i].mode.c_str(),
                      static_cast<unsigned long long>(task.seed), e.what()));
      }
    }
  };
  int n_workers = workers > 0 ? workers
                              : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  BatchResult out;
  out.runs.assign(records.begin(), records.end());
  std::stable_sort(out.runs.begin(), out.runs.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     if (a.scenario != b.scenario) return a.scenario < b.scenario;
                     if (a.seed != b.seed) return a.seed < b.seed;
                     return a.mode < b.mode;  // dynamic < single
                   });

  // path ratio: dynamic path / single path on the same (scenario, seed)
  std::map<std::pair<std::string, uint64_t>, double> single_path;
  for (const auto& r : out.runs)
    if (r.mode == "single" && r.metrics.path_length > 0)
      single_path[{r.scenario, r.seed}] = r.metrics.path_length;
  for (auto& r : out.runs) {
    auto it = single_path.find({r.scenario, r.seed});
    if (it == single_path.end()) continue;
    if (r.mode == "single")
      r.metrics.path_ratio = 1.0;
    else
      r.metrics.path_ratio = r.metrics.path_length / it->second;
  }
  return out;
}

namespace {

// runs.csv prints %.6f; aggregates are defined over exactly those values so
// they can be recomputed from the file bit-for-bit
double round6(double x) { return std::strtod(strf("%.6f", x).c_str(), nullptr); }

struct Stat {
  double mean = 0, stddev = 0;
  int n = 0;
};

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double acc = 0;
  for (double x : xs) acc += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(acc / static_cast<double>(xs.size()));  // population
  return s;
}

}  // namespace

std::string runs_csv(const BatchResult& batch) {
  std::string out =
      "scenario,mode,seed,success,steps,sim_seconds,replan_count,reopt_count,"
      "solved_nlp_count,initial_skeleton_length,path_length,path_ratio,"
      "time_reduction_sim,task_iou,min_clearance,safety_violations,"
      "human_objects,robot_objects\n";
  for (const auto& r : batch.runs) {
    const Metrics& m = r.metrics;
    out += strf("%s,%s,%llu,%d,%d,%.6f,%d,%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%d\n",
                r.scenario.c_str(), r.mode.c_str(),
                static_cast<unsigned long long>(r.seed), m.success ? 1 : 0, m.steps,
                m.sim_seconds, m.replan_count, m.reopt_count, m.solved_nlp_count,
                m.initial_skeleton_length, m.path_length, m.path_ratio,
                m.time_reduction_sim, m.task_iou, m.min_clearance,
                m.safety_violations, m.human_objects, m.robot_objects);
  }
  return out;
}

void emit_report(const BatchResult& batch, const std::string& out_dir) {
  if (batch.runs.empty()) throw std::invalid_argument("emit_report: empty metrics table");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw std::runtime_error("unwritable output directory: " + out_dir);

  write_file(join_path(out_dir, "runs.csv"), runs_csv(batch));

  {  // wall-clock metrics, separated to keep runs.csv byte-reproducible
    std::string csv =
        "scenario,mode,seed,symbolic_plan_time_mean,total_solution_time,"
        "time_reduction_wall\n";
    for (const auto& r : batch.runs)
      csv += strf("%s,%s,%llu,%.6f,%.6f,%.6f\n", r.scenario.c_str(), r.mode.c_str(),
                  static_cast<unsigned long long>(r.seed),
                  r.metrics.symbolic_plan_time_mean, r.metrics.total_solution_time,
                  r.metrics.time_reduction_wall);
    write_file(join_path(out_dir, "timings.csv"), csv);
  }

  {  // one row per run: initial skeleton length vs initial planning time
    std::string csv = "run,scenario,mode,seed,skeleton_length,total_solution_time\n";
    for (size_t i = 0; i < batch.runs.size(); ++i) {
      const auto& r = batch.runs[i];
      csv += strf("%zu,%s,%s,%llu,%d,%.6f\n", i, r.scenario.c_str(), r.mode.c_str(),
                  static_cast<unsigned long long>(r.seed),
                  r.metrics.initial_skeleton_length, r.report.initial_plan_time_s);
    }
    write_file(join_path(out_dir, "time_over_skeleton_length.csv"), csv);
  }

  auto mean_of = [](const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };

  {  // one row per run: mean replan progress vs mean planning time per event
    std::string csv = "run,scenario,mode,seed,mean_task_progress,mean_plan_time\n";
    for (size_t i = 0; i < batch.runs.size(); ++i) {
      const auto& r = batch.runs[i];
      std::vector<double> prog, times;
      for (const auto& tr : r.report.triggers) {
        if (tr.reason != "initial" && tr.reason != "replanned") continue;
        prog.push_back(tr.task_progress);
        times.push_back(tr.symbolic_s + tr.nlp_s);
      }
      csv += strf("%zu,%s,%s,%llu,%.6f,%.6f\n", i, r.scenario.c_str(), r.mode.c_str(),
                  static_cast<unsigned long long>(r.seed), mean_of(prog), mean_of(times));
    }
    write_file(join_path(out_dir, "time_over_task_progress.csv"), csv);
  }

  {  // one row per run: mean/max skeleton length over the run's plan events
    std::string csv = "run,scenario,mode,seed,mean_task_progress,mean_skeleton_length,max_skeleton_length\n";
    for (size_t i = 0; i < batch.runs.size(); ++i) {
      const auto& r = batch.runs[i];
      std::vector<double> prog, lens;
      double mx = 0;
      for (const auto& tr : r.report.triggers) {
        if (tr.skeleton_length <= 0) continue;
        prog.push_back(tr.task_progress);
        lens.push_back(tr.skeleton_length);
        mx = std::max(mx, static_cast<double>(tr.skeleton_length));
      }
      csv += strf("%zu,%s,%s,%llu,%.6f,%.6f,%.0f\n", i, r.scenario.c_str(),
                  r.mode.c_str(), static_cast<unsigned long long>(r.seed),
                  mean_of(prog), mean_of(lens), mx);
    }
    write_file(join_path(out_dir, "skeleton_length_over_progress.csv"), csv);
  }

  {  // per plan event rows, for plotting curves
    std::string csv = "run,scenario,mode,seed,t,reason,skeleton_length,task_progress,symbolic_s,nlp_s,nlp_solves\n";
    for (size_t i = 0; i < batch.runs.size(); ++i) {
      const auto& r = batch.runs[i];
      for (const auto& tr : r.report.triggers)
        csv += strf("%zu,%s,%s,%llu,%d,%s,%d,%.6f,%.6f,%.6f,%d\n", i,
                    r.scenario.c_str(), r.mode.c_str(),
                    static_cast<unsigned long long>(r.seed), tr.t, tr.reason.c_str(),
                    tr.skeleton_length, tr.task_progress, tr.symbolic_s, tr.nlp_s,
                    tr.nlp_solves);
    }
    write_file(join_path(out_dir, "plan_events.csv"), csv);
  }

  // summary.json: mean ± std per metric per mode
  json summary;
  for (const std::string mode : {"single", "dynamic"}) {
    std::vector<double> success, steps, replans, reopts, nlps, paths, ratios,
        red_sim, red_wall, ious, clearances, violations, sym_times, total_times;
    for (const auto& r : batch.runs) {
      if (r.mode != mode) continue;
      const Metrics& m = r.metrics;
      success.push_back(m.success ? 1.0 : 0.0);
      steps.push_back(m.steps);
      replans.push_back(m.replan_count);
      reopts.push_back(m.reopt_count);
      nlps.push_back(m.solved_nlp_count);
      paths.push_back(round6(m.path_length));
      if (m.path_ratio >= 0) ratios.push_back(round6(m.path_ratio));
      if (m.time_reduction_sim >= 0) red_sim.push_back(round6(m.time_reduction_sim));
      if (m.time_reduction_wall >= 0) red_wall.push_back(round6(m.time_reduction_wall));
      if (m.task_iou >= 0) ious.push_back(round6(m.task_iou));
      clearances.push_back(round6(m.min_clearance));
      violations.push_back(m.safety_violations);
      sym_times.push_back(m.symbolic_plan_time_mean);
      total_times.push_back(m.total_solution_time);
    }
    auto put = [&](const char* key, const std::vector<double>& xs) {
      Stat s = stat_of(xs);
      summary[mode][key] = {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
    };
    put("success_rate", success);
    put("steps", steps);
    put("replan_count", replans);
    put("reopt_count", reopts);
    put("solved_nlp_count", nlps);
    put("path_length", paths);
    put("path_ratio", ratios);
    put("time_reduction_sim", red_sim);
    put("time_reduction_wall", red_wall);
    put("task_iou", ious);
    put("min_clearance", clearances);
    put("safety_violations", violations);
    put("symbolic_plan_time", sym_times);
    put("total_solution_time", total_times);
  }
  write_file(join_path(out_dir, "summary.json"), summary.dump(2));
}

}  // namespace dyntamp::harness
