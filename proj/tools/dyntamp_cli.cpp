// Command-line front end: single runs, batch experiments, IRL training and
// standalone prediction. Log verbosity via the DYNTAMP_LOG env var.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "dyntamp/harness.hpp"
#include "dyntamp/prediction.hpp"
#include "dyntamp/util.hpp"

namespace fs = std::filesystem;
using namespace dyntamp;

namespace {

int cmd_plan(const std::string& scenario_path, const std::string& mode_str,
             uint64_t seed, const std::string& out_dir) {
  harness::Scenario scn = harness::load_scenario(scenario_path);
  lgp::Mode mode = mode_str == "single" ? lgp::Mode::kSingle : lgp::Mode::kDynamic;
  harness::RunRecord rec = harness::run_scenario(scn, mode, seed);
  fs::create_directories(out_dir);
  write_file(join_path(out_dir, "report.json"), rec.report.to_json());
  write_file(join_path(out_dir, "trajectory.csv"), rec.report.trajectory_csv());
  std::cout << strf("%s %s seed=%llu: %s in %d steps, %d replans, path %.2f m\n",
                    rec.scenario.c_str(), rec.mode.c_str(),
                    static_cast<unsigned long long>(seed),
                    rec.metrics.success ? "success" : "failure", rec.metrics.steps,
                    rec.metrics.replan_count, rec.metrics.path_length);
  return rec.metrics.success ? 0 : 1;
}

int cmd_batch(const std::string& suite_dir, int repeats, const std::string& seeds_file,
              const std::string& out_dir, int workers) {
  std::vector<std::string> scenario_paths;
  for (const auto& entry : fs::directory_iterator(suite_dir))
    if (entry.path().extension() == ".json") scenario_paths.push_back(entry.path());
  std::sort(scenario_paths.begin(), scenario_paths.end());
  if (scenario_paths.empty()) {
    std::cerr << "no scenario files in " << suite_dir << "\n";
    return 2;
  }
  std::vector<uint64_t> seeds;
  if (!seeds_file.empty()) {
    std::istringstream ss(read_file(seeds_file));
    uint64_t s;
    while (ss >> s) seeds.push_back(s);
  } else {
    for (int i = 0; i < repeats; ++i) seeds.push_back(static_cast<uint64_t>(11 * (i + 1)));
  }
  harness::BatchResult batch = harness::run_batch(scenario_paths, repeats, seeds, workers);
  harness::emit_report(batch, out_dir);
  std::cout << "wrote " << batch.runs.size() << " runs to " << out_dir << "\n";
  return 0;
}

int cmd_irl_train(const std::string& mdp_path, const std::string& demos_path,
                  const std::string& out_path) {
  pred::MdpSpec spec = pred::MdpSpec::from_json(read_file(mdp_path));
  pred::Mdp mdp(spec, {});
  std::vector<pred::Episode> demos = pred::parse_demos(read_file(demos_path), mdp);
  pred::IrlModel model = pred::irl_fit(mdp, demos);
  write_file(out_path, model.to_json());
  std::cout << strf("trained on %zu episodes: gap=%.4f after %d iterations (%s)\n",
                    demos.size(), model.gap, model.iterations,
                    model.converged ? "converged" : "not converged");
  return model.converged ? 0 : 1;
}

int cmd_predict(const std::string& model_path, const std::string& scenario_path,
                uint64_t seed, const std::string& out_csv) {
  harness::Scenario scn = harness::load_scenario(scenario_path);
  pred::IrlModel model = pred::IrlModel::from_json(read_file(model_path));
  pred::Mdp mdp(model.spec, {pred::state_from_workspace(scn.workspace, model.spec)});
  const size_t L = model.spec.locations.size();
  auto goal_fn = [&](const pred::HLState& s) {
    for (const auto& [cls, count] : scn.human.goal_counts) {
      for (size_t c = 0; c < model.spec.classes.size(); ++c)
        if (model.spec.classes[c].name == cls && s.counts[c * L + 0] < count)
          return false;
    }
    if (scn.human.goal_counts.empty()) {
      // default goal: everything of every class at the first location
      for (size_t c = 0; c < model.spec.classes.size(); ++c) {
        int total = 0;
        for (size_t l = 0; l < L; ++l) total += s.counts[c * L + l];
        if (s.counts[c * L + 0] < total || s.carry >= 0) return false;
      }
    }
    return true;
  };
  pred::HumanSource src = pred::compose_prediction(model, mdp, scn.workspace, goal_fn, seed);
  pred::save_trajectory_csv(out_csv, src);
  std::cout << strf("wrote %d poses, %zu events to %s\n", src.length(), src.events.size(),
                    out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyntamp: dynamic task-and-motion planning for pick-and-place"};
  app.require_subcommand(1);

  std::string scenario, mode = "dynamic", out, suite, seeds_file, mdp_path, demos_path,
              model_path;
  uint64_t seed = 0;
  int repeats = 1, workers = 0;

  CLI::App* plan = app.add_subcommand("plan", "run one scenario");
  plan->add_option("--scenario", scenario, "scenario JSON")->required();
  plan->add_option("--mode", mode, "single|dynamic")
      ->check(CLI::IsMember({"single", "dynamic"}));
  plan->add_option("--seed", seed, "run seed");
  plan->add_option("--out", out, "output directory")->required();

  CLI::App* batch = app.add_subcommand("batch", "run a scenario suite in both modes");
  batch->add_option("--suite", suite, "directory of scenario JSONs")->required();
  batch->add_option("--repeats", repeats, "repeats per scenario");
  batch->add_option("--seeds", seeds_file, "file with one seed per line");
  batch->add_option("--out", out, "output directory")->required();
  batch->add_option("--workers", workers, "worker threads (0 = hardware)");

  CLI::App* irl = app.add_subcommand("irl-train", "fit the high-level policy");
  irl->add_option("--mdp", mdp_path, "MDP spec JSON")->required();
  irl->add_option("--demos", demos_path, "demonstrations JSON")->required();
  irl->add_option("--out", out, "output model JSON")->required();

  CLI::App* predict = app.add_subcommand("predict", "compose a hierarchical prediction");
  predict->add_option("--model", model_path, "IRL model JSON")->required();
  predict->add_option("--scenario", scenario, "scenario JSON")->required();
  predict->add_option("--seed", seed, "rollout seed");
  predict->add_option("--out", out, "output trajectory CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(scenario, mode, seed, out);
    if (batch->parsed()) return cmd_batch(suite, repeats, seeds_file, out, workers);
    if (irl->parsed()) return cmd_irl_train(mdp_path, demos_path, out);
    if (predict->parsed()) return cmd_predict(model_path, scenario, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
