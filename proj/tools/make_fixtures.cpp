// Regenerates the bundled data fixtures: ground-truth human trajectories,
// the synthetic scenario suite, MDP specs, expert demonstrations and the
// trained policy model. Deterministic; safe to re-run.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dyntamp/harness.hpp"
#include "dyntamp/prediction.hpp"
#include "dyntamp/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dyntamp;
using nlohmann::json;

namespace {

const std::string kRoot = DYNTAMP_FIXTURES_DIR;

// scenario loading validates that trajectory files exist; seed placeholders
// so the generator can bootstrap from the scenario geometry
void seed_placeholder(const std::string& path) {
  std::ifstream probe(path);
  if (probe) return;
  write_file(path, "t,pelvis_x,pelvis_y,hand_x,hand_y,hand_z,carried\n"
                   "0,-2.2,-0.8,-1.95,-0.8,0.9,-1\n");
}

void make_named_trajectories() {
  seed_placeholder(kRoot + "/trajectories/ambient_walk.csv");
  seed_placeholder(kRoot + "/trajectories/set_table_7obj_gt.csv");
  // ambient walking human: no manipulation, wanders far from the work area
  {
    harness::Scenario scn = harness::load_scenario(kRoot + "/scenarios/set_table_7obj.json");
    kin::Workspace ws = scn.workspace;
    pred::ComposeOptions opts;
    pred::HumanSource amb = pred::script_human(ws, {}, {-2.6, 0.8}, opts);
    // extend with a slow return walk so the track is long enough for replay
    pred::HumanPose last = amb.poses.back();
    auto back = pred::generate_lowlevel(last, {-2.2, -0.8, last.hand.z()},
                                        pred::SegmentKind::kPelvis, 60);
    amb.poses.insert(amb.poses.end(), back.begin(), back.end());
    pred::save_trajectory_csv(kRoot + "/trajectories/ambient_walk.csv", amb);
    std::cout << "ambient_walk.csv: " << amb.length() << " poses\n";
  }
  // seven-object ground truth: the human ferries the three plates
  {
    harness::Scenario scn = harness::load_scenario(kRoot + "/scenarios/set_table_7obj.json");
    pred::HumanSource gt = pred::script_human(
        scn.workspace,
        {{"plate_blue", "table"}, {"plate_red", "table"}, {"plate_green", "table"}},
        {-2.2, 1.2});
    pred::save_trajectory_csv(kRoot + "/trajectories/set_table_7obj_gt.csv", gt);
    std::cout << "set_table_7obj_gt.csv: " << gt.length() << " poses, "
              << gt.events.size() << " events\n";
  }
}

void make_irl_fixtures() {
  // 3-object MDP (2 cups, 1 plate) used by the hierarchical fixture
  pred::MdpSpec spec;
  spec.locations = {"table", "big_shelf", "small_shelf"};
  spec.classes = {{"cup", {0, 2, 0}}, {"plate", {0, 0, 1}}};
  spec.human_start = -1;
  spec.carry_start = -1;
  write_file(kRoot + "/mdps/set_table_3obj.json", spec.to_json());

  pred::Mdp mdp(spec, {});
  std::map<std::string, int> goal{{"cup", 2}, {"plate", 1}};
  std::vector<pred::Episode> demos;
  for (uint64_t s = 1; s <= 24; ++s)
    demos.push_back(pred::scripted_expert_episode(mdp, mdp.initial_state(), goal, s));
  write_file(kRoot + "/demos/set_table_3obj_demos.json", pred::demos_to_json(demos, mdp));

  pred::IrlModel model = pred::irl_fit(mdp, demos);
  write_file(kRoot + "/models/set_table_3obj.irl.json", model.to_json());
  std::cout << strf("set_table_3obj model: gap=%.4f iters=%d converged=%d states=%d\n",
                    model.gap, model.iterations, model.converged ? 1 : 0,
                    mdp.n_states());

  // one-person set-table MDP (cup, plate, bowl)
  pred::MdpSpec p1;
  p1.locations = {"table", "big_shelf", "small_shelf"};
  p1.classes = {{"cup", {0, 1, 0}}, {"plate", {0, 0, 1}}, {"bowl", {0, 1, 0}}};
  p1.human_start = -1;
  p1.carry_start = -1;
  write_file(kRoot + "/mdps/set_table_1p.json", p1.to_json());
  pred::Mdp mdp1(p1, {});
  std::map<std::string, int> goal1{{"cup", 1}, {"plate", 1}, {"bowl", 1}};
  std::vector<pred::Episode> demos1;
  for (uint64_t s = 1; s <= 20; ++s)
    demos1.push_back(pred::scripted_expert_episode(mdp1, mdp1.initial_state(), goal1, s));
  write_file(kRoot + "/demos/set_table_1p_demos.json", pred::demos_to_json(demos1, mdp1));
  std::cout << "set_table_1p: " << mdp1.n_states() << " states, " << demos1.size()
            << " demos\n";
}

// The 20-scenario synthetic suite: 2-4 objects on two shelves, a scripted
// human completing every goal object, and in six scenarios an adversarial
// tail that moves one placed object back to a shelf near the end.
void make_suite() {
  const std::string suite = kRoot + "/suite";
  const std::vector<std::string> cups = {"cup_red", "cup_green", "cup_blue", "cup_pink"};
  const std::vector<std::string> plates = {"plate_pink", "plate_red", "plate_green",
                                           "plate_blue"};

  for (int i = 0; i < 20; ++i) {
    Rng rng(1000 + static_cast<uint64_t>(i));
    const int n_obj = 2 + i % 3;  // 2, 3, 4
    const bool adversarial = i % 3 == 1 && i < 18;  // six scenarios

    const double tx = 2.0 + rng.uniform(-0.2, 0.3);
    const double ty = rng.uniform(-0.3, 0.3);
    const double bsx = -0.8 + rng.uniform(-0.2, 0.2);
    const double bsy = 1.6 + rng.uniform(-0.2, 0.2);
    const double ssx = -0.8 + rng.uniform(-0.2, 0.2);
    const double ssy = -1.6 + rng.uniform(-0.2, 0.2);

    int n_cups = 1 + static_cast<int>(rng.uniform_int(0, std::min(2, n_obj - 1)));
    n_cups = std::min(n_cups, n_obj);
    int n_plates = n_obj - n_cups;

    json objects = json::array();
    std::vector<std::string> names;
    for (int c = 0; c < n_cups; ++c) {
      double off = -0.3 + 0.22 * c + rng.uniform(-0.03, 0.03);
      objects.push_back({{"name", cups[static_cast<size_t>(c)]},
                         {"class", "cup"},
                         {"surface", "big_shelf"},
                         {"offset", {off, rng.uniform(-0.06, 0.06)}}});
      names.push_back(cups[static_cast<size_t>(c)]);
    }
    for (int c = 0; c < n_plates; ++c) {
      double off = -0.22 + 0.2 * c + rng.uniform(-0.03, 0.03);
      objects.push_back({{"name", plates[static_cast<size_t>(c)]},
                         {"class", "plate"},
                         {"surface", "small_shelf"},
                         {"offset", {off, rng.uniform(-0.05, 0.05)}}});
      names.push_back(plates[static_cast<size_t>(c)]);
    }

    // problem file
    std::string init = "    (agent-free)\n    (agent-avoid-human)\n";
    std::string goal;
    for (int c = 0; c < n_cups; ++c) {
      init += "    (on " + cups[static_cast<size_t>(c)] + " big_shelf)\n";
      goal += "    (on " + cups[static_cast<size_t>(c)] + " table)\n";
    }
    for (int c = 0; c < n_plates; ++c) {
      init += "    (on " + plates[static_cast<size_t>(c)] + " small_shelf)\n";
      goal += "    (on " + plates[static_cast<size_t>(c)] + " table)\n";
    }
    std::string problem_name = strf("suite_%02d", i);
    write_file(strf("%s/%s.pddl", suite.c_str(), problem_name.c_str()),
               "(define (problem " + problem_name + ")\n  (:domain set_table)\n  (:init\n" +
                   init + "  )\n  (:goal (and\n" + goal + "  ))\n)\n");

    json scn;
    scn["schema_version"] = 1;
    scn["name"] = problem_name;
    scn["domain"] = "../domains/set_table.pddl";
    scn["problem"] = problem_name + ".pddl";
    scn["geometry"] = {
        {"surfaces",
         {{{"name", "table"}, {"center", {tx, ty}}, {"half_extents", {0.6, 0.4}},
           {"z_top", 0.72}, {"at_radius", 1.0}, {"stand_offset", 0.5}},
          {{"name", "big_shelf"}, {"center", {bsx, bsy}}, {"half_extents", {0.5, 0.18}},
           {"z_top", 1.0}, {"at_radius", 0.8}, {"stand_offset", 0.5}},
          {{"name", "small_shelf"}, {"center", {ssx, ssy}}, {"half_extents", {0.4, 0.18}},
           {"z_top", 1.0}, {"at_radius", 0.8}, {"stand_offset", 0.5}}}},
        {"objects", objects},
        {"robot", {{"start", {0.5 + rng.uniform(-0.3, 0.3), -0.6 + rng.uniform(-0.3, 0.3), 0.0}}}},
        {"human", {{"start", {-2.2 + rng.uniform(-0.2, 0.2), -0.8 + rng.uniform(-0.4, 0.4)}},
                   {"hand_offset", {0.25, 0.0, 0.9}}}}};
    scn["human_source"] = {{"mode", "degraded"},
                           {"trajectory", problem_name + "_gt.csv"},
                           {"fraction", 0.3}};
    scn["mode"] = "dynamic";
    scn["trigger_period"] = 10;
    scn["timeout_steps"] = 0;
    write_file(strf("%s/%s.json", suite.c_str(), problem_name.c_str()), scn.dump(2));

    // scripted ground truth. The human handles a seeded subset of the goal
    // objects (the task overlap the planner must discover); the robot has to
    // cover the rest. Two scenarios use a full-coverage human, six append an
    // adversarial tail that takes a placed object back to its home shelf.
    seed_placeholder(strf("%s/%s_gt.csv", suite.c_str(), problem_name.c_str()));
    harness::Scenario loaded =
        harness::load_scenario(strf("%s/%s.json", suite.c_str(), problem_name.c_str()));
    std::vector<std::string> order = names;
    rng.shuffle(order);
    const bool full_coverage = i == 6 || i == 18;
    size_t subset = full_coverage ? order.size() : (order.size() + 1) / 2;
    std::vector<pred::HumanTask> tasks;
    if (adversarial) {
      // the human places its first object, immediately carries it back to
      // its home shelf and leaves it there, then finishes the subset; some
      // agent has to re-fetch it
      const std::string& victim = order.front();
      std::string home = victim.rfind("cup", 0) == 0 ? "big_shelf" : "small_shelf";
      tasks.push_back({victim, "table"});
      tasks.push_back({victim, home});
      for (size_t k = 1; k < subset; ++k) tasks.push_back({order[k], "table"});
    } else {
      for (size_t k = 0; k < subset; ++k) tasks.push_back({order[k], "table"});
    }
    pred::HumanSource gt =
        pred::script_human(loaded.workspace, tasks, {-2.4, 1.2});
    pred::save_trajectory_csv(strf("%s/%s_gt.csv", suite.c_str(), problem_name.c_str()), gt);
    std::cout << strf("%s: %d objects, human does %zu%s, gt %d poses\n",
                      problem_name.c_str(), n_obj, subset,
                      adversarial ? " (adversarial tail)" : "", gt.length());
  }
}

}  // namespace

int main() {
  fs::create_directories(kRoot + "/trajectories");
  fs::create_directories(kRoot + "/suite");
  fs::create_directories(kRoot + "/mdps");
  fs::create_directories(kRoot + "/demos");
  fs::create_directories(kRoot + "/models");
  try {
    make_named_trajectories();
    make_irl_fixtures();
    make_suite();
  } catch (const std::exception& e) {
    std::cerr << "fixture generation failed: " << e.what() << "\n";
    return 1;
  }
  std::cout << "fixtures written under " << kRoot << "\n";
  return 0;
}
