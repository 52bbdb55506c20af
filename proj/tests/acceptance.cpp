// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "dyntamp/harness.hpp"
#include "dyntamp/lgp.hpp"
#include "dyntamp/prediction.hpp"
#include "dyntamp/ranking.hpp"
#include "dyntamp/trajopt.hpp"
#include "dyntamp/util.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_world.hpp"

using namespace dyntamp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " [" << criterion << "] " << what << " ("
            << detail << ")\n"
            << std::flush;
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::vector<std::string>> skeleton_displays(
    const std::vector<sym::Skeleton>& sks) {
  std::vector<std::vector<std::string>> out;
  for (const auto& sk : sks) {
    std::vector<std::string> row;
    for (const auto* a : sk.actions) row.push_back(a->display());
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// 1. Symbolic oracle equivalence
// ---------------------------------------------------------------------------
void criterion_1() {
  auto t0 = Clock::now();
  pddl::Domain domain =
      pddl::parse_domain(read_file(kFixtures + "/domains/set_table.pddl"));
  auto actions = pddl::ground_actions(domain);
  Rng rng(20260809);
  int mismatches = 0;
  int reachable = 0;
  for (int i = 0; i < 50; ++i) {
    oracles::RandomInstance inst = oracles::random_instance(domain, rng, 4);
    auto oracle = oracles::bfs_tie_set(inst.s0, inst.goal, actions,
                                       4 * static_cast<int>(inst.goal.size()) + 2);
    sym::SearchResult res = sym::search_skeletons(inst.s0, inst.goal, actions);
    if (res.status == sym::SearchStatus::kFound) {
      ++reachable;
      if (skeleton_displays(res.skeletons) != oracle) ++mismatches;
    } else if (!oracle.empty()) {
      ++mismatches;
    }
  }
  double elapsed = seconds_since(t0);
  report(1, mismatches == 0 && elapsed < 10.0,
         "search tie sets equal brute-force BFS on 50 randomized instances",
         strf("%d mismatches, %d reachable, %.2f s", mismatches, reachable, elapsed));
}

// ---------------------------------------------------------------------------
// 2. Symbolic plan time on the seven-object fixture
// ---------------------------------------------------------------------------
void criterion_2() {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_7obj.json");
  harness::RunRecord rec = harness::run_scenario(scn, lgp::Mode::kDynamic, 101);
  // mean symbolic (search + ranking) time per planning event
  std::vector<double> times = rec.report.replan_symbolic_times;
  times.push_back(rec.report.triggers.front().symbolic_s);  // initial plan
  double sum = 0;
  for (double v : times) sum += v;
  double mean = times.empty() ? 0.0 : sum / static_cast<double>(times.size());
  report(2, !times.empty() && mean <= 0.5,
         "seven-object fixture symbolic search+ranking time per replan",
         strf("mean %.4f s over %zu events, run %s", mean, times.size(),
              rec.metrics.success ? "succeeded" : "failed"));
}

// ---------------------------------------------------------------------------
// 3. NLP correctness: Jacobians, certificates, collinearity
// ---------------------------------------------------------------------------
void criterion_3() {
  Rng rng(777);
  double worst_rel = 0;
  int dishonest = 0;
  int converged_count = 0;

  for (int trial = 0; trial < 100; ++trial) {
    auto w = testworld::make_world(
        {{"cup_green", "big_shelf", rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1)}});
    w.ws.set_robot_pose(
        Pose{rng.uniform(-0.5, 1.0), rng.uniform(-1, 1), 0, rng.uniform(-1, 1)});
    if (rng.uniform01() < 0.5)
      w.ws.gripper_offset = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    sym::Skeleton sk;
    sk.actions = {&w.action("move(big_shelf)"), &w.action("pick(cup_green,big_shelf)"),
                  &w.action("move(table)"), &w.action("place(cup_green,table)")};
    sk.phase_durations = {5, 3, 5, 3};
    opt::SolverConfig cfg;
    std::vector<Eigen::Vector2d> human;
    int human_len = static_cast<int>(rng.uniform_int(0, 20));
    for (int i = 0; i < human_len; ++i)
      human.push_back({rng.uniform(-2, 3), rng.uniform(-2, 2)});
    opt::NlpProblem p = opt::build_nlp(sk, w.ws, human, 0, cfg);
    opt::Waypoints X = opt::interpolate_keyframes(p);
    for (int t = 0; t < X.rows(); ++t)
      for (int k = 0; k < 3; ++k) X(t, k) += rng.uniform(-0.05, 0.05);

    // central finite differences on every variable
    const double eps = 1e-6;
    opt::Evaluation ev = opt::evaluate(p, X);
    Eigen::MatrixXd Jh = Eigen::MatrixXd(ev.Jh);
    Eigen::MatrixXd Jg = Eigen::MatrixXd(ev.Jg);
    auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
    };
    for (int t = 0; t < X.rows(); ++t) {
      for (int k = 0; k < 3; ++k) {
        opt::Waypoints Xp = X, Xm = X;
        Xp(t, k) += eps;
        Xm(t, k) -= eps;
        opt::Evaluation evp = opt::evaluate(p, Xp);
        opt::Evaluation evm = opt::evaluate(p, Xm);
        int col = 3 * t + k;
        for (int r = 0; r < ev.h.size(); ++r)
          worst_rel = std::max(worst_rel,
                               rel(Jh(r, col), (evp.h[r] - evm.h[r]) / (2 * eps)));
        for (int r = 0; r < ev.g.size(); ++r)
          worst_rel = std::max(worst_rel,
                               rel(Jg(r, col), (evp.g[r] - evm.g[r]) / (2 * eps)));
        worst_rel = std::max(
            worst_rel, rel(ev.grad[col], (evp.objective - evm.objective) / (2 * eps)));
      }
    }

    // solver certificates recomputed from the returned waypoints, at
    // realistic phase durations (the short ones above keep FD affordable)
    sym::Skeleton sk2 = sk;
    sk2.phase_durations = {25, 5, 25, 5};
    opt::NlpProblem p2 = opt::build_nlp(sk2, w.ws, human, 0, cfg);
    opt::Solution sol = opt::solve(p2, cfg);
    if (sol.converged) {
      ++converged_count;
      opt::Evaluation fin = opt::evaluate(p2, sol.waypoints);
      double maxeq = fin.h.size() ? fin.h.cwiseAbs().maxCoeff() : 0.0;
      double viol = fin.viol.size() ? fin.viol.maxCoeff() : 0.0;
      if (maxeq >= 1e-3 || viol > 0.0) ++dishonest;
    }
  }

  // collinearity of the obstacle-free single phase
  double max_dev = 0;
  bool collinear_ok = false;
  {
    auto w = testworld::make_world({});
    w.ws.set_robot_pose(Pose{0.0, -0.6, 0, 0});
    sym::Skeleton sk;
    sk.actions = {&w.action("move(table)")};
    sk.phase_durations = {30};
    opt::SolverConfig cfg;
    opt::NlpProblem p = opt::build_nlp(sk, w.ws, {}, 0, cfg);
    opt::Solution sol = opt::solve(p, cfg);
    if (sol.converged) {
      Eigen::Vector2d a = p.x_start.head<2>();
      Eigen::Vector2d b = sol.waypoints.bottomRows(1).row(0).head<2>();
      Eigen::Vector2d dir = (b - a).normalized();
      for (int t = 0; t < sol.waypoints.rows(); ++t) {
        Eigen::Vector2d q = sol.waypoints.row(t).head<2>();
        Eigen::Vector2d d = q - a;
        max_dev = std::max(max_dev, std::abs(d.x() * dir.y() - d.y() * dir.x()));
      }
      collinear_ok = max_dev < 1e-6;
    }
  }

  report(3, worst_rel <= 1e-4 && dishonest == 0 && collinear_ok && converged_count > 50,
         "NLP Jacobians vs finite differences, certificates, collinearity",
         strf("max rel err %.2e, %d/100 converged, %d dishonest, deviation %.2e m",
              worst_rel, converged_count, dishonest, max_dev));
}

// ---------------------------------------------------------------------------
// 4. NLP scale: a 16-action skeleton with ~450 waypoints
// ---------------------------------------------------------------------------
void criterion_4() {
  auto w = testworld::make_world({{"cup_green", "big_shelf", -0.35, 0.05},
                                  {"cup_red", "big_shelf", -0.12, -0.06},
                                  {"cup_blue", "big_shelf", 0.12, 0.06},
                                  {"plate_blue", "small_shelf", -0.25, 0.04}});
  sym::Skeleton sk;
  auto push = [&](const std::string& d, int steps) {
    sk.actions.push_back(&w.action(d));
    sk.phase_durations.push_back(steps);
  };
  // 16 actions, 450 steps in total (moves 51, picks/places 5 and 6)
  const char* objects[4] = {"cup_green", "cup_red", "cup_blue", "plate_blue"};
  const char* shelves[4] = {"big_shelf", "big_shelf", "big_shelf", "small_shelf"};
  for (int i = 0; i < 4; ++i) {
    push(strf("move(%s)", shelves[i]), 51);
    push(strf("pick(%s,%s)", objects[i], shelves[i]), i < 3 ? 5 : 6);
    push("move(table)", 51);
    push(strf("place(%s,table)", objects[i]), i < 3 ? 5 : 6);
  }
  int total = 0;
  for (int d : sk.phase_durations) total += d;

  opt::SolverConfig cfg;
  std::vector<Eigen::Vector2d> human(500, Eigen::Vector2d(-2.2, -0.8));
  opt::NlpProblem p = opt::build_nlp(sk, w.ws, human, 0, cfg);
  auto t0 = Clock::now();
  opt::Solution sol = opt::solve(p, cfg);
  double elapsed = seconds_since(t0);
  report(4, sol.converged && elapsed < 60.0 && total == 450,
         "length-16 skeleton (450 waypoints) converges within 60 s",
         strf("%.2f s, converged=%d, maxeq=%.1e, viol=%.1e", elapsed,
              sol.converged ? 1 : 0, sol.max_eq_residual, sol.max_ineq_violation));
}

// ---------------------------------------------------------------------------
// 5 + 6 + 10. Suite trends, safety, reproducibility
// ---------------------------------------------------------------------------
void criteria_5_6_10(int* suite_violations) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(kFixtures + "/suite"))
    if (entry.path().extension() == ".json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<uint64_t> seeds = {101, 102, 103, 104, 105};

  harness::BatchResult batch = harness::run_batch(paths, 5, seeds, 2);

  int single_n = 0, single_ok = 0, dyn_n = 0, dyn_ok = 0;
  double ratio_sum = 0;
  int ratio_n = 0;
  double replan_sum = 0;
  int violations = 0;
  for (const auto& r : batch.runs) {
    violations += r.metrics.safety_violations;
    if (r.mode == "single") {
      ++single_n;
      single_ok += r.metrics.success ? 1 : 0;
    } else {
      ++dyn_n;
      dyn_ok += r.metrics.success ? 1 : 0;
      replan_sum += r.metrics.replan_count;
      if (r.metrics.path_ratio >= 0) {
        ratio_sum += r.metrics.path_ratio;
        ++ratio_n;
      }
    }
  }
  double single_rate = static_cast<double>(single_ok) / single_n;
  double dyn_rate = static_cast<double>(dyn_ok) / dyn_n;
  double ratio_mean = ratio_sum / std::max(1, ratio_n);
  double replan_mean = replan_sum / std::max(1, dyn_n);

  bool pass5 = dyn_rate >= single_rate && ratio_mean < 0.9 && replan_mean >= 1.0 &&
               replan_mean <= 10.0;
  report(5, pass5, "dynamic dominance over the 20-scenario degraded suite",
         strf("success %.3f vs %.3f, path ratio %.3f (n=%d), replans %.2f", dyn_rate,
              single_rate, ratio_mean, ratio_n, replan_mean));
  *suite_violations = violations;

  // 10: a second batch execution with identical seeds must be byte-identical
  harness::BatchResult batch2 = harness::run_batch(paths, 5, seeds, 2);
  std::string csv1 = harness::runs_csv(batch);
  std::string csv2 = harness::runs_csv(batch2);
  report(10, csv1 == csv2, "two batch executions produce byte-identical runs.csv",
         strf("%zu bytes vs %zu bytes, equal=%d", csv1.size(), csv2.size(),
              csv1 == csv2 ? 1 : 0));
}

// ---------------------------------------------------------------------------
// 7. Differential consistency of switches vs symbolic exec
// ---------------------------------------------------------------------------
void criterion_7() {
  Rng rng(4242);
  int applications = 0;
  int mismatches = 0;
  while (applications < 200) {
    auto w = testworld::make_world({{"cup_green", "big_shelf", -0.25, 0.05},
                                    {"cup_red", "big_shelf", 0.25, -0.05},
                                    {"cup_blue", "big_shelf", 0.0, 0.0},
                                    {"plate_blue", "small_shelf", -0.1, 0.04},
                                    {"plate_red", "small_shelf", 0.2, -0.04}});
    if (rng.uniform01() < 0.3) {
      int oi = static_cast<int>(rng.uniform_int(0, 4));
      w.ws.tree.reparent(w.ws.objects[static_cast<size_t>(oi)].name, kin::kHumanHand,
                         {kin::JointKind::kFree6d, true});
    }
    bool do_pick = rng.uniform01() < 0.5;
    std::vector<std::string> on_surface;
    for (const auto& o : w.ws.objects)
      if (w.ws.find_surface(w.ws.attachment_of(o.name))) on_surface.push_back(o.name);
    if (on_surface.empty()) continue;
    const std::string obj = on_surface[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(on_surface.size()) - 1))];
    if (do_pick) {
      const std::string loc = w.ws.attachment_of(obj);
      Eigen::Vector2d oxy = w.ws.object_xy(obj);
      w.ws.set_robot_pose(Pose{oxy.x() + rng.uniform(-0.03, 0.03),
                               oxy.y() + rng.uniform(-0.03, 0.03), 0, 0});
      sym::State before = kin::deduce_state(w.ws, w.domain);
      const auto& action = w.action("pick(" + obj + "," + loc + ")");
      if (!sym::applicable(before, action)) continue;
      kin::apply_switch(w.ws, action);
      if (kin::deduce_state(w.ws, w.domain) != sym::exec(before, action)) ++mismatches;
    } else {
      w.ws.tree.reparent(obj, kin::kGripper, {kin::JointKind::kFree6d, true});
      const kin::Surface& target =
          w.ws.surfaces[static_cast<size_t>(rng.uniform_int(0, 2))];
      Eigen::Vector2d spot = target.rect.clamp(
          {rng.uniform(target.rect.lo().x(), target.rect.hi().x()),
           rng.uniform(target.rect.lo().y(), target.rect.hi().y())},
          0.02);
      w.ws.set_robot_pose(Pose{spot.x(), spot.y(), 0, 0});
      sym::State before = kin::deduce_state(w.ws, w.domain);
      const auto& action = w.action("place(" + obj + "," + target.name + ")");
      if (!sym::applicable(before, action)) continue;
      kin::apply_switch(w.ws, action);
      if (kin::deduce_state(w.ws, w.domain) != sym::exec(before, action)) ++mismatches;
    }
    ++applications;
  }
  report(7, mismatches == 0,
         "deduce_state after apply_switch equals symbolic exec (200 applications)",
         strf("%d mismatches", mismatches));
}

// ---------------------------------------------------------------------------
// 8. IRL fixtures: feature gaps, rollout success, symmetry
// ---------------------------------------------------------------------------
void criterion_8() {
  bool gaps_ok = true;
  std::string gap_detail;

  // tiny 2-location MDP
  {
    pred::MdpSpec spec;
    spec.locations = {"table", "big_shelf"};
    spec.classes = {{"cup", {0, 1}}};
    spec.human_start = -1;
    pred::Mdp mdp(spec, {});
    pred::Episode demo =
        pred::scripted_expert_episode(mdp, mdp.initial_state(), {{"cup", 1}}, 3);
    pred::IrlModel m = pred::irl_fit(mdp, {demo});
    gaps_ok &= m.gap < 1e-2;
    gap_detail += strf("tiny=%.4f ", m.gap);
  }

  // symmetric two-goal MDP: gap and first-action symmetry
  double sym_diff = 1;
  {
    pred::MdpSpec spec;
    spec.locations = {"table", "big_shelf", "small_shelf"};
    spec.classes = {{"cup", {0, 1, 1}}};
    spec.human_start = -1;
    pred::Mdp mdp(spec, {});
    auto idx = [&](pred::HLAction::Kind kind, int arg) {
      for (int a = 0; a < mdp.n_actions(); ++a)
        if (mdp.action(a).kind == kind &&
            (kind == pred::HLAction::Kind::kPlace || mdp.action(a).arg == arg))
          return a;
      return -1;
    };
    std::vector<pred::Episode> demos;
    for (int i = 0; i < 4; ++i)
      for (int shelf : {1, 2}) {
        pred::Episode ep;
        ep.start = mdp.initial_state();
        ep.actions = {idx(pred::HLAction::Kind::kGoTo, shelf),
                      idx(pred::HLAction::Kind::kPickUp, 0),
                      idx(pred::HLAction::Kind::kGoTo, 0),
                      idx(pred::HLAction::Kind::kPlace, 0)};
        demos.push_back(ep);
      }
    pred::IrlModel m = pred::irl_fit(mdp, demos);
    gaps_ok &= m.gap < 1e-2;
    gap_detail += strf("sym=%.4f ", m.gap);
    int s0 = mdp.state_index(mdp.initial_state());
    double p1 = 0, p2 = 0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (mdp.action(a).kind != pred::HLAction::Kind::kGoTo) continue;
      if (mdp.action(a).arg == 1) p1 = m.policy(s0, a);
      if (mdp.action(a).arg == 2) p2 = m.policy(s0, a);
    }
    sym_diff = std::abs(p1 - p2);
  }

  // four-object set-table MDP
  {
    pred::MdpSpec spec;
    spec.locations = {"table", "big_shelf", "small_shelf"};
    spec.classes = {{"cup", {0, 2, 0}}, {"plate", {0, 0, 2}}};
    spec.human_start = -1;
    pred::Mdp mdp(spec, {});
    std::map<std::string, int> goal{{"cup", 2}, {"plate", 2}};
    std::vector<pred::Episode> demos;
    for (uint64_t s = 1; s <= 20; ++s)
      demos.push_back(pred::scripted_expert_episode(mdp, mdp.initial_state(), goal, s));
    pred::IrlModel m = pred::irl_fit(mdp, demos);
    gaps_ok &= m.gap < 1e-2;
    gap_detail += strf("4obj=%.4f ", m.gap);
  }

  // one-person set-table MDP: rollout goal-reaching over 100 seeds
  double reach_rate = 0;
  {
    pred::MdpSpec spec = pred::MdpSpec::from_json(
        read_file(kFixtures + "/mdps/set_table_1p.json"));
    pred::Mdp mdp(spec, {});
    std::map<std::string, int> goal{{"cup", 1}, {"plate", 1}, {"bowl", 1}};
    std::vector<pred::Episode> demos;
    for (uint64_t s = 1; s <= 20; ++s)
      demos.push_back(pred::scripted_expert_episode(mdp, mdp.initial_state(), goal, s));
    pred::IrlModel m = pred::irl_fit(mdp, demos);
    gaps_ok &= m.gap < 1e-2;
    gap_detail += strf("1p=%.4f", m.gap);
    const size_t L = spec.locations.size();
    auto goal_fn = [&](const pred::HLState& s) {
      for (size_t c = 0; c < spec.classes.size(); ++c)
        if (s.counts[c * L] < 1) return false;
      return true;
    };
    int reached = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
      pred::Rollout roll =
          pred::rollout_policy(m, mdp, mdp.initial_state(), goal_fn, seed, 100);
      reached += roll.reached_goal ? 1 : 0;
    }
    reach_rate = reached / 100.0;
  }

  report(8, gaps_ok && reach_rate >= 0.8 && sym_diff < 0.05,
         "IRL feature gaps, rollout goal rate, symmetric first actions",
         strf("gaps[%s], reach %.2f, symmetry diff %.3f", gap_detail.c_str(),
              reach_rate, sym_diff));
}

// ---------------------------------------------------------------------------
// 9. Hierarchical end-to-end on the three-object fixture
// ---------------------------------------------------------------------------
void criterion_9(int* violations_out) {
  harness::Scenario scn =
      harness::load_scenario(kFixtures + "/scenarios/set_table_3obj_pred.json");
  int successes = 0;
  int union_mismatches = 0;
  int violations = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    harness::RunRecord rec = harness::run_scenario(scn, lgp::Mode::kDynamic, seed);
    violations += rec.metrics.safety_violations;
    if (!rec.metrics.success) continue;
    ++successes;
    std::set<std::string> placed = rec.report.robot_placed_goal;
    for (const auto& o : rec.report.human_placed_goal) placed.insert(o);
    if (placed != harness::goal_objects_of(scn.goal)) ++union_mismatches;
  }
  report(9, successes >= 4 && union_mismatches == 0,
         "hierarchical prediction end-to-end on the three-object fixture",
         strf("%d/5 successes, %d union mismatches", successes, union_mismatches));
  *violations_out = violations;
}

}  // namespace

int main() {
  auto t0 = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  int suite_violations = 0, pred_violations = 0;
  criteria_5_6_10(&suite_violations);
  criterion_7();
  criterion_8();
  criterion_9(&pred_violations);

  // 6: zero clearance violations across every executed step of every run
  int total_violations = suite_violations + pred_violations;
  report(6, total_violations == 0,
         "robot-human clearance >= r_safe - 1e-3 on every executed step",
         strf("%d violating steps across all suite and fixture runs", total_violations));

  std::cout << (g_failures == 0 ? "ACCEPTANCE: all criteria passed"
                                : strf("ACCEPTANCE: %d criteria FAILED", g_failures))
            << strf(" (%.1f s total)\n", seconds_since(t0));
  return g_failures;
}
