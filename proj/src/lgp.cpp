#include "dyntamp/lgp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"

namespace dyntamp::lgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Eigen::Vector2d> prediction_suffix(const std::vector<Eigen::Vector2d>& full,
                                               int t) {
  if (full.empty()) return {};
  int start = std::min<int>(t, static_cast<int>(full.size()) - 1);
  return std::vector<Eigen::Vector2d>(full.begin() + start, full.end());
}

}  // namespace

PlanResult plan_single(const Instance& inst, const kin::Workspace& current,
                       const std::vector<Eigen::Vector2d>& prediction, int now) {
  PlanResult res;
  sym::State s0 = kin::deduce_state(current, inst.domain);
  if (sym::satisfies(s0, inst.goal)) {
    res.ok = true;
    res.skeleton.origin_time = now;
    res.solution.converged = true;
    res.solution.waypoints.resize(0, 3);
    return res;
  }

  auto t0 = Clock::now();
  sym::SearchOptions sopts;
  sopts.depth_bound = inst.cfg.depth_bound;
  sopts.duration_of = [&](const pddl::GroundedAction& a) { return inst.cfg.durations.of(a); };
  sym::SearchResult found = sym::search_skeletons(s0, inst.goal, inst.actions, sopts);
  res.stats.search_s = seconds_since(t0);

  if (found.status != sym::SearchStatus::kFound) {
    res.failure = "no-skeleton-found";
    return res;
  }
  res.stats.ties = static_cast<int>(found.skeletons.size());

  auto t1 = Clock::now();
  std::vector<sym::Skeleton> ranked =
      sym::rank_skeletons(std::move(found.skeletons), current, inst.cfg.solver);
  res.stats.rank_s = seconds_since(t1);

  auto t2 = Clock::now();
  for (auto& sk : ranked) {
    sk.origin_time = now;
    opt::NlpProblem problem = opt::build_nlp(sk, current, prediction, 0, inst.cfg.solver);
    opt::Solution sol = opt::solve(problem, inst.cfg.solver);
    ++res.stats.nlp_solves;
    if (sol.converged) {
      res.ok = true;
      res.skeleton = sk;
      res.solution = std::move(sol);
      res.stats.nlp_s = seconds_since(t2);
      return res;
    }
  }
  res.stats.nlp_s = seconds_since(t2);
  res.failure = "all-nlps-infeasible";
  return res;
}

int check_feasibility(const sym::Skeleton& remainder, int tau,
                      const kin::Workspace& current, const sym::State& s_t,
                      const Instance& inst,
                      const std::vector<Eigen::Vector2d>& prediction,
                      const opt::Waypoints* warm, opt::Solution* reused,
                      std::string* why) {
  if (remainder.empty()) {
    if (why) *why = "symbolic-invalid";
    return 0;
  }
  // (a) the remainder applies from s_t and ends inside the goal set
  sym::State s = s_t;
  for (const auto* a : remainder.actions) {
    if (!sym::applicable(s, *a)) {
      if (why) *why = "symbolic-invalid";
      return 0;
    }
    s = sym::exec(s, *a);
  }
  if (!sym::satisfies(s, inst.goal)) {
    if (why) *why = "symbolic-invalid";
    return 0;
  }
  // (b) the truncated NLP admits a converged solution
  opt::NlpProblem problem = opt::build_nlp(remainder, current, prediction, tau, inst.cfg.solver);
  opt::Solution sol = opt::solve(problem, inst.cfg.solver, warm);
  if (!sol.converged) {
    if (why) *why = "geometric-infeasible";
    return 0;
  }
  if (reused) *reused = std::move(sol);
  return 1;
}

namespace {

// Executing skeleton bookkeeping: current action index, steps into the
// current phase and the cursor into the active solution's waypoints.
struct Active {
  sym::Skeleton skeleton;
  opt::Solution solution;
  size_t k = 0;       // current action index
  int tau = 0;        // steps executed inside phase k
  int cursor = 0;     // next waypoint row to execute
};

struct HumanReplayer {
  const pred::HumanSource* src;
  size_t next_event = 0;

  const pred::HumanPose& pose_at(int t) const {
    int last = src->length() - 1;
    return src->poses[static_cast<size_t>(std::min(t, last))];
  }
};

}  // namespace

int human_alone_completion_step(const Instance& inst, const pred::HumanSource& actual) {
  kin::Workspace ws = inst.workspace;
  HumanReplayer human{&actual, 0};
  ws.set_human(human.pose_at(0).pelvis, human.pose_at(0).hand);
  if (sym::satisfies(kin::deduce_state(ws, inst.domain), inst.goal)) return 0;
  for (int t = 1; t < actual.length(); ++t) {
    const pred::HumanPose& hp = human.pose_at(t);
    ws.set_human(hp.pelvis, hp.hand);
    while (human.next_event < actual.events.size() &&
           actual.events[human.next_event].t <= t) {
      const pred::HumanEvent& e = actual.events[human.next_event++];
      if (e.pick) {
        if (ws.find_surface(ws.attachment_of(e.object)))
          ws.tree.reparent(e.object, kin::kHumanHand, {kin::JointKind::kFree6d, true});
      } else if (ws.attachment_of(e.object) == kin::kHumanHand) {
        // drop onto the surface containing (or nearest to) the hand
        Eigen::Vector2d hxy = ws.human_hand().head<2>();
        const kin::Surface* best = nullptr;
        double best_d = 0;
        for (const auto& s : ws.surfaces) {
          double d = (s.rect.clamp(hxy) - hxy).norm();
          if (!best || d < best_d) {
            best = &s;
            best_d = d;
          }
        }
        if (best) {
          ws.tree.reparent(e.object, best->name, {kin::JointKind::kPlanar, true});
          Pose local = ws.tree.frame(e.object).local;
          local.z = 0;
          ws.tree.set_local(e.object, local);
        }
      }
    }
    if (sym::satisfies(kin::deduce_state(ws, inst.domain), inst.goal)) return t;
  }
  return -1;
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["success"] = success;
  j["end_step"] = end_step;
  j["sim_steps"] = sim_steps;
  j["timeout_steps"] = timeout_steps;
  j["replan_count"] = replan_count;
  j["reopt_count"] = reopt_count;
  j["nlp_solve_count"] = nlp_solve_count;
  j["initial_skeleton_length"] = initial_skeleton_length;
  j["robot_path_length"] = robot_path_length;
  j["min_clearance"] = min_clearance;
  j["safety_violations"] = safety_violations;
  j["planning_wall_s"] = planning_wall_s;
  j["symbolic_wall_s"] = symbolic_wall_s;
  j["human_picked"] = std::vector<std::string>(human_picked.begin(), human_picked.end());
  j["robot_picked"] = std::vector<std::string>(robot_picked.begin(), robot_picked.end());
  j["human_placed_goal"] =
      std::vector<std::string>(human_placed_goal.begin(), human_placed_goal.end());
  j["robot_placed_goal"] =
      std::vector<std::string>(robot_placed_goal.begin(), robot_placed_goal.end());
  j["triggers"] = nlohmann::json::array();
  for (const auto& tr : triggers) {
    j["triggers"].push_back({{"t", tr.t},
                             {"reason", tr.reason},
                             {"skeleton", tr.skeleton},
                             {"skeleton_length", tr.skeleton_length},
                             {"symbolic_s", tr.symbolic_s},
                             {"nlp_s", tr.nlp_s},
                             {"nlp_solves", tr.nlp_solves},
                             {"task_progress", tr.task_progress}});
  }
  return j.dump(2);
}

std::string RunReport::trajectory_csv() const {
  std::string out = "t,robot_x,robot_y,robot_yaw,human_x,human_y,robot_carry,human_carry\n";
  for (const auto& r : trajectory)
    out += strf("%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d\n", r.t, r.rx, r.ry, r.ryaw, r.hx,
                r.hy, r.robot_carry, r.human_carry);
  return out;
}

RunReport run_dynamic(const Instance& inst, const pred::HumanSource& actual,
                      const std::vector<Eigen::Vector2d>& prediction, Mode mode) {
  RunReport report;
  if (actual.poses.empty()) throw std::invalid_argument("human source has no poses");

  kin::Workspace ws = inst.workspace;
  HumanReplayer human{&actual, 0};
  ws.set_human(human.pose_at(0).pelvis, human.pose_at(0).hand);

  const int timeout = inst.cfg.timeout_steps > 0 ? inst.cfg.timeout_steps
                                                 : 4 * actual.length();
  report.timeout_steps = timeout;
  report.min_clearance = (ws.robot_pose().xy() - ws.human_pelvis()).norm();
  const double r_safe = inst.cfg.solver.r_safe;

  std::optional<Active> active;
  bool pending_replan = false;  // a previous replan failed; retry at triggers

  auto goal_progress = [&](const sym::State& s) {
    if (inst.goal.empty()) return 1.0;
    return static_cast<double>(inst.goal.size() - static_cast<size_t>(sym::heuristic(s, inst.goal))) /
           static_cast<double>(inst.goal.size());
  };

  auto log_trigger = [&](int t, const std::string& reason, const PlanStats& stats,
                         const sym::Skeleton& skeleton, const sym::State& s_t) {
    TriggerLogEntry e;
    e.t = t;
    e.reason = reason;
    e.skeleton = skeleton.str();
    e.skeleton_length = static_cast<int>(skeleton.size());
    e.symbolic_s = stats.search_s + stats.rank_s;
    e.nlp_s = stats.nlp_s;
    e.nlp_solves = stats.nlp_solves;
    e.task_progress = goal_progress(s_t);
    report.triggers.push_back(e);
    report.planning_wall_s += e.symbolic_s + e.nlp_s;
    report.symbolic_wall_s += e.symbolic_s;
    report.nlp_solve_count += stats.nlp_solves;
  };

  auto attempt_plan = [&](int t, const std::string& reason) {
    PlanResult pr = plan_single(inst, ws, prediction_suffix(prediction, t), t);
    sym::State s_t = kin::deduce_state(ws, inst.domain);
    log_trigger(t, reason, pr.stats, pr.skeleton, s_t);
    if (reason == "symbolic-invalid") {
      ++report.replan_count;
      report.replan_symbolic_times.push_back(pr.stats.search_s + pr.stats.rank_s);
    }
    if (pr.ok && !pr.skeleton.empty()) {
      active = Active{pr.skeleton, pr.solution, 0, 0, 0};
      pending_replan = false;
    } else if (pr.ok) {
      active.reset();  // goal already satisfied
      pending_replan = false;
    } else {
      active.reset();
      pending_replan = true;
      log_warn(strf("t=%d replan failed: %s", t, pr.failure.c_str()));
    }
    return pr;
  };

  // initial plan
  {
    PlanResult pr = attempt_plan(0, "initial");
    report.initial_skeleton_length = static_cast<int>(pr.skeleton.size());
    report.initial_plan_time_s = pr.stats.search_s + pr.stats.rank_s + pr.stats.nlp_s;
    if (mode == Mode::kSingle && !pr.ok) {
      // single planning fails outright when no feasible skeleton exists
      report.trajectory.push_back({0, ws.robot_pose().x, ws.robot_pose().y,
                                   ws.robot_pose().yaw, ws.human_pelvis().x(),
                                   ws.human_pelvis().y(), -1,
                                   human.pose_at(0).carried});
      report.sim_steps = 0;
      return report;
    }
  }

  auto carried_index = [&](const char* carrier) {
    std::string obj = ws.carried_by(carrier);
    return obj.empty() ? -1 : ws.object_index(obj);
  };

  report.trajectory.push_back({0, ws.robot_pose().x, ws.robot_pose().y, ws.robot_pose().yaw,
                               ws.human_pelvis().x(), ws.human_pelvis().y(),
                               carried_index(kin::kGripper), carried_index(kin::kHumanHand)});

  int t = 0;
  bool reached = sym::satisfies(kin::deduce_state(ws, inst.domain), inst.goal);
  if (reached) {
    report.success = true;
    report.end_step = 0;
    report.sim_steps = 0;
    return report;
  }

  while (t < timeout) {
    // ---- trigger: validate / re-optimize / replan (dynamic mode only)
    if (mode == Mode::kDynamic && t > 0 && t % inst.cfg.trigger_period == 0) {
      sym::State s_t = kin::deduce_state(ws, inst.domain);
      if (active) {
        sym::Skeleton remainder = active->skeleton.suffix(active->k);
        opt::Waypoints warm;
        const opt::Waypoints* warm_ptr = nullptr;
        if (active->cursor < active->solution.waypoints.rows()) {
          long rows = active->solution.waypoints.rows() - active->cursor;
          warm = active->solution.waypoints.bottomRows(rows);
          warm_ptr = &warm;
        }
        opt::Solution reused;
        std::string why;
        auto t0 = Clock::now();
        int feasible = check_feasibility(remainder, active->tau, ws, s_t, inst,
                                         prediction_suffix(prediction, t), warm_ptr,
                                         &reused, &why);
        double nlp_time = seconds_since(t0);
        if (feasible) {
          active->skeleton = remainder;
          active->k = 0;
          // tau is preserved: the rebuilt solution already starts at the
          // truncated phase, so the cursor restarts at its first row
          active->solution = std::move(reused);
          active->cursor = 0;
          ++report.reopt_count;
          PlanStats stats;
          stats.nlp_s = nlp_time;
          stats.nlp_solves = 1;
          log_trigger(t, "reoptimize", stats, remainder, s_t);
        } else {
          active.reset();
          PlanStats stats;
          stats.nlp_s = nlp_time;
          stats.nlp_solves = why == "geometric-infeasible" ? 1 : 0;
          log_trigger(t, why, stats, sym::Skeleton{}, s_t);
          ++report.replan_count;
          PlanResult pr = plan_single(inst, ws, prediction_suffix(prediction, t), t);
          log_trigger(t, pr.ok ? "replanned" : "replan-failed", pr.stats, pr.skeleton,
                      s_t);
          report.replan_symbolic_times.push_back(pr.stats.search_s + pr.stats.rank_s);
          if (pr.ok && !pr.skeleton.empty()) {
            active = Active{pr.skeleton, pr.solution, 0, 0, 0};
          } else if (!pr.ok) {
            pending_replan = true;
          }
        }
      } else {
        // no executing skeleton: the previous one finished without reaching
        // the goal, or the last replan failed — plan again
        attempt_plan(t, pending_replan ? "retry" : "symbolic-invalid");
      }
    }

    // ---- advance one simulation step
    const pred::HumanPose& hnext = human.pose_at(t + 1);

    Pose rp = ws.robot_pose();
    Eigen::Vector2d cur_xy = rp.xy();
    Pose cand = rp;
    bool plan_step = false;
    if (active && active->cursor < active->solution.waypoints.rows()) {
      Eigen::Vector3d row = active->solution.waypoints.row(active->cursor);
      cand = Pose{row[0], row[1], rp.z, row[2]};
      plan_step = true;
    }

    // executor clearance reflex: hold or retreat instead of stepping into the
    // human (the planner reacts at the next trigger)
    const double guard = r_safe + inst.cfg.reflex_margin;
    if ((cand.xy() - hnext.pelvis).norm() < guard) {
      plan_step = false;
      if ((cur_xy - hnext.pelvis).norm() >= guard) {
        cand = rp;  // hold
      } else {
        Eigen::Vector2d d = cur_xy - hnext.pelvis;
        Eigen::Vector2d dir = d.norm() > 1e-9 ? Eigen::Vector2d(d.normalized())
                                              : Eigen::Vector2d(1, 0);
        Eigen::Vector2d want = hnext.pelvis + (guard + inst.cfg.reflex_margin) * dir;
        Eigen::Vector2d step = want - cur_xy;
        double len = step.norm();
        if (len > inst.cfg.reflex_max_step) step *= inst.cfg.reflex_max_step / len;
        cand = Pose{cur_xy.x() + step.x(), cur_xy.y() + step.y(), rp.z, rp.yaw};
      }
    }

    report.robot_path_length += (cand.xy() - cur_xy).norm();
    ws.set_robot_pose(cand);
    ws.set_human(hnext.pelvis, hnext.hand);

    // human pick/place events (skipped when the world no longer matches)
    while (human.next_event < actual.events.size() &&
           actual.events[human.next_event].t <= t + 1) {
      const pred::HumanEvent& e = actual.events[human.next_event++];
      if (ws.object_index(e.object) < 0) continue;
      if (e.pick) {
        bool on_surface = ws.find_surface(ws.attachment_of(e.object)) != nullptr;
        double d = (ws.tree.world_pose(e.object).xyz() - ws.human_hand()).norm();
        if (on_surface && d <= inst.cfg.human_grasp_tol) {
          ws.tree.reparent(e.object, kin::kHumanHand, {kin::JointKind::kFree6d, true});
          report.human_picked.insert(e.object);
        }
      } else if (ws.attachment_of(e.object) == kin::kHumanHand) {
        Eigen::Vector2d hxy = ws.human_hand().head<2>();
        const kin::Surface* best = nullptr;
        double best_d = 0;
        for (const auto& s : ws.surfaces) {
          double d = (s.rect.clamp(hxy) - hxy).norm();
          if (!best || d < best_d) {
            best = &s;
            best_d = d;
          }
        }
        if (best) {
          ws.tree.reparent(e.object, best->name, {kin::JointKind::kPlanar, true});
          Pose local = ws.tree.frame(e.object).local;
          local.z = 0;
          ws.tree.set_local(e.object, local);
          if (inst.goal.count({"on", {e.object, best->name}}))
            report.human_placed_goal.insert(e.object);
        }
      }
    }

    // plan bookkeeping and kinematic switches at phase ends; tau counts all
    // steps of the current phase including those executed before the last
    // re-optimization (the rebuilt solution starts at the truncated phase)
    if (plan_step && active) {
      ++active->cursor;
      ++active->tau;
      while (active && active->tau >= active->skeleton.phase_durations[active->k]) {
        const pddl::GroundedAction& a = *active->skeleton.actions[active->k];
        if (a.schema == "pick" || a.schema == "place") {
          try {
            kin::apply_switch(ws, a);
            if (a.schema == "pick") report.robot_picked.insert(a.args[0]);
            if (a.schema == "place" && inst.goal.count({"on", {a.args[0], a.args[1]}}))
              report.robot_placed_goal.insert(a.args[0]);
          } catch (const kin::SwitchError& err) {
            log_info(strf("t=%d switch failed: %s", t + 1, err.what()));
          }
        }
        ++active->k;
        active->tau = 0;
        if (active->k >= active->skeleton.size()) active.reset();
      }
    }

    ++t;
    double clearance = (ws.robot_pose().xy() - ws.human_pelvis()).norm();
    report.min_clearance = std::min(report.min_clearance, clearance);
    if (clearance < r_safe - 1e-3) ++report.safety_violations;

    report.trajectory.push_back({t, ws.robot_pose().x, ws.robot_pose().y,
                                 ws.robot_pose().yaw, ws.human_pelvis().x(),
                                 ws.human_pelvis().y(), carried_index(kin::kGripper),
                                 carried_index(kin::kHumanHand)});

    if (sym::satisfies(kin::deduce_state(ws, inst.domain), inst.goal)) {
      report.success = true;
      report.end_step = t;
      break;
    }
  }
  report.sim_steps = t;
  return report;
}

}  // namespace dyntamp::lgp
