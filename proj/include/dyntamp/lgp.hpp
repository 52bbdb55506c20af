#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dyntamp/kinematics.hpp"
#include "dyntamp/prediction.hpp"
#include "dyntamp/ranking.hpp"
#include "dyntamp/symbolic.hpp"
#include "dyntamp/trajopt.hpp"

namespace dyntamp::lgp {

struct DurationsConfig {
  int move = 30;
  int pick = 5;
  int place = 5;

  int of(const pddl::GroundedAction& a) const {
    if (a.schema == "move") return move;
    if (a.schema == "pick") return pick;
    return place;
  }
};

struct InstanceConfig {
  int trigger_period = 10;
  int timeout_steps = 0;   // 0: 4 x human trajectory length
  int depth_bound = 0;     // 0: search default
  DurationsConfig durations;
  opt::SolverConfig solver;
  double human_grasp_tol = 0.25;  // replayed human pick events bind within this
  double reflex_margin = 0.01;    // executor clearance guard margin
  double reflex_max_step = 0.3;   // max retreat step [m]
};

// One planning problem: domain, grounded actions, goal set and workspace.
// The grounded action table is referenced by skeletons and must stay alive
// for the lifetime of any plan produced from the instance.
struct Instance {
  pddl::Domain domain;
  std::vector<pddl::GroundedAction> actions;
  sym::State goal;
  kin::Workspace workspace;
  InstanceConfig cfg;
};

struct PlanStats {
  double search_s = 0;
  double rank_s = 0;
  double nlp_s = 0;
  int nlp_solves = 0;
  int ties = 0;
};

struct PlanResult {
  bool ok = false;
  std::string failure;  // "no-skeleton-found" | "all-nlps-infeasible"
  sym::Skeleton skeleton;   // empty when the goal is already satisfied
  opt::Solution solution;
  PlanStats stats;
};

// Single planning: deduce the symbolic state, search tie-shortest skeletons,
// rank by interpolation cost, solve NLPs in rank order, return the first
// converged pair.
PlanResult plan_single(const Instance& inst, const kin::Workspace& current,
                       const std::vector<Eigen::Vector2d>& prediction, int now);

// Skeleton feasibility at the current time: 1 iff the remainder is
// symbolically applicable from s_t and terminates in the goal set, and the
// truncated NLP from (x_t, tau) admits a converged solution (the warm-started
// solve's result is written to *reused when it is feasible).
int check_feasibility(const sym::Skeleton& remainder, int tau,
                      const kin::Workspace& current, const sym::State& s_t,
                      const Instance& inst,
                      const std::vector<Eigen::Vector2d>& prediction,
                      const opt::Waypoints* warm, opt::Solution* reused,
                      std::string* why);

enum class Mode { kSingle, kDynamic };

struct TriggerLogEntry {
  int t = 0;
  std::string reason;  // initial | symbolic-invalid | geometric-infeasible | reoptimize | retry
  std::string skeleton;  // adopted/validated plan ("move(table) pick(...) ...")
  int skeleton_length = 0;
  double symbolic_s = 0;  // search + ranking wall time
  double nlp_s = 0;
  int nlp_solves = 0;
  double task_progress = 0;  // satisfied goal propositions / total
};

struct TrajRow {
  int t = 0;
  double rx = 0, ry = 0, ryaw = 0;
  double hx = 0, hy = 0;
  int robot_carry = -1;  // object index, -1 = none
  int human_carry = -1;
};

struct RunReport {
  bool success = false;
  int end_step = 0;       // step at which the goal was first satisfied
  int sim_steps = 0;      // total executed steps
  int timeout_steps = 0;
  std::vector<TriggerLogEntry> triggers;
  std::vector<TrajRow> trajectory;

  int replan_count = 0;      // symbolic-invalid + geometric-infeasible events
  int reopt_count = 0;
  int nlp_solve_count = 0;   // NLP solves inside planning events
  int initial_skeleton_length = 0;
  double initial_plan_time_s = 0;

  double robot_path_length = 0;
  double min_clearance = 0;
  int safety_violations = 0;  // steps with clearance < r_safe - 1e-3

  std::set<std::string> human_picked, robot_picked;
  std::set<std::string> human_placed_goal, robot_placed_goal;

  double planning_wall_s = 0;        // total planning time (sim paused)
  double symbolic_wall_s = 0;        // search + rank portion
  std::vector<double> replan_symbolic_times;  // per replan event

  std::string to_json() const;
  std::string trajectory_csv() const;
};

// Algorithm: initial single plan; every trigger, update kinematics from the
// human source, deduce the symbolic state, replan when the executing skeleton
// is infeasible and re-optimize the NLP from the elapsed phase time otherwise;
// between triggers execute the current action and apply kinematic switches at
// phase ends. The simulation clock pauses during planning. kSingle mode plans
// once and never replans.
RunReport run_dynamic(const Instance& inst, const pred::HumanSource& actual,
                      const std::vector<Eigen::Vector2d>& prediction, Mode mode);

// Steps a human-only copy of the world through the source and returns the
// first step at which the goal is satisfied, or -1.
int human_alone_completion_step(const Instance& inst, const pred::HumanSource& actual);

}  // namespace dyntamp::lgp
