#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <vector>

#include "dyntamp/kinematics.hpp"
#include "dyntamp/symbolic.hpp"

namespace dyntamp::opt {

using Waypoints = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // rows x_1..x_N

struct SolverConfig {
  double mu0 = 1.0;            // initial barrier weight
  double mu_factor = 0.2;      // barrier decrease per stage
  double penalty0 = 1e4;       // initial equality penalty weight
  double penalty_factor = 10.0;
  int stages = 4;              // outer iterations
  int max_gn_iters = 120;      // Gauss-Newton iterations per stage
  double tol_step = 1e-4;      // convergence tolerance on the step norm
  double tol_eq = 1e-3;        // tolerance on equality residuals
  double ls_backtrack = 0.5;
  int max_ls_steps = 30;
  double damping = 1e-8;
  double dt = 0.1;             // 10 Hz
  double w_v = 1.0;            // velocity weight  [s^2 m^-2]
  double w_a = 10.0;           // acceleration weight  [s^4 m^-2]
  double r_safe = 0.5;         // human clearance radius [m]
  uint64_t repair_seed = 0;    // seed for the infeasible-start repair
  std::string trace_path;     // per-iteration merit/residual CSV when set
};

enum class PhaseKind { kMove, kPick, kPlace };

struct Phase {
  PhaseKind kind;
  int duration = 0;                 // steps (first phase already truncated)
  Eigen::Vector2d target = Eigen::Vector2d::Zero();  // move/pick goal; place warm keyframe
  // place-only placement constraints
  Eigen::Vector2d box_lo = Eigen::Vector2d::Zero();
  Eigen::Vector2d box_hi = Eigen::Vector2d::Zero();
  Eigen::Vector2d anchor = Eigen::Vector2d::Zero();
  double anchor_radius = 0;
};

// Phase-structured trajectory NLP. Decision variables are the robot poses
// x_1..x_N at 10 Hz (x_0 is the fixed boundary condition); carried-object
// poses are implied by the attachment and add no variables.
//
// objective  = sum_t w_v |(x_t - x_{t-1})/dt|^2  +  sum_t w_a |(x_{t-1} - 2 x_t + x_{t+1})/dt^2|^2
// equalities = per-phase terminals: move end pinned to the standing point,
//              pick end pins the gripper onto the object (the switch
//              condition across the phase boundary)
// inequalities = human clearance |xy_t - pelvis_t| >= r_safe per step,
//              placement box/anchor-disc constraints at place phase ends
struct NlpProblem {
  Eigen::Vector3d x_start = Eigen::Vector3d::Zero();
  Eigen::Vector2d gripper_offset = Eigen::Vector2d::Zero();
  std::vector<Phase> phases;
  Eigen::Matrix<double, Eigen::Dynamic, 2> human;  // row i: pelvis at step i+1; empty: no human
  double dt = 0.1, w_v = 1.0, w_a = 10.0, r_safe = 0.5;

  int N() const;
  std::vector<int> phase_ends() const;  // 1-based step index of each phase end
};

struct Evaluation {
  double objective = 0;
  Eigen::VectorXd grad;      // objective gradient
  Eigen::VectorXd rc;        // cost residuals (objective = |rc|^2)
  Eigen::SparseMatrix<double> Jc;
  Eigen::VectorXd h;         // equality residuals [m]
  Eigen::SparseMatrix<double> Jh;
  Eigen::VectorXd g;         // smooth inequality values (feasible: g <= 0)
  Eigen::SparseMatrix<double> Jg;
  Eigen::VectorXd viol;      // per-row geometric violation [m], 0 when satisfied
};

Evaluation evaluate(const NlpProblem& p, const Waypoints& X);

struct Solution {
  Waypoints waypoints;
  bool converged = false;
  double objective = 0;
  double max_eq_residual = 0;
  double max_ineq_violation = 0;  // meters, 0 = feasible
  int iterations = 0;             // accepted Gauss-Newton steps
};

// Gauss-Newton with quadratic equality penalties and a log barrier on the
// inequalities; outer loop escalates the penalty and shrinks the barrier.
// A near-feasible warm start skips straight to the final stage.
Solution solve(const NlpProblem& p, const SolverConfig& cfg,
               const Waypoints* warm_start = nullptr);

// Straight-line interpolation through the phase keyframes; the default warm
// start and the path used for skeleton ranking.
Waypoints interpolate_keyframes(const NlpProblem& p);

// Quadratic smoothness objective of a waypoint path from x0 (shared by the
// solver, the ranking pass and tests).
double quadratic_path_cost(const Waypoints& X, const Eigen::Vector3d& x0,
                           double dt, double w_v, double w_a);

// Phase grounding of a skeleton against the workspace: move targets are
// standing points near the surface anchor, pick targets the object position,
// place keyframes the clamped entry point into the placement box.
std::vector<Phase> make_phases(const sym::Skeleton& skeleton,
                               const kin::Workspace& ws,
                               const Eigen::Vector2d& start_xy);

// Builds the NLP for a skeleton from the current workspace state. The first
// phase is truncated by tau steps; human prediction rows are consumed from
// index 1 (index 0 is the current pose) and the last pose is held beyond the
// prediction horizon. Throws std::invalid_argument on an empty skeleton or
// when tau >= first phase duration.
NlpProblem build_nlp(const sym::Skeleton& skeleton, const kin::Workspace& ws,
                     const std::vector<Eigen::Vector2d>& human_prediction,
                     int tau, const SolverConfig& cfg);

}  // namespace dyntamp::opt
