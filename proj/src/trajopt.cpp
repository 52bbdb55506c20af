#include "dyntamp/trajopt.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "dyntamp/util.hpp"

namespace dyntamp::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline Eigen::Vector2d gripper_point(const Eigen::Vector3d& x,
                                     const Eigen::Vector2d& off) {
  return x.head<2>() + rotate2d(x[2], off);
}

inline Eigen::Vector2d gripper_dyaw(const Eigen::Vector3d& x,
                                    const Eigen::Vector2d& off) {
  double c = std::cos(x[2]), s = std::sin(x[2]);
  return {-s * off.x() - c * off.y(), c * off.x() - s * off.y()};
}

}  // namespace

int NlpProblem::N() const {
  int n = 0;
  for (const auto& ph : phases) n += ph.duration;
  return n;
}

std::vector<int> NlpProblem::phase_ends() const {
  std::vector<int> ends;
  int acc = 0;
  for (const auto& ph : phases) {
    acc += ph.duration;
    ends.push_back(acc);
  }
  return ends;
}

double quadratic_path_cost(const Waypoints& X, const Eigen::Vector3d& x0,
                           double dt, double w_v, double w_a) {
  const int n = static_cast<int>(X.rows());
  double cost = 0;
  auto row = [&](int t) -> Eigen::Vector3d {
    return t == 0 ? x0 : Eigen::Vector3d(X.row(t - 1));
  };
  for (int t = 1; t <= n; ++t) {
    Eigen::Vector3d d = row(t) - row(t - 1);
    d[2] = wrap_angle(d[2]);
    cost += w_v * d.squaredNorm() / (dt * dt);
  }
  for (int t = 1; t <= n - 1; ++t) {
    Eigen::Vector3d v1 = row(t) - row(t - 1);
    Eigen::Vector3d v2 = row(t + 1) - row(t);
    v1[2] = wrap_angle(v1[2]);
    v2[2] = wrap_angle(v2[2]);
    Eigen::Vector3d a = (v2 - v1) / (dt * dt);
    cost += w_a * a.squaredNorm();
  }
  return cost;
}

Evaluation evaluate(const NlpProblem& p, const Waypoints& X) {
  const int n = p.N();
  if (static_cast<int>(X.rows()) != n)
    throw std::invalid_argument(strf("waypoint count mismatch: problem has %d steps, got %d",
                                     n, static_cast<int>(X.rows())));
  const int nv = 3 * n;
  const double dt = p.dt;
  const double sv = std::sqrt(p.w_v) / dt;
  const double sa = std::sqrt(p.w_a) / (dt * dt);

  Evaluation ev;
  auto row = [&](int t) -> Eigen::Vector3d {
    return t == 0 ? p.x_start : Eigen::Vector3d(X.row(t - 1));
  };
  auto var = [&](int t, int d) { return 3 * (t - 1) + d; };  // t >= 1

  // ---- cost residuals: velocities then accelerations
  const int n_vel = 3 * n;
  const int n_acc = 3 * std::max(0, n - 1);
  ev.rc.resize(n_vel + n_acc);
  std::vector<Eigen::Triplet<double>> trip_c;
  trip_c.reserve(static_cast<size_t>(n_vel * 2 + n_acc * 3));

  for (int t = 1; t <= n; ++t) {
    Eigen::Vector3d d = row(t) - row(t - 1);
    d[2] = wrap_angle(d[2]);
    for (int k = 0; k < 3; ++k) {
      int r = 3 * (t - 1) + k;
      ev.rc[r] = sv * d[k];
      trip_c.emplace_back(r, var(t, k), sv);
      if (t > 1) trip_c.emplace_back(r, var(t - 1, k), -sv);
    }
  }
  for (int t = 1; t <= n - 1; ++t) {
    Eigen::Vector3d v1 = row(t) - row(t - 1);
    Eigen::Vector3d v2 = row(t + 1) - row(t);
    v1[2] = wrap_angle(v1[2]);
    v2[2] = wrap_angle(v2[2]);
    Eigen::Vector3d a = v2 - v1;
    for (int k = 0; k < 3; ++k) {
      int r = n_vel + 3 * (t - 1) + k;
      ev.rc[r] = sa * a[k];
      trip_c.emplace_back(r, var(t + 1, k), sa);
      trip_c.emplace_back(r, var(t, k), -2 * sa);
      if (t > 1) trip_c.emplace_back(r, var(t - 1, k), sa);
    }
  }
  ev.Jc.resize(n_vel + n_acc, nv);
  ev.Jc.setFromTriplets(trip_c.begin(), trip_c.end());
  ev.objective = ev.rc.squaredNorm();
  ev.grad = 2.0 * ev.Jc.transpose() * ev.rc;

  // ---- equality constraints at phase ends
  std::vector<Eigen::Triplet<double>> trip_h;
  std::vector<double> hvals;
  const auto ends = p.phase_ends();
  for (size_t pi = 0; pi < p.phases.size(); ++pi) {
    const Phase& ph = p.phases[pi];
    if (ph.duration <= 0) continue;
    int e = ends[pi];
    Eigen::Vector3d xe = row(e);
    if (ph.kind == PhaseKind::kMove) {
      for (int k = 0; k < 2; ++k) {
        trip_h.emplace_back(static_cast<int>(hvals.size()), var(e, k), 1.0);
        hvals.push_back(xe[k] - ph.target[k]);
      }
    } else if (ph.kind == PhaseKind::kPick) {
      Eigen::Vector2d gp = gripper_point(xe, p.gripper_offset);
      Eigen::Vector2d dyaw = gripper_dyaw(xe, p.gripper_offset);
      for (int k = 0; k < 2; ++k) {
        int r = static_cast<int>(hvals.size());
        trip_h.emplace_back(r, var(e, k), 1.0);
        if (p.gripper_offset.squaredNorm() > 0) trip_h.emplace_back(r, var(e, 2), dyaw[k]);
        hvals.push_back(gp[k] - ph.target[k]);
      }
    }
  }
  ev.h = Eigen::Map<Eigen::VectorXd>(hvals.data(), static_cast<long>(hvals.size()));
  ev.Jh.resize(static_cast<int>(hvals.size()), nv);
  ev.Jh.setFromTriplets(trip_h.begin(), trip_h.end());

  // ---- inequality constraints
  std::vector<Eigen::Triplet<double>> trip_g;
  std::vector<double> gvals, viols;
  const bool with_human = p.human.rows() > 0;
  if (with_human) {
    const double r2 = p.r_safe * p.r_safe;
    for (int t = 1; t <= n; ++t) {
      Eigen::Vector2d hxy = p.human.row(std::min<int>(t - 1, static_cast<int>(p.human.rows()) - 1));
      Eigen::Vector2d d = Eigen::Vector2d(row(t).head<2>()) - hxy;
      int r = static_cast<int>(gvals.size());
      gvals.push_back(r2 - d.squaredNorm());
      viols.push_back(std::max(0.0, p.r_safe - d.norm()));
      trip_g.emplace_back(r, var(t, 0), -2 * d.x());
      trip_g.emplace_back(r, var(t, 1), -2 * d.y());
    }
  }
  for (size_t pi = 0; pi < p.phases.size(); ++pi) {
    const Phase& ph = p.phases[pi];
    if (ph.kind != PhaseKind::kPlace || ph.duration <= 0) continue;
    int e = ends[pi];
    Eigen::Vector3d xe = row(e);
    Eigen::Vector2d gp = gripper_point(xe, p.gripper_offset);
    Eigen::Vector2d dyaw = gripper_dyaw(xe, p.gripper_offset);
    bool with_yaw = p.gripper_offset.squaredNorm() > 0;
    // placement box: lo <= gp <= hi, one row per side
    for (int k = 0; k < 2; ++k) {
      int r = static_cast<int>(gvals.size());
      gvals.push_back(ph.box_lo[k] - gp[k]);
      viols.push_back(std::max(0.0, ph.box_lo[k] - gp[k]));
      trip_g.emplace_back(r, var(e, k), -1.0);
      if (with_yaw) trip_g.emplace_back(r, var(e, 2), -dyaw[k]);
      r = static_cast<int>(gvals.size());
      gvals.push_back(gp[k] - ph.box_hi[k]);
      viols.push_back(std::max(0.0, gp[k] - ph.box_hi[k]));
      trip_g.emplace_back(r, var(e, k), 1.0);
      if (with_yaw) trip_g.emplace_back(r, var(e, 2), dyaw[k]);
    }
    // robot stays within the deduction radius of the surface anchor
    if (ph.anchor_radius > 0) {
      Eigen::Vector2d d = Eigen::Vector2d(xe.head<2>()) - ph.anchor;
      int r = static_cast<int>(gvals.size());
      gvals.push_back(d.squaredNorm() - ph.anchor_radius * ph.anchor_radius);
      viols.push_back(std::max(0.0, d.norm() - ph.anchor_radius));
      trip_g.emplace_back(r, var(e, 0), 2 * d.x());
      trip_g.emplace_back(r, var(e, 1), 2 * d.y());
    }
  }
  ev.g = Eigen::Map<Eigen::VectorXd>(gvals.data(), static_cast<long>(gvals.size()));
  ev.viol = Eigen::Map<Eigen::VectorXd>(viols.data(), static_cast<long>(viols.size()));
  ev.Jg.resize(static_cast<int>(gvals.size()), nv);
  ev.Jg.setFromTriplets(trip_g.begin(), trip_g.end());
  return ev;
}

Waypoints interpolate_keyframes(const NlpProblem& p) {
  const int n = p.N();
  Waypoints X(n, 3);
  Eigen::Vector2d cur = p.x_start.head<2>();
  double yaw = p.x_start[2];
  int t = 0;
  for (const auto& ph : p.phases) {
    Eigen::Vector2d tgt = ph.target;
    // pick/place targets are gripper points; steer the base accordingly
    if (ph.kind != PhaseKind::kMove) tgt -= rotate2d(yaw, p.gripper_offset);
    for (int i = 1; i <= ph.duration; ++i) {
      double a = static_cast<double>(i) / ph.duration;
      Eigen::Vector2d xy = cur + a * (tgt - cur);
      X.row(t++) << xy.x(), xy.y(), yaw;
    }
    cur = tgt;
  }
  return X;
}

namespace {

// Push waypoints into the strict interior of the inequalities so the barrier
// is defined at the start.
void repair_feasibility(const NlpProblem& p, Waypoints& X, uint64_t seed) {
  if (p.human.rows() == 0 && std::none_of(p.phases.begin(), p.phases.end(),
                                          [](const Phase& ph) {
                                            return ph.kind == PhaseKind::kPlace;
                                          }))
    return;
  Rng rng(seed ^ 0x5eedULL);
  const auto ends = p.phase_ends();
  const double slack = 1e-3;
  for (int pass = 0; pass < 60; ++pass) {
    bool dirty = false;
    if (p.human.rows() > 0) {
      for (int t = 1; t <= p.N(); ++t) {
        Eigen::Vector2d hxy =
            p.human.row(std::min<int>(t - 1, static_cast<int>(p.human.rows()) - 1));
        Eigen::Vector2d xy = X.row(t - 1).head<2>();
        Eigen::Vector2d d = xy - hxy;
        double dist = d.norm();
        if (dist < p.r_safe + slack) {
          Eigen::Vector2d dir;
          if (dist < 1e-9) {
            double ang = rng.uniform(0, 2 * M_PI);
            dir = {std::cos(ang), std::sin(ang)};
          } else {
            dir = d / dist;
          }
          Eigen::Vector2d fixed = hxy + (p.r_safe + 2 * slack) * dir;
          X(t - 1, 0) = fixed.x();
          X(t - 1, 1) = fixed.y();
          dirty = true;
        }
      }
    }
    for (size_t pi = 0; pi < p.phases.size(); ++pi) {
      const Phase& ph = p.phases[pi];
      if (ph.kind != PhaseKind::kPlace || ph.duration <= 0) continue;
      int e = ends[pi];
      Eigen::Vector3d xe = X.row(e - 1);
      Eigen::Vector2d gp = gripper_point(xe, p.gripper_offset);
      Eigen::Vector2d clamped{
          std::clamp(gp.x(), ph.box_lo.x() + slack, ph.box_hi.x() - slack),
          std::clamp(gp.y(), ph.box_lo.y() + slack, ph.box_hi.y() - slack)};
      if (ph.anchor_radius > 0) {
        Eigen::Vector2d d = clamped - ph.anchor;
        double dist = d.norm();
        if (dist > ph.anchor_radius - slack)
          clamped = ph.anchor + d * ((ph.anchor_radius - 2 * slack) / dist);
      }
      if ((clamped - gp).norm() > 1e-12) {
        Eigen::Vector2d base = clamped - rotate2d(xe[2], p.gripper_offset);
        X(e - 1, 0) = base.x();
        X(e - 1, 1) = base.y();
        dirty = true;
      }
    }
    if (!dirty) break;
  }
}

double merit_value(const NlpProblem& p, const Waypoints& X, double rho, double mu) {
  Evaluation ev = evaluate(p, X);
  double m = ev.objective + rho * ev.h.squaredNorm();
  for (int i = 0; i < ev.g.size(); ++i) {
    double s = -ev.g[i];
    if (s <= 0) return kInf;
    m -= mu * std::log(s);
  }
  return m;
}

}  // namespace

Solution solve(const NlpProblem& p, const SolverConfig& cfg, const Waypoints* warm_start) {
  const int n = p.N();
  Solution sol;
  if (n == 0) {
    sol.waypoints.resize(0, 3);
    sol.converged = true;
    return sol;
  }
  const int nv = 3 * n;

  Waypoints X = warm_start ? *warm_start : interpolate_keyframes(p);
  if (static_cast<int>(X.rows()) != n) X = interpolate_keyframes(p);
  repair_feasibility(p, X, cfg.repair_seed);

  // A warm start that is already near-feasible goes straight to the last
  // stage; re-solves of a converged problem then terminate immediately.
  int first_stage = 0;
  if (warm_start) {
    Evaluation ev = evaluate(p, X);
    bool near = (ev.h.size() == 0 || ev.h.cwiseAbs().maxCoeff() < 10 * cfg.tol_eq) &&
                (ev.g.size() == 0 || ev.g.maxCoeff() < 0);
    if (near) first_stage = cfg.stages - 1;
  }

  std::ofstream trace;
  if (!cfg.trace_path.empty()) {
    trace.open(cfg.trace_path);
    trace << "stage,iter,merit,objective,max_eq,max_violation,step_norm\n";
  }

  double last_step = kInf;
  bool stalled = false;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

  for (int stage = first_stage; stage < cfg.stages; ++stage) {
    const double mu = cfg.mu0 * std::pow(cfg.mu_factor, stage);
    const double rho = cfg.penalty0 * std::pow(cfg.penalty_factor, stage);
    stalled = false;

    for (int it = 0; it < cfg.max_gn_iters; ++it) {
      Evaluation ev = evaluate(p, X);

      // infeasible iterate (should not happen: the line search keeps the
      // barrier domain) — try a repair, then give up on this stage
      if (ev.g.size() > 0 && ev.g.maxCoeff() >= 0) {
        repair_feasibility(p, X, cfg.repair_seed + static_cast<uint64_t>(it) + 1);
        ev = evaluate(p, X);
        if (ev.g.maxCoeff() >= 0) {
          stalled = true;
          break;
        }
      }

      // gradient and Gauss-Newton Hessian of
      //   |rc|^2 + rho |h|^2 - mu sum log(-g)
      Eigen::VectorXd grad = ev.grad;
      if (ev.h.size() > 0) grad += 2.0 * rho * (ev.Jh.transpose() * ev.h);
      Eigen::SparseMatrix<double> H =
          Eigen::SparseMatrix<double>(2.0 * (ev.Jc.transpose() * ev.Jc));
      if (ev.h.size() > 0) {
        H += Eigen::SparseMatrix<double>(2.0 * rho * (ev.Jh.transpose() * ev.Jh));
      }
      if (ev.g.size() > 0) {
        Eigen::VectorXd inv_s = (-ev.g.array()).inverse();
        grad += ev.Jg.transpose() * (mu * inv_s);
        Eigen::SparseMatrix<double> B = inv_s.cwiseSqrt().asDiagonal() * ev.Jg;
        H += Eigen::SparseMatrix<double>(mu * (B.transpose() * B));
      }
      double lambda = cfg.damping * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      Eigen::VectorXd delta;
      Eigen::SparseMatrix<double> eye(nv, nv);
      eye.setIdentity();
      for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::SparseMatrix<double> Hd = H + Eigen::SparseMatrix<double>(lambda * eye);
        ldlt.compute(Hd);
        if (ldlt.info() == Eigen::Success) {
          delta = ldlt.solve(-grad);
          if (ldlt.info() == Eigen::Success && delta.allFinite()) break;
        }
        lambda *= 100;
        delta.resize(0);
      }
      if (delta.size() == 0) {
        stalled = true;
        break;
      }

      double step_norm = delta.lpNorm<Eigen::Infinity>();
      if (step_norm < cfg.tol_step) {
        last_step = step_norm;
        break;
      }

      double merit0 = ev.objective + rho * ev.h.squaredNorm();
      for (int i = 0; i < ev.g.size(); ++i) merit0 -= mu * std::log(-ev.g[i]);

      double alpha = 1.0;
      bool accepted = false;
      Waypoints Xc;
      for (int ls = 0; ls < cfg.max_ls_steps; ++ls) {
        Xc = X;
        for (int t = 0; t < n; ++t)
          for (int k = 0; k < 3; ++k) Xc(t, k) += alpha * delta[3 * t + k];
        double m = merit_value(p, Xc, rho, mu);
        if (m < merit0 - 1e-12) {
          accepted = true;
          break;
        }
        alpha *= cfg.ls_backtrack;
      }
      if (!accepted) {
        last_step = step_norm;
        stalled = true;
        break;
      }
      double merit_new = merit_value(p, Xc, rho, mu);
      X = Xc;
      last_step = alpha * step_norm;
      if (last_step >= cfg.tol_step) ++sol.iterations;
      // barrier-active iterates can zigzag with tiny merit gains; treat a
      // stagnant merit as stage convergence
      if (merit0 - merit_new < 1e-10 * (1.0 + std::abs(merit0))) {
        last_step = std::min(last_step, cfg.tol_step * 0.5);
        break;
      }

      if (trace.is_open()) {
        Evaluation tv = evaluate(p, X);
        trace << strf("%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", stage, it,
                      merit_value(p, X, rho, mu), tv.objective,
                      tv.h.size() ? tv.h.cwiseAbs().maxCoeff() : 0.0,
                      tv.viol.size() ? tv.viol.maxCoeff() : 0.0, last_step);
      }
      if (last_step < cfg.tol_step) break;
    }
  }

  // honesty: recompute the certificates from the returned waypoints
  Evaluation fin = evaluate(p, X);
  sol.waypoints = X;
  sol.objective = fin.objective;
  sol.max_eq_residual = fin.h.size() ? fin.h.cwiseAbs().maxCoeff() : 0.0;
  sol.max_ineq_violation = fin.viol.size() ? fin.viol.maxCoeff() : 0.0;
  sol.converged = !stalled && last_step < cfg.tol_step &&
                  sol.max_eq_residual < cfg.tol_eq && sol.max_ineq_violation <= 0.0;
  return sol;
}

std::vector<Phase> make_phases(const sym::Skeleton& skeleton, const kin::Workspace& ws,
                               const Eigen::Vector2d& start_xy) {
  std::vector<Phase> phases;
  Eigen::Vector2d cur = start_xy;
  for (size_t i = 0; i < skeleton.actions.size(); ++i) {
    const pddl::GroundedAction& a = *skeleton.actions[i];
    Phase ph;
    ph.duration = skeleton.phase_durations[i];
    if (a.schema == "move") {
      const kin::Surface& s = ws.surface(a.args.at(0));
      ph.kind = PhaseKind::kMove;
      ph.target = stand_point_circle(s.anchor(), cur, s.stand_offset);
    } else if (a.schema == "pick") {
      ph.kind = PhaseKind::kPick;
      ph.target = ws.object_xy(a.args.at(0));
    } else if (a.schema == "place") {
      const kin::Surface& s = ws.surface(a.args.at(1));
      ph.kind = PhaseKind::kPlace;
      double inset = ws.place_inset;
      ph.box_lo = s.rect.lo() + Eigen::Vector2d(inset, inset);
      ph.box_hi = s.rect.hi() - Eigen::Vector2d(inset, inset);
      ph.anchor = s.anchor();
      ph.anchor_radius = std::max(0.1, s.at_radius - ws.at_margin);
      Eigen::Vector2d kf = s.rect.clamp(cur, inset + 0.02);
      Eigen::Vector2d d = kf - ph.anchor;
      if (d.norm() > ph.anchor_radius - 0.02)
        kf = ph.anchor + d * ((ph.anchor_radius - 0.02) / d.norm());
      ph.target = kf;
    } else {
      throw std::invalid_argument("no geometric grounding for action schema: " + a.schema);
    }
    cur = ph.target;
    phases.push_back(ph);
  }
  return phases;
}

NlpProblem build_nlp(const sym::Skeleton& skeleton, const kin::Workspace& ws,
                     const std::vector<Eigen::Vector2d>& human_prediction,
                     int tau, const SolverConfig& cfg) {
  if (skeleton.empty()) throw std::invalid_argument("build_nlp: empty skeleton");
  if (tau < 0 || tau >= skeleton.phase_durations.at(0))
    throw std::invalid_argument(
        strf("build_nlp: tau (%d) exceeds first-phase duration (%d)", tau,
             skeleton.phase_durations.at(0)));

  NlpProblem p;
  Pose start = ws.robot_pose();
  p.x_start << start.x, start.y, start.yaw;
  p.gripper_offset = ws.gripper_offset;
  p.dt = cfg.dt;
  p.w_v = cfg.w_v;
  p.w_a = cfg.w_a;
  p.r_safe = cfg.r_safe;
  p.phases = make_phases(skeleton, ws, p.x_start.head<2>());
  p.phases[0].duration -= tau;

  const int n = p.N();
  if (!human_prediction.empty()) {
    p.human.resize(n, 2);
    const int last = static_cast<int>(human_prediction.size()) - 1;
    for (int t = 1; t <= n; ++t) {
      const Eigen::Vector2d& h = human_prediction[static_cast<size_t>(std::min(t, last))];
      p.human.row(t - 1) = h;
    }
  }
  return p;
}

}  // namespace dyntamp::opt
