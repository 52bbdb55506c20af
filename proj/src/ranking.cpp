#include "dyntamp/ranking.hpp"

#include <algorithm>

namespace dyntamp::sym {

double interpolation_cost(const Skeleton& skeleton, const kin::Workspace& ws,
                          const opt::SolverConfig& cfg) {
  if (skeleton.empty()) return 0.0;
  opt::NlpProblem p;
  Pose start = ws.robot_pose();
  p.x_start << start.x, start.y, start.yaw;
  p.gripper_offset = ws.gripper_offset;
  p.dt = cfg.dt;
  p.w_v = cfg.w_v;
  p.w_a = cfg.w_a;
  p.phases = opt::make_phases(skeleton, ws, p.x_start.head<2>());
  opt::Waypoints X = opt::interpolate_keyframes(p);
  return opt::quadratic_path_cost(X, p.x_start, cfg.dt, cfg.w_v, cfg.w_a);
}

std::vector<Skeleton> rank_skeletons(std::vector<Skeleton> skeletons,
                                     const kin::Workspace& ws,
                                     const opt::SolverConfig& cfg) {
  for (auto& sk : skeletons) sk.cost = interpolation_cost(sk, ws, cfg);
  std::stable_sort(skeletons.begin(), skeletons.end(),
                   [](const Skeleton& a, const Skeleton& b) { return a.cost < b.cost; });
  return skeletons;
}

}  // namespace dyntamp::sym
