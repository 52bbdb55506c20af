#include "dyntamp/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dyntamp::pred {

std::vector<Eigen::Vector2d> HumanSource::pelvis_track() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.pelvis);
  return out;
}

HumanSource load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path);
  HumanSource src;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {  // skip the header row
      header = false;
      if (line.rfind("t,", 0) == 0) continue;
    }
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 7)
      throw std::runtime_error("trajectory row needs 7 columns, got " +
                               std::to_string(vals.size()) + " in " + path);
    HumanPose p;
    p.pelvis = {vals[1], vals[2]};
    p.hand = {vals[3], vals[4], vals[5]};
    p.carried = static_cast<int>(vals[6]);
    src.poses.push_back(p);
  }
  if (src.poses.empty()) throw std::runtime_error("empty trajectory: " + path);
  return src;
}

void save_trajectory_csv(const std::string& path, const HumanSource& src) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << "t,pelvis_x,pelvis_y,hand_x,hand_y,hand_z,carried\n";
  for (size_t t = 0; t < src.poses.size(); ++t) {
    const HumanPose& p = src.poses[t];
    out << strf("%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", t, p.pelvis.x(), p.pelvis.y(),
                p.hand.x(), p.hand.y(), p.hand.z(), p.carried);
  }
}

std::vector<HumanEvent> events_from_carried(const std::vector<HumanPose>& poses,
                                            const std::vector<kin::ObjectInfo>& objects) {
  std::vector<HumanEvent> events;
  int prev = poses.empty() ? -1 : poses[0].carried;
  for (size_t t = 1; t < poses.size(); ++t) {
    int cur = poses[t].carried;
    if (cur == prev) continue;
    if (prev >= 0 && prev < static_cast<int>(objects.size()))
      events.push_back({static_cast<int>(t), false, objects[static_cast<size_t>(prev)].name});
    if (cur >= 0 && cur < static_cast<int>(objects.size()))
      events.push_back({static_cast<int>(t), true, objects[static_cast<size_t>(cur)].name});
    prev = cur;
  }
  return events;
}

std::vector<HumanPose> generate_lowlevel(const HumanPose& now, const Eigen::Vector3d& goal,
                                         SegmentKind kind, int duration) {
  if (duration < 1) duration = 1;
  std::vector<HumanPose> out;
  out.reserve(static_cast<size_t>(duration));
  for (int i = 1; i <= duration; ++i) {
    double a = static_cast<double>(i) / duration;
    HumanPose p = now;
    if (kind == SegmentKind::kPelvis) {
      Eigen::Vector2d g2 = goal.head<2>();
      p.pelvis = now.pelvis + a * (g2 - now.pelvis);
      p.hand = now.hand + Eigen::Vector3d((p.pelvis - now.pelvis).x(),
                                          (p.pelvis - now.pelvis).y(), 0.0);
    } else {
      p.pelvis = now.pelvis;
      p.hand = now.hand + a * (goal - now.hand);
    }
    out.push_back(p);
  }
  return out;
}

HumanSource degrade_ground_truth(const HumanSource& gt, double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("degradation fraction must be in [0, 1)");
  HumanSource out = gt;
  out.mode = HumanSource::Mode::kDegraded;
  const int T = gt.length();
  const int W = static_cast<int>(std::floor(fraction * T));
  if (W == 0 || T < W + 2) return out;

  Rng rng(seed);
  const int start = static_cast<int>(rng.uniform_int(1, T - W - 1));
  const HumanPose& a = gt.poses[static_cast<size_t>(start - 1)];
  const HumanPose& b = gt.poses[static_cast<size_t>(start + W)];
  for (int i = 0; i < W; ++i) {
    double al = static_cast<double>(i + 1) / (W + 1);
    HumanPose p;
    p.pelvis = a.pelvis + al * (b.pelvis - a.pelvis);
    p.hand = a.hand + al * (b.hand - a.hand);
    p.carried = a.carried;
    out.poses[static_cast<size_t>(start + i)] = p;
  }
  return out;
}

std::string resolve_pick_object(const kin::Workspace& ws, const std::string& cls,
                                const std::string& surface, const Eigen::Vector3d& hand) {
  std::string best;
  double best_d = 0;
  for (const auto& name : ws.objects_on(surface)) {
    int oi = ws.object_index(name);
    if (ws.objects[static_cast<size_t>(oi)].cls != cls) continue;
    Pose wp = ws.tree.world_pose(name);
    double d = (Eigen::Vector3d(wp.x, wp.y, wp.z) - hand).norm();
    if (best.empty() || d < best_d - 1e-12 ||
        (std::abs(d - best_d) <= 1e-12 && name < best)) {
      best = name;
      best_d = d;
    }
  }
  return best;
}

Eigen::Vector3d extract_goal(const HLAction& action, const GoalContext& ctx) {
  const kin::Workspace& ws = *ctx.ws;
  const MdpSpec& spec = *ctx.spec;
  if (action.kind == HLAction::Kind::kGoTo) {
    const kin::Surface& s = ws.surface(spec.locations.at(static_cast<size_t>(action.arg)));
    Eigen::Vector2d p = stand_point_edge(s.rect, ctx.pelvis, ctx.stand_offset);
    return {p.x(), p.y(), 0.0};
  }
  if (action.kind == HLAction::Kind::kPickUp) {
    if (ctx.human_pos < 0 || ctx.human_pos >= static_cast<int>(spec.locations.size()))
      throw std::invalid_argument("pick-up goal requires the human at a location");
    const std::string& surface = spec.locations[static_cast<size_t>(ctx.human_pos)];
    const std::string& cls = spec.classes.at(static_cast<size_t>(action.arg)).name;
    std::string obj = resolve_pick_object(ws, cls, surface, ctx.hand);
    if (obj.empty())
      throw std::invalid_argument("no object of class '" + cls + "' on " + surface);
    Pose wp = ws.tree.world_pose(obj);
    return {wp.x, wp.y, wp.z};
  }
  // place: closest free point on the current surface to the human
  if (ctx.human_pos < 0 || ctx.human_pos >= static_cast<int>(spec.locations.size()))
    throw std::invalid_argument("place goal requires the human at a location");
  const kin::Surface& s = ws.surface(spec.locations[static_cast<size_t>(ctx.human_pos)]);
  std::vector<Eigen::Vector2d> occupied;
  for (const auto& name : ws.objects_on(s.name)) occupied.push_back(ws.object_xy(name));

  const double inset = 0.03;
  const double res = 0.01;
  Eigen::Vector2d lo = s.rect.lo() + Eigen::Vector2d(inset, inset);
  Eigen::Vector2d hi = s.rect.hi() - Eigen::Vector2d(inset, inset);
  const int nx = std::max(1, static_cast<int>(std::floor((hi.x() - lo.x()) / res)) + 1);
  const int ny = std::max(1, static_cast<int>(std::floor((hi.y() - lo.y()) / res)) + 1);
  bool found = false;
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_d = 0;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      Eigen::Vector2d p(lo.x() + ix * res, lo.y() + iy * res);
      if (p.x() > hi.x() || p.y() > hi.y()) continue;
      bool clear = std::all_of(occupied.begin(), occupied.end(), [&](const auto& o) {
        return (p - o).norm() >= ctx.object_clearance;
      });
      if (!clear) continue;
      double d = (p - ctx.pelvis).norm();
      if (!found || d < best_d - 1e-12) {
        best = p;
        best_d = d;
        found = true;
      }
    }
  }
  if (!found) throw SurfaceFullError("no free point on surface " + s.name);
  return {best.x(), best.y(), s.z_top};
}

namespace {

HumanPose workspace_human(const kin::Workspace& ws) {
  HumanPose p;
  p.pelvis = ws.human_pelvis();
  p.hand = ws.human_hand();
  std::string carried = ws.carried_by(kin::kHumanHand);
  p.carried = carried.empty() ? -1 : ws.object_index(carried);
  return p;
}

// Shared tail of compose_prediction and script_human: executes a sequence of
// (action kind, goal, object) steps on a cloned workspace, emitting poses and
// the pick/place schedule.
struct HumanSim {
  kin::Workspace ws;
  HumanSource out;
  HumanPose cur;

  explicit HumanSim(const kin::Workspace& initial) : ws(initial) {
    cur = workspace_human(ws);
    out.poses.push_back(cur);
  }

  void walk(const Eigen::Vector2d& to, int steps) {
    auto seg = generate_lowlevel(cur, {to.x(), to.y(), 0}, SegmentKind::kPelvis, steps);
    for (auto& p : seg) out.poses.push_back(p);
    cur = out.poses.back();
    ws.set_human(cur.pelvis, cur.hand);
  }

  void reach(const Eigen::Vector3d& to, int steps) {
    auto seg = generate_lowlevel(cur, to, SegmentKind::kHand, steps);
    for (auto& p : seg) out.poses.push_back(p);
    cur = out.poses.back();
    ws.set_human(cur.pelvis, cur.hand);
  }

  void pick(const std::string& object) {
    int t = static_cast<int>(out.poses.size()) - 1;
    ws.tree.reparent(object, kin::kHumanHand, {kin::JointKind::kFree6d, true});
    cur.carried = ws.object_index(object);
    out.poses.back().carried = cur.carried;
    out.events.push_back({t, true, object});
  }

  void place(const std::string& object, const std::string& surface) {
    int t = static_cast<int>(out.poses.size()) - 1;
    ws.tree.reparent(object, surface, {kin::JointKind::kPlanar, true});
    Pose local = ws.tree.frame(object).local;
    local.z = 0;
    ws.tree.set_local(object, local);
    cur.carried = -1;
    out.poses.back().carried = -1;
    out.events.push_back({t, false, object});
  }
};

}  // namespace

HumanSource compose_prediction(const IrlModel& model, const Mdp& mdp,
                               const kin::Workspace& ws,
                               const std::function<bool(const HLState&)>& goal,
                               uint64_t seed, const ComposeOptions& opts) {
  HLState s0 = state_from_workspace(ws, mdp.spec());
  int si = mdp.state_index(s0);
  if (si < 0) throw std::invalid_argument("workspace state is outside the MDP state space");
  Rollout roll = rollout_policy(model, mdp, s0, goal, seed, opts.step_cap);

  HumanSim sim(ws);
  const MdpSpec& spec = mdp.spec();
  int s = si;
  int human_pos = mdp.state(s).human_pos >= static_cast<int>(spec.locations.size())
                      ? -1
                      : mdp.state(s).human_pos;
  for (int ai : roll.actions) {
    const HLAction& a = mdp.action(ai);
    GoalContext ctx{&sim.ws, sim.cur.pelvis, sim.cur.hand, human_pos, &spec};
    if (a.kind == HLAction::Kind::kGoTo) {
      Eigen::Vector3d g = extract_goal(a, ctx);
      sim.walk(g.head<2>(), opts.go_to_steps);
      human_pos = a.arg;
    } else if (a.kind == HLAction::Kind::kPickUp) {
      const std::string& surface = spec.locations.at(static_cast<size_t>(human_pos));
      std::string obj = resolve_pick_object(sim.ws, spec.classes.at(static_cast<size_t>(a.arg)).name,
                                            surface, sim.cur.hand);
      if (obj.empty()) break;  // policy drifted outside the workspace reality
      Eigen::Vector3d g = extract_goal(a, ctx);
      sim.reach(g, opts.pick_steps);
      sim.pick(obj);
    } else {
      std::string carried = sim.ws.carried_by(kin::kHumanHand);
      if (carried.empty()) break;
      Eigen::Vector3d g = extract_goal(a, ctx);
      sim.reach(g, opts.place_steps);
      sim.place(carried, spec.locations.at(static_cast<size_t>(human_pos)));
    }
    s = mdp.next(s, ai) >= 0 ? mdp.next(s, ai) : s;
  }
  sim.out.mode = HumanSource::Mode::kHierarchical;
  return sim.out;
}

HumanSource script_human(const kin::Workspace& ws, const std::vector<HumanTask>& tasks,
                         const Eigen::Vector2d& retreat_to, const ComposeOptions& opts) {
  HumanSim sim(ws);
  for (const auto& task : tasks) {
    std::string from = sim.ws.attachment_of(task.object);
    const kin::Surface* src = sim.ws.find_surface(from);
    if (!src) continue;  // object not on a surface; skip the task
    // walk to the object's surface, reach, pick
    Eigen::Vector2d stand = stand_point_edge(src->rect, sim.cur.pelvis, 0.4);
    sim.walk(stand, opts.go_to_steps);
    Pose op = sim.ws.tree.world_pose(task.object);
    sim.reach({op.x, op.y, op.z}, opts.pick_steps);
    sim.pick(task.object);
    // walk to the target surface, reach a free spot, place
    const kin::Surface& dst = sim.ws.surface(task.to_surface);
    Eigen::Vector2d stand2 = stand_point_edge(dst.rect, sim.cur.pelvis, 0.4);
    sim.walk(stand2, opts.go_to_steps);
    std::vector<Eigen::Vector2d> occupied;
    for (const auto& name : sim.ws.objects_on(dst.name))
      occupied.push_back(sim.ws.object_xy(name));
    Eigen::Vector2d spot = dst.rect.clamp(sim.cur.pelvis, 0.06);
    for (int tries = 0; tries < 200; ++tries) {
      bool clear = std::all_of(occupied.begin(), occupied.end(), [&](const auto& o) {
        return (spot - o).norm() >= 0.15;
      });
      if (clear) break;
      // deterministic sweep along the surface
      double shift = 0.16 * (tries + 1);
      Eigen::Vector2d cand = dst.rect.clamp(
          sim.cur.pelvis + Eigen::Vector2d(((tries % 2) ? 1 : -1) * shift,
                                           ((tries / 2) % 2 ? 1 : -1) * 0.5 * shift),
          0.06);
      spot = cand;
    }
    sim.reach({spot.x(), spot.y(), dst.z_top}, opts.place_steps);
    sim.place(task.object, dst.name);
  }
  sim.walk(retreat_to, opts.go_to_steps);
  sim.out.mode = HumanSource::Mode::kReplay;
  return sim.out;
}

HLState state_from_workspace(const kin::Workspace& ws, const MdpSpec& spec) {
  HLState s;
  const size_t L = spec.locations.size();
  s.counts.assign(spec.classes.size() * L, 0);
  for (const auto& o : ws.objects) {
    int ci = -1;
    for (size_t c = 0; c < spec.classes.size(); ++c)
      if (spec.classes[c].name == o.cls) ci = static_cast<int>(c);
    if (ci < 0) continue;
    std::string parent = ws.attachment_of(o.name);
    for (size_t l = 0; l < L; ++l)
      if (spec.locations[l] == parent)
        s.counts[static_cast<size_t>(ci) * L + l] += 1;
  }
  // discretized human position: nearest surface within its at_radius
  s.human_pos = static_cast<int>(L);
  Eigen::Vector2d pelvis = ws.human_pelvis();
  double best = 0;
  for (size_t l = 0; l < L; ++l) {
    const kin::Surface* surf = ws.find_surface(spec.locations[l]);
    if (!surf) continue;
    double d = (pelvis - surf->anchor()).norm();
    if (d <= surf->at_radius + 0.45 &&
        (s.human_pos == static_cast<int>(L) || d < best)) {
      s.human_pos = static_cast<int>(l);
      best = d;
    }
  }
  std::string carried = ws.carried_by(kin::kHumanHand);
  s.carry = -1;
  if (!carried.empty()) {
    const std::string& cls = ws.objects[static_cast<size_t>(ws.object_index(carried))].cls;
    for (size_t c = 0; c < spec.classes.size(); ++c)
      if (spec.classes[c].name == cls) s.carry = static_cast<int>(c);
  }
  return s;
}

}  // namespace dyntamp::pred
