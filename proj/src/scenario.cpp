#include <algorithm>
#include <cmath>
#include <fstream>

#include "dyntamp/harness.hpp"
#include "dyntamp/util.hpp"
#include "json.hpp"

namespace dyntamp::harness {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& msg) {
  throw SchemaError(path + ": " + msg);
}

const json& field(const json& j, const char* key, const std::string& at) {
  if (!j.contains(key)) schema_fail(at + "." + key, "missing field");
  return j.at(key);
}

Eigen::Vector2d vec2(const json& j, const std::string& at) {
  if (!j.is_array() || j.size() != 2) schema_fail(at, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

lgp::Instance Scenario::instance() const {
  return lgp::Instance{domain, actions, goal, workspace, cfg};
}

Scenario load_scenario(const std::string& path) {
  Scenario scn;
  scn.path = path;
  const std::string dir = dirname_of(path);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    schema_fail(path, std::string("invalid JSON: ") + e.what());
  }

  scn.name = j.value("name", std::string("scenario"));
  const std::string domain_path = join_path(dir, field(j, "domain", "scenario").get<std::string>());
  const std::string problem_path = join_path(dir, field(j, "problem", "scenario").get<std::string>());
  scn.domain = pddl::parse_domain(read_file(domain_path));
  auto [init, goal] = pddl::parse_problem(read_file(problem_path), scn.domain);
  scn.init_declared = init;
  scn.goal = goal;
  scn.actions = pddl::ground_actions(scn.domain);

  // ---- geometry
  const json& geo = field(j, "geometry", "scenario");
  kin::Workspace& ws = scn.workspace;
  const json& surfaces = field(geo, "surfaces", "scenario.geometry");
  if (!surfaces.is_array() || surfaces.empty())
    schema_fail("scenario.geometry.surfaces", "expected a non-empty array");
  for (size_t i = 0; i < surfaces.size(); ++i) {
    const std::string at = strf("scenario.geometry.surfaces[%zu]", i);
    const json& sj = surfaces[i];
    kin::Surface s;
    s.name = field(sj, "name", at).get<std::string>();
    if (!scn.domain.constant_type(s.name))
      schema_fail(at + ".name", "dangling reference: '" + s.name +
                                    "' is not a domain constant");
    s.rect.center = vec2(field(sj, "center", at), at + ".center");
    s.rect.half = vec2(field(sj, "half_extents", at), at + ".half_extents");
    s.z_top = sj.value("z_top", 0.72);
    s.at_radius = sj.value("at_radius", 0.6);
    s.stand_offset = sj.value("stand_offset", 0.45);
    ws.surfaces.push_back(s);
    ws.tree.add_frame(s.name, "world", {kin::JointKind::kFixed, false},
                      Pose{s.rect.center.x(), s.rect.center.y(), s.z_top, 0});
  }

  const json& robot = field(geo, "robot", "scenario.geometry");
  {
    const json& start = field(robot, "start", "scenario.geometry.robot");
    if (!start.is_array() || start.size() != 3)
      schema_fail("scenario.geometry.robot.start", "expected [x, y, yaw]");
    ws.tree.add_frame(kin::kRobotBase, "world", {kin::JointKind::kPlanar, false},
                      Pose{start[0].get<double>(), start[1].get<double>(), 0,
                           start[2].get<double>()});
    if (robot.contains("gripper_offset"))
      ws.gripper_offset = vec2(robot["gripper_offset"], "scenario.geometry.robot.gripper_offset");
    ws.grasp_tolerance = robot.value("grasp_tolerance", 0.05);
    ws.tree.add_frame(kin::kGripper, kin::kRobotBase, {kin::JointKind::kFixed, false},
                      Pose{ws.gripper_offset.x(), ws.gripper_offset.y(), 0.8, 0});
  }

  const json& humanj = field(geo, "human", "scenario.geometry");
  {
    Eigen::Vector2d start = vec2(field(humanj, "start", "scenario.geometry.human"),
                                 "scenario.geometry.human.start");
    if (humanj.contains("hand_offset")) {
      const json& ho = humanj["hand_offset"];
      if (!ho.is_array() || ho.size() != 3)
        schema_fail("scenario.geometry.human.hand_offset", "expected [x, y, z]");
      ws.hand_offset = {ho[0].get<double>(), ho[1].get<double>(), ho[2].get<double>()};
    }
    ws.tree.add_frame(kin::kHumanPelvis, "world", {kin::JointKind::kPlanar, false},
                      Pose{start.x(), start.y(), 0, 0});
    ws.tree.add_frame(kin::kHumanHand, kin::kHumanPelvis, {kin::JointKind::kFree6d, false},
                      Pose{ws.hand_offset.x(), ws.hand_offset.y(), ws.hand_offset.z(), 0});
  }

  const json& objects = field(geo, "objects", "scenario.geometry");
  for (size_t i = 0; i < objects.size(); ++i) {
    const std::string at = strf("scenario.geometry.objects[%zu]", i);
    const json& oj = objects[i];
    kin::ObjectInfo info;
    info.name = field(oj, "name", at).get<std::string>();
    auto ctype = scn.domain.constant_type(info.name);
    if (!ctype)
      schema_fail(at + ".name",
                  "dangling reference: '" + info.name + "' is not a domain constant");
    info.cls = oj.value("class", info.name.substr(0, info.name.find('_')));
    std::string surface = field(oj, "surface", at).get<std::string>();
    if (!std::any_of(ws.surfaces.begin(), ws.surfaces.end(),
                     [&](const kin::Surface& s) { return s.name == surface; }))
      schema_fail(at + ".surface", "dangling reference: unknown surface '" + surface + "'");
    Eigen::Vector2d off = oj.contains("offset") ? vec2(oj["offset"], at + ".offset")
                                                : Eigen::Vector2d::Zero();
    ws.objects.push_back(info);
    ws.tree.add_frame(info.name, surface, {kin::JointKind::kPlanar, true},
                      Pose{off.x(), off.y(), 0, 0});
  }

  // goal propositions must reference physically present objects/surfaces
  for (const auto& g : scn.goal) {
    if (g.pred != "on") continue;
    if (ws.object_index(g.args[0]) < 0)
      schema_fail("scenario", "goal object '" + g.args[0] + "' has no geometry");
    if (!ws.find_surface(g.args[1]))
      schema_fail("scenario", "goal surface '" + g.args[1] + "' has no geometry");
  }

  // ---- human source
  const json& hs = field(j, "human_source", "scenario");
  scn.human.mode = field(hs, "mode", "scenario.human_source").get<std::string>();
  if (scn.human.mode != "replay" && scn.human.mode != "degraded" &&
      scn.human.mode != "hierarchical")
    schema_fail("scenario.human_source.mode",
                "expected replay | degraded | hierarchical, got '" + scn.human.mode + "'");
  if (scn.human.mode == "hierarchical") {
    scn.human.model = join_path(dir, field(hs, "model", "scenario.human_source").get<std::string>());
    std::ifstream probe(scn.human.model);
    if (!probe) schema_fail("scenario.human_source.model", "file not found: " + scn.human.model);
    if (hs.contains("goal_counts"))
      for (auto it = hs["goal_counts"].begin(); it != hs["goal_counts"].end(); ++it)
        scn.human.goal_counts[it.key()] = it.value().get<int>();
  } else {
    scn.human.trajectory =
        join_path(dir, field(hs, "trajectory", "scenario.human_source").get<std::string>());
    std::ifstream probe(scn.human.trajectory);
    if (!probe)
      schema_fail("scenario.human_source.trajectory", "file not found: " + scn.human.trajectory);
    scn.human.fraction = hs.value("fraction", 0.0);
  }

  // ---- run configuration
  scn.default_mode = j.value("mode", std::string("dynamic")) == "single"
                         ? lgp::Mode::kSingle
                         : lgp::Mode::kDynamic;
  scn.cfg.trigger_period = j.value("trigger_period", 10);
  if (scn.cfg.trigger_period < 1)
    schema_fail("scenario.trigger_period", "must be >= 1");
  scn.cfg.timeout_steps = j.value("timeout_steps", 0);
  scn.cfg.depth_bound = j.value("depth_bound", 0);
  if (j.contains("solver")) {
    const json& sj = j["solver"];
    opt::SolverConfig& sc = scn.cfg.solver;
    sc.r_safe = sj.value("r_safe", sc.r_safe);
    sc.w_v = sj.value("w_v", sc.w_v);
    sc.w_a = sj.value("w_a", sc.w_a);
    sc.stages = sj.value("stages", sc.stages);
    sc.max_gn_iters = sj.value("max_gn_iters", sc.max_gn_iters);
    sc.penalty0 = sj.value("penalty0", sc.penalty0);
  }
  if (j.contains("durations")) {
    const json& dj = j["durations"];
    scn.cfg.durations.move = dj.value("move", 30);
    scn.cfg.durations.pick = dj.value("pick", 5);
    scn.cfg.durations.place = dj.value("place", 5);
  }
  return scn;
}

std::set<std::string> goal_objects_of(const sym::State& goal) {
  std::set<std::string> out;
  for (const auto& g : goal)
    if (g.pred == "on" && !g.args.empty()) out.insert(g.args[0]);
  return out;
}

double task_iou(const std::set<std::string>& human_moved,
                const std::set<std::string>& goal_objects) {
  std::set<std::string> uni = human_moved;
  uni.insert(goal_objects.begin(), goal_objects.end());
  if (uni.empty()) return 1.0;  // two empty tasks overlap perfectly
  size_t inter = 0;
  for (const auto& o : human_moved) inter += goal_objects.count(o);
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

RunRecord run_scenario(const Scenario& scn, lgp::Mode mode, uint64_t seed) {
  // assemble the actual human and the planner-visible prediction
  pred::HumanSource actual;
  std::vector<Eigen::Vector2d> prediction;
  if (scn.human.mode == "hierarchical") {
    pred::IrlModel model = pred::IrlModel::from_json(read_file(scn.human.model));
    pred::Mdp mdp(model.spec, {pred::state_from_workspace(scn.workspace, model.spec)});
    // goal: required counts at the first location (the table) per class
    const auto goal_counts = scn.human.goal_counts;
    const size_t L = model.spec.locations.size();
    auto goal_fn = [&, goal_counts, L](const pred::HLState& s) {
      for (size_t c = 0; c < model.spec.classes.size(); ++c) {
        auto it = goal_counts.find(model.spec.classes[c].name);
        if (it == goal_counts.end()) continue;
        if (s.counts[c * L + 0] < it->second) return false;
      }
      return true;
    };
    actual = pred::compose_prediction(model, mdp, scn.workspace, goal_fn, seed);
  } else {
    actual = pred::load_trajectory_csv(scn.human.trajectory);
    actual.events = pred::events_from_carried(actual.poses, scn.workspace.objects);
  }

  if (scn.human.mode == "degraded") {
    pred::HumanSource degraded = pred::degrade_ground_truth(actual, scn.human.fraction, seed);
    prediction = degraded.pelvis_track();
  } else {
    prediction = actual.pelvis_track();
  }

  lgp::Instance inst = scn.instance();
  // initial human placement affects the deduced start state
  inst.workspace.set_human(actual.poses[0].pelvis, actual.poses[0].hand);
  if (actual.poses[0].carried >= 0 &&
      actual.poses[0].carried < static_cast<int>(inst.workspace.objects.size())) {
    const std::string& obj =
        inst.workspace.objects[static_cast<size_t>(actual.poses[0].carried)].name;
    inst.workspace.tree.reparent(obj, kin::kHumanHand, {kin::JointKind::kFree6d, true});
  }

  lgp::RunReport report = lgp::run_dynamic(inst, actual, prediction, mode);

  RunRecord rec;
  rec.scenario = scn.name;
  rec.mode = mode == lgp::Mode::kSingle ? "single" : "dynamic";
  rec.seed = seed;

  Metrics& m = rec.metrics;
  m.success = report.success;
  m.steps = report.success ? report.end_step : report.sim_steps;
  m.sim_seconds = m.steps * scn.cfg.solver.dt;
  m.replan_count = report.replan_count;
  m.reopt_count = report.reopt_count;
  m.solved_nlp_count = report.nlp_solve_count;
  m.initial_skeleton_length = report.initial_skeleton_length;
  m.path_length = report.robot_path_length;
  m.min_clearance = report.min_clearance;
  m.safety_violations = report.safety_violations;
  m.human_objects = static_cast<int>(report.human_picked.size());
  m.robot_objects = static_cast<int>(report.robot_picked.size());
  m.task_iou = task_iou(report.human_picked, goal_objects_of(scn.goal));

  int solo = lgp::human_alone_completion_step(inst, actual);
  if (solo > 0 && report.success && report.end_step > 0) {
    m.time_reduction_sim = static_cast<double>(solo) / report.end_step;
    double collab_wall = report.end_step * scn.cfg.solver.dt + report.planning_wall_s;
    m.time_reduction_wall = (solo * scn.cfg.solver.dt) / collab_wall;
  }

  if (!report.replan_symbolic_times.empty()) {
    double sum = 0;
    for (double v : report.replan_symbolic_times) sum += v;
    m.symbolic_plan_time_mean = sum / static_cast<double>(report.replan_symbolic_times.size());
  } else if (!report.triggers.empty()) {
    m.symbolic_plan_time_mean = report.triggers.front().symbolic_s;
  }
  m.total_solution_time = report.planning_wall_s;

  rec.report = std::move(report);
  return rec;
}

}  // namespace dyntamp::harness
