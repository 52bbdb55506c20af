#include "dyntamp/kinematics.hpp"

#include <algorithm>

namespace dyntamp::kin {

int Tree::add_frame(const std::string& name, const std::string& parent,
                    Joint joint, const Pose& local) {
  if (index_.count(name)) throw std::invalid_argument("duplicate frame: " + name);
  int parent_idx = -1;
  if (!parent.empty() && parent != "world") parent_idx = index_of(parent);
  int id = static_cast<int>(frames_.size());
  frames_.push_back({name, parent_idx, joint, local});
  index_[name] = id;
  return id;
}

int Tree::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown frame: " + name);
  return it->second;
}

Pose Tree::world_pose(int i) const {
  const Frame& f = frames_[static_cast<size_t>(i)];
  if (f.parent < 0) return f.local;
  return world_pose(f.parent).compose(f.local);
}

void Tree::set_local(const std::string& name, const Pose& local) {
  frames_[static_cast<size_t>(index_of(name))].local = local;
}

void Tree::reparent(const std::string& name, const std::string& new_parent,
                    Joint joint) {
  int idx = index_of(name);
  int parent_idx = -1;
  if (!new_parent.empty() && new_parent != "world") parent_idx = index_of(new_parent);
  // reject cycles: the new parent may not be a descendant of `name`
  for (int a = parent_idx; a >= 0; a = frames_[static_cast<size_t>(a)].parent)
    if (a == idx) throw std::invalid_argument("reparent would create a cycle: " + name);
  Pose world = world_pose(idx);
  Pose parent_world = parent_idx >= 0 ? world_pose(parent_idx) : Pose{};
  Frame& f = frames_[static_cast<size_t>(idx)];
  f.parent = parent_idx;
  f.joint = joint;
  f.local = parent_world.inverse().compose(world);
}

Pose forward_kinematics(const Tree& tree, const std::string& frame) {
  return tree.world_pose(frame);
}

const Surface* Workspace::find_surface(const std::string& name) const {
  for (const auto& s : surfaces)
    if (s.name == name) return &s;
  return nullptr;
}

const Surface& Workspace::surface(const std::string& name) const {
  const Surface* s = find_surface(name);
  if (!s) throw std::invalid_argument("unknown surface: " + name);
  return *s;
}

int Workspace::object_index(const std::string& name) const {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i].name == name) return static_cast<int>(i);
  return -1;
}

void Workspace::set_human(const Eigen::Vector2d& pelvis, const Eigen::Vector3d& hand) {
  tree.set_local(kHumanPelvis, Pose{pelvis.x(), pelvis.y(), 0, 0});
  // hand frame is a child of the pelvis (yaw 0), local = world - pelvis
  tree.set_local(kHumanHand,
                 Pose{hand.x() - pelvis.x(), hand.y() - pelvis.y(), hand.z(), 0});
}

std::string Workspace::attachment_of(const std::string& object) const {
  const Frame& f = tree.frame(object);
  if (f.parent < 0) return "world";
  return tree.frame(f.parent).name;
}

std::vector<std::string> Workspace::objects_on(const std::string& surface) const {
  std::vector<std::string> out;
  for (const auto& o : objects) {
    const Frame& f = tree.frame(o.name);
    if (f.parent >= 0 && tree.frame(f.parent).name == surface &&
        f.joint.kind == JointKind::kPlanar && f.joint.stable)
      out.push_back(o.name);
  }
  return out;
}

std::string Workspace::carried_by(const std::string& carrier) const {
  for (const auto& o : objects) {
    const Frame& f = tree.frame(o.name);
    if (f.parent >= 0 && tree.frame(f.parent).name == carrier &&
        f.joint.kind == JointKind::kFree6d && f.joint.stable)
      return o.name;
  }
  return "";
}

GeometricState snapshot(const Workspace& ws, int t) {
  GeometricState g;
  g.robot = ws.robot_pose();
  g.pelvis = ws.human_pelvis();
  g.hand = ws.human_hand();
  for (const auto& o : ws.objects) {
    g.object_world[o.name] = ws.tree.world_pose(o.name);
    g.attachment[o.name] = ws.attachment_of(o.name);
  }
  g.t = t;
  return g;
}

sym::State deduce_state(const Workspace& ws, const pddl::Domain& domain) {
  sym::State out;
  auto declared = [&](const char* name) { return domain.find_predicate(name) != nullptr; };

  bool agent_carries = false;
  for (const auto& o : ws.objects) {
    const Frame& f = ws.tree.frame(o.name);
    if (f.parent < 0) continue;
    const Frame& parent = ws.tree.frame(f.parent);
    if (f.joint.kind == JointKind::kPlanar && f.joint.stable &&
        ws.find_surface(parent.name)) {
      if (declared("on")) out.insert({"on", {o.name, parent.name}});
    } else if (f.joint.kind == JointKind::kFree6d && f.joint.stable) {
      if (parent.name == kGripper) {
        agent_carries = true;
        if (declared("agent-carry")) out.insert({"agent-carry", {o.name}});
      } else if (parent.name == kHumanHand) {
        if (declared("human-carry")) out.insert({"human-carry", {o.name}});
      }
    }
  }

  Eigen::Vector2d robot_xy = ws.robot_pose().xy();
  Eigen::Vector2d pelvis = ws.human_pelvis();
  for (const auto& s : ws.surfaces) {
    if (declared("agent-at") && (robot_xy - s.anchor()).norm() <= s.at_radius)
      out.insert({"agent-at", {s.name}});
    if (declared("human-at") && (pelvis - s.anchor()).norm() <= s.at_radius)
      out.insert({"human-at", {s.name}});
  }

  if (!agent_carries && declared("agent-free")) out.insert({"agent-free", {}});
  return out;
}

void apply_switch(Workspace& ws, const pddl::GroundedAction& action) {
  if (action.schema != "pick" && action.schema != "place")
    throw std::invalid_argument("apply_switch: not a pick/place action: " +
                                action.display());
  if (action.args.size() != 2)
    throw std::invalid_argument("apply_switch: expected (object, location) args");
  const std::string& obj = action.args[0];
  const std::string& loc = action.args[1];
  if (ws.object_index(obj) < 0) throw AttachmentError("unknown object: " + obj);
  ws.surface(loc);

  if (action.schema == "pick") {
    if (ws.attachment_of(obj) != loc)
      throw AttachmentError("object " + obj + " not attached to expected parent " +
                            loc + " (attached to " + ws.attachment_of(obj) + ")");
    double d = (ws.gripper_xy() - ws.object_xy(obj)).norm();
    if (d > ws.grasp_tolerance)
      throw GraspToleranceError(strf("grasp tolerance violated for %s: %.3f m > %.3f m",
                                     obj.c_str(), d, ws.grasp_tolerance));
    ws.tree.reparent(obj, kGripper, {JointKind::kFree6d, true});
  } else {
    if (ws.attachment_of(obj) != kGripper)
      throw AttachmentError("object " + obj + " not carried by the robot (attached to " +
                            ws.attachment_of(obj) + ")");
    ws.tree.reparent(obj, loc, {JointKind::kPlanar, true});
    // release pose keeps world xy; z snaps onto the surface plane
    Pose local = ws.tree.frame(obj).local;
    local.z = 0;
    ws.tree.set_local(obj, local);
  }
}

}  // namespace dyntamp::kin
