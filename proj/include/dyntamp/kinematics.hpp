#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyntamp/geometry.hpp"
#include "dyntamp/pddl.hpp"
#include "dyntamp/symbolic.hpp"

namespace dyntamp::kin {

enum class JointKind { kFixed, kPlanar, kFree6d };

// The stable tag marks support relations: a stable planar joint attaches an
// object to a surface, a stable free joint attaches it to a carrier.
struct Joint {
  JointKind kind = JointKind::kFixed;
  bool stable = false;
};

struct Frame {
  std::string name;
  int parent = -1;  // -1: world
  Joint joint;
  Pose local;
};

class Tree {
 public:
  int add_frame(const std::string& name, const std::string& parent, Joint joint,
                const Pose& local);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const std::string& name) const;  // throws on unknown frame
  const Frame& frame(int i) const { return frames_[static_cast<size_t>(i)]; }
  const Frame& frame(const std::string& name) const { return frame(index_of(name)); }
  size_t size() const { return frames_.size(); }

  Pose world_pose(int i) const;
  Pose world_pose(const std::string& name) const { return world_pose(index_of(name)); }

  void set_local(const std::string& name, const Pose& local);
  // Reattaches `name` under `new_parent`; the frame's world pose is preserved
  // by recomputing its local placement.
  void reparent(const std::string& name, const std::string& new_parent, Joint joint);

 private:
  std::vector<Frame> frames_;
  std::map<std::string, int> index_;
};

Pose forward_kinematics(const Tree& tree, const std::string& frame);

struct Surface {
  std::string name;
  Rect rect;
  double z_top = 0.72;
  double at_radius = 0.6;     // (agent-at ...) deduction radius
  double stand_offset = 0.45; // robot move-target distance from the anchor

  Eigen::Vector2d anchor() const { return rect.center; }
};

struct ObjectInfo {
  std::string name;
  std::string cls;  // object class for the prediction layer ("cup", ...)
};

// Frame names used by the workspace construction.
inline constexpr const char* kRobotBase = "robot_base";
inline constexpr const char* kGripper = "gripper";
inline constexpr const char* kHumanPelvis = "human_pelvis";
inline constexpr const char* kHumanHand = "human_hand";

// The live geometric world: kinematic tree plus surface extents and the
// object catalogue. Value-like; copies are independent simulations.
struct Workspace {
  Tree tree;
  std::vector<Surface> surfaces;
  std::vector<ObjectInfo> objects;
  double grasp_tolerance = 0.05;
  double place_inset = 0.05;   // placement margin inside surface bounds
  double at_margin = 0.05;     // shrink of at_radius for placement discs
  Eigen::Vector2d gripper_offset = Eigen::Vector2d::Zero();
  Eigen::Vector3d hand_offset = Eigen::Vector3d(0.25, 0.0, 0.15);

  const Surface* find_surface(const std::string& name) const;
  const Surface& surface(const std::string& name) const;  // throws
  int object_index(const std::string& name) const;        // -1 when unknown

  Pose robot_pose() const { return tree.world_pose(kRobotBase); }
  void set_robot_pose(const Pose& p) { tree.set_local(kRobotBase, p); }
  Eigen::Vector2d gripper_xy() const { return tree.world_pose(kGripper).xy(); }

  Eigen::Vector2d human_pelvis() const { return tree.world_pose(kHumanPelvis).xy(); }
  Eigen::Vector3d human_hand() const { return tree.world_pose(kHumanHand).xyz(); }
  void set_human(const Eigen::Vector2d& pelvis, const Eigen::Vector3d& hand);

  Eigen::Vector2d object_xy(const std::string& name) const {
    return tree.world_pose(name).xy();
  }
  // Name of the parent frame the object is attached to.
  std::string attachment_of(const std::string& object) const;
  // Objects currently attached to the named surface.
  std::vector<std::string> objects_on(const std::string& surface) const;
  // Object carried by the given carrier frame, empty if none.
  std::string carried_by(const std::string& carrier) const;
};

// Snapshot of the geometric state (robot, human, objects, attachments).
struct GeometricState {
  Pose robot;
  Eigen::Vector2d pelvis = Eigen::Vector2d::Zero();
  Eigen::Vector3d hand = Eigen::Vector3d::Zero();
  std::map<std::string, Pose> object_world;
  std::map<std::string, std::string> attachment;
  int t = 0;
};

GeometricState snapshot(const Workspace& ws, int t = 0);

struct SwitchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GraspToleranceError : SwitchError {
  using SwitchError::SwitchError;
};
struct AttachmentError : SwitchError {
  using SwitchError::SwitchError;
};

// Predicate deduction from the kinematic tree:
//   (on X Y)        stable planar joint from X to surface Y
//   (agent-at L)    |robot xy - anchor(L)| <= at_radius(L)
//   (human-at L)    same rule on the pelvis, when the predicate is declared
//   (agent-carry X) stable free joint from the gripper to X
//   (human-carry X) stable free joint from the human hand to X
//   (agent-free)    no agent-carry proposition emitted
// Only predicates declared in the domain are emitted.
sym::State deduce_state(const Workspace& ws, const pddl::Domain& domain);

// Kinematic switch for pick/place actions: pick reparents the object from its
// surface to the gripper (stable free joint frozen at the contact offset),
// place reparents it back to the surface (stable planar joint at the release
// pose, z snapped to the surface top).
void apply_switch(Workspace& ws, const pddl::GroundedAction& action);

}  // namespace dyntamp::kin
