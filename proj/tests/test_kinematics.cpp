#include <cmath>

#include "doctest.h"
#include "dyntamp/kinematics.hpp"
#include "dyntamp/symbolic.hpp"
#include "test_world.hpp"

using namespace dyntamp;
using testworld::make_world;

TEST_CASE("forward kinematics: identity, one rotation, chained translations") {
  kin::Tree tree;
  tree.add_frame("a", "world", {kin::JointKind::kFixed, false}, Pose{});
  CHECK(kin::forward_kinematics(tree, "a").x == doctest::Approx(0.0));
  CHECK(kin::forward_kinematics(tree, "a").y == doctest::Approx(0.0));

  // object on a gripper at offset (0.1, 0) with the base at (2, 3, pi/2)
  tree.add_frame("base", "world", {kin::JointKind::kPlanar, false},
                 Pose{2, 3, 0, M_PI / 2});
  tree.add_frame("tool", "base", {kin::JointKind::kFixed, false}, Pose{0.1, 0, 0, 0});
  Pose tool = kin::forward_kinematics(tree, "tool");
  CHECK(tool.x == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tool.y == doctest::Approx(3.1).epsilon(1e-12));

  tree.add_frame("t1", "world", {kin::JointKind::kFixed, false}, Pose{1, 0, 0, 0});
  tree.add_frame("t2", "t1", {kin::JointKind::kFixed, false}, Pose{0, 1, 0, 0});
  Pose t2 = kin::forward_kinematics(tree, "t2");
  CHECK(t2.x == doctest::Approx(1.0));
  CHECK(t2.y == doctest::Approx(1.0));

  CHECK_THROWS_AS(kin::forward_kinematics(tree, "nope"), std::invalid_argument);
}

TEST_CASE("forward kinematics: query order independence") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  Pose a = w.ws.tree.world_pose("cup_green");
  (void)w.ws.tree.world_pose(kin::kGripper);
  (void)w.ws.tree.world_pose("table");
  Pose b = w.ws.tree.world_pose("cup_green");
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.z == b.z);
}

TEST_CASE("tree: reparent preserves the world pose and rejects cycles") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  Pose before = w.ws.tree.world_pose("cup_green");
  w.ws.tree.reparent("cup_green", kin::kGripper, {kin::JointKind::kFree6d, true});
  Pose after = w.ws.tree.world_pose("cup_green");
  CHECK(after.x == doctest::Approx(before.x).epsilon(1e-12));
  CHECK(after.y == doctest::Approx(before.y).epsilon(1e-12));
  CHECK(after.z == doctest::Approx(before.z).epsilon(1e-12));
  CHECK_THROWS_AS(w.ws.tree.reparent(kin::kRobotBase, "cup_green",
                                     {kin::JointKind::kFixed, false}),
                  std::invalid_argument);
}

TEST_CASE("deduce_state: on / at / carry rules") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  sym::State s = kin::deduce_state(w.ws, w.domain);
  CHECK(s.count({"on", {"cup_green", "big_shelf"}}) == 1);
  CHECK(s.count({"agent-free", {}}) == 1);

  // robot 0.5 m from the table anchor with radius 1.0
  w.ws.set_robot_pose(Pose{2.2 - 0.5, 0, 0, 0});
  s = kin::deduce_state(w.ws, w.domain);
  CHECK(s.count({"agent-at", {"table"}}) == 1);
  CHECK(s.count({"agent-at", {"big_shelf"}}) == 0);

  // object carried by the human hand: human-carry, no (on ...)
  w.ws.tree.reparent("cup_green", kin::kHumanHand, {kin::JointKind::kFree6d, true});
  s = kin::deduce_state(w.ws, w.domain);
  CHECK(s.count({"human-carry", {"cup_green"}}) == 1);
  for (const auto& p : s) CHECK(p.pred != "on");
  CHECK(s.count({"agent-free", {}}) == 1);

  // the inert zero-arity predicate is never deduced
  CHECK(s.count({"agent-avoid-human", {}}) == 0);
}

TEST_CASE("deduce_state: exactly one support relation per object") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.0},
                         {"cup_red", "big_shelf", 0.2, 0.0},
                         {"plate_blue", "small_shelf", 0.0, 0.0}});
    // randomly move one object to the gripper or the human hand
    int pickidx = static_cast<int>(rng.uniform_int(0, 2));
    const std::string obj = w.ws.objects[static_cast<size_t>(pickidx)].name;
    double roll = rng.uniform01();
    if (roll < 0.4)
      w.ws.tree.reparent(obj, kin::kGripper, {kin::JointKind::kFree6d, true});
    else if (roll < 0.8)
      w.ws.tree.reparent(obj, kin::kHumanHand, {kin::JointKind::kFree6d, true});
    sym::State s = kin::deduce_state(w.ws, w.domain);
    for (const auto& o : w.ws.objects) {
      int supports = 0;
      for (const auto& p : s) {
        if (p.args.empty() || p.args[0] != o.name) continue;
        if (p.pred == "on" || p.pred == "agent-carry" || p.pred == "human-carry")
          ++supports;
      }
      CHECK(supports == 1);
    }
  }
}

TEST_CASE("apply_switch: pick reparents onto the gripper") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  Eigen::Vector2d obj = w.ws.object_xy("cup_green");
  // gripper 0.02 m from the object: within the 0.05 m tolerance
  w.ws.set_robot_pose(Pose{obj.x() + 0.02, obj.y(), 0, 0});
  kin::apply_switch(w.ws, w.action("pick(cup_green,big_shelf)"));
  CHECK(w.ws.attachment_of("cup_green") == kin::kGripper);
  CHECK(w.ws.carried_by(kin::kGripper) == "cup_green");
  // grasp offset frozen at contact: the object does not jump
  CHECK((w.ws.object_xy("cup_green") - obj).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("apply_switch: place reattaches to the surface and deduces (on ...)") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  Eigen::Vector2d obj = w.ws.object_xy("cup_green");
  w.ws.set_robot_pose(Pose{obj.x(), obj.y(), 0, 0});
  kin::apply_switch(w.ws, w.action("pick(cup_green,big_shelf)"));
  w.ws.set_robot_pose(Pose{2.3, 0.1, 0, 0});  // onto the table
  kin::apply_switch(w.ws, w.action("place(cup_green,table)"));
  CHECK(w.ws.attachment_of("cup_green") == "table");
  sym::State s = kin::deduce_state(w.ws, w.domain);
  CHECK(s.count({"on", {"cup_green", "table"}}) == 1);
  CHECK(s.count({"agent-free", {}}) == 1);
  // z snapped onto the surface plane
  CHECK(w.ws.tree.world_pose("cup_green").z == doctest::Approx(0.72));
}

TEST_CASE("apply_switch: error paths") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});

  // grasp tolerance violated (robot far away)
  CHECK_THROWS_AS(kin::apply_switch(w.ws, w.action("pick(cup_green,big_shelf)")),
                  kin::GraspToleranceError);

  // picking an object the human is carrying: wrong parent
  w.ws.tree.reparent("cup_green", kin::kHumanHand, {kin::JointKind::kFree6d, true});
  CHECK_THROWS_AS(kin::apply_switch(w.ws, w.action("pick(cup_green,big_shelf)")),
                  kin::AttachmentError);

  // placing an object the robot does not carry
  CHECK_THROWS_AS(kin::apply_switch(w.ws, w.action("place(cup_green,table)")),
                  kin::AttachmentError);

  // move is not a switch
  CHECK_THROWS_AS(kin::apply_switch(w.ws, w.action("move(table)")),
                  std::invalid_argument);
}

TEST_CASE("differential consistency: deduce after switch equals symbolic exec") {
  Rng rng(2024);
  int applications = 0;
  while (applications < 60) {
    auto w = make_world({{"cup_green", "big_shelf", -0.25, 0.05},
                         {"cup_red", "big_shelf", 0.25, -0.05},
                         {"plate_blue", "small_shelf", -0.1, 0.04},
                         {"plate_red", "small_shelf", 0.2, -0.04}});
    // scatter: maybe the human carries one object
    if (rng.uniform01() < 0.3) {
      int oi = static_cast<int>(rng.uniform_int(0, 3));
      w.ws.tree.reparent(w.ws.objects[static_cast<size_t>(oi)].name, kin::kHumanHand,
                         {kin::JointKind::kFree6d, true});
    }
    // choose a random pick or place with geometrically valid preconditions
    bool do_pick = rng.uniform01() < 0.5;
    if (do_pick) {
      std::vector<std::string> candidates;
      for (const auto& o : w.ws.objects)
        if (w.ws.find_surface(w.ws.attachment_of(o.name))) candidates.push_back(o.name);
      if (candidates.empty()) continue;
      const std::string obj = candidates[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(candidates.size()) - 1))];
      const std::string loc = w.ws.attachment_of(obj);
      Eigen::Vector2d oxy = w.ws.object_xy(obj);
      w.ws.set_robot_pose(Pose{oxy.x() + rng.uniform(-0.03, 0.03),
                               oxy.y() + rng.uniform(-0.03, 0.03), 0, 0});
      sym::State before = kin::deduce_state(w.ws, w.domain);
      const auto& action = w.action("pick(" + obj + "," + loc + ")");
      if (!sym::applicable(before, action)) continue;
      kin::apply_switch(w.ws, action);
      CHECK(kin::deduce_state(w.ws, w.domain) == sym::exec(before, action));
    } else {
      // give the robot an object first
      std::vector<std::string> candidates;
      for (const auto& o : w.ws.objects)
        if (w.ws.find_surface(w.ws.attachment_of(o.name))) candidates.push_back(o.name);
      if (candidates.empty()) continue;
      const std::string obj = candidates[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(candidates.size()) - 1))];
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
      CHECK(kin::deduce_state(w.ws, w.domain) == sym::exec(before, action));
    }
    ++applications;
  }
}
