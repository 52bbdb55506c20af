#include "doctest.h"
#include "dyntamp/ranking.hpp"
#include "test_world.hpp"

using namespace dyntamp;
using testworld::make_world;

namespace {

sym::Skeleton two_object_plan(const testworld::World& w, const std::string& first,
                              const std::string& first_loc, const std::string& second,
                              const std::string& second_loc) {
  sym::Skeleton sk;
  sk.actions = {&w.action("move(" + first_loc + ")"),
                &w.action("pick(" + first + "," + first_loc + ")"),
                &w.action("move(table)"),
                &w.action("place(" + first + ",table)"),
                &w.action("move(" + second_loc + ")"),
                &w.action("pick(" + second + "," + second_loc + ")"),
                &w.action("move(table)"),
                &w.action("place(" + second + ",table)")};
  sk.phase_durations = {30, 5, 30, 5, 30, 5, 30, 5};
  return sk;
}

}  // namespace

TEST_CASE("rank_skeletons: nearer-first ordering wins") {
  auto w = make_world({{"cup_green", "big_shelf", 0.0, 0.05},
                       {"plate_blue", "small_shelf", 0.0, 0.04}});
  // robot starts near the small shelf, so fetching the plate first shortens
  // the interpolation path; tight standing offsets keep the pick approach
  // legs symmetric between the two orderings
  for (auto& s : w.ws.surfaces) s.stand_offset = 0.15;
  w.ws.set_robot_pose(Pose{-0.8, -0.9, 0, 0});
  opt::SolverConfig cfg;

  sym::Skeleton near_first =
      two_object_plan(w, "plate_blue", "small_shelf", "cup_green", "big_shelf");
  sym::Skeleton far_first =
      two_object_plan(w, "cup_green", "big_shelf", "plate_blue", "small_shelf");

  auto ranked = sym::rank_skeletons({far_first, near_first}, w.ws, cfg);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].actions[1]->display() == "pick(plate_blue,small_shelf)");
  CHECK(ranked[0].cost < ranked[1].cost);
  CHECK(ranked[0].cost > 0);
}

TEST_CASE("rank_skeletons: single skeleton returned unchanged") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  opt::SolverConfig cfg;
  sym::Skeleton sk;
  sk.actions = {&w.action("move(big_shelf)"), &w.action("pick(cup_green,big_shelf)"),
                &w.action("move(table)"), &w.action("place(cup_green,table)")};
  sk.phase_durations = {30, 5, 30, 5};
  auto ranked = sym::rank_skeletons({sk}, w.ws, cfg);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0].str() == sk.str());
}

TEST_CASE("rank_skeletons: stable order for identical geometry") {
  // two different objects at the same position on the same shelf give
  // identical interpolation costs; the incoming order must be preserved
  auto w = make_world({{"cup_green", "big_shelf", 0.1, 0.0},
                       {"cup_red", "big_shelf", 0.1, 0.0}});
  opt::SolverConfig cfg;
  sym::Skeleton a, b;
  a.actions = {&w.action("move(big_shelf)"), &w.action("pick(cup_green,big_shelf)"),
               &w.action("move(table)"), &w.action("place(cup_green,table)")};
  a.phase_durations = {30, 5, 30, 5};
  b.actions = {&w.action("move(big_shelf)"), &w.action("pick(cup_red,big_shelf)"),
               &w.action("move(table)"), &w.action("place(cup_red,table)")};
  b.phase_durations = {30, 5, 30, 5};

  auto ranked = sym::rank_skeletons({a, b}, w.ws, cfg);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].cost == doctest::Approx(ranked[1].cost));
  CHECK(ranked[0].actions[1]->display() == "pick(cup_green,big_shelf)");

  auto reversed = sym::rank_skeletons({b, a}, w.ws, cfg);
  CHECK(reversed[0].actions[1]->display() == "pick(cup_red,big_shelf)");
}

TEST_CASE("interpolation cost matches the shared quadratic objective") {
  auto w = make_world({{"cup_green", "big_shelf", -0.2, 0.05}});
  opt::SolverConfig cfg;
  sym::Skeleton sk;
  sk.actions = {&w.action("move(big_shelf)"), &w.action("pick(cup_green,big_shelf)"),
                &w.action("move(table)"), &w.action("place(cup_green,table)")};
  sk.phase_durations = {30, 5, 30, 5};
  double cost = sym::interpolation_cost(sk, w.ws, cfg);

  opt::NlpProblem p = opt::build_nlp(sk, w.ws, {}, 0, cfg);
  opt::Waypoints X = opt::interpolate_keyframes(p);
  CHECK(cost == doctest::Approx(
                    opt::quadratic_path_cost(X, p.x_start, cfg.dt, cfg.w_v, cfg.w_a)));
}
