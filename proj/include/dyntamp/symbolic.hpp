#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "dyntamp/pddl.hpp"

namespace dyntamp::sym {

// A symbolic state is a set of grounded propositions.
using State = std::set<pddl::Proposition>;

bool applicable(const State& s, const pddl::GroundedAction& a);

// STRIPS application s' = (s \ del) ∪ add; throws std::invalid_argument when
// the action is not applicable.
State exec(const State& s, const pddl::GroundedAction& a);

// Count of goal propositions absent from s.
int heuristic(const State& s, const State& goal);

bool satisfies(const State& s, const State& goal);

// An ordered grounded-action sequence with per-phase step durations.
// Actions point into the grounded action table owned by the caller (typically
// an lgp::Instance); the table must outlive the skeleton.
struct Skeleton {
  std::vector<const pddl::GroundedAction*> actions;
  std::vector<int> phase_durations;
  double cost = 0.0;
  int origin_time = 0;

  size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  int total_duration() const;
  std::string str() const;  // "move(table) pick(cup,shelf) ..."

  // Suffix from action index k, keeping per-phase durations aligned.
  Skeleton suffix(size_t k) const;
};

enum class SearchStatus { kFound, kAlreadySatisfied, kDepthBoundExceeded, kUnreachable };

struct SearchOptions {
  // <= 0 selects the default bound 4*|goal| + 2 (four actions suffice to
  // achieve one fetch-style goal proposition: move, pick, move, place).
  int depth_bound = 0;
  bool use_heuristic = true;
  // Optional per-action phase duration; when unset skeletons carry duration 0
  // per phase and the caller assigns them.
  std::function<int(const pddl::GroundedAction&)> duration_of;
};

struct SearchResult {
  SearchStatus status = SearchStatus::kUnreachable;
  std::vector<Skeleton> skeletons;  // all tie-shortest plans, lexicographic
  int expanded = 0;
  int optimal_length = -1;
};

// All minimal-length action sequences from s0 to a state satisfying `goal`,
// in deterministic lexicographic order of grounded-action names. Unit edge
// costs; guided by the goal-distance heuristic scaled to stay admissible.
SearchResult search_skeletons(const State& s0, const State& goal,
                              const std::vector<pddl::GroundedAction>& actions,
                              const SearchOptions& opts = {});

}  // namespace dyntamp::sym
