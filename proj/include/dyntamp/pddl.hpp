#pragma once

#include <compare>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dyntamp::pddl {

// Error with source position, formatted as "line:col: message".
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

// A grounded proposition, e.g. (on cup_green table).
struct Proposition {
  std::string pred;
  std::vector<std::string> args;

  auto operator<=>(const Proposition&) const = default;
  std::string str() const;
};

struct PredicateSchema {
  std::string name;
  std::vector<std::pair<std::string, std::string>> params;  // (?var, type)

  bool operator==(const PredicateSchema&) const = default;
};

// Signed literal inside an action schema. Arguments may be schema variables,
// declared constants, or the wildcard "?*" (negated effects only).
struct Literal {
  bool negated = false;
  bool at_start = false;  // start-scoped precondition
  std::string pred;
  std::vector<std::string> args;

  bool operator==(const Literal&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<Literal> preconditions;
  std::vector<Literal> effects;

  bool operator==(const ActionSchema&) const = default;
};

struct Domain {
  std::string name;
  std::vector<std::string> requirements;
  std::vector<std::string> types;
  std::vector<std::pair<std::string, std::string>> constants;  // (name, type)
  std::vector<PredicateSchema> predicates;
  std::vector<ActionSchema> actions;

  bool operator==(const Domain&) const = default;

  const PredicateSchema* find_predicate(const std::string& name) const;
  const ActionSchema* find_action(const std::string& name) const;
  std::optional<std::string> constant_type(const std::string& name) const;
  std::vector<std::string> constants_of_type(const std::string& type) const;
};

struct GroundedAction {
  std::string schema;
  std::vector<std::string> args;
  // sorted, duplicate-free
  std::vector<Proposition> pre_pos;
  std::vector<Proposition> pre_neg;
  std::vector<Proposition> add;
  std::vector<Proposition> del;

  std::string display() const;  // "pick(cup_green,big_shelf)"
};

Domain parse_domain(std::string_view text);

// Parses ":init" and ":goal" against an already-parsed domain.
std::pair<std::set<Proposition>, std::set<Proposition>> parse_problem(
    std::string_view text, const Domain& domain);

// Cartesian grounding over type-compatible constants; wildcard deletes are
// expanded against all constants of the wildcard slot's type.
std::vector<GroundedAction> ground_actions(const Domain& domain);

// Canonical re-emission; parse_domain(to_pddl(d)) == d.
std::string to_pddl(const Domain& domain);

}  // namespace dyntamp::pddl
