#include "dyntamp/symbolic.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace dyntamp::sym {

bool applicable(const State& s, const pddl::GroundedAction& a) {
  for (const auto& p : a.pre_pos)
    if (!s.count(p)) return false;
  for (const auto& p : a.pre_neg)
    if (s.count(p)) return false;
  return true;
}

State exec(const State& s, const pddl::GroundedAction& a) {
  if (!applicable(s, a))
    throw std::invalid_argument("action not applicable: " + a.display());
  State out = s;
  for (const auto& p : a.del) out.erase(p);
  for (const auto& p : a.add) out.insert(p);
  return out;
}

int heuristic(const State& s, const State& goal) {
  int n = 0;
  for (const auto& g : goal)
    if (!s.count(g)) ++n;
  return n;
}

bool satisfies(const State& s, const State& goal) {
  return std::all_of(goal.begin(), goal.end(),
                     [&](const auto& g) { return s.count(g) > 0; });
}

int Skeleton::total_duration() const {
  return std::accumulate(phase_durations.begin(), phase_durations.end(), 0);
}

std::string Skeleton::str() const {
  std::string s;
  for (size_t i = 0; i < actions.size(); ++i) {
    if (i) s += " ";
    s += actions[i]->display();
  }
  return s;
}

Skeleton Skeleton::suffix(size_t k) const {
  Skeleton out;
  out.actions.assign(actions.begin() + static_cast<long>(k), actions.end());
  out.phase_durations.assign(phase_durations.begin() + static_cast<long>(k),
                             phase_durations.end());
  out.cost = cost;
  out.origin_time = origin_time;
  return out;
}

namespace {

// Bitset state over the interned proposition universe.
using Bits = std::vector<uint64_t>;

struct BitsHash {
  size_t operator()(const Bits& b) const {
    uint64_t h = 1469598103934665603ull;
    for (uint64_t w : b) {
      h ^= w;
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

bool subset(const Bits& a, const Bits& b) {  // a ⊆ b
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] & ~b[i]) return false;
  return true;
}

bool intersects(const Bits& a, const Bits& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] & b[i]) return true;
  return false;
}

int popcount_and_not(const Bits& a, const Bits& b) {  // |a \ b|
  int n = 0;
  for (size_t i = 0; i < a.size(); ++i)
    n += __builtin_popcountll(a[i] & ~b[i]);
  return n;
}

struct CompiledAction {
  Bits pre_pos, pre_neg, add, del;
  int original;  // index into the input action vector
};

struct NodeInfo {
  int g = -1;
  int h = 0;
  std::vector<std::pair<int, int>> preds;  // (state index, compiled action index)
};

}  // namespace

SearchResult search_skeletons(const State& s0, const State& goal,
                              const std::vector<pddl::GroundedAction>& actions,
                              const SearchOptions& opts) {
  SearchResult result;
  if (satisfies(s0, goal)) {
    result.status = SearchStatus::kAlreadySatisfied;
    result.optimal_length = 0;
    return result;
  }

  // Intern every proposition referenced by the actions, s0 and the goal.
  std::map<pddl::Proposition, int> ids;
  auto intern = [&](const pddl::Proposition& p) {
    auto [it, inserted] = ids.emplace(p, static_cast<int>(ids.size()));
    return it->second;
  };
  for (const auto& a : actions) {
    for (const auto& p : a.pre_pos) intern(p);
    for (const auto& p : a.pre_neg) intern(p);
    for (const auto& p : a.add) intern(p);
    for (const auto& p : a.del) intern(p);
  }
  for (const auto& p : s0) intern(p);
  for (const auto& p : goal) intern(p);

  const size_t words = (ids.size() + 63) / 64;
  auto to_bits = [&](const std::vector<pddl::Proposition>& props) {
    Bits b(words, 0);
    for (const auto& p : props) {
      int id = ids.at(p);
      b[static_cast<size_t>(id) / 64] |= 1ull << (id % 64);
    }
    return b;
  };
  auto set_to_bits = [&](const State& props) {
    return to_bits(std::vector<pddl::Proposition>(props.begin(), props.end()));
  };

  Bits start = set_to_bits(s0);
  Bits goal_bits = set_to_bits(goal);

  // Deterministic expansion order: grounded actions sorted by display name.
  std::vector<int> order(actions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return actions[static_cast<size_t>(a)].display() <
           actions[static_cast<size_t>(b)].display();
  });
  std::vector<CompiledAction> compiled;
  compiled.reserve(actions.size());
  for (int oi : order) {
    const auto& a = actions[static_cast<size_t>(oi)];
    compiled.push_back({to_bits(a.pre_pos), to_bits(a.pre_neg), to_bits(a.add),
                        to_bits(a.del), oi});
  }

  // The raw goal distance |goal \ s| can overestimate when one action adds
  // several goal propositions at once; dividing by the largest per-action
  // goal gain keeps the guide admissible so no optimal tie is pruned.
  int max_gain = 1;
  for (const auto& ca : compiled) {
    int n = 0;
    for (size_t w = 0; w < words; ++w)
      n += __builtin_popcountll(ca.add[w] & goal_bits[w]);
    max_gain = std::max(max_gain, n);
  }
  auto h_of = [&](const Bits& s) {
    int missing = popcount_and_not(goal_bits, s);
    return opts.use_heuristic ? (missing + max_gain - 1) / max_gain : 0;
  };

  const int goal_count = static_cast<int>(goal.size());
  const int depth_bound = opts.depth_bound > 0 ? opts.depth_bound : 4 * goal_count + 2;

  std::unordered_map<Bits, int, BitsHash> index;
  std::vector<Bits> states;
  std::vector<NodeInfo> nodes;
  auto lookup = [&](const Bits& b) -> int {
    auto it = index.find(b);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(states.size());
    index.emplace(b, id);
    states.push_back(b);
    nodes.emplace_back();
    return id;
  };

  int start_id = lookup(start);
  nodes[static_cast<size_t>(start_id)].g = 0;
  nodes[static_cast<size_t>(start_id)].h = h_of(start);

  using QItem = std::tuple<int, int, int>;  // (f, g, state)
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> open;
  open.emplace(nodes[static_cast<size_t>(start_id)].h, 0, start_id);

  int best_goal = -1;
  std::vector<int> goal_ids;
  bool bound_hit = false;

  while (!open.empty()) {
    auto [f, g, sid] = open.top();
    open.pop();
    if (g != nodes[static_cast<size_t>(sid)].g) continue;  // stale entry
    if (best_goal >= 0 && f > best_goal) break;

    if (subset(goal_bits, states[static_cast<size_t>(sid)])) {
      if (best_goal < 0) best_goal = g;
      if (g == best_goal) goal_ids.push_back(sid);
      continue;  // expanding past a goal only yields longer plans
    }
    if (g >= depth_bound) {
      bound_hit = true;
      continue;
    }

    ++result.expanded;
    // copy: lookup() below may grow `states` and invalidate references
    const Bits s = states[static_cast<size_t>(sid)];
    for (size_t ci = 0; ci < compiled.size(); ++ci) {
      const CompiledAction& ca = compiled[ci];
      if (!subset(ca.pre_pos, s) || intersects(ca.pre_neg, s)) continue;
      Bits next(words);
      for (size_t w = 0; w < words; ++w) next[w] = (s[w] & ~ca.del[w]) | ca.add[w];
      int nid = lookup(next);
      NodeInfo& nn = nodes[static_cast<size_t>(nid)];
      int ng = g + 1;
      if (nn.g < 0 || ng < nn.g) {
        nn.g = ng;
        nn.h = h_of(next);
        nn.preds.clear();
        nn.preds.emplace_back(sid, static_cast<int>(ci));
        open.emplace(ng + nn.h, ng, nid);
      } else if (ng == nn.g) {
        nn.preds.emplace_back(sid, static_cast<int>(ci));
      }
    }
  }

  if (best_goal < 0) {
    result.status = bound_hit ? SearchStatus::kDepthBoundExceeded
                              : SearchStatus::kUnreachable;
    return result;
  }

  // Enumerate every optimal path by walking the predecessor DAG backwards.
  std::vector<std::vector<int>> sequences;  // compiled action indices
  std::vector<int> stack;
  std::function<void(int)> backtrack = [&](int sid) {
    const NodeInfo& node = nodes[static_cast<size_t>(sid)];
    if (node.g == 0) {
      std::vector<int> seq(stack.rbegin(), stack.rend());
      sequences.push_back(std::move(seq));
      return;
    }
    for (const auto& [pid, ci] : node.preds) {
      if (nodes[static_cast<size_t>(pid)].g + 1 != node.g) continue;
      stack.push_back(ci);
      backtrack(pid);
      stack.pop_back();
    }
  };
  for (int gid : goal_ids) backtrack(gid);
  std::sort(sequences.begin(), sequences.end());
  sequences.erase(std::unique(sequences.begin(), sequences.end()), sequences.end());

  result.status = SearchStatus::kFound;
  result.optimal_length = best_goal;
  result.skeletons.reserve(sequences.size());
  for (const auto& seq : sequences) {
    Skeleton sk;
    sk.actions.reserve(seq.size());
    sk.phase_durations.reserve(seq.size());
    for (int ci : seq) {
      const auto* ga = &actions[static_cast<size_t>(compiled[static_cast<size_t>(ci)].original)];
      sk.actions.push_back(ga);
      sk.phase_durations.push_back(opts.duration_of ? opts.duration_of(*ga) : 0);
    }
    result.skeletons.push_back(std::move(sk));
  }
  return result;
}

}  // namespace dyntamp::sym
