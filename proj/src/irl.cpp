#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>

#include "dyntamp/prediction.hpp"
#include "json.hpp"

namespace dyntamp::pred {

using nlohmann::json;

std::string HLAction::str(const MdpSpec& spec) const {
  switch (kind) {
    case Kind::kGoTo:
      return "go-to " + spec.locations.at(static_cast<size_t>(arg));
    case Kind::kPickUp:
      return "pick-up " + spec.classes.at(static_cast<size_t>(arg)).name;
    case Kind::kPlace:
      return "place";
  }
  return "?";
}

std::string MdpSpec::to_json() const {
  json j;
  j["locations"] = locations;
  j["classes"] = json::array();
  for (const auto& c : classes) j["classes"].push_back({{"name", c.name}, {"counts", c.counts}});
  j["human_start"] = human_start;
  j["carry_start"] = carry_start;
  return j.dump(2);
}

MdpSpec MdpSpec::from_json(const std::string& text) {
  json j = json::parse(text);
  MdpSpec spec;
  spec.locations = j.at("locations").get<std::vector<std::string>>();
  for (const auto& c : j.at("classes")) {
    MdpSpec::ClassCounts cc;
    cc.name = c.at("name").get<std::string>();
    cc.counts = c.at("counts").get<std::vector<int>>();
    if (cc.counts.size() != spec.locations.size())
      throw std::runtime_error("class '" + cc.name + "': counts length must equal locations");
    spec.classes.push_back(std::move(cc));
  }
  spec.human_start = j.value("human_start", -1);
  spec.carry_start = j.value("carry_start", -1);
  return spec;
}

std::optional<HLState> Mdp::apply(const HLState& s, const HLAction& a) const {
  const int L = static_cast<int>(spec_.locations.size());
  HLState n = s;
  switch (a.kind) {
    case HLAction::Kind::kGoTo:
      n.human_pos = a.arg;
      return n;
    case HLAction::Kind::kPickUp: {
      if (s.carry >= 0 || s.human_pos >= L) return std::nullopt;
      size_t idx = static_cast<size_t>(a.arg) * static_cast<size_t>(L) +
                   static_cast<size_t>(s.human_pos);
      if (s.counts[idx] <= 0) return std::nullopt;
      n.counts[idx] -= 1;
      n.carry = a.arg;
      return n;
    }
    case HLAction::Kind::kPlace: {
      if (s.carry < 0 || s.human_pos >= L) return std::nullopt;
      size_t idx = static_cast<size_t>(s.carry) * static_cast<size_t>(L) +
                   static_cast<size_t>(s.human_pos);
      n.counts[idx] += 1;
      n.carry = -1;
      return n;
    }
  }
  return std::nullopt;
}

Mdp::Mdp(const MdpSpec& spec, const std::vector<HLState>& starts) : spec_(spec) {
  const int L = static_cast<int>(spec.locations.size());
  const int C = static_cast<int>(spec.classes.size());
  for (int l = 0; l < L; ++l) actions_.push_back({HLAction::Kind::kGoTo, l});
  for (int c = 0; c < C; ++c) actions_.push_back({HLAction::Kind::kPickUp, c});
  actions_.push_back({HLAction::Kind::kPlace, 0});

  // enumerate the reachable state space from the given starts
  std::queue<HLState> frontier;
  auto add = [&](const HLState& s) -> int {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(states_.size());
    index_[s] = id;
    states_.push_back(s);
    frontier.push(s);
    return id;
  };
  HLState s0 = initial_state();
  add(s0);
  for (const auto& s : starts) {
    if (s.counts.size() != static_cast<size_t>(C * L))
      throw std::invalid_argument("start state has wrong counts length");
    add(s);
  }
  constexpr size_t kMaxStates = 200000;  // tabular methods stop making sense here
  while (!frontier.empty()) {
    HLState s = frontier.front();
    frontier.pop();
    for (const auto& a : actions_) {
      auto n = apply(s, a);
      if (n) add(*n);
    }
    if (states_.size() > kMaxStates)
      throw std::runtime_error(
          "MDP state space is not enumerable at tabular scale (> 200000 states)");
  }

  transitions_.assign(states_.size() * actions_.size(), -1);
  for (size_t si = 0; si < states_.size(); ++si)
    for (size_t ai = 0; ai < actions_.size(); ++ai) {
      auto n = apply(states_[si], actions_[ai]);
      if (n) transitions_[si * actions_.size() + ai] = index_.at(*n);
    }

  // one-hot features per tuple component value
  std::vector<int> totals(static_cast<size_t>(C), 0);
  for (int c = 0; c < C; ++c)
    for (int l = 0; l < L; ++l) totals[static_cast<size_t>(c)] += spec.classes[static_cast<size_t>(c)].counts[static_cast<size_t>(l)];
  std::vector<int> offsets;
  int off = 0;
  for (int c = 0; c < C; ++c)
    for (int l = 0; l < L; ++l) {
      offsets.push_back(off);
      off += totals[static_cast<size_t>(c)] + 1;
    }
  const int human_off = off;
  off += L + 1;
  const int carry_off = off;
  off += C + 1;
  n_features_ = off;

  features_.reserve(states_.size());
  for (const auto& s : states_) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n_features_);
    for (int c = 0; c < C; ++c)
      for (int l = 0; l < L; ++l) {
        size_t comp = static_cast<size_t>(c) * static_cast<size_t>(L) + static_cast<size_t>(l);
        int v = std::min(s.counts[comp], totals[static_cast<size_t>(c)]);
        f[offsets[comp] + v] = 1.0;
      }
    f[human_off + std::min(s.human_pos, L)] = 1.0;
    f[carry_off + (s.carry + 1)] = 1.0;
    features_.push_back(std::move(f));
  }
}

int Mdp::state_index(const HLState& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? -1 : it->second;
}

HLState Mdp::initial_state() const {
  const size_t L = spec_.locations.size();
  HLState s;
  s.counts.assign(spec_.classes.size() * L, 0);
  for (size_t c = 0; c < spec_.classes.size(); ++c)
    for (size_t l = 0; l < L; ++l) s.counts[c * L + l] = spec_.classes[c].counts[l];
  s.human_pos = spec_.human_start < 0 ? static_cast<int>(L) : spec_.human_start;
  s.carry = spec_.carry_start;
  return s;
}

namespace {

json state_to_json(const HLState& s) {
  return json{{"counts", s.counts}, {"human_pos", s.human_pos}, {"carry", s.carry}};
}

HLState state_from_json(const json& j) {
  HLState s;
  s.counts = j.at("counts").get<std::vector<int>>();
  s.human_pos = j.at("human_pos").get<int>();
  s.carry = j.at("carry").get<int>();
  return s;
}

int action_index_by_name(const Mdp& mdp, const std::string& name) {
  for (int i = 0; i < mdp.n_actions(); ++i)
    if (mdp.action(i).str(mdp.spec()) == name) return i;
  throw std::runtime_error("unknown high-level action: " + name);
}

}  // namespace

std::vector<Episode> parse_demos(const std::string& text, const Mdp& mdp) {
  json j = json::parse(text);
  std::vector<Episode> out;
  for (const auto& e : j.at("episodes")) {
    Episode ep;
    ep.start = state_from_json(e.at("start"));
    int s = mdp.state_index(ep.start);
    if (s < 0) throw std::runtime_error("demonstration start outside the MDP state space");
    for (const auto& an : e.at("actions")) {
      int ai = action_index_by_name(mdp, an.get<std::string>());
      if (mdp.next(s, ai) < 0)
        throw std::runtime_error("demonstration contains illegal transition: " +
                                 an.get<std::string>());
      s = mdp.next(s, ai);
      ep.actions.push_back(ai);
    }
    out.push_back(std::move(ep));
  }
  return out;
}

std::string demos_to_json(const std::vector<Episode>& demos, const Mdp& mdp) {
  json j;
  j["episodes"] = json::array();
  for (const auto& ep : demos) {
    json e;
    e["start"] = state_to_json(ep.start);
    e["actions"] = json::array();
    for (int ai : ep.actions) e["actions"].push_back(mdp.action(ai).str(mdp.spec()));
    j["episodes"].push_back(e);
  }
  return j.dump(2);
}

Eigen::MatrixXd soft_policy(const Mdp& mdp, const Eigen::VectorXd& weights,
                            double discount, double vi_tol, int max_sweeps,
                            Eigen::VectorXd* v_inout) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  Eigen::VectorXd reward(S);
  for (int s = 0; s < S; ++s) reward[s] = weights.dot(mdp.features(s));

  Eigen::VectorXd V = (v_inout && v_inout->size() == S) ? *v_inout
                                                        : Eigen::VectorXd::Zero(S);
  Eigen::VectorXd Vn(S);
  std::vector<double> qs(static_cast<size_t>(A));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double diff = 0;
    for (int s = 0; s < S; ++s) {
      double mx = -std::numeric_limits<double>::infinity();
      double acc = 0;
      // soft maximum over legal actions of Q = r(s') + discount * V(s')
      int nq = 0;
      for (int a = 0; a < A; ++a) {
        int ns = mdp.next(s, a);
        if (ns < 0) continue;
        double q = reward[ns] + discount * V[ns];
        qs[static_cast<size_t>(nq++)] = q;
        mx = std::max(mx, q);
      }
      double v;
      if (nq == 0) {
        v = reward[s];
      } else {
        for (int i = 0; i < nq; ++i) acc += std::exp(qs[static_cast<size_t>(i)] - mx);
        v = mx + std::log(acc);
      }
      Vn[s] = v;
      diff = std::max(diff, std::abs(Vn[s] - V[s]));
    }
    V = Vn;
    if (diff < vi_tol) break;
  }

  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      int ns = mdp.next(s, a);
      if (ns < 0) continue;
      mx = std::max(mx, reward[ns] + discount * V[ns]);
    }
    double z = 0;
    for (int a = 0; a < A; ++a) {
      int ns = mdp.next(s, a);
      if (ns < 0) continue;
      double e = std::exp(reward[ns] + discount * V[ns] - mx);
      pi(s, a) = e;
      z += e;
    }
    if (z > 0) pi.row(s) /= z;
  }
  if (v_inout) *v_inout = V;
  return pi;
}

IrlModel irl_fit(const Mdp& mdp, const std::vector<Episode>& demos, const IrlOptions& opts) {
  if (demos.empty()) throw std::invalid_argument("irl_fit: no demonstrations");
  const int S = mdp.n_states();
  const int F = mdp.n_features();

  // empirical feature counts, averaged per episode (start state included)
  Eigen::VectorXd empirical = Eigen::VectorXd::Zero(F);
  for (const auto& ep : demos) {
    int s = mdp.state_index(ep.start);
    empirical += mdp.features(s);
    for (int ai : ep.actions) {
      s = mdp.next(s, ai);
      empirical += mdp.features(s);
    }
  }
  empirical /= static_cast<double>(demos.size());

  IrlModel model;
  model.spec = mdp.spec();
  model.discount = opts.discount;
  model.weights = Eigen::VectorXd::Zero(F);

  // demonstrations grouped by start state so each group needs one forward
  // pass per iteration; step_weight[t] counts demos still running at step t
  struct Group {
    int start;
    int horizon = 0;
    std::vector<double> step_weight;
  };
  std::map<int, Group> groups;
  for (const auto& ep : demos) {
    int s = mdp.state_index(ep.start);
    Group& g = groups[s];
    g.start = s;
    g.horizon = std::max(g.horizon, static_cast<int>(ep.actions.size()));
  }
  for (auto& [s, g] : groups) {
    g.step_weight.assign(static_cast<size_t>(g.horizon) + 1, 0.0);
    for (const auto& ep : demos)
      if (mdp.state_index(ep.start) == s)
        for (size_t t = 0; t <= ep.actions.size(); ++t) g.step_weight[t] += 1.0;
  }

  Eigen::MatrixXd pi;
  double gap = std::numeric_limits<double>::infinity();
  int iter = 0;
  Eigen::VectorXd V_warm;  // soft value function warm start across iterations
  for (iter = 0; iter < opts.max_iters; ++iter) {
    pi = soft_policy(mdp, model.weights, opts.discount, opts.vi_tol, opts.vi_max_sweeps,
                     &V_warm);

    Eigen::VectorXd expected = Eigen::VectorXd::Zero(F);
    for (const auto& [start, group] : groups) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(S);
      d[start] = 1.0;
      expected += group.step_weight[0] * mdp.features(start);
      for (int t = 1; t <= group.horizon; ++t) {
        Eigen::VectorXd dn = Eigen::VectorXd::Zero(S);
        for (int s = 0; s < S; ++s) {
          if (d[s] <= 0) continue;
          for (int a = 0; a < mdp.n_actions(); ++a) {
            int ns = mdp.next(s, a);
            if (ns < 0 || pi(s, a) <= 0) continue;
            dn[ns] += d[s] * pi(s, a);
          }
        }
        d = dn;
        for (int s = 0; s < S; ++s)
          if (d[s] > 0) expected += group.step_weight[static_cast<size_t>(t)] * d[s] *
                                    mdp.features(s);
      }
    }
    expected /= static_cast<double>(demos.size());

    Eigen::VectorXd grad = empirical - expected;
    gap = grad.lpNorm<Eigen::Infinity>();
    if (gap < opts.tol_gap) break;
    double lr = opts.lr0 / std::sqrt(1.0 + iter / opts.decay_scale);
    model.weights += lr * grad;
  }

  model.policy = soft_policy(mdp, model.weights, opts.discount, opts.vi_tol, opts.vi_max_sweeps);
  model.gap = gap;
  model.iterations = iter;
  model.converged = gap < opts.tol_gap;
  return model;
}

std::string IrlModel::to_json() const {
  json j;
  j["spec"] = json::parse(spec.to_json());
  j["discount"] = discount;
  j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
  j["converged"] = converged;
  j["gap"] = gap;
  j["iterations"] = iterations;
  return j.dump(2);
}

IrlModel IrlModel::from_json(const std::string& text) {
  json j = json::parse(text);
  IrlModel m;
  m.spec = MdpSpec::from_json(j.at("spec").dump());
  m.discount = j.at("discount").get<double>();
  auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<long>(w.size()));
  m.converged = j.value("converged", false);
  m.gap = j.value("gap", 0.0);
  m.iterations = j.value("iterations", 0);
  // policy is recomputed against the enumerated MDP
  Mdp mdp(m.spec, {});
  m.policy = soft_policy(mdp, m.weights, m.discount);
  return m;
}

Episode scripted_expert_episode(const Mdp& mdp, const HLState& start,
                                const std::map<std::string, int>& goal_counts,
                                uint64_t seed) {
  const MdpSpec& spec = mdp.spec();
  const int L = static_cast<int>(spec.locations.size());
  const int C = static_cast<int>(spec.classes.size());
  Rng rng(seed);

  auto goal_met = [&](const HLState& s) {
    for (int c = 0; c < C; ++c) {
      auto it = goal_counts.find(spec.classes[static_cast<size_t>(c)].name);
      if (it == goal_counts.end()) continue;
      if (s.counts[static_cast<size_t>(c) * static_cast<size_t>(L)] < it->second)
        return false;
    }
    return s.carry < 0;
  };
  auto find_action = [&](HLAction::Kind kind, int arg) {
    for (int a = 0; a < mdp.n_actions(); ++a)
      if (mdp.action(a).kind == kind && (kind == HLAction::Kind::kPlace ||
                                         mdp.action(a).arg == arg))
        return a;
    throw std::logic_error("expert: action not in MDP");
  };

  Episode ep;
  ep.start = start;
  int s = mdp.state_index(start);
  if (s < 0) throw std::invalid_argument("expert: start outside the MDP state space");
  auto push = [&](int a) {
    ep.actions.push_back(a);
    s = mdp.next(s, a);
    if (s < 0) throw std::logic_error("expert produced an illegal transition");
  };

  for (int guard = 0; guard < 1000 && !goal_met(mdp.state(s)); ++guard) {
    const HLState& cur = mdp.state(s);
    if (cur.carry >= 0) {
      if (cur.human_pos != 0) push(find_action(HLAction::Kind::kGoTo, 0));
      else push(find_action(HLAction::Kind::kPlace, 0));
      continue;
    }
    // classes still short at location 0, in seeded order
    std::vector<int> deficit;
    for (int c = 0; c < C; ++c) {
      auto it = goal_counts.find(spec.classes[static_cast<size_t>(c)].name);
      if (it == goal_counts.end()) continue;
      if (cur.counts[static_cast<size_t>(c) * static_cast<size_t>(L)] < it->second)
        deficit.push_back(c);
    }
    if (deficit.empty()) break;
    rng.shuffle(deficit);
    bool acted = false;
    for (int c : deficit) {
      std::vector<int> sources;
      for (int l = 1; l < L; ++l)
        if (cur.counts[static_cast<size_t>(c) * static_cast<size_t>(L) +
                       static_cast<size_t>(l)] > 0)
          sources.push_back(l);
      if (sources.empty()) continue;
      if (cur.human_pos < L &&
          cur.counts[static_cast<size_t>(c) * static_cast<size_t>(L) +
                     static_cast<size_t>(cur.human_pos)] > 0 &&
          cur.human_pos != 0) {
        push(find_action(HLAction::Kind::kPickUp, c));
      } else {
        int l = sources[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(sources.size()) - 1))];
        push(find_action(HLAction::Kind::kGoTo, l));
      }
      acted = true;
      break;
    }
    if (!acted) break;  // goal unreachable for the remaining classes
  }
  return ep;
}

Rollout rollout_policy(const IrlModel& model, const Mdp& mdp, const HLState& s0,
                       const std::function<bool(const HLState&)>& goal, uint64_t seed,
                       int step_cap) {
  Rollout out;
  int s = mdp.state_index(s0);
  if (s < 0) throw std::invalid_argument("rollout start outside the MDP state space");
  if (goal(mdp.state(s))) {
    out.reached_goal = true;
    return out;
  }
  Rng rng(seed);
  for (int t = 0; t < step_cap; ++t) {
    std::vector<double> w(static_cast<size_t>(mdp.n_actions()), 0.0);
    double z = 0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      w[static_cast<size_t>(a)] = model.policy(s, a);
      z += w[static_cast<size_t>(a)];
    }
    if (z <= 0) break;
    int a = rng.categorical(w);
    int ns = mdp.next(s, a);
    if (ns < 0) continue;  // zero-probability guard
    out.actions.push_back(a);
    s = ns;
    if (goal(mdp.state(s))) {
      out.reached_goal = true;
      return out;
    }
  }
  return out;
}

}  // namespace dyntamp::pred
