#pragma once

// Helpers shared by the unit and acceptance suites: random explicit MDPs, a
// toy corridor for the learner, and oracles that do not go through the code
// under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "probshield/checker.hpp"
#include "probshield/learner.hpp"
#include "probshield/ltl.hpp"
#include "probshield/mdp.hpp"

namespace probshield::testkit {

struct RandomMdp {
  LabelledMdp mdp;
  ReachabilityProblem problem;
};

// Sparse random MDP labelled with `goal` and `bad`, paired with a problem of
// a random kind (F goal, G !bad or !bad U goal). Up to `max_free` states are
// neither goal nor bad, the rest are labelled.
inline RandomMdp random_mdp(std::mt19937_64& rng, std::size_t max_states, std::size_t max_actions,
                            std::size_t max_free) {
  std::uniform_int_distribution<std::size_t> n_dist(2, max_states);
  std::uniform_int_distribution<std::size_t> m_dist(1, max_actions);
  const std::size_t n = n_dist(rng);
  const std::size_t m = m_dist(rng);
  const std::size_t free = std::min(n - 1, std::uniform_int_distribution<std::size_t>(1, max_free)(rng));

  MdpBuilder b(n, m);
  b.declare_proposition("goal").declare_proposition("bad");
  // States [0, free) are unlabelled; the rest are goal or bad.
  std::bernoulli_distribution coin(0.5);
  for (StateId s = static_cast<StateId>(free); s < n; ++s) b.add_label(s, coin(rng) ? "goal" : "bad");
  std::bernoulli_distribution terminal(0.5);
  for (StateId s = static_cast<StateId>(free); s < n; ++s) {
    if (terminal(rng)) b.mark_terminal(s);
  }

  std::uniform_int_distribution<std::size_t> fanout(1, std::min<std::size_t>(n, 4));
  std::uniform_int_distribution<StateId> target(0, static_cast<StateId>(n - 1));
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a = 0; a < m; ++a) {
      const std::size_t k = fanout(rng);
      std::vector<StateId> succ;
      std::vector<double> w;
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        succ.push_back(target(rng));
        w.push_back(weight(rng));
        total += w.back();
      }
      for (std::size_t i = 0; i < k; ++i) b.add_transition(s, a, succ[i], w[i] / total);
    }
  }
  RandomMdp out{b.build(), {}};
  static const char* specs[] = {"F goal", "G !bad", "!bad U goal"};
  out.problem = reduce(parse_formula(specs[std::uniform_int_distribution<int>(0, 2)(rng)]), out.mdp);
  return out;
}

// States whose action choice matters for evaluation.
inline std::vector<StateId> decision_states(const RandomMdp& r) {
  std::vector<StateId> out;
  for (StateId s = 0; s < r.mdp.num_states(); ++s) {
    if (!r.problem.pinned(s) && !r.mdp.is_terminal(s)) out.push_back(s);
  }
  return out;
}

inline std::size_t policy_count(const RandomMdp& r) {
  std::size_t count = 1;
  for (std::size_t i = 0; i < decision_states(r).size(); ++i) count *= r.mdp.num_actions();
  return count;
}

// Calls f(policy) for every deterministic memoryless policy over the
// decision states (all other states pick action 0).
template <class F>
void for_each_policy(const RandomMdp& r, F&& f) {
  const auto states = decision_states(r);
  const std::size_t m = r.mdp.num_actions();
  std::vector<ActionId> policy(r.mdp.num_states(), 0);
  const std::size_t total = policy_count(r);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (StateId s : states) {
      policy[s] = static_cast<ActionId>(c % m);
      c /= m;
    }
    f(policy);
  }
}

// Per-state maximum over all deterministic policies of evaluate_policy.
inline std::vector<double> brute_force_max(const RandomMdp& r) {
  std::vector<double> best(r.mdp.num_states(), 0.0);
  for_each_policy(r, [&](const std::vector<ActionId>& pi) {
    const auto v = evaluate_policy(r.mdp, r.problem, pi);
    for (std::size_t s = 0; s < best.size(); ++s) best[s] = std::max(best[s], v[s]);
  });
  return best;
}

// Reachability probability of a fixed chain by plain Gauss-Seidel sweeps,
// independent of the library's solver. `value(s)` is 1 on target, 0 on avoid.
inline std::vector<double> chain_value_by_sweeps(const LabelledMdp& mdp, const ReachabilityProblem& p,
                                                 const std::vector<ActionId>& policy, std::size_t sweeps = 200000) {
  const std::size_t n = mdp.num_states();
  const bool safe = p.kind == ReachKind::Safe;
  const auto& hit = safe ? p.avoid : p.target;
  std::vector<double> v(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) v[s] = hit[s] ? 1.0 : 0.0;
  for (std::size_t k = 0; k < sweeps; ++k) {
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      if (hit[s] || (!safe && p.avoid[s])) continue;
      const auto row = mdp.successors(s, policy[s]);
      double x = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) x += row.probabilities[i] * v[row.states[i]];
      delta = std::max(delta, std::abs(x - v[s]));
      v[s] = x;
    }
    if (delta < 1e-14) break;
  }
  if (safe) {
    for (double& x : v) x = 1.0 - x;
  }
  return v;
}

// Deterministic corridor: cells 0..4, start in cell 2. Action 1 moves right,
// action 0 moves left; reaching cell 4 is the goal, stepping left from cell 0
// is a collision. Both end the episode.
struct CorridorEnv {
  using State = int;
  static constexpr int kCells = 5;

  std::size_t num_actions() const { return 2; }
  State reset(Rng&) const { return 2; }
  EnvStep<State> step(const State& s, ActionId a, Rng&) const {
    EnvStep<State> out{s, {}, false};
    if (a == 0 && s == 0) {
      out.events.collision = true;
      return out;
    }
    out.next = a == 1 ? s + 1 : s - 1;
    out.events.goal_reached = out.next == kCells - 1;
    return out;
  }
  std::uint64_t key(const State& s) const { return static_cast<std::uint64_t>(s); }
};

// Exact Q* of the corridor by value iteration on the Bellman optimality
// equation, written out independently of the learner.
inline std::vector<std::array<double, 2>> corridor_q_star(const RewardSpec& r, double gamma) {
  std::vector<std::array<double, 2>> q(CorridorEnv::kCells, {0.0, 0.0});
  for (int it = 0; it < 10000; ++it) {
    auto next = q;
    for (int s = 0; s < CorridorEnv::kCells - 1; ++s) {
      // Left.
      if (s == 0) next[s][0] = r.action_cost + r.collision;
      else next[s][0] = r.action_cost + gamma * std::max(q[s - 1][0], q[s - 1][1]);
      // Right.
      if (s + 1 == CorridorEnv::kCells - 1) next[s][1] = r.action_cost + r.goal;
      else next[s][1] = r.action_cost + gamma * std::max(q[s + 1][0], q[s + 1][1]);
    }
    q = next;
  }
  return q;
}

}  // namespace probshield::testkit
