#pragma once

// Maximum satisfaction probability per state-action pair by value iteration,
// plus exact evaluation of a fixed memoryless policy.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <iostream>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "probshield/ltl.hpp"
#include "probshield/mdp.hpp"

namespace probshield {

/// P^max(s, a |= phi) for every state-action pair.
struct ProbTable {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> values;  // row-major (state, action)
  std::size_t iterations_run = 0;
  double final_residual = 0.0;
  bool converged = false;
  // Per-sweep invariant checks: entries that decreased (increased for the
  // minimising pass) or left [0, 1] beyond rounding.
  std::size_t monotonicity_violations = 0;
  std::size_t bound_violations = 0;

  ProbTable() = default;
  ProbTable(std::size_t states, std::size_t actions, double fill = 0.0)
      : num_states(states), num_actions(actions), values(states * actions, fill) {}

  double at(StateId s, ActionId a) const { return values[static_cast<std::size_t>(s) * num_actions + a]; }
  double& at(StateId s, ActionId a) { return values[static_cast<std::size_t>(s) * num_actions + a]; }

  std::span<const double> row(StateId s) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(s) * num_actions, num_actions);
  }

  /// max_a P(s, a), i.e. P^max(s |= phi).
  double state_value(StateId s) const {
    const auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }
};

struct CheckerConfig {
  double tolerance = 1e-6;
  std::size_t max_iterations = 10000;
  unsigned workers = 1;
  /// Called after every sweep with (sweep index, residual).
  std::function<void(std::size_t, double)> on_sweep;

  void check() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("checker tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("checker needs at least one iteration");
  }
};

/// Sup-norm of the elementwise difference.
inline double residual(const ProbTable& prev, const ProbTable& next) {
  if (prev.num_states != next.num_states || prev.num_actions != next.num_actions ||
      prev.values.size() != next.values.size()) {
    throw std::invalid_argument("residual: table shapes differ");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < prev.values.size(); ++i) {
    r = std::max(r, std::abs(next.values[i] - prev.values[i]));
  }
  return r;
}

namespace detail {

struct SweepStats {
  double residual = 0.0;
  std::size_t monotone = 0;
  std::size_t bounds = 0;
};

// Jacobi-style reachability iteration. `pin_one` states are held at 1,
// `pin_zero` at 0; `maximise` picks max or min over successor actions.
inline ProbTable reach_iteration(const LabelledMdp& mdp, const std::vector<bool>& pin_one,
                                 const std::vector<bool>& pin_zero, bool maximise,
                                 const CheckerConfig& cfg) {
  cfg.check();
  const std::size_t n = mdp.num_states();
  const std::size_t m = mdp.num_actions();
  if (pin_one.size() != n || pin_zero.size() != n) {
    throw std::invalid_argument("reachability sets do not match the MDP state count");
  }

  ProbTable cur(n, m), next(n, m);
  for (StateId s = 0; s < n; ++s) {
    if (pin_one[s]) std::fill_n(cur.values.begin() + s * m, m, 1.0);
  }
  std::vector<double> best(n);

  const auto offsets = mdp.row_offsets();
  const auto succ = mdp.successor_array();
  const auto prob = mdp.probability_array();

  auto sweep_range = [&](std::size_t lo, std::size_t hi, SweepStats& st) {
    for (std::size_t s = lo; s < hi; ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        const std::size_t idx = s * m + a;
        double v;
        if (pin_one[s]) {
          v = 1.0;
        } else if (pin_zero[s]) {
          v = 0.0;
        } else {
          v = 0.0;
          for (std::size_t k = offsets[idx]; k < offsets[idx + 1]; ++k) v += prob[k] * best[succ[k]];
          if (v < -kMassTolerance || v > 1.0 + kMassTolerance) ++st.bounds;
          v = std::clamp(v, 0.0, 1.0);
        }
        if (v < cur.values[idx]) ++st.monotone;
        st.residual = std::max(st.residual, std::abs(v - cur.values[idx]));
        next.values[idx] = v;
      }
    }
  };

  const unsigned workers = std::max(1u, cfg.workers);
  std::size_t sweep = 0;
  double res = 0.0;
  bool converged = false;
  while (sweep < cfg.max_iterations) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto r = cur.row(static_cast<StateId>(s));
      best[s] = maximise ? *std::max_element(r.begin(), r.end()) : *std::min_element(r.begin(), r.end());
    }
    std::vector<SweepStats> stats(workers);
    if (workers == 1) {
      sweep_range(0, n, stats[0]);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (n + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(n, w * chunk), hi = std::min(n, lo + chunk);
        pool.emplace_back(sweep_range, lo, hi, std::ref(stats[w]));
      }
      for (auto& t : pool) t.join();
    }
    res = 0.0;
    for (const auto& st : stats) {
      res = std::max(res, st.residual);
      next.monotonicity_violations += st.monotone;
      next.bound_violations += st.bounds;
    }
    std::swap(cur.values, next.values);
    cur.monotonicity_violations = next.monotonicity_violations;
    cur.bound_violations = next.bound_violations;
    ++sweep;
    if (cfg.on_sweep) cfg.on_sweep(sweep, res);
    if (res < cfg.tolerance) {
      converged = true;
      break;
    }
  }
  cur.iterations_run = sweep;
  cur.final_residual = res;
  cur.converged = converged;
  return cur;
}

}  // namespace detail

/// Value iteration for P^max(s, a |= phi). Target states are pinned at 1 and
/// avoid states at 0 on every sweep. Safe problems (G !p) go through the
/// duality P^max(G !p) = 1 - P^min(F p). Non-convergence is reported through
/// `converged`/`final_residual` rather than thrown.
inline ProbTable max_reach(const LabelledMdp& mdp, const ReachabilityProblem& problem,
                           const CheckerConfig& cfg = {}) {
  if (problem.kind != ReachKind::Safe) {
    return detail::reach_iteration(mdp, problem.target, problem.avoid, true, cfg);
  }
  const std::vector<bool> none(mdp.num_states(), false);
  ProbTable table = detail::reach_iteration(mdp, problem.avoid, none, false, cfg);
  for (double& v : table.values) v = 1.0 - v;
  return table;
}

/// Ties go to the lowest action index.
inline std::vector<ActionId> argmax_policy(const ProbTable& table) {
  std::vector<ActionId> policy(table.num_states);
  for (StateId s = 0; s < table.num_states; ++s) {
    const auto r = table.row(s);
    policy[s] = static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return policy;
}

struct EvaluateOptions {
  std::size_t direct_limit = 600;  // largest unknown block solved by LU
  double tolerance = 1e-10;
  std::size_t max_sweeps = 1'000'000;
};

namespace detail {

// Probability of reaching `target` without touching `avoid` in the chain
// induced by `policy`.
inline std::vector<double> chain_reach(const LabelledMdp& mdp, const std::vector<bool>& target,
                                       const std::vector<bool>& avoid,
                                       std::span<const ActionId> policy, const EvaluateOptions& opt) {
  const std::size_t n = mdp.num_states();
  std::vector<double> v(n, 0.0);
  for (StateId s = 0; s < n; ++s) {
    if (target[s]) v[s] = 1.0;
  }

  // States that reach the target with positive probability.
  std::vector<std::vector<StateId>> preds(n);
  for (StateId s = 0; s < n; ++s) {
    if (target[s] || avoid[s]) continue;
    const auto row = mdp.successors(s, policy[s]);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row.probabilities[i] > 0.0) preds[row.states[i]].push_back(s);
    }
  }
  std::vector<bool> reaches(n, false);
  std::deque<StateId> queue;
  for (StateId s = 0; s < n; ++s) {
    if (target[s]) {
      reaches[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const StateId t = queue.front();
    queue.pop_front();
    for (StateId p : preds[t]) {
      if (!reaches[p]) {
        reaches[p] = true;
        queue.push_back(p);
      }
    }
  }

  std::vector<StateId> unknown;
  std::vector<long> local(n, -1);
  for (StateId s = 0; s < n; ++s) {
    if (reaches[s] && !target[s] && !avoid[s]) {
      local[s] = static_cast<long>(unknown.size());
      unknown.push_back(s);
    }
  }
  const std::size_t u = unknown.size();
  if (u == 0) return v;

  if (u <= opt.direct_limit) {
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(u));
    for (std::size_t i = 0; i < u; ++i) {
      const auto row = mdp.successors(unknown[i], policy[unknown[i]]);
      for (std::size_t k = 0; k < row.size(); ++k) {
        const StateId sp = row.states[k];
        if (target[sp]) rhs[static_cast<Eigen::Index>(i)] += row.probabilities[k];
        else if (local[sp] >= 0) system(static_cast<Eigen::Index>(i), local[sp]) -= row.probabilities[k];
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(rhs);
      for (std::size_t i = 0; i < u; ++i) v[unknown[i]] = std::clamp(x[static_cast<Eigen::Index>(i)], 0.0, 1.0);
      return v;
    }
    std::clog << "evaluate_policy: singular system, falling back to iteration\n";
  }

  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (StateId s : unknown) {
      const auto row = mdp.successors(s, policy[s]);
      double x = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) x += row.probabilities[k] * v[row.states[k]];
      delta = std::max(delta, std::abs(x - v[s]));
      v[s] = x;
    }
    if (delta < opt.tolerance) break;
  }
  return v;
}

}  // namespace detail

/// Pr^pi(s |= phi) for a deterministic memoryless policy, per state.
inline std::vector<double> evaluate_policy(const LabelledMdp& mdp, const ReachabilityProblem& problem,
                                           std::span<const ActionId> policy,
                                           const EvaluateOptions& opt = {}) {
  if (policy.size() != mdp.num_states()) {
    throw std::invalid_argument("evaluate_policy: policy must cover every state");
  }
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!problem.pinned(s) && policy[s] >= mdp.num_actions()) {
      throw std::out_of_range("evaluate_policy: action out of range");
    }
  }
  if (problem.kind != ReachKind::Safe) {
    return detail::chain_reach(mdp, problem.target, problem.avoid, policy, opt);
  }
  const std::vector<bool> none(mdp.num_states(), false);
  auto v = detail::chain_reach(mdp, problem.avoid, none, policy, opt);
  for (double& x : v) x = 1.0 - x;
  return v;
}

inline nlohmann::json prob_table_to_json(const ProbTable& t) {
  return {{"num_states", t.num_states},       {"num_actions", t.num_actions},
          {"iterations_run", t.iterations_run}, {"final_residual", t.final_residual},
          {"converged", t.converged},         {"values", t.values}};
}

inline ProbTable prob_table_from_json(const nlohmann::json& doc) {
  ProbTable t;
  t.num_states = doc.at("num_states").get<std::size_t>();
  t.num_actions = doc.at("num_actions").get<std::size_t>();
  t.iterations_run = doc.value("iterations_run", std::size_t{0});
  t.final_residual = doc.value("final_residual", 0.0);
  t.converged = doc.value("converged", true);
  t.values = doc.at("values").get<std::vector<double>>();
  if (t.values.size() != t.num_states * t.num_actions) {
    throw std::runtime_error("probability table: value count does not match shape");
  }
  return t;
}

}  // namespace probshield
