#pragma once

// Tabular Q-learning with shield-constrained epsilon-greedy exploration, and
// the policies compared on the intersection scenario.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "probshield/shield.hpp"
#include "probshield/simulator.hpp"
#include "probshield/traffic_grid.hpp"

namespace probshield {

class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RewardSpec {
  double goal = 1.0;
  double collision = -1.0;
  double action_cost = 0.0;

  void check() const {
    if (!(goal > 0.0)) throw ConfigurationError("goal reward must be positive");
    if (!(collision >= -5.0 && collision <= -1.0)) {
      throw ConfigurationError("collision penalty must lie in [-5, -1]");
    }
    if (!(action_cost >= -0.05 && action_cost <= 0.0)) {
      throw ConfigurationError("action cost must lie in [-0.05, 0]");
    }
  }

  double reward(const StepEvents& e) const {
    double r = action_cost;
    if (e.collision) r += collision;
    else if (e.goal_reached) r += goal;
    return r;
  }
};

inline nlohmann::json to_json(const RewardSpec& r) {
  return {{"goal", r.goal}, {"collision", r.collision}, {"action_cost", r.action_cost}};
}

inline RewardSpec reward_spec_from_json(const nlohmann::json& j, RewardSpec r = {}) {
  r.goal = j.value("goal", r.goal);
  r.collision = j.value("collision", r.collision);
  r.action_cost = j.value("action_cost", r.action_cost);
  r.check();
  return r;
}

/// Linear decay from `initial` to `final` over `decay_steps`, then flat.
struct EpsilonSchedule {
  double initial = 1.0;
  double final = 0.01;
  std::size_t decay_steps = 0;

  double at(std::size_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return final;
    const double t = static_cast<double>(step) / static_cast<double>(decay_steps);
    return initial + t * (final - initial);
  }
};

struct TrainConfig {
  std::size_t total_steps = 1000000;
  EpsilonSchedule epsilon{1.0, 0.01, 0};  // decay_steps 0: half of total_steps
  double alpha = 0.1;                     // scaled by 1/sqrt(visits)
  double gamma = 0.95;
  double initial_q = 0.0;
  bool restrict_backup = true;
  std::size_t replay_capacity = 0;  // 0: online updates
  std::size_t batch_size = 32;
  std::size_t curve_every = 5000;
  std::uint64_t seed = 0;

  EpsilonSchedule resolved_epsilon() const {
    EpsilonSchedule e = epsilon;
    if (e.decay_steps == 0) e.decay_steps = total_steps / 2;
    return e;
  }

  void check() const {
    if (!(epsilon.initial >= 0.0 && epsilon.initial <= 1.0 && epsilon.final >= 0.0 && epsilon.final <= 1.0)) {
      throw ConfigurationError("epsilon must lie in [0, 1]");
    }
    if (epsilon.final > epsilon.initial) throw ConfigurationError("epsilon schedule must not increase");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigurationError("gamma must lie in (0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigurationError("alpha must lie in [0, 1]");
    if (replay_capacity > 0 && batch_size == 0) throw ConfigurationError("replay needs a positive batch size");
    if (curve_every == 0) throw ConfigurationError("curve_every must be positive");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"total_steps", c.total_steps},
          {"epsilon_initial", c.epsilon.initial},
          {"epsilon_final", c.epsilon.final},
          {"epsilon_decay_steps", c.resolved_epsilon().decay_steps},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"initial_q", c.initial_q},
          {"restrict_backup", c.restrict_backup},
          {"replay_capacity", c.replay_capacity},
          {"batch_size", c.batch_size},
          {"curve_every", c.curve_every},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  c.total_steps = j.value("total_steps", c.total_steps);
  c.epsilon.initial = j.value("epsilon_initial", c.epsilon.initial);
  c.epsilon.final = j.value("epsilon_final", c.epsilon.final);
  c.epsilon.decay_steps = j.value("epsilon_decay_steps", c.epsilon.decay_steps);
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
  c.initial_q = j.value("initial_q", c.initial_q);
  c.restrict_backup = j.value("restrict_backup", c.restrict_backup);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.curve_every = j.value("curve_every", c.curve_every);
  c.seed = j.value("seed", c.seed);
  c.check();
  return c;
}

/// Sparse action-value table keyed by an abstract state id. Unvisited
/// entries read as the initial value.
class TabularQ {
 public:
  explicit TabularQ(std::size_t num_actions = 0, double initial = 0.0)
      : num_actions_(num_actions), initial_(initial), default_row_(num_actions, initial) {}

  std::size_t num_actions() const { return num_actions_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return index_.size(); }

  std::span<const double> values(std::uint64_t key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return default_row_;
    return {values_.data() + it->second, num_actions_};
  }

  double at(std::uint64_t key, ActionId a) const { return values(key)[a]; }

  std::uint32_t visits(std::uint64_t key, ActionId a) const {
    const auto it = index_.find(key);
    return it == index_.end() ? 0 : visits_[it->second + a];
  }

  /// Counts a visit and returns the new count.
  std::uint32_t visit(std::uint64_t key, ActionId a) { return ++visits_[slot(key) + a]; }

  void set(std::uint64_t key, ActionId a, double v) {
    if (!std::isfinite(v)) throw std::domain_error("non-finite action value");
    values_[slot(key) + a] = v;
  }

  /// Entries in key order.
  std::vector<std::uint64_t> keys() const {
    std::vector<std::uint64_t> k;
    k.reserve(index_.size());
    for (const auto& [key, _] : index_) k.push_back(key);
    std::sort(k.begin(), k.end());
    return k;
  }

 private:
  std::size_t slot(std::uint64_t key) {
    if (num_actions_ == 0) throw std::logic_error("action-value table without actions");
    auto [it, inserted] = index_.try_emplace(key, values_.size());
    if (inserted) {
      values_.insert(values_.end(), num_actions_, initial_);
      visits_.insert(visits_.end(), num_actions_, 0);
    }
    return it->second;
  }

  std::size_t num_actions_;
  double initial_;
  std::vector<double> default_row_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> values_;
  std::vector<std::uint32_t> visits_;
};

inline nlohmann::json to_json(const TabularQ& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::uint64_t k : q.keys()) {
    std::vector<std::uint32_t> n(q.num_actions());
    for (ActionId a = 0; a < q.num_actions(); ++a) n[a] = q.visits(k, a);
    const auto v = q.values(k);
    rows.push_back({{"key", k}, {"q", std::vector<double>(v.begin(), v.end())}, {"visits", n}});
  }
  return {{"num_actions", q.num_actions()}, {"initial", q.initial_value()}, {"entries", rows}};
}

inline TabularQ tabular_q_from_json(const nlohmann::json& j) {
  TabularQ q(j.at("num_actions").get<std::size_t>(), j.at("initial").get<double>());
  for (const auto& row : j.at("entries")) {
    const auto k = row.at("key").get<std::uint64_t>();
    const auto v = row.at("q").get<std::vector<double>>();
    const auto n = row.at("visits").get<std::vector<std::uint32_t>>();
    if (v.size() != q.num_actions() || n.size() != q.num_actions()) {
      throw std::invalid_argument("action-value row has the wrong width");
    }
    for (ActionId a = 0; a < q.num_actions(); ++a) {
      q.set(k, a, v[a]);
      for (std::uint32_t i = 0; i < n[a]; ++i) q.visit(k, a);
    }
  }
  return q;
}

/// Actions a shielded agent may execute: Act(s), or {pi*(s)} when empty.
inline ActionSet executable(const ShieldQuery& q) {
  return q.acceptable.empty() ? ActionSet{q.safest} : q.acceptable;
}

/// Lowest-index argmax of `values` over `allowed`.
inline ActionId restricted_argmax(std::span<const double> values, ActionSet allowed) {
  if (allowed.empty()) throw std::invalid_argument("argmax over an empty action set");
  ActionId best = allowed.nth(0);
  for (ActionId a : allowed.to_vector()) {
    if (values[a] > values[best]) best = a;
  }
  return best;
}

/// Modified epsilon-greedy: pi* when the shield leaves nothing, otherwise a
/// uniform acceptable action with probability epsilon and the best
/// acceptable one by Q otherwise. Without a shield every action is allowed.
template <class Rng>
ActionId select_action(const std::optional<ShieldQuery>& shield, std::span<const double> q, double epsilon,
                       Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  ActionSet allowed = ActionSet::all(q.size());
  if (shield) {
    if (shield->acceptable.empty()) return shield->safest;
    allowed = shield->acceptable;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
    return allowed.nth(pick(rng));
  }
  // Ties (typically an unvisited state) are broken uniformly so that an
  // all-equal row does not always pick the lowest action.
  const double best = q[restricted_argmax(q, allowed)];
  ActionSet ties;
  for (ActionId a : allowed.to_vector()) {
    if (q[a] == best) ties.insert(a);
  }
  if (ties.size() == 1) return ties.nth(0);
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties.nth(pick(rng));
}

/// Q(s,a) += alpha [r + gamma max_{a' in next_allowed} Q(s',a') (1 - terminal) - Q(s,a)].
inline void q_update(TabularQ& q, std::uint64_t s, ActionId a, double reward, std::uint64_t next, bool terminal,
                     ActionSet next_allowed, double gamma, double alpha) {
  if (!std::isfinite(reward)) throw std::domain_error("non-finite reward");
  double target = reward;
  if (!terminal) {
    const auto row = q.values(next);
    target += gamma * row[restricted_argmax(row, next_allowed)];
  }
  const double old = q.at(s, a);
  q.set(s, a, old + alpha * (target - old));
}

template <class State>
struct EnvStep {
  State next;
  StepEvents events;
  bool truncated = false;
};

/// An episodic environment with abstract state keys for a tabular learner.
template <class E>
concept EpisodicEnv = requires(const E& env, const typename E::State& s, ActionId a, Rng& rng) {
  { env.num_actions() } -> std::convertible_to<std::size_t>;
  { env.reset(rng) } -> std::same_as<typename E::State>;
  { env.step(s, a, rng) } -> std::same_as<EnvStep<typename E::State>>;
  { env.key(s) } -> std::convertible_to<std::uint64_t>;
};

struct CurvePoint {
  std::size_t step = 0;
  std::size_t episodes = 0;           // finished in this window
  double mean_reward = 0.0;           // accumulated reward per finished episode
  std::size_t collisions = 0;         // cumulative
};

struct TrainResult {
  TabularQ q;
  std::vector<CurvePoint> curve;
  std::size_t steps = 0;
  std::size_t episodes = 0;
  std::size_t collisions = 0;
  std::size_t goals = 0;
  // Actions executed outside the shield's executable set; zero by construction.
  std::size_t shield_bypasses = 0;
};

namespace detail {

struct Experience {
  std::uint64_t s;
  ActionId a;
  double r;
  std::uint64_t next;
  bool terminal;
  ActionSet next_allowed;
};

}  // namespace detail

/// Runs `cfg.total_steps` environment steps of Q-learning. `shield` (may be
/// empty) maps a state to its shield query.
template <EpisodicEnv E>
TrainResult train(const E& env, const std::function<ShieldQuery(const typename E::State&)>& shield,
                  const RewardSpec& reward, const TrainConfig& cfg) {
  using State = typename E::State;
  reward.check();
  cfg.check();
  const std::size_t na = env.num_actions();
  const EpsilonSchedule eps = cfg.resolved_epsilon();
  TrainResult out;
  out.q = TabularQ(na, cfg.initial_q);
  Rng rng(cfg.seed);
  Rng replay_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<detail::Experience> replay;
  std::size_t replay_next = 0;

  auto query = [&](const State& s) -> std::optional<ShieldQuery> {
    if (!shield) return std::nullopt;
    return shield(s);
  };
  auto learn = [&](const detail::Experience& x) {
    const std::uint32_t n = out.q.visit(x.s, x.a);
    q_update(out.q, x.s, x.a, x.r, x.next, x.terminal, x.next_allowed, cfg.gamma,
             cfg.alpha / std::sqrt(static_cast<double>(n)));
  };

  double window_reward = 0.0;
  std::size_t window_episodes = 0;
  State s = env.reset(rng);
  std::optional<ShieldQuery> sq = query(s);
  double episode_reward = 0.0;
  for (std::size_t t = 0; t < cfg.total_steps; ++t) {
    const std::uint64_t key = env.key(s);
    const ActionId a = select_action(sq, out.q.values(key), eps.at(t), rng);
    if (sq && !executable(*sq).contains(a)) ++out.shield_bypasses;

    auto step = env.step(s, a, rng);
    const double r = reward.reward(step.events);
    episode_reward += r;
    const bool terminal = step.events.terminal();
    std::optional<ShieldQuery> next_q = terminal ? std::nullopt : query(step.next);
    ActionSet next_allowed = ActionSet::all(na);
    if (next_q && cfg.restrict_backup) next_allowed = executable(*next_q);

    const detail::Experience x{key, a, r, env.key(step.next), terminal, next_allowed};
    if (cfg.replay_capacity == 0) {
      learn(x);
    } else {
      if (replay.size() < cfg.replay_capacity) replay.push_back(x);
      else replay[replay_next] = x;
      replay_next = (replay_next + 1) % cfg.replay_capacity;
      std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
      for (std::size_t b = 0; b < cfg.batch_size; ++b) learn(replay[pick(replay_rng)]);
    }

    ++out.steps;
    if (step.events.collision) ++out.collisions;
    if (step.events.goal_reached) ++out.goals;
    if (terminal || step.truncated) {
      ++out.episodes;
      window_reward += episode_reward;
      ++window_episodes;
      episode_reward = 0.0;
      s = env.reset(rng);
      sq = query(s);
    } else {
      s = std::move(step.next);
      sq = std::move(next_q);
    }
    if ((t + 1) % cfg.curve_every == 0 || t + 1 == cfg.total_steps) {
      out.curve.push_back({t + 1, window_episodes,
                           window_episodes ? window_reward / static_cast<double>(window_episodes) : 0.0,
                           out.collisions});
      window_reward = 0.0;
      window_episodes = 0;
    }
  }
  return out;
}

/// Key for the tabular learner on the intersection: the ego on its shield
/// grid, the car and pedestrian by presence and route, plus binned position
/// and speed where a bin width is positive. The default leaves the other
/// participants' kinematics to the shield; finer keys spread 10^6 training
/// steps over too many entries to learn from.
struct StateAbstraction {
  double ego_position_bin = 2.0;
  double ego_velocity_bin = 2.0;
  double car_position_bin = 0.0;
  double car_velocity_bin = 0.0;
  double pedestrian_position_bin = 0.0;

  std::uint64_t key(const ScenarioConfig& cfg, const TrafficState& s) const {
    auto bin = [](double x, double width, double hi) -> std::uint64_t {
      if (!(width > 0.0)) return 0;
      return static_cast<std::uint64_t>(std::lround(std::clamp(x, 0.0, hi) / width));
    };
    auto count = [](double width, double hi) -> std::uint64_t {
      if (!(width > 0.0)) return 1;
      return static_cast<std::uint64_t>(std::lround(hi / width)) + 1;
    };
    const double ped_len = 2.0 * (cfg.lane_width + cfg.curb_length);

    std::uint64_t k = bin(s.ego.position, ego_position_bin, cfg.ego_path_length);
    k = k * count(ego_velocity_bin, cfg.ego_max_speed) + bin(s.ego.velocity, ego_velocity_bin, cfg.ego_max_speed);

    const std::uint64_t car_pos = count(car_position_bin, cfg.car_route_length);
    const std::uint64_t car_vel = count(car_velocity_bin, cfg.car_max_speed);
    std::uint64_t car = 0;
    if (s.car.present) {
      car = 1 + (s.car.route * car_pos + bin(s.car.position, car_position_bin, cfg.car_route_length)) * car_vel +
            bin(s.car.velocity, car_velocity_bin, cfg.car_max_speed);
    }
    k = k * (1 + kNumCarRoutes * car_pos * car_vel) + car;

    const std::uint64_t ped_pos = count(pedestrian_position_bin, ped_len);
    std::uint64_t ped = 0;
    if (s.pedestrian.present) {
      ped = 1 + s.pedestrian.route * ped_pos + bin(s.pedestrian.position, pedestrian_position_bin, ped_len);
    }
    return k * (1 + kNumPedestrianRoutes * ped_pos) + ped;
  }
};

inline nlohmann::json to_json(const StateAbstraction& a) {
  return {{"ego_position_bin", a.ego_position_bin},
          {"ego_velocity_bin", a.ego_velocity_bin},
          {"car_position_bin", a.car_position_bin},
          {"car_velocity_bin", a.car_velocity_bin},
          {"pedestrian_position_bin", a.pedestrian_position_bin}};
}

inline StateAbstraction state_abstraction_from_json(const nlohmann::json& j, StateAbstraction a = {}) {
  a.ego_position_bin = j.value("ego_position_bin", a.ego_position_bin);
  a.ego_velocity_bin = j.value("ego_velocity_bin", a.ego_velocity_bin);
  a.car_position_bin = j.value("car_position_bin", a.car_position_bin);
  a.car_velocity_bin = j.value("car_velocity_bin", a.car_velocity_bin);
  a.pedestrian_position_bin = j.value("pedestrian_position_bin", a.pedestrian_position_bin);
  if (!(a.ego_position_bin > 0.0 && a.ego_velocity_bin > 0.0)) {
    throw ConfigurationError("ego abstraction bins must be positive");
  }
  for (double w : {a.car_position_bin, a.car_velocity_bin, a.pedestrian_position_bin}) {
    if (w < 0.0) throw ConfigurationError("abstraction bins must be non-negative");
  }
  return a;
}

/// The intersection simulator as an episodic environment; episodes are cut
/// at the configured step cap.
class IntersectionEnv {
 public:
  using State = TrafficState;

  IntersectionEnv(const ScenarioConfig& cfg, StateAbstraction abstraction = {})
      : sim_(cfg), abstraction_(abstraction) {}

  const Simulator& simulator() const { return sim_; }
  const StateAbstraction& abstraction() const { return abstraction_; }
  std::size_t num_actions() const { return kNumEgoActions; }
  State reset(Rng& rng) const { return sim_.initial_state(rng); }

  EnvStep<State> step(const State& s, ActionId a, Rng& rng) const {
    auto out = sim_.step(s, a, rng);
    const bool truncated = !out.events.terminal() && out.state.step_count >= sim_.config().max_steps;
    return {std::move(out.state), out.events, truncated};
  }

  std::uint64_t key(const State& s) const { return abstraction_.key(sim_.config(), s); }

 private:
  Simulator sim_;
  StateAbstraction abstraction_;
};

enum class PolicyKind { SafeRandom, RuleBasedEgo, RlGreedy, SafeRlGreedy };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::SafeRandom: return "safe-random";
    case PolicyKind::RuleBasedEgo: return "rule-based-ego";
    case PolicyKind::RlGreedy: return "rl-greedy";
    case PolicyKind::SafeRlGreedy: return "safe-rl-greedy";
  }
  return "?";
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "safe-random") return PolicyKind::SafeRandom;
  if (s == "rule-based-ego" || s == "rule-based") return PolicyKind::RuleBasedEgo;
  if (s == "rl-greedy" || s == "rl") return PolicyKind::RlGreedy;
  if (s == "safe-rl-greedy" || s == "safe-rl") return PolicyKind::SafeRlGreedy;
  throw ConfigurationError("unknown policy kind '" + s + "'");
}

using IntersectionShield = CompositeShield<TrafficGrid>;

/// A decision rule for the ego on the intersection.
class Policy {
 public:
  Policy(PolicyKind kind, std::shared_ptr<const IntersectionShield> shield, std::shared_ptr<const TabularQ> q,
         StateAbstraction abstraction = {})
      : kind_(kind), shield_(std::move(shield)), q_(std::move(q)), abstraction_(abstraction) {
    const bool needs_shield = kind_ == PolicyKind::SafeRandom || kind_ == PolicyKind::SafeRlGreedy;
    const bool needs_q = kind_ == PolicyKind::RlGreedy || kind_ == PolicyKind::SafeRlGreedy;
    if (needs_shield && !shield_) throw ConfigurationError(to_string(kind_) + " needs a shield");
    if (needs_q && !q_) throw ConfigurationError(to_string(kind_) + " needs an action-value table");
    if (q_ && q_->num_actions() != kNumEgoActions) throw ConfigurationError("action-value table width mismatch");
    if (shield_ && shield_->num_actions() != kNumEgoActions) throw ConfigurationError("shield action-space mismatch");
  }

  PolicyKind kind() const { return kind_; }
  const IntersectionShield* shield() const { return shield_.get(); }

  /// Shield query for `s` when the policy is shielded.
  std::optional<ShieldQuery> query(const TrafficState& s) const {
    if (kind_ == PolicyKind::SafeRandom || kind_ == PolicyKind::SafeRlGreedy) return shield_->query(s);
    return std::nullopt;
  }

  ActionId act(const Layout& layout, const TrafficState& s, Rng& rng,
               const std::optional<ShieldQuery>& sq) const {
    const auto& cfg = layout.config();
    switch (kind_) {
      case PolicyKind::SafeRandom: {
        if (!sq) throw std::logic_error("safe-random policy called without a shield query");
        if (sq->acceptable.empty()) return sq->safest;
        std::uniform_int_distribution<std::size_t> pick(0, sq->acceptable.size() - 1);
        return sq->acceptable.nth(pick(rng));
      }
      case PolicyKind::RuleBasedEgo:
        return nearest_ego_action(rule_driver_action(layout, s, DriverRole::Ego, cfg.driver));
      case PolicyKind::RlGreedy:
        return select_action(std::nullopt, q_->values(abstraction_.key(cfg, s)), 0.0, rng);
      case PolicyKind::SafeRlGreedy:
        return select_action(sq, q_->values(abstraction_.key(cfg, s)), 0.0, rng);
    }
    throw std::logic_error("unhandled policy kind");
  }

 private:
  PolicyKind kind_;
  std::shared_ptr<const IntersectionShield> shield_;
  std::shared_ptr<const TabularQ> q_;
  StateAbstraction abstraction_;
};

/// Non-learned policies: safe-random (needs a shield) and the rule-based ego.
inline Policy baseline_policy(PolicyKind kind, std::shared_ptr<const IntersectionShield> shield) {
  if (kind != PolicyKind::SafeRandom && kind != PolicyKind::RuleBasedEgo) {
    throw ConfigurationError(to_string(kind) + " is a learned policy");
  }
  return Policy(kind, std::move(shield), nullptr);
}

}  // namespace probshield
