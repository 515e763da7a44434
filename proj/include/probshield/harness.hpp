#pragma once

// Orchestration behind the prob-shield commands: shield computation, policy
// training, Monte Carlo evaluation and reward sweeps, plus their file formats.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "probshield/checker.hpp"
#include "probshield/joint_mdp.hpp"
#include "probshield/learner.hpp"
#include "probshield/ltl.hpp"

namespace probshield {

using nlohmann::json;

struct ShieldSettings {
  std::string spec = "!collision U goal";
  double lambda = 0.9999;
  double margin = 0.0;
  GridResolution resolution{};
  AbsentRule absent_rule = AbsentRule::LookupTable;
  double collision_margin = 0.5;
  double tolerance = 1e-6;
  std::size_t max_iterations = 10000;
};

struct EvalSettings {
  std::size_t episodes = 1000;
  std::uint64_t seed = 1;
};

struct SweepSettings {
  std::vector<double> action_costs{0.0, -0.02, -0.05};
  std::vector<double> collision_penalties{-1.0, -2.0, -5.0};
  std::vector<std::string> variants{"rl", "safe-rl"};
};

/// Everything a command needs, loaded from one JSON file.
struct RunConfig {
  ScenarioConfig scenario{};
  ShieldSettings shield{};
  RewardSpec reward{};
  TrainConfig train{};
  StateAbstraction abstraction{};
  EvalSettings eval{};
  SweepSettings sweep{};
  std::string policy = "safe-rl";
  std::string shield_bundle;  // path; empty: compute shields in-process
  std::string q_checkpoint;   // path to a trained action-value table
  unsigned workers = 1;
};

inline json to_json(const ShieldSettings& s) {
  return {{"spec", s.spec},
          {"lambda", s.lambda},
          {"margin", s.margin},
          {"position_resolution", s.resolution.position},
          {"vehicle_velocity_resolution", s.resolution.vehicle_velocity},
          {"pedestrian_velocity_resolution", s.resolution.pedestrian_velocity},
          {"absent_rule", s.absent_rule == AbsentRule::LookupTable ? "lookup" : "unconstrained"},
          {"collision_margin", s.collision_margin},
          {"tolerance", s.tolerance},
          {"max_iterations", s.max_iterations}};
}

inline ShieldSettings shield_settings_from_json(const json& j, ShieldSettings s = {}) {
  s.spec = j.value("spec", s.spec);
  s.lambda = j.value("lambda", s.lambda);
  s.margin = j.value("margin", s.margin);
  s.resolution.position = j.value("position_resolution", s.resolution.position);
  s.resolution.vehicle_velocity = j.value("vehicle_velocity_resolution", s.resolution.vehicle_velocity);
  s.resolution.pedestrian_velocity = j.value("pedestrian_velocity_resolution", s.resolution.pedestrian_velocity);
  if (j.contains("absent_rule")) {
    const auto r = j.at("absent_rule").get<std::string>();
    if (r == "lookup") s.absent_rule = AbsentRule::LookupTable;
    else if (r == "unconstrained") s.absent_rule = AbsentRule::Unconstrained;
    else throw ConfigurationError("absent_rule must be 'lookup' or 'unconstrained'");
  }
  s.collision_margin = j.value("collision_margin", s.collision_margin);
  s.tolerance = j.value("tolerance", s.tolerance);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  return s;
}

inline json to_json(const RunConfig& c) {
  return {{"scenario", to_json(c.scenario)},
          {"shield", to_json(c.shield)},
          {"reward", to_json(c.reward)},
          {"train", to_json(c.train)},
          {"abstraction", to_json(c.abstraction)},
          {"eval", {{"episodes", c.eval.episodes}, {"seed", c.eval.seed}}},
          {"sweep",
           {{"action_costs", c.sweep.action_costs},
            {"collision_penalties", c.sweep.collision_penalties},
            {"variants", c.sweep.variants}}},
          {"policy", c.policy},
          {"shield_bundle", c.shield_bundle},
          {"q_checkpoint", c.q_checkpoint},
          {"workers", c.workers}};
}

inline RunConfig run_config_from_json(const json& j) {
  static const std::vector<std::string> known{"scenario", "shield", "reward", "train", "abstraction", "eval",
                                              "sweep", "policy", "shield_bundle", "q_checkpoint", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigurationError("unknown configuration key '" + key + "'");
    }
  }
  RunConfig c;
  if (j.contains("scenario")) c.scenario = scenario_config_from_json(j.at("scenario"));
  c.scenario.check();
  if (j.contains("shield")) c.shield = shield_settings_from_json(j.at("shield"));
  if (j.contains("reward")) c.reward = reward_spec_from_json(j.at("reward"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("abstraction")) c.abstraction = state_abstraction_from_json(j.at("abstraction"));
  if (j.contains("eval")) {
    c.eval.episodes = j.at("eval").value("episodes", c.eval.episodes);
    c.eval.seed = j.at("eval").value("seed", c.eval.seed);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    c.sweep.action_costs = s.value("action_costs", c.sweep.action_costs);
    c.sweep.collision_penalties = s.value("collision_penalties", c.sweep.collision_penalties);
    c.sweep.variants = s.value("variants", c.sweep.variants);
  }
  c.policy = j.value("policy", c.policy);
  c.shield_bundle = j.value("shield_bundle", c.shield_bundle);
  c.q_checkpoint = j.value("q_checkpoint", c.q_checkpoint);
  c.workers = j.value("workers", c.workers);
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& doc, int indent = 2) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << doc.dump(indent) << '\n';
}

// ---------------------------------------------------------------- shields

/// One solved sub-problem: ego plus one other participant.
struct SubShield {
  Participant participant = Participant::Car;
  TrafficGrid grid;
  std::shared_ptr<const ProbTable> table;
  std::size_t mdp_entries = 0;
  double build_seconds = 0.0;
  double check_seconds = 0.0;
};

struct ShieldBundle {
  std::string spec;
  double lambda = 0.9999;
  double margin = 0.0;
  std::vector<SubShield> parts;

  const SubShield* find(Participant p) const {
    for (const auto& s : parts) {
      if (s.participant == p) return &s;
    }
    return nullptr;
  }
};

inline std::vector<Participant> participants_of(ScenarioKind k) {
  std::vector<Participant> out;
  if (has_car(k)) out.push_back(Participant::Car);
  if (has_pedestrian(k)) out.push_back(Participant::Pedestrian);
  return out;
}

/// Parses `spec` and reduces it against the intersection's propositions, so
/// a formula outside the fragment fails before any model is built.
inline Formula validate_spec(const std::string& spec) {
  Formula f = parse_formula(spec);
  MdpBuilder probe(1, 1);
  probe.declare_proposition(kCollisionLabel).declare_proposition(kGoalLabel).mark_terminal(0);
  reduce(f, probe.build());
  return f;
}

/// Builds and model-checks the sub-MDP for each participant. `on_sweep`
/// receives (participant, sweep, residual).
inline ShieldBundle compute_shields(const ScenarioConfig& scenario, const ShieldSettings& settings,
                                    const std::vector<Participant>& participants, unsigned workers = 1,
                                    const std::function<void(Participant, std::size_t, double)>& on_sweep = {}) {
  const Formula formula = validate_spec(settings.spec);
  const Layout layout(scenario);
  ShieldBundle bundle{settings.spec, settings.lambda, settings.margin, {}};
  for (Participant who : participants) {
    SubShield part;
    part.participant = who;
    part.grid = TrafficGrid::for_layout(layout, who, settings.resolution, settings.absent_rule);
    const auto t0 = std::chrono::steady_clock::now();
    const LabelledMdp mdp = build_joint_mdp(layout, part.grid, {settings.collision_margin});
    const auto t1 = std::chrono::steady_clock::now();
    const ReachabilityProblem problem = reduce(formula, mdp);
    CheckerConfig cc;
    cc.tolerance = settings.tolerance;
    cc.max_iterations = settings.max_iterations;
    cc.workers = std::max(1u, workers);
    if (on_sweep) cc.on_sweep = [&on_sweep, who](std::size_t k, double r) { on_sweep(who, k, r); };
    part.table = std::make_shared<const ProbTable>(max_reach(mdp, problem, cc));
    const auto t2 = std::chrono::steady_clock::now();
    part.mdp_entries = mdp.num_entries();
    part.build_seconds = std::chrono::duration<double>(t1 - t0).count();
    part.check_seconds = std::chrono::duration<double>(t2 - t1).count();
    bundle.parts.push_back(std::move(part));
  }
  return bundle;
}

inline json to_json(const ShieldBundle& b) {
  json parts = json::array();
  for (const auto& p : b.parts) {
    parts.push_back({{"participant", to_string(p.participant)},
                     {"grid", to_json(p.grid)},
                     {"table", prob_table_to_json(*p.table)}});
  }
  return {{"format", "prob-shield-bundle/1"},
          {"spec", b.spec},
          {"lambda", b.lambda},
          {"margin", b.margin},
          {"parts", parts}};
}

inline ShieldBundle shield_bundle_from_json(const json& j) {
  if (j.value("format", std::string()) != "prob-shield-bundle/1") {
    throw ConfigurationError("not a shield bundle (format tag missing or unknown)");
  }
  ShieldBundle b{j.at("spec").get<std::string>(), j.at("lambda").get<double>(), j.at("margin").get<double>(), {}};
  for (const auto& p : j.at("parts")) {
    SubShield s;
    s.grid = traffic_grid_from_json(p.at("grid"));
    s.participant = s.grid.participant();
    s.table = std::make_shared<const ProbTable>(prob_table_from_json(p.at("table")));
    if (s.table->num_states != s.grid.num_states() || s.table->num_actions != kNumEgoActions) {
      throw ConfigurationError("shield bundle: table shape does not match its grid");
    }
    b.parts.push_back(std::move(s));
  }
  return b;
}

/// The composite shield for a scenario: one part per participant present.
inline std::shared_ptr<const IntersectionShield> composite_for(const ShieldBundle& bundle, ScenarioKind scenario) {
  std::vector<GridShield<TrafficGrid>> parts;
  for (Participant p : participants_of(scenario)) {
    const SubShield* s = bundle.find(p);
    if (!s) throw ConfigurationError("shield bundle has no " + to_string(p) + " part for " + to_string(scenario));
    parts.emplace_back(Shield(s->table, bundle.lambda, bundle.margin), s->grid);
  }
  return std::make_shared<const IntersectionShield>(std::move(parts), kHardBrake);
}

// ------------------------------------------------------------- evaluation

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of episode `i` in a run seeded with `seed`.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t i) { return splitmix64(splitmix64(seed) ^ i); }

struct EpisodeOutcome {
  std::size_t steps = 0;
  bool collision = false;
  bool goal = false;
  bool capped = false;
  std::size_t clamped_queries = 0;
  std::size_t fallback_steps = 0;  // steps where the shield left no action
  std::size_t shield_bypasses = 0;
  std::size_t stationary_contacts = 0;
};

inline EpisodeOutcome run_episode(const Simulator& sim, const Policy& policy, Rng& rng) {
  EpisodeOutcome out;
  TrafficState s = sim.initial_state(rng);
  const std::size_t cap = sim.config().max_steps;
  while (true) {
    const auto sq = policy.query(s);
    const ActionId a = policy.act(sim.layout(), s, rng, sq);
    if (sq) {
      out.clamped_queries += sq->clamped;
      if (sq->acceptable.empty()) ++out.fallback_steps;
      if (!executable(*sq).contains(a)) ++out.shield_bypasses;
    }
    auto next = sim.step(s, a, rng);
    s = std::move(next.state);
    ++out.steps;
    if (next.events.stationary_contact) ++out.stationary_contacts;
    if (next.events.collision) {
      out.collision = true;
      break;
    }
    if (next.events.goal_reached) {
      out.goal = true;
      break;
    }
    if (out.steps >= cap) {
      out.capped = true;
      break;
    }
  }
  return out;
}

/// Wilson score interval at 95%.
struct RateInterval {
  double lower = 0.0;
  double upper = 0.0;
};

inline RateInterval wilson_interval(std::size_t successes, std::size_t n) {
  if (n == 0) throw std::invalid_argument("interval over zero trials");
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct EvalReport {
  std::string policy;
  std::string scenario;
  std::size_t episodes = 0;
  std::size_t collisions = 0;
  std::size_t goals = 0;
  std::size_t capped = 0;
  double collision_rate = 0.0;  // percent
  double collision_half_width = 0.0;
  double goal_rate = 0.0;  // percent
  double goal_half_width = 0.0;
  double mean_steps = 0.0;       // all episodes, capped ones at the cap
  double mean_goal_steps = 0.0;  // episodes that reached the goal
  std::size_t clamped_queries = 0;
  std::size_t fallback_steps = 0;
  std::size_t shield_bypasses = 0;
  std::size_t stationary_contacts = 0;
};

/// Runs `episodes` independently seeded episodes over `workers` threads.
inline EvalReport evaluate(const ScenarioConfig& scenario, const Policy& policy, std::size_t episodes,
                           std::uint64_t seed, unsigned workers = 1) {
  if (episodes == 0) throw ConfigurationError("evaluation needs at least one episode");
  const Simulator sim(scenario);
  struct Totals {
    std::size_t collisions = 0, goals = 0, capped = 0, steps = 0, goal_steps = 0;
    std::size_t clamped = 0, fallbacks = 0, bypasses = 0, contacts = 0;
  };
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(episodes)));
  std::vector<Totals> totals(w);
  auto run = [&](unsigned k) {
    Totals& t = totals[k];
    for (std::size_t i = k; i < episodes; i += w) {
      Rng rng(episode_seed(seed, i));
      const EpisodeOutcome o = run_episode(sim, policy, rng);
      t.collisions += o.collision;
      t.goals += o.goal;
      t.capped += o.capped;
      t.steps += o.steps;
      if (o.goal) t.goal_steps += o.steps;
      t.clamped += o.clamped_queries;
      t.fallbacks += o.fallback_steps;
      t.bypasses += o.shield_bypasses;
      t.contacts += o.stationary_contacts;
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned k = 0; k < w; ++k) threads.emplace_back(run, k);
    for (auto& th : threads) th.join();
  }
  Totals sum;
  for (const auto& t : totals) {
    sum.collisions += t.collisions;
    sum.goals += t.goals;
    sum.capped += t.capped;
    sum.steps += t.steps;
    sum.goal_steps += t.goal_steps;
    sum.clamped += t.clamped;
    sum.fallbacks += t.fallbacks;
    sum.bypasses += t.bypasses;
    sum.contacts += t.contacts;
  }
  EvalReport r;
  r.policy = to_string(policy.kind());
  r.scenario = to_string(scenario.scenario);
  r.episodes = episodes;
  r.collisions = sum.collisions;
  r.goals = sum.goals;
  r.capped = sum.capped;
  const double n = static_cast<double>(episodes);
  r.collision_rate = 100.0 * static_cast<double>(sum.collisions) / n;
  r.goal_rate = 100.0 * static_cast<double>(sum.goals) / n;
  const auto ci_c = wilson_interval(sum.collisions, episodes);
  const auto ci_g = wilson_interval(sum.goals, episodes);
  r.collision_half_width = 100.0 * (ci_c.upper - ci_c.lower) / 2.0;
  r.goal_half_width = 100.0 * (ci_g.upper - ci_g.lower) / 2.0;
  r.mean_steps = static_cast<double>(sum.steps) / n;
  r.mean_goal_steps = sum.goals ? static_cast<double>(sum.goal_steps) / static_cast<double>(sum.goals) : 0.0;
  r.clamped_queries = sum.clamped;
  r.fallback_steps = sum.fallbacks;
  r.shield_bypasses = sum.bypasses;
  r.stationary_contacts = sum.contacts;
  return r;
}

inline json to_json(const EvalReport& r) {
  return {{"policy", r.policy},
          {"scenario", r.scenario},
          {"episodes", r.episodes},
          {"collisions", r.collisions},
          {"goals", r.goals},
          {"capped", r.capped},
          {"collision_rate", r.collision_rate},
          {"collision_half_width", r.collision_half_width},
          {"goal_rate", r.goal_rate},
          {"goal_half_width", r.goal_half_width},
          {"mean_steps", r.mean_steps},
          {"mean_goal_steps", r.mean_goal_steps},
          {"clamped_queries", r.clamped_queries},
          {"fallback_steps", r.fallback_steps},
          {"shield_bypasses", r.shield_bypasses},
          {"stationary_contacts", r.stationary_contacts}};
}

inline const char* kEvalCsvHeader =
    "policy,scenario,episodes,collisions,goals,capped,collision_rate,collision_half_width,goal_rate,"
    "goal_half_width,mean_steps,mean_goal_steps,clamped_queries,fallback_steps,shield_bypasses,"
    "stationary_contacts";

inline std::string eval_csv_row(const EvalReport& r) {
  std::ostringstream o;
  o.precision(10);
  o << r.policy << ',' << r.scenario << ',' << r.episodes << ',' << r.collisions << ',' << r.goals << ','
    << r.capped << ',' << r.collision_rate << ',' << r.collision_half_width << ',' << r.goal_rate << ','
    << r.goal_half_width << ',' << r.mean_steps << ',' << r.mean_goal_steps << ',' << r.clamped_queries << ','
    << r.fallback_steps << ',' << r.shield_bypasses << ',' << r.stationary_contacts;
  return o.str();
}

// --------------------------------------------------------------- training

/// Trains on the scenario; `shield` null means plain RL.
inline TrainResult train_policy(const ScenarioConfig& scenario, std::shared_ptr<const IntersectionShield> shield,
                                const RewardSpec& reward, const TrainConfig& cfg,
                                const StateAbstraction& abstraction) {
  const IntersectionEnv env(scenario, abstraction);
  if (shield && shield->num_actions() != env.num_actions()) {
    throw ConfigurationError("shield and environment disagree on the action space");
  }
  std::function<ShieldQuery(const TrafficState&)> fn;
  if (shield) fn = [shield](const TrafficState& s) { return shield->query(s); };
  return train(env, fn, reward, cfg);
}

inline const char* kCurveCsvHeader = "step,episodes,mean_reward,collisions";

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "# prob-shield training curve v1\n" << kCurveCsvHeader << '\n';
  out.precision(10);
  for (const auto& c : curve) out << c.step << ',' << c.episodes << ',' << c.mean_reward << ',' << c.collisions << '\n';
}

inline json to_json(const TrainResult& r) {
  return {{"steps", r.steps},
          {"episodes", r.episodes},
          {"collisions", r.collisions},
          {"goals", r.goals},
          {"shield_bypasses", r.shield_bypasses},
          {"table_entries", r.q.size()}};
}

// ------------------------------------------------------------------ sweep

struct ParetoPoint {
  std::string variant;  // "rl" or "safe-rl"
  double action_cost = 0.0;
  double collision_penalty = 0.0;
  double mean_steps = 0.0;
  double collision_rate = 0.0;
  double goal_rate = 0.0;
  std::size_t training_collisions = 0;
};

/// Trains and evaluates one policy per (action cost, collision penalty,
/// variant), in that nesting order. Points run concurrently over `workers`.
inline std::vector<ParetoPoint> run_sweep(const RunConfig& cfg, std::shared_ptr<const IntersectionShield> shield,
                                          unsigned workers = 1) {
  struct Job {
    double cost, penalty;
    std::string variant;
  };
  std::vector<Job> jobs;
  for (double c : cfg.sweep.action_costs) {
    for (double p : cfg.sweep.collision_penalties) {
      RewardSpec r = cfg.reward;
      r.action_cost = c;
      r.collision = p;
      r.check();
      for (const auto& v : cfg.sweep.variants) {
        if (v != "rl" && v != "safe-rl") throw ConfigurationError("sweep variant must be 'rl' or 'safe-rl'");
        if (v == "safe-rl" && !shield) throw ConfigurationError("safe-rl sweep points need a shield");
        jobs.push_back({c, p, v});
      }
    }
  }
  std::vector<ParetoPoint> points(jobs.size());
  auto run = [&](std::size_t i) {
    const Job& job = jobs[i];
    RewardSpec r = cfg.reward;
    r.action_cost = job.cost;
    r.collision = job.penalty;
    const bool safe = job.variant == "safe-rl";
    const auto trained = train_policy(cfg.scenario, safe ? shield : nullptr, r, cfg.train, cfg.abstraction);
    const Policy policy(safe ? PolicyKind::SafeRlGreedy : PolicyKind::RlGreedy, shield,
                        std::make_shared<const TabularQ>(trained.q), cfg.abstraction);
    const EvalReport rep = evaluate(cfg.scenario, policy, cfg.eval.episodes, cfg.eval.seed, 1);
    points[i] = {job.variant, job.cost, job.penalty, rep.mean_steps, rep.collision_rate, rep.goal_rate,
                 trained.collisions};
  };
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (w == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::vector<std::thread> threads;
    for (unsigned k = 0; k < w; ++k) {
      threads.emplace_back([&, k] {
        for (std::size_t i = k; i < jobs.size(); i += w) run(i);
      });
    }
    for (auto& t : threads) t.join();
  }
  return points;
}

/// Points of each variant not dominated in (mean steps, collision rate).
inline std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> front;
  for (const auto& p : points) {
    bool dominated = false;
    for (const auto& q : points) {
      if (q.variant != p.variant) continue;
      const bool no_worse = q.mean_steps <= p.mean_steps && q.collision_rate <= p.collision_rate;
      const bool better = q.mean_steps < p.mean_steps || q.collision_rate < p.collision_rate;
      if (no_worse && better) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(p);
  }
  return front;
}

inline const char* kSweepCsvHeader =
    "variant,action_cost,collision_penalty,mean_steps,collision_rate,goal_rate,training_collisions";

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<ParetoPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "# prob-shield sweep v1\n" << kSweepCsvHeader << '\n';
  out.precision(10);
  for (const auto& p : points) {
    out << p.variant << ',' << p.action_cost << ',' << p.collision_penalty << ',' << p.mean_steps << ','
        << p.collision_rate << ',' << p.goal_rate << ',' << p.training_collisions << '\n';
  }
}

inline json to_json(const ParetoPoint& p) {
  return {{"variant", p.variant},
          {"action_cost", p.action_cost},
          {"collision_penalty", p.collision_penalty},
          {"mean_steps", p.mean_steps},
          {"collision_rate", p.collision_rate},
          {"goal_rate", p.goal_rate},
          {"training_collisions", p.training_collisions}};
}

/// Checkpoint of a trained table with the abstraction it was keyed by.
inline json q_checkpoint_json(const TabularQ& q, const StateAbstraction& abstraction, const std::string& scenario,
                              bool shielded) {
  return {{"format", "prob-shield-q/1"},
          {"scenario", scenario},
          {"shielded", shielded},
          {"abstraction", to_json(abstraction)},
          {"table", to_json(q)}};
}

struct QCheckpoint {
  TabularQ q;
  StateAbstraction abstraction;
  std::string scenario;
  bool shielded = false;
};

inline QCheckpoint q_checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != "prob-shield-q/1") {
    throw ConfigurationError("not an action-value checkpoint (format tag missing or unknown)");
  }
  return {tabular_q_from_json(j.at("table")), state_abstraction_from_json(j.at("abstraction")),
          j.at("scenario").get<std::string>(), j.at("shielded").get<bool>()};
}

}  // namespace probshield
