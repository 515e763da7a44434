// prob-shield: compute shields, train, evaluate and sweep on the intersection.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "probshield/harness.hpp"

namespace fs = std::filesystem;
using namespace probshield;

namespace {

struct Options {
  std::string config;
  std::optional<std::string> spec;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> steps;
  std::string out;
  std::optional<std::string> policy;
  std::optional<std::string> shield;
  std::optional<std::string> q;
  bool unshielded = false;
  bool pareto = false;
  bool quiet = false;
};

unsigned worker_count(const RunConfig& cfg) {
  if (const char* env = std::getenv("PROB_SHIELD_WORKERS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ConfigurationError("PROB_SHIELD_WORKERS must be a positive integer");
  }
  return std::max(1u, cfg.workers);
}

RunConfig resolve(const Options& o, const std::string& command) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : run_config_from_json(read_json_file(o.config));
  if (o.spec) cfg.shield.spec = *o.spec;
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.eval.seed = *o.seed;
  }
  if (o.episodes) {
    if (*o.episodes == 0) throw ConfigurationError("--episodes must be positive");
    cfg.eval.episodes = *o.episodes;
  }
  if (o.steps) cfg.train.total_steps = *o.steps;
  if (o.policy) cfg.policy = *o.policy;
  if (o.shield) cfg.shield_bundle = *o.shield;
  if (o.q) cfg.q_checkpoint = *o.q;
  cfg.workers = worker_count(cfg);
  cfg.train.check();
  if (command == "eval" && cfg.eval.episodes == 0) throw ConfigurationError("evaluation needs at least one episode");
  return cfg;
}

fs::path run_dir(const Options& o, const std::string& command) {
  fs::path dir = o.out;
  if (dir.empty()) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
    dir = fs::path("runs") / name.str();
  }
  fs::create_directories(dir);
  return dir;
}

// The bundle named in the config, or shields computed on the spot.
ShieldBundle load_or_compute(const RunConfig& cfg, bool quiet) {
  if (!cfg.shield_bundle.empty()) {
    if (!fs::exists(cfg.shield_bundle)) throw ConfigurationError("shield bundle '" + cfg.shield_bundle + "' not found");
    return shield_bundle_from_json(read_json_file(cfg.shield_bundle));
  }
  if (!quiet) std::cerr << "computing shields for " << to_string(cfg.scenario.scenario) << "\n";
  return compute_shields(cfg.scenario, cfg.shield, participants_of(cfg.scenario.scenario), cfg.workers);
}

int cmd_check(const Options& o) {
  const RunConfig cfg = resolve(o, "check");
  // Fail on an unsupported formula before any model is built.
  validate_spec(cfg.shield.spec);
  const fs::path dir = run_dir(o, "check");
  write_json_file(dir / "resolved_config.json", to_json(cfg));

  const ShieldBundle bundle = compute_shields(cfg.scenario, cfg.shield, participants_of(cfg.scenario.scenario),
                                              cfg.workers);
  json report = json::array();
  bool ok = true;
  for (const auto& p : bundle.parts) {
    const ProbTable& t = *p.table;
    std::cout << to_string(p.participant) << ": " << p.grid.num_states() << " states ("
              << p.grid.ego_states() << " ego x " << p.grid.other_states() - 1 << " " << to_string(p.participant)
              << " + absent), " << p.mdp_entries << " transitions, " << t.iterations_run << " sweeps, residual "
              << std::scientific << std::setprecision(3) << t.final_residual << std::defaultfloat
              << (t.converged ? "" : " NOT CONVERGED") << "\n";
    report.push_back({{"participant", to_string(p.participant)},
                      {"states", p.grid.num_states()},
                      {"ego_states", p.grid.ego_states()},
                      {"participant_states", p.grid.other_states() - 1},
                      {"transitions", p.mdp_entries},
                      {"sweeps", t.iterations_run},
                      {"final_residual", t.final_residual},
                      {"converged", t.converged},
                      {"monotonicity_violations", t.monotonicity_violations},
                      {"bound_violations", t.bound_violations},
                      {"build_seconds", p.build_seconds},
                      {"check_seconds", p.check_seconds}});
    ok = ok && t.converged && t.monotonicity_violations == 0 && t.bound_violations == 0;
  }
  write_json_file(dir / "check_report.json", report);
  if (!ok) {
    std::cerr << "value iteration did not converge within " << cfg.shield.max_iterations
              << " sweeps; no bundle written\n";
    return 2;
  }
  write_json_file(dir / "shield_bundle.json", to_json(bundle), -1);
  std::cout << "bundle: " << (dir / "shield_bundle.json").string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = resolve(o, "train");
  const fs::path dir = run_dir(o, "train");
  write_json_file(dir / "resolved_config.json", to_json(cfg));
  std::shared_ptr<const IntersectionShield> shield;
  if (!o.unshielded) shield = composite_for(load_or_compute(cfg, o.quiet), cfg.scenario.scenario);

  const TrainResult r = train_policy(cfg.scenario, shield, cfg.reward, cfg.train, cfg.abstraction);
  write_json_file(dir / "q.json",
                  q_checkpoint_json(r.q, cfg.abstraction, to_string(cfg.scenario.scenario), shield != nullptr), -1);
  write_curve_csv(dir / "curve.csv", r.curve);
  write_json_file(dir / "train_report.json", to_json(r));
  std::cout << (shield ? "shielded" : "unshielded") << " training, " << r.steps << " steps, " << r.episodes
            << " episodes, " << r.goals << " goals, " << r.collisions << " collisions, " << r.shield_bypasses
            << " shield bypasses\n"
            << "checkpoint: " << (dir / "q.json").string() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = resolve(o, "eval");
  const PolicyKind kind = policy_kind_from_string(cfg.policy);
  const bool needs_shield = kind == PolicyKind::SafeRandom || kind == PolicyKind::SafeRlGreedy;
  const bool needs_q = kind == PolicyKind::RlGreedy || kind == PolicyKind::SafeRlGreedy;

  std::shared_ptr<const TabularQ> q;
  StateAbstraction abstraction = cfg.abstraction;
  if (needs_q) {
    if (cfg.q_checkpoint.empty()) throw ConfigurationError(to_string(kind) + " needs a checkpoint (--q)");
    if (!fs::exists(cfg.q_checkpoint)) throw ConfigurationError("checkpoint '" + cfg.q_checkpoint + "' not found");
    QCheckpoint ck = q_checkpoint_from_json(read_json_file(cfg.q_checkpoint));
    if (ck.scenario != to_string(cfg.scenario.scenario)) {
      throw ConfigurationError("checkpoint was trained on " + ck.scenario + ", config is " +
                               to_string(cfg.scenario.scenario));
    }
    abstraction = ck.abstraction;
    q = std::make_shared<const TabularQ>(std::move(ck.q));
  }
  std::shared_ptr<const IntersectionShield> shield;
  if (needs_shield) shield = composite_for(load_or_compute(cfg, o.quiet), cfg.scenario.scenario);

  const fs::path dir = run_dir(o, "eval");
  write_json_file(dir / "resolved_config.json", to_json(cfg));
  const Policy policy(kind, shield, q, abstraction);
  const EvalReport r = evaluate(cfg.scenario, policy, cfg.eval.episodes, cfg.eval.seed, cfg.workers);
  {
    std::ofstream csv(dir / "eval.csv");
    csv << "# prob-shield evaluation v1\n" << kEvalCsvHeader << '\n' << eval_csv_row(r) << '\n';
  }
  write_json_file(dir / "eval.json", to_json(r));
  std::cout << std::fixed << std::setprecision(2) << r.policy << " on " << r.scenario << ", " << r.episodes
            << " episodes: collision rate " << r.collision_rate << "% (+-" << r.collision_half_width
            << "), goal rate " << r.goal_rate << "%, mean steps " << r.mean_steps << " (goal-only "
            << r.mean_goal_steps << ", " << r.capped << " capped)\n";
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig cfg = resolve(o, "sweep");
  const fs::path dir = run_dir(o, "sweep");
  write_json_file(dir / "resolved_config.json", to_json(cfg));
  const bool want_safe =
      std::find(cfg.sweep.variants.begin(), cfg.sweep.variants.end(), "safe-rl") != cfg.sweep.variants.end();
  std::shared_ptr<const IntersectionShield> shield;
  if (want_safe) shield = composite_for(load_or_compute(cfg, o.quiet), cfg.scenario.scenario);

  const auto points = run_sweep(cfg, shield, cfg.workers);
  write_sweep_csv(dir / "sweep.csv", points);
  json doc = json::array();
  for (const auto& p : points) doc.push_back(to_json(p));
  write_json_file(dir / "sweep.json", doc);
  if (o.pareto) {
    const auto front = pareto_front(points);
    write_sweep_csv(dir / "pareto.csv", front);
    json f = json::array();
    for (const auto& p : front) f.push_back(to_json(p));
    write_json_file(dir / "pareto.json", f);
  }
  for (const auto& p : points) {
    std::cout << std::fixed << std::setprecision(2) << p.variant << " cost " << p.action_cost << " penalty "
              << p.collision_penalty << ": mean steps " << p.mean_steps << ", collision rate " << p.collision_rate
              << "%\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic shields for safe reinforcement learning at an intersection"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--spec", o.spec, "Specification formula, e.g. \"!collision U goal\"");
    sub->add_option("--seed", o.seed, "Random seed for training and evaluation");
    sub->add_option("--episodes", o.episodes, "Evaluation episodes");
    sub->add_option("--out", o.out, "Run directory (default runs/<command>-<time>)");
    sub->add_option("--shield", o.shield, "Shield bundle written by `check`");
    sub->add_flag("--quiet", o.quiet, "Less progress output");
  };
  auto* check = app.add_subcommand("check", "Build the sub-MDPs, model-check them and write a shield bundle");
  auto* train = app.add_subcommand("train", "Train a tabular Q policy, shielded unless --unshielded");
  auto* eval = app.add_subcommand("eval", "Monte Carlo evaluation of a policy");
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a grid of reward parameters");
  for (auto* sub : {check, train, eval, sweep}) add_common(sub);
  for (auto* sub : {train, sweep}) sub->add_option("--steps", o.steps, "Training environment steps");
  train->add_flag("--unshielded", o.unshielded, "Plain epsilon-greedy Q-learning");
  eval->add_option("--policy", o.policy, "safe-random | rule-based-ego | rl-greedy | safe-rl-greedy");
  eval->add_option("--q", o.q, "Checkpoint written by `train`");
  sweep->add_flag("--pareto", o.pareto, "Also write the non-dominated points");

  CLI11_PARSE(app, argc, argv);
  try {
    if (check->parsed()) return cmd_check(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (sweep->parsed()) return cmd_sweep(o);
  } catch (const ParseError& e) {
    std::cerr << "specification error: " << e.what() << "\n";
    return 3;
  } catch (const UnsupportedFragment& e) {
    std::cerr << "specification error: " << e.what() << "\n";
    return 3;
  } catch (const UnknownProposition& e) {
    std::cerr << "specification error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
