// End-to-end acceptance checks. Each test prints one PASS/FAIL line for its
// criterion; tolerances are fixed here.

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "probshield/harness.hpp"
#include "support.hpp"

using namespace probshield;

namespace {

constexpr double kValueTolerance = 1e-6;
constexpr double kResidualTolerance = 1e-6;
constexpr std::size_t kMaxSweeps = 10000;
constexpr std::size_t kPolicyEnumerationLimit = 4096;
constexpr std::size_t kEvalEpisodes = 1000;
constexpr std::size_t kTrainSteps = 1000000;
constexpr std::size_t kShortTrainSteps = 100000;
constexpr double kChiSquarePValue = 0.01;
constexpr double kCorridorTolerance = 1e-3;
constexpr std::size_t kCorridorUpdates = 99999;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
}

ScenarioConfig scenario(ScenarioKind k) {
  ScenarioConfig c;
  c.scenario = k;
  return c;
}

// One bundle for every scenario: the car-and-pedestrian settings cover both
// participants.
const ShieldBundle& bundle() {
  static const ShieldBundle b = compute_shields(scenario(ScenarioKind::CarAndPedestrian), ShieldSettings{},
                                                participants_of(ScenarioKind::CarAndPedestrian));
  return b;
}

const std::vector<ScenarioKind> kScenarios{ScenarioKind::PedestrianOnly, ScenarioKind::CarOnly,
                                           ScenarioKind::CarAndPedestrian};

}  // namespace

TEST(Acceptance, Criterion1_ValueIterationMatchesPolicyEnumeration) {
  std::mt19937_64 rng(2024);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0, worst_fixed_point = 0.0;
  std::size_t checked = 0, resampled = 0, over = 0;
  // Diagnostic only: the same comparison at a tight tolerance separates
  // stopping-rule error from a wrong fixed point.
  CheckerConfig tight;
  tight.tolerance = 1e-13;
  tight.max_iterations = 10000000;
  while (checked < 200) {
    const auto r = testkit::random_mdp(rng, 20, 3, 20);
    if (testkit::policy_count(r) > kPolicyEnumerationLimit) {
      ++resampled;
      continue;
    }
    const auto t = max_reach(r.mdp, r.problem);
    const auto best = testkit::brute_force_max(r);
    const auto fixed = max_reach(r.mdp, r.problem, tight);
    double w = 0.0;
    for (StateId s = 0; s < r.mdp.num_states(); ++s) {
      w = std::max(w, std::abs(best[s] - t.state_value(s)));
      worst_fixed_point = std::max(worst_fixed_point, std::abs(best[s] - fixed.state_value(s)));
    }
    worst = std::max(worst, w);
    over += w > kValueTolerance;
    ++checked;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = worst <= kValueTolerance && secs < 60.0;
  std::ostringstream o;
  o << checked << " MDPs (" << resampled << " resampled over the enumeration limit), max |diff| " << worst << " ("
    << over << " MDPs over " << kValueTolerance << "), " << secs << " s; at tolerance 1e-13 max |diff| "
    << worst_fixed_point;
  report(1, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion2_CaseStudyValueIterationConverges) {
  const auto& b = bundle();
  bool pass = !b.parts.empty();
  std::ostringstream o;
  for (const auto& p : b.parts) {
    const auto& t = *p.table;
    const bool ok = t.converged && t.final_residual < kResidualTolerance && t.iterations_run <= kMaxSweeps &&
                    t.monotonicity_violations == 0 && t.bound_violations == 0;
    pass = pass && ok;
    o << to_string(p.participant) << ": " << t.num_states << " states, " << t.iterations_run << " sweeps, residual "
      << t.final_residual << ", violations " << t.monotonicity_violations << "/" << t.bound_violations << "; ";
  }
  report(2, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion3_GridCardinalities) {
  const Layout layout(scenario(ScenarioKind::CarAndPedestrian));
  const auto car = TrafficGrid::for_layout(layout, Participant::Car);
  const auto ped = TrafficGrid::for_layout(layout, Participant::Pedestrian);
  const std::size_t ego = car.ego_states();
  const std::size_t car_other = car.other_states();
  const std::size_t ped_other = ped.other_states();
  const bool pass = ego == 204 && ped.ego_states() == 204 && car_other == 793 && ped_other == 145;
  std::ostringstream o;
  o << "ego " << ego << ", car " << car_other << ", pedestrian " << ped_other << " (absent included)";
  report(3, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion4_ShieldedPoliciesMeetThreshold) {
  std::mt19937_64 rng(77);
  std::size_t mdps = 0, policies = 0, violations = 0;
  double worst_gap = 0.0;
  std::ostringstream witnesses;
  for (double lambda : {0.9, 0.99}) {
    std::size_t done = 0;
    while (done < 20) {
      const auto r = testkit::random_mdp(rng, 20, 3, 20);
      auto table = std::make_shared<const ProbTable>(max_reach(r.mdp, r.problem));
      const Shield shield(table, lambda);
      if (shield.acceptable_actions(0).empty()) continue;
      ++done;
      ++mdps;
      for (int k = 0; k < 100; ++k) {
        std::vector<ActionId> pi(r.mdp.num_states());
        for (StateId s = 0; s < pi.size(); ++s) {
          const ActionSet act = shield.acceptable_actions(s);
          if (act.empty()) {
            pi[s] = shield.safest_action(s);
          } else {
            pi[s] = act.nth(std::uniform_int_distribution<std::size_t>(0, act.size() - 1)(rng));
          }
        }
        const double v = testkit::chain_value_by_sweeps(r.mdp, r.problem, pi)[0];
        ++policies;
        if (v < lambda - kValueTolerance) {
          worst_gap = std::max(worst_gap, lambda - v);
          if (violations++ < 3) {
            witnesses << " [lambda " << lambda << ", " << r.mdp.num_states() << " states, spec kind "
                      << static_cast<int>(r.problem.kind) << ", P(init, shielded) " << v << ", Pmax(init) "
                      << table->state_value(0) << "]";
          }
        }
      }
    }
  }
  const bool pass = violations == 0;
  std::ostringstream o;
  o << policies << " shielded policies over " << mdps << " MDPs, " << violations << " below lambda";
  if (!pass) o << ", worst shortfall " << worst_gap << ";" << witnesses.str();
  report(4, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion5_CaseStudyTable) {
  std::map<ScenarioKind, std::map<std::string, EvalReport>> table;
  for (ScenarioKind k : kScenarios) {
    const ScenarioConfig sc = scenario(k);
    const auto shield = composite_for(bundle(), k);
    TrainConfig tc;
    tc.total_steps = kTrainSteps;
    tc.seed = 1;
    const auto trained = train_policy(sc, shield, RewardSpec{}, tc, StateAbstraction{});
    const Policy safe_rl(PolicyKind::SafeRlGreedy, shield, std::make_shared<const TabularQ>(trained.q));
    table[k]["safe-rl"] = evaluate(sc, safe_rl, kEvalEpisodes, 1);
    table[k]["safe-random"] = evaluate(sc, baseline_policy(PolicyKind::SafeRandom, shield), kEvalEpisodes, 1);
    table[k]["rule-based"] = evaluate(sc, baseline_policy(PolicyKind::RuleBasedEgo, nullptr), kEvalEpisodes, 1);
  }
  std::ostringstream o;
  bool pass = true;
  for (ScenarioKind k : kScenarios) {
    auto& row = table[k];
    o << "\n  " << to_string(k);
    for (const char* p : {"safe-random", "rule-based", "safe-rl"}) {
      const auto& r = row[p];
      o << " | " << p << " collisions " << r.collision_rate << "% +/- " << r.collision_half_width << ", steps "
        << r.mean_steps << " (" << r.capped << " capped)";
    }
    pass = pass && row["safe-random"].collisions == 0 && row["safe-rl"].collisions == 0;
    if (k != ScenarioKind::PedestrianOnly) pass = pass && row["rule-based"].collisions > 0;
    pass = pass && row["safe-rl"].mean_steps < row["safe-random"].mean_steps;
  }
  const auto& cp = table[ScenarioKind::CarAndPedestrian];
  const auto& rl = cp.at("safe-rl");
  const auto& rb = cp.at("rule-based");
  const bool dominated = rl.collision_rate <= rb.collision_rate && rl.mean_steps <= rb.mean_steps &&
                         (rl.collision_rate < rb.collision_rate || rl.mean_steps < rb.mean_steps);
  pass = pass && dominated;
  o << "\n  rule-based dominated by safe-rl in car-and-pedestrian: " << (dominated ? "yes" : "no");
  report(5, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion6_ShieldedTrainingIsCollisionFree) {
  bool pass = true;
  std::ostringstream o;
  for (ScenarioKind k : kScenarios) {
    TrainConfig tc;
    tc.total_steps = kShortTrainSteps;
    tc.seed = 3;
    const auto shielded = train_policy(scenario(k), composite_for(bundle(), k), RewardSpec{}, tc, StateAbstraction{});
    const auto plain = train_policy(scenario(k), nullptr, RewardSpec{}, tc, StateAbstraction{});
    pass = pass && shielded.collisions == 0 && shielded.shield_bypasses == 0 && plain.collisions >= 1;
    o << to_string(k) << ": shielded " << shielded.collisions << " collisions/" << shielded.shield_bypasses
      << " bypasses, unshielded " << plain.collisions << " collisions; ";
  }
  report(6, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion7_RewardSweep) {
  RunConfig cfg;
  cfg.scenario = scenario(ScenarioKind::CarAndPedestrian);
  cfg.train.total_steps = kTrainSteps;
  cfg.train.seed = 1;
  cfg.eval.episodes = kEvalEpisodes;
  const auto points = run_sweep(cfg, composite_for(bundle(), ScenarioKind::CarAndPedestrian));

  bool safe_zero = true;
  std::size_t inversions = 0;
  std::ostringstream o;
  for (double c : cfg.sweep.action_costs) {
    std::vector<double> rl_rates;
    for (double p : cfg.sweep.collision_penalties) {
      for (const auto& pt : points) {
        if (pt.action_cost != c || pt.collision_penalty != p) continue;
        if (pt.variant == "safe-rl" && pt.collision_rate != 0.0) safe_zero = false;
        if (pt.variant == "rl") rl_rates.push_back(pt.collision_rate);
        o << "\n  cost " << c << " penalty " << p << " " << pt.variant << ": collisions " << pt.collision_rate
          << "%, steps " << pt.mean_steps;
      }
    }
    // Penalties are listed by increasing magnitude.
    for (std::size_t i = 1; i < rl_rates.size(); ++i) {
      if (rl_rates[i] > rl_rates[i - 1]) ++inversions;
    }
  }
  const bool pass = safe_zero && inversions <= 1 && points.size() == 18;
  o << "\n  safe-rl all zero: " << (safe_zero ? "yes" : "no") << ", rl inversions: " << inversions;
  report(7, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion8_ModifiedEpsilonGreedy) {
  Rng rng(8);
  const std::vector<double> q{0.3, 0.9, 0.1, 0.8, 0.2};
  bool empty_ok = true;
  for (double eps : {0.0, 0.5, 1.0}) {
    for (int i = 0; i < 1000; ++i) empty_ok = empty_ok && select_action(ShieldQuery{{}, 4, 0}, q, eps, rng) == 4u;
  }
  bool greedy_ok = true;
  for (int i = 0; i < 1000; ++i) greedy_ok = greedy_ok && select_action(ShieldQuery{{0, 2, 3}, 1, 0}, q, 0.0, rng) == 3u;

  const ActionSet act{0, 2, 3};
  const std::size_t n = 60000;
  std::vector<double> counts(5, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[select_action(ShieldQuery{act, 1, 0}, q, 1.0, rng)] += 1.0;
  const bool support_ok = counts[1] == 0.0 && counts[4] == 0.0;
  double stat = 0.0;
  const double expected = static_cast<double>(n) / 3.0;
  for (ActionId a : act.to_vector()) stat += (counts[a] - expected) * (counts[a] - expected) / expected;
  const boost::math::chi_squared dist(2.0);
  const double p = boost::math::cdf(boost::math::complement(dist, stat));
  const bool pass = empty_ok && greedy_ok && support_ok && p > kChiSquarePValue;
  std::ostringstream o;
  o << "empty set -> pi*: " << (empty_ok ? "yes" : "no") << ", greedy in Act: " << (greedy_ok ? "yes" : "no")
    << ", uniform chi-square " << stat << " (p " << p << ")";
  report(8, pass, o.str());
  EXPECT_TRUE(pass);
}

TEST(Acceptance, Criterion9_QLearningConvergesOnCorridor) {
  RewardSpec reward;
  reward.action_cost = -0.05;
  TrainConfig cfg;
  cfg.total_steps = kCorridorUpdates;
  cfg.epsilon = {1.0, 1.0, 1};
  cfg.alpha = 1.0;
  cfg.gamma = 0.9;
  cfg.seed = 9;
  const auto r = train(testkit::CorridorEnv{}, {}, reward, cfg);
  const auto q_star = testkit::corridor_q_star(reward, cfg.gamma);
  double worst = 0.0;
  for (int s = 0; s < testkit::CorridorEnv::kCells - 1; ++s) {
    for (ActionId a = 0; a < 2; ++a) worst = std::max(worst, std::abs(r.q.at(s, a) - q_star[s][a]));
  }
  const bool pass = worst <= kCorridorTolerance && r.steps < 100000;
  std::ostringstream o;
  o << r.steps << " updates, max |Q - Q*| " << worst;
  report(9, pass, o.str());
  EXPECT_TRUE(pass);
}
