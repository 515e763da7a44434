#include <gtest/gtest.h>

#include <filesystem>

#include "probshield/harness.hpp"

using namespace probshield;

namespace {

ScenarioConfig pedestrian_scenario() {
  ScenarioConfig c;
  c.scenario = ScenarioKind::PedestrianOnly;
  return c;
}

const ShieldBundle& pedestrian_bundle() {
  static const ShieldBundle b =
      compute_shields(pedestrian_scenario(), ShieldSettings{}, participants_of(ScenarioKind::PedestrianOnly));
  return b;
}

RunConfig tiny_run() {
  RunConfig c;
  c.scenario = pedestrian_scenario();
  c.train.total_steps = 2000;
  c.train.curve_every = 1000;
  c.eval.episodes = 20;
  c.sweep.action_costs = {0.0, -0.05};
  c.sweep.collision_penalties = {-1.0};
  return c;
}

}  // namespace

TEST(Wilson, KnownIntervals) {
  const auto half = wilson_interval(5, 10);
  EXPECT_NEAR(half.lower, 0.2366, 1e-4);
  EXPECT_NEAR(half.upper, 0.7634, 1e-4);
  const auto none = wilson_interval(0, 1000);
  EXPECT_NEAR(none.lower, 0.0, 1e-15);
  const double z2 = 1.959963984540054 * 1.959963984540054;
  EXPECT_NEAR(none.upper, (z2 / 1000.0) / (1.0 + z2 / 1000.0), 1e-12);
  const auto all = wilson_interval(1000, 1000);
  EXPECT_NEAR(all.upper, 1.0, 1e-12);
}

TEST(Wilson, ContainsPointEstimate) {
  for (std::size_t n : {1u, 7u, 100u, 1000u}) {
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 7)) {
      const auto ci = wilson_interval(k, n);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(ci.lower, p + 1e-12);
      EXPECT_GE(ci.upper, p - 1e-12);
      EXPECT_GE(ci.lower, 0.0);
      EXPECT_LE(ci.upper, 1.0);
    }
  }
}

TEST(EpisodeSeed, DistinctAcrossEpisodesAndSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(episode_seed(s, i));
  }
  EXPECT_EQ(seen.size(), 4000u);
}

TEST(Evaluate, ReportArithmetic) {
  const auto policy = baseline_policy(PolicyKind::RuleBasedEgo, nullptr);
  ScenarioConfig car;
  car.scenario = ScenarioKind::CarOnly;
  const auto r = evaluate(car, policy, 200, 3);
  EXPECT_EQ(r.episodes, 200u);
  EXPECT_LE(r.collisions + r.goals + r.capped, 200u);
  EXPECT_DOUBLE_EQ(r.collision_rate, 100.0 * r.collisions / 200.0);
  EXPECT_DOUBLE_EQ(r.goal_rate, 100.0 * r.goals / 200.0);
  const auto ci = wilson_interval(r.collisions, 200);
  EXPECT_NEAR(r.collision_half_width, 50.0 * (ci.upper - ci.lower), 1e-12);
  EXPECT_GT(r.mean_steps, 0.0);
  EXPECT_LE(r.mean_steps, static_cast<double>(car.max_steps));
  EXPECT_EQ(r.policy, "rule-based-ego");
  EXPECT_EQ(r.scenario, "car-only");
}

TEST(Evaluate, DeterministicAndWorkerInvariant) {
  const auto shield = composite_for(pedestrian_bundle(), ScenarioKind::PedestrianOnly);
  const auto policy = baseline_policy(PolicyKind::SafeRandom, shield);
  const auto a = evaluate(pedestrian_scenario(), policy, 40, 9, 1);
  const auto b = evaluate(pedestrian_scenario(), policy, 40, 9, 1);
  const auto c = evaluate(pedestrian_scenario(), policy, 40, 9, 3);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(to_json(a), to_json(c));
  const auto d = evaluate(pedestrian_scenario(), policy, 40, 10, 1);
  EXPECT_NE(to_json(a).dump(), to_json(d).dump());
}

TEST(Evaluate, RejectsZeroEpisodes) {
  const auto policy = baseline_policy(PolicyKind::RuleBasedEgo, nullptr);
  EXPECT_THROW(evaluate(pedestrian_scenario(), policy, 0, 1), ConfigurationError);
}

TEST(Evaluate, CsvRowMatchesHeaderWidth) {
  const auto policy = baseline_policy(PolicyKind::RuleBasedEgo, nullptr);
  const auto r = evaluate(pedestrian_scenario(), policy, 5, 1);
  const std::string header = kEvalCsvHeader;
  const std::string row = eval_csv_row(r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.scenario.scenario = ScenarioKind::CarOnly;
  c.shield.spec = "G !collision";
  c.shield.lambda = 0.99;
  c.shield.absent_rule = AbsentRule::Unconstrained;
  c.reward.action_cost = -0.02;
  c.train.total_steps = 1234;
  c.eval.episodes = 77;
  c.sweep.variants = {"rl"};
  c.workers = 2;
  const json j = to_json(c);
  const RunConfig back = run_config_from_json(json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.scenario.scenario, ScenarioKind::CarOnly);
  EXPECT_EQ(back.shield.absent_rule, AbsentRule::Unconstrained);
  EXPECT_EQ(back.train.total_steps, 1234u);
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig c = run_config_from_json(json::object());
  EXPECT_EQ(to_json(c), to_json(RunConfig{}));
  EXPECT_EQ(c.shield.spec, "!collision U goal");
  EXPECT_EQ(c.shield.lambda, 0.9999);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(run_config_from_json({{"sheild", json::object()}}), ConfigurationError);
  EXPECT_ANY_THROW(run_config_from_json({{"shield", {{"absent_rule", "sometimes"}}}}));
  EXPECT_ANY_THROW(run_config_from_json({{"reward", {{"collision", -9.0}}}}));
}

TEST(Config, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "probshield_config_test.json";
  write_json_file(path, to_json(tiny_run()));
  EXPECT_EQ(run_config_from_json(read_json_file(path)).train.total_steps, 2000u);
  std::filesystem::remove(path);
  EXPECT_ANY_THROW(read_json_file(path));
}

TEST(Spec, ValidationRejectsBeforeBuilding) {
  EXPECT_THROW(validate_spec("X goal"), UnsupportedFragment);
  EXPECT_THROW(validate_spec("F pothole"), UnknownProposition);
  EXPECT_THROW(validate_spec("!collision U"), ParseError);
  EXPECT_NO_THROW(validate_spec("G !collision"));
  ShieldSettings s;
  s.spec = "X goal";
  EXPECT_THROW(compute_shields(pedestrian_scenario(), s, participants_of(ScenarioKind::PedestrianOnly)),
               UnsupportedFragment);
}

TEST(Bundle, ShapeAndConvergence) {
  const auto& b = pedestrian_bundle();
  ASSERT_EQ(b.parts.size(), 1u);
  const auto& part = b.parts.front();
  EXPECT_EQ(part.participant, Participant::Pedestrian);
  EXPECT_EQ(part.table->num_states, part.grid.num_states());
  EXPECT_EQ(part.table->num_actions, kNumEgoActions);
  EXPECT_TRUE(part.table->converged);
  EXPECT_EQ(part.table->monotonicity_violations, 0u);
  EXPECT_EQ(part.table->bound_violations, 0u);
}

TEST(Bundle, JsonRoundTrip) {
  const auto& b = pedestrian_bundle();
  const auto back = shield_bundle_from_json(json::parse(to_json(b).dump()));
  EXPECT_EQ(back.spec, b.spec);
  EXPECT_EQ(back.lambda, b.lambda);
  ASSERT_EQ(back.parts.size(), 1u);
  EXPECT_EQ(back.parts[0].table->values, b.parts[0].table->values);
  EXPECT_EQ(back.parts[0].grid.num_states(), b.parts[0].grid.num_states());
  auto broken = to_json(b);
  broken["format"] = "something-else";
  EXPECT_ANY_THROW(shield_bundle_from_json(broken));
}

TEST(Bundle, CompositeNeedsEveryParticipant) {
  EXPECT_ANY_THROW(composite_for(pedestrian_bundle(), ScenarioKind::CarAndPedestrian));
  const auto shield = composite_for(pedestrian_bundle(), ScenarioKind::PedestrianOnly);
  EXPECT_EQ(shield->fallback_action(), kHardBrake);
}

TEST(Train, RejectsShieldWithWrongActionSpace) {
  const TrafficGrid grid(Participant::Car, Axis({0.0, 1.0}), Axis({0.0, 1.0}), 1, Axis({0.0, 1.0}),
                         Axis({0.0, 1.0}), AbsentRule::Unconstrained);
  auto t = std::make_shared<ProbTable>(grid.num_states(), 2, 1.0);
  std::vector<GridShield<TrafficGrid>> parts;
  parts.emplace_back(Shield(t, 0.9), grid);
  const auto shield = std::make_shared<const IntersectionShield>(std::move(parts), 0);
  EXPECT_THROW(train_policy(pedestrian_scenario(), shield, RewardSpec{}, tiny_run().train, StateAbstraction{}),
               ConfigurationError);
}

TEST(ParetoFront, FiltersDominatedPointsPerVariant) {
  const std::vector<ParetoPoint> pts{
      {"rl", 0, -1, 50.0, 10.0, 80.0, 0},  {"rl", 0, -2, 60.0, 5.0, 80.0, 0},
      {"rl", 0, -5, 70.0, 12.0, 80.0, 0},  {"safe-rl", 0, -1, 90.0, 0.0, 80.0, 0},
      {"safe-rl", 0, -2, 80.0, 0.0, 80.0, 0},
  };
  const auto front = pareto_front(pts);
  ASSERT_EQ(front.size(), 3u);
  EXPECT_EQ(front[0].collision_penalty, -1);
  EXPECT_EQ(front[1].collision_penalty, -2);
  EXPECT_EQ(front[2].variant, "safe-rl");
  EXPECT_EQ(front[2].mean_steps, 80.0);
}

TEST(Sweep, RowCountAndSinglePointAgreesWithEvaluation) {
  const RunConfig cfg = tiny_run();
  const auto shield = composite_for(pedestrian_bundle(), ScenarioKind::PedestrianOnly);
  const auto points = run_sweep(cfg, shield);
  ASSERT_EQ(points.size(), 2u * 1u * 2u);
  EXPECT_EQ(points[0].variant, "rl");
  EXPECT_EQ(points[1].variant, "safe-rl");
  EXPECT_EQ(points[2].action_cost, -0.05);

  RewardSpec r = cfg.reward;
  r.action_cost = 0.0;
  r.collision = -1.0;
  const auto trained = train_policy(cfg.scenario, shield, r, cfg.train, cfg.abstraction);
  const Policy policy(PolicyKind::SafeRlGreedy, shield, std::make_shared<const TabularQ>(trained.q));
  const auto rep = evaluate(cfg.scenario, policy, cfg.eval.episodes, cfg.eval.seed);
  EXPECT_EQ(points[1].mean_steps, rep.mean_steps);
  EXPECT_EQ(points[1].collision_rate, rep.collision_rate);
  EXPECT_EQ(points[1].training_collisions, trained.collisions);

  const auto parallel = run_sweep(cfg, shield, 2);
  for (std::size_t i = 0; i < points.size(); ++i) EXPECT_EQ(to_json(points[i]), to_json(parallel[i]));
}

TEST(Sweep, RejectsUnknownVariant) {
  RunConfig cfg = tiny_run();
  cfg.sweep.variants = {"dqn"};
  EXPECT_THROW(run_sweep(cfg, nullptr), ConfigurationError);
}

TEST(Checkpoint, RoundTrip) {
  TabularQ q(kNumEgoActions);
  q.set(5, 2, 0.5);
  StateAbstraction abs;
  abs.car_position_bin = 4.0;
  const auto back = q_checkpoint_from_json(json::parse(q_checkpoint_json(q, abs, "car-only", true).dump()));
  EXPECT_EQ(back.q.at(5, 2), 0.5);
  EXPECT_EQ(back.abstraction.car_position_bin, 4.0);
  EXPECT_EQ(back.scenario, "car-only");
  EXPECT_TRUE(back.shielded);
}
