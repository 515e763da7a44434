#include <gtest/gtest.h>

#include <random>

#include "probshield/ltl.hpp"
#include "support.hpp"

using namespace probshield;

namespace {

Formula atom(const char* name) { return Formula::make_atom(name); }
Formula neg(Formula f) { return Formula::unary(FormulaKind::Not, std::move(f)); }

LabelledMdp chain_with_goal_at_end() {
  MdpBuilder b(3, 1);
  b.declare_proposition("goal").declare_proposition("collision");
  b.add_transition(0, 0, 1, 1.0).add_transition(1, 0, 2, 1.0).add_label(2, "goal").mark_terminal(2);
  return b.build();
}

// Random propositional formula over a, b, c.
Formula random_prop(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 3 : 0);
  static const char* names[] = {"a", "b", "c"};
  switch (pick(rng)) {
    case 0: return atom(names[std::uniform_int_distribution<int>(0, 2)(rng)]);
    case 1: return neg(random_prop(rng, depth - 1));
    case 2: return Formula::binary(FormulaKind::And, random_prop(rng, depth - 1), random_prop(rng, depth - 1));
    default: return Formula::binary(FormulaKind::Or, random_prop(rng, depth - 1), random_prop(rng, depth - 1));
  }
}

Formula random_formula(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 4 : 0);
  switch (pick(rng)) {
    case 0: return random_prop(rng, 2);
    case 1: return Formula::unary(FormulaKind::Globally, random_formula(rng, depth - 1));
    case 2: return Formula::unary(FormulaKind::Eventually, random_formula(rng, depth - 1));
    case 3: return Formula::unary(FormulaKind::Next, random_formula(rng, depth - 1));
    default:
      return Formula::binary(FormulaKind::Until, random_formula(rng, depth - 1), random_formula(rng, depth - 1));
  }
}

}  // namespace

TEST(Parse, NotCollisionUntilGoal) {
  EXPECT_EQ(parse_formula("!collision U goal"), Formula::binary(FormulaKind::Until, neg(atom("collision")), atom("goal")));
}

TEST(Parse, GloballyNotCollision) {
  EXPECT_EQ(parse_formula("G !collision"), Formula::unary(FormulaKind::Globally, neg(atom("collision"))));
}

TEST(Parse, EventuallyGoal) {
  EXPECT_EQ(parse_formula("F goal"), Formula::unary(FormulaKind::Eventually, atom("goal")));
}

TEST(Parse, AndBindsTighterThanOr) {
  const auto f = parse_formula("a | b & c");
  EXPECT_EQ(f, Formula::binary(FormulaKind::Or, atom("a"), Formula::binary(FormulaKind::And, atom("b"), atom("c"))));
}

TEST(Parse, UnaryBindsTighterThanUntil) {
  const auto f = parse_formula("!a U F b");
  EXPECT_EQ(f, Formula::binary(FormulaKind::Until, neg(atom("a")),
                               Formula::unary(FormulaKind::Eventually, atom("b"))));
}

TEST(Parse, SyntaxErrorCarriesPositionAndExpectedTokens) {
  try {
    parse_formula("G (a & )");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 7u);
    EXPECT_TRUE(e.expected().count("identifier"));
  }
  EXPECT_THROW(parse_formula("a b"), ParseError);
  EXPECT_THROW(parse_formula("a $ b"), ParseError);
  EXPECT_THROW(parse_formula(""), ParseError);
}

TEST(Reduce, EventuallyOnChain) {
  const auto mdp = chain_with_goal_at_end();
  const auto p = reduce(parse_formula("F goal"), mdp);
  EXPECT_EQ(p.kind, ReachKind::Reach);
  EXPECT_EQ(p.target, (std::vector<bool>{false, false, true}));
  EXPECT_EQ(p.avoid, (std::vector<bool>{false, false, false}));
}

TEST(Reduce, UntilSplitsTargetAndAvoid) {
  MdpBuilder b(4, 1);
  b.declare_proposition("goal").declare_proposition("collision");
  b.add_label(1, "goal").add_label(2, "collision").add_label(3, "goal").add_label(3, "collision");
  for (StateId s = 0; s < 4; ++s) b.add_transition(s, 0, s, 1.0);
  const auto mdp = b.build();
  const auto p = reduce(parse_formula("!collision U goal"), mdp);
  EXPECT_EQ(p.kind, ReachKind::ConstrainedReach);
  EXPECT_EQ(p.target, (std::vector<bool>{false, true, false, true}));
  EXPECT_EQ(p.avoid, (std::vector<bool>{false, false, true, false}));
  EXPECT_THROW(reduce(parse_formula("!collision U goal"), mdp, TieRule::Error), DisjointnessViolation);
}

TEST(Reduce, GloballyIsSafety) {
  const auto mdp = chain_with_goal_at_end();
  const auto p = reduce(parse_formula("G !goal"), mdp);
  EXPECT_EQ(p.kind, ReachKind::Safe);
  EXPECT_EQ(p.avoid, (std::vector<bool>{false, false, true}));
}

TEST(Reduce, RejectsOutsideFragment) {
  const auto mdp = chain_with_goal_at_end();
  EXPECT_THROW(reduce(parse_formula("X goal"), mdp), UnsupportedFragment);
  EXPECT_THROW(reduce(parse_formula("F G goal"), mdp), UnsupportedFragment);
  EXPECT_THROW(reduce(parse_formula("goal"), mdp), UnsupportedFragment);
  EXPECT_THROW(reduce(parse_formula("F unknown"), mdp), UnknownProposition);
  try {
    reduce(parse_formula("!collision U X goal"), mdp);
    FAIL();
  } catch (const UnsupportedFragment& e) {
    EXPECT_EQ(e.offending(), Formula::unary(FormulaKind::Next, atom("goal")));
  }
}

TEST(Holds, Examples) {
  EXPECT_TRUE(holds(atom("goal"), {"goal"}));
  EXPECT_TRUE(holds(neg(atom("collision")), {}));
  EXPECT_FALSE(holds(parse_formula("goal & !collision"), {"goal", "collision"}));
  EXPECT_THROW(holds(parse_formula("F goal"), {}), std::logic_error);
}

TEST(LtlProperties, PrintParseRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Formula f = random_formula(rng, 3);
    EXPECT_EQ(parse_formula(to_string(f)), f) << to_string(f);
  }
}

TEST(LtlProperties, NegationIsComplementary) {
  std::mt19937_64 rng(6);
  const std::vector<LabelSet> sets{{}, {"a"}, {"b"}, {"a", "c"}, {"a", "b", "c"}};
  for (int i = 0; i < 300; ++i) {
    const Formula p = random_prop(rng, 3);
    for (const auto& l : sets) EXPECT_NE(holds(p, l), holds(neg(p), l));
  }
}

TEST(LtlProperties, SafetyAndUnreachableUntilShareAvoidSet) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto r = testkit::random_mdp(rng, 12, 2, 12);
    // "nothing" is declared but labels no state, so the until target is empty.
    MdpBuilder b(r.mdp.num_states(), r.mdp.num_actions());
    b.declare_proposition("goal").declare_proposition("bad").declare_proposition("nothing");
    for (StateId s = 0; s < r.mdp.num_states(); ++s) {
      for (const auto& l : r.mdp.labels_of(s)) b.add_label(s, l);
      for (ActionId a = 0; a < r.mdp.num_actions(); ++a) {
        const auto row = r.mdp.successors(s, a);
        for (std::size_t k = 0; k < row.size(); ++k) b.add_transition(s, a, row.states[k], row.probabilities[k]);
      }
    }
    const auto mdp = b.build();
    EXPECT_EQ(reduce(parse_formula("G !bad"), mdp).avoid, reduce(parse_formula("!bad U nothing"), mdp).avoid);
  }
}
