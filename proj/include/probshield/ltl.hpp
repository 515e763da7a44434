#pragma once

// LTL formulas over atomic propositions: parsing, printing, propositional
// evaluation and reduction of the supported fragment to reachability.
//
// Concrete syntax
//   formula := or
//   or      := and ('|' and)*
//   and     := until ('&' until)*
//   until   := unary ('U' until)?          right associative
//   unary   := ('!' | 'G' | 'F' | 'X') unary | atom | '(' formula ')'
//   atom    := [A-Za-z_][A-Za-z0-9_]*      except the reserved G F X U
//
// Temporal letters are only operators when they stand alone: `Fgoal` is the
// atom "Fgoal", write `F goal`.

#include <cctype>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probshield/mdp.hpp"

namespace probshield {

enum class FormulaKind { Atom, Not, And, Or, Globally, Eventually, Until, Next };

struct Formula {
  FormulaKind kind = FormulaKind::Atom;
  std::string atom;               // Atom only
  std::vector<Formula> operands;  // 1 for unary, 2 for binary

  static Formula make_atom(std::string name) { return {FormulaKind::Atom, std::move(name), {}}; }
  static Formula unary(FormulaKind k, Formula f) { return {k, {}, {std::move(f)}}; }
  static Formula binary(FormulaKind k, Formula l, Formula r) {
    return {k, {}, {std::move(l), std::move(r)}};
  }

  bool is_temporal() const {
    return kind == FormulaKind::Globally || kind == FormulaKind::Eventually ||
           kind == FormulaKind::Until || kind == FormulaKind::Next;
  }

  /// True when no temporal operator occurs anywhere in the tree.
  bool is_propositional() const {
    if (is_temporal()) return false;
    for (const auto& op : operands) {
      if (!op.is_propositional()) return false;
    }
    return true;
  }

  friend bool operator==(const Formula&, const Formula&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, std::set<std::string> expected, const std::string& found)
      : std::runtime_error(describe(position, expected, found)),
        position_(position), expected_(std::move(expected)) {}

  std::size_t position() const { return position_; }
  const std::set<std::string>& expected() const { return expected_; }

 private:
  static std::string describe(std::size_t pos, const std::set<std::string>& expected,
                              const std::string& found) {
    std::string msg = "syntax error at position " + std::to_string(pos) + ": found " + found +
                      ", expected one of {";
    bool first = true;
    for (const auto& e : expected) {
      msg += (first ? "" : ", ") + e;
      first = false;
    }
    return msg + "}";
  }

  std::size_t position_;
  std::set<std::string> expected_;
};

namespace detail {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) { advance(); }

  Formula parse() {
    Formula f = parse_or();
    if (tok_.kind != Tok::End) fail({"'&'", "'|'", "'U'", "end of input"});
    return f;
  }

 private:
  enum class Tok { Ident, Not, And, Or, G, F, X, U, LParen, RParen, End };

  struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t pos = 0;
  };

  [[noreturn]] void fail(std::set<std::string> expected) const {
    const std::string found = tok_.kind == Tok::End ? "end of input" : "'" + tok_.text + "'";
    throw ParseError(tok_.pos, std::move(expected), found);
  }

  void advance() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
    tok_ = Token{Tok::End, "", i_};
    if (i_ >= text_.size()) return;
    const char c = text_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) {
        ++j;
      }
      tok_.text = std::string(text_.substr(i_, j - i_));
      i_ = j;
      if (tok_.text == "G") tok_.kind = Tok::G;
      else if (tok_.text == "F") tok_.kind = Tok::F;
      else if (tok_.text == "X") tok_.kind = Tok::X;
      else if (tok_.text == "U") tok_.kind = Tok::U;
      else tok_.kind = Tok::Ident;
      return;
    }
    tok_.text = std::string(1, c);
    ++i_;
    switch (c) {
      case '!': tok_.kind = Tok::Not; return;
      case '&': tok_.kind = Tok::And; return;
      case '|': tok_.kind = Tok::Or; return;
      case '(': tok_.kind = Tok::LParen; return;
      case ')': tok_.kind = Tok::RParen; return;
      default:
        throw ParseError(tok_.pos, {"identifier", "'!'", "'G'", "'F'", "'X'", "'('"},
                         "'" + tok_.text + "'");
    }
  }

  Formula parse_or() {
    Formula lhs = parse_and();
    while (tok_.kind == Tok::Or) {
      advance();
      lhs = Formula::binary(FormulaKind::Or, std::move(lhs), parse_and());
    }
    return lhs;
  }

  Formula parse_and() {
    Formula lhs = parse_until();
    while (tok_.kind == Tok::And) {
      advance();
      lhs = Formula::binary(FormulaKind::And, std::move(lhs), parse_until());
    }
    return lhs;
  }

  Formula parse_until() {
    Formula lhs = parse_unary();
    if (tok_.kind == Tok::U) {
      advance();
      return Formula::binary(FormulaKind::Until, std::move(lhs), parse_until());
    }
    return lhs;
  }

  Formula parse_unary() {
    switch (tok_.kind) {
      case Tok::Not: advance(); return Formula::unary(FormulaKind::Not, parse_unary());
      case Tok::G: advance(); return Formula::unary(FormulaKind::Globally, parse_unary());
      case Tok::F: advance(); return Formula::unary(FormulaKind::Eventually, parse_unary());
      case Tok::X: advance(); return Formula::unary(FormulaKind::Next, parse_unary());
      case Tok::Ident: {
        Formula f = Formula::make_atom(tok_.text);
        advance();
        return f;
      }
      case Tok::LParen: {
        advance();
        Formula f = parse_or();
        if (tok_.kind != Tok::RParen) fail({"')'", "'&'", "'|'", "'U'"});
        advance();
        return f;
      }
      default: fail({"identifier", "'!'", "'G'", "'F'", "'X'", "'('"});
    }
  }

  std::string_view text_;
  std::size_t i_ = 0;
  Token tok_;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text) { return detail::FormulaParser(text).parse(); }

/// Fully parenthesised rendering; parses back to the same tree.
inline std::string to_string(const Formula& f) {
  switch (f.kind) {
    case FormulaKind::Atom: return f.atom;
    case FormulaKind::Not: return "!" + to_string(f.operands[0]);
    case FormulaKind::Globally: return "G " + to_string(f.operands[0]);
    case FormulaKind::Eventually: return "F " + to_string(f.operands[0]);
    case FormulaKind::Next: return "X " + to_string(f.operands[0]);
    case FormulaKind::And:
      return "(" + to_string(f.operands[0]) + " & " + to_string(f.operands[1]) + ")";
    case FormulaKind::Or:
      return "(" + to_string(f.operands[0]) + " | " + to_string(f.operands[1]) + ")";
    case FormulaKind::Until:
      return "(" + to_string(f.operands[0]) + " U " + to_string(f.operands[1]) + ")";
  }
  return {};
}

/// Boolean evaluation of a temporal-free formula against a label set.
inline bool holds(const Formula& f, const LabelSet& labels) {
  switch (f.kind) {
    case FormulaKind::Atom: return labels.contains(f.atom);
    case FormulaKind::Not: return !holds(f.operands[0], labels);
    case FormulaKind::And: return holds(f.operands[0], labels) && holds(f.operands[1], labels);
    case FormulaKind::Or: return holds(f.operands[0], labels) || holds(f.operands[1], labels);
    default: throw std::logic_error("holds: temporal operator in " + to_string(f));
  }
}

enum class ReachKind { Reach, Safe, ConstrainedReach };

/// Target set B and avoid set as membership masks over MDP states. For Safe
/// problems the target is empty and the objective is never entering avoid.
struct ReachabilityProblem {
  ReachKind kind = ReachKind::Reach;
  std::vector<bool> target;
  std::vector<bool> avoid;

  std::size_t num_states() const { return target.size(); }
  bool pinned(StateId s) const { return target[s] || avoid[s]; }
};

class UnsupportedFragment : public std::runtime_error {
 public:
  explicit UnsupportedFragment(const Formula& offending)
      : std::runtime_error("unsupported LTL fragment at subformula " + to_string(offending)),
        offending_(offending) {}
  const Formula& offending() const { return offending_; }

 private:
  Formula offending_;
};

class DisjointnessViolation : public std::runtime_error {
 public:
  explicit DisjointnessViolation(StateId s)
      : std::runtime_error("state " + std::to_string(s) + " is both target and avoid"),
        state_(s) {}
  StateId state() const { return state_; }

 private:
  StateId state_;
};

class UnknownProposition : public std::runtime_error {
 public:
  explicit UnknownProposition(const std::string& name)
      : std::runtime_error("proposition '" + name + "' is not declared by the MDP") {}
};

/// What to do with a state satisfying both operands of (l U r) where l fails.
enum class TieRule { TargetWins, Error };

namespace detail {

inline void check_atoms(const Formula& f, const std::vector<std::string>& declared) {
  if (f.kind == FormulaKind::Atom) {
    if (std::find(declared.begin(), declared.end(), f.atom) == declared.end()) {
      throw UnknownProposition(f.atom);
    }
  }
  for (const auto& op : f.operands) check_atoms(op, declared);
}

inline const Formula& require_propositional(const Formula& f) {
  if (!f.is_propositional()) throw UnsupportedFragment(f);
  return f;
}

}  // namespace detail

/// Maps G p, F q and (l U r) with propositional operands onto a reachability
/// problem over `mdp`.
inline ReachabilityProblem reduce(const Formula& formula, const LabelledMdp& mdp,
                                  TieRule ties = TieRule::TargetWins) {
  detail::check_atoms(formula, mdp.propositions());
  const std::size_t n = mdp.num_states();
  ReachabilityProblem problem;
  problem.target.assign(n, false);
  problem.avoid.assign(n, false);

  switch (formula.kind) {
    case FormulaKind::Eventually: {
      const Formula& goal = detail::require_propositional(formula.operands[0]);
      problem.kind = ReachKind::Reach;
      for (StateId s = 0; s < n; ++s) problem.target[s] = holds(goal, mdp.labels_of(s));
      return problem;
    }
    case FormulaKind::Globally: {
      const Formula& inv = detail::require_propositional(formula.operands[0]);
      problem.kind = ReachKind::Safe;
      for (StateId s = 0; s < n; ++s) problem.avoid[s] = !holds(inv, mdp.labels_of(s));
      return problem;
    }
    case FormulaKind::Until: {
      const Formula& stay = detail::require_propositional(formula.operands[0]);
      const Formula& goal = detail::require_propositional(formula.operands[1]);
      problem.kind = ReachKind::ConstrainedReach;
      for (StateId s = 0; s < n; ++s) {
        const auto& labels = mdp.labels_of(s);
        const bool in_target = holds(goal, labels);
        const bool violates = !holds(stay, labels);
        if (in_target && violates && ties == TieRule::Error) throw DisjointnessViolation(s);
        problem.target[s] = in_target;
        problem.avoid[s] = violates && !in_target;
      }
      return problem;
    }
    default: {
      // Locate the outermost offending node for the error message.
      if (formula.is_propositional()) throw UnsupportedFragment(formula);
      const Formula* node = &formula;
      while (!node->is_temporal()) {
        for (const auto& op : node->operands) {
          if (!op.is_propositional()) {
            node = &op;
            break;
          }
        }
      }
      throw UnsupportedFragment(*node);
    }
  }
}

}  // namespace probshield
