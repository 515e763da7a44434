#pragma once

// Explicit finite labelled MDP: sparse transitions in compressed row form,
// per-state atomic-proposition labels and absorbing terminal states.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace probshield {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using LabelSet = std::set<std::string>;

/// Probability-mass tolerance for a well-formed distribution.
inline constexpr double kMassTolerance = 1e-9;

struct Transition {
  StateId successor = 0;
  double probability = 0.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Read-only view of one (state, action) row.
struct SuccessorView {
  std::span<const StateId> states;
  std::span<const double> probabilities;

  std::size_t size() const { return states.size(); }
  Transition operator[](std::size_t i) const { return {states[i], probabilities[i]}; }

  double mass() const {
    double sum = 0.0;
    for (double p : probabilities) sum += p;
    return sum;
  }
};

class MdpBuilder;

class LabelledMdp {
 public:
  LabelledMdp() = default;

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  const std::vector<std::string>& propositions() const { return propositions_; }

  /// Stored distribution for (s, a); a terminal state yields {(s, 1)}.
  SuccessorView successors(StateId s, ActionId a) const {
    check_state(s);
    if (a >= num_actions_) throw std::out_of_range("action index out of range");
    const std::size_t row = static_cast<std::size_t>(s) * num_actions_ + a;
    const std::size_t lo = row_offsets_[row];
    const std::size_t hi = row_offsets_[row + 1];
    return {std::span<const StateId>(successors_).subspan(lo, hi - lo),
            std::span<const double>(probabilities_).subspan(lo, hi - lo)};
  }

  const LabelSet& labels_of(StateId s) const {
    check_state(s);
    return labels_[s];
  }

  bool is_terminal(StateId s) const {
    check_state(s);
    return terminal_[s] != 0;
  }

  std::size_t num_entries() const { return successors_.size(); }

  // Raw row storage for the checker's inner loops.
  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const StateId> successor_array() const { return successors_; }
  std::span<const double> probability_array() const { return probabilities_; }

  friend bool operator==(const LabelledMdp&, const LabelledMdp&) = default;

 private:
  friend class MdpBuilder;

  void check_state(StateId s) const {
    if (s >= num_states_) throw std::out_of_range("state index out of range");
  }

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<std::string> propositions_;
  std::vector<LabelSet> labels_;
  std::vector<char> terminal_;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<StateId> successors_;
  std::vector<double> probabilities_;
};

/// Accumulates an MDP. No validation happens here; run `validate` on the
/// result. Duplicate (s, a, s') entries are summed. Terminal states get a
/// probability-one self-loop for every action and any transitions added for
/// them are dropped.
class MdpBuilder {
 public:
  MdpBuilder(std::size_t num_states, std::size_t num_actions)
      : num_states_(num_states), num_actions_(num_actions), labels_(num_states),
        terminal_(num_states, 0) {
    if (num_actions == 0) throw std::invalid_argument("MDP needs at least one action");
  }

  MdpBuilder& declare_proposition(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("proposition name must be nonempty");
    if (std::find(propositions_.begin(), propositions_.end(), name) == propositions_.end()) {
      propositions_.push_back(name);
    }
    return *this;
  }

  MdpBuilder& add_label(StateId s, const std::string& name) {
    labels_.at(s).insert(name);
    return *this;
  }

  MdpBuilder& mark_terminal(StateId s) {
    terminal_.at(s) = 1;
    return *this;
  }

  MdpBuilder& add_transition(StateId s, ActionId a, StateId successor, double probability) {
    if (s >= num_states_ || a >= num_actions_) {
      throw std::out_of_range("add_transition: (state, action) out of range");
    }
    entries_.push_back({s, a, successor, probability});
    return *this;
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  void reserve(std::size_t entries) { entries_.reserve(entries); }

  LabelledMdp build() {
    LabelledMdp mdp;
    mdp.num_states_ = num_states_;
    mdp.num_actions_ = num_actions_;
    mdp.propositions_ = propositions_;
    mdp.labels_ = std::move(labels_);
    mdp.terminal_ = terminal_;

    std::erase_if(entries_, [&](const Entry& e) { return terminal_[e.s] != 0; });
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& l, const Entry& r) {
      if (l.s != r.s) return l.s < r.s;
      if (l.a != r.a) return l.a < r.a;
      return l.sp < r.sp;
    });

    const std::size_t rows = num_states_ * num_actions_;
    mdp.row_offsets_.assign(rows + 1, 0);
    mdp.successors_.reserve(entries_.size());
    mdp.probabilities_.reserve(entries_.size());
    std::size_t k = 0;
    for (std::size_t s = 0; s < num_states_; ++s) {
      for (std::size_t a = 0; a < num_actions_; ++a) {
        const std::size_t row = s * num_actions_ + a;
        if (terminal_[s] != 0) {
          mdp.successors_.push_back(static_cast<StateId>(s));
          mdp.probabilities_.push_back(1.0);
        }
        while (k < entries_.size() && entries_[k].s == s && entries_[k].a == a) {
          const Entry& e = entries_[k];
          if (mdp.successors_.size() > mdp.row_offsets_[row] && mdp.successors_.back() == e.sp) {
            mdp.probabilities_.back() += e.p;
          } else {
            mdp.successors_.push_back(e.sp);
            mdp.probabilities_.push_back(e.p);
          }
          ++k;
        }
        mdp.row_offsets_[row + 1] = mdp.successors_.size();
      }
    }
    entries_.clear();
    entries_.shrink_to_fit();
    return mdp;
  }

 private:
  struct Entry {
    StateId s;
    ActionId a;
    StateId sp;
    double p;
  };

  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::string> propositions_;
  std::vector<LabelSet> labels_;
  std::vector<char> terminal_;
  std::vector<Entry> entries_;
};

struct MassIssue {
  StateId state;
  ActionId action;
  double mass;
};

struct ProbabilityIssue {
  StateId state;
  ActionId action;
  StateId successor;
  double probability;
};

struct DanglingIssue {
  StateId state;
  ActionId action;
  StateId successor;
};

struct LabelIssue {
  StateId state;
  std::string label;
};

struct ValidationReport {
  std::vector<MassIssue> bad_mass;
  std::vector<ProbabilityIssue> bad_probability;
  std::vector<DanglingIssue> dangling;
  std::vector<LabelIssue> undeclared_labels;

  bool empty() const {
    return bad_mass.empty() && bad_probability.empty() && dangling.empty() &&
           undeclared_labels.empty();
  }
};

inline ValidationReport validate(const LabelledMdp& mdp) {
  ValidationReport report;
  const auto& props = mdp.propositions();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (const auto& label : mdp.labels_of(s)) {
      if (std::find(props.begin(), props.end(), label) == props.end()) {
        report.undeclared_labels.push_back({s, label});
      }
    }
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const auto row = mdp.successors(s, a);
      double mass = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        const auto [sp, p] = row[i];
        if (sp >= mdp.num_states()) report.dangling.push_back({s, a, sp});
        if (!(p >= 0.0 && p <= 1.0)) report.bad_probability.push_back({s, a, sp, p});
        mass += p;
      }
      if (!(std::abs(mass - 1.0) <= kMassTolerance)) report.bad_mass.push_back({s, a, mass});
    }
  }
  return report;
}

// JSON document:
//   {"num_states": n, "num_actions": m, "propositions": [...],
//    "labels": {"<state>": [...]}, "terminal": [...],
//    "transitions": [{"s":..,"a":..,"sp":..,"p":..}, ...]}
// Terminal rows are implicit. Doubles are written in shortest round-trip form.

inline nlohmann::json mdp_to_json(const LabelledMdp& mdp) {
  nlohmann::json doc;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["propositions"] = mdp.propositions();
  nlohmann::json labels = nlohmann::json::object();
  nlohmann::json terminal = nlohmann::json::array();
  nlohmann::json transitions = nlohmann::json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    const auto& ls = mdp.labels_of(s);
    if (!ls.empty()) labels[std::to_string(s)] = ls;
    if (mdp.is_terminal(s)) {
      terminal.push_back(s);
      continue;
    }
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const auto row = mdp.successors(s, a);
      for (std::size_t i = 0; i < row.size(); ++i) {
        transitions.push_back({{"s", s}, {"a", a}, {"sp", row.states[i]}, {"p", row.probabilities[i]}});
      }
    }
  }
  doc["labels"] = std::move(labels);
  doc["terminal"] = std::move(terminal);
  doc["transitions"] = std::move(transitions);
  return doc;
}

inline LabelledMdp mdp_from_json(const nlohmann::json& doc) {
  MdpBuilder builder(doc.at("num_states").get<std::size_t>(), doc.at("num_actions").get<std::size_t>());
  for (const auto& p : doc.at("propositions")) builder.declare_proposition(p.get<std::string>());
  if (doc.contains("labels")) {
    for (const auto& [key, names] : doc.at("labels").items()) {
      const auto s = static_cast<StateId>(std::stoul(key));
      for (const auto& n : names) builder.add_label(s, n.get<std::string>());
    }
  }
  if (doc.contains("terminal")) {
    for (const auto& s : doc.at("terminal")) builder.mark_terminal(s.get<StateId>());
  }
  for (const auto& t : doc.at("transitions")) {
    builder.add_transition(t.at("s").get<StateId>(), t.at("a").get<ActionId>(),
                           t.at("sp").get<StateId>(), t.at("p").get<double>());
  }
  return builder.build();
}

}  // namespace probshield
