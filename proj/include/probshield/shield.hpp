#pragma once

// Action monitors derived from a probability table: acceptable-action sets,
// the safest fallback policy, continuous-state queries through an
// interpolation grid, and intersection of per-hazard shields.

#include <bit>
#include <concepts>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "probshield/checker.hpp"
#include "probshield/grid.hpp"

namespace probshield {

/// Set of action indices below 32.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr explicit ActionSet(std::uint32_t mask) : mask_(mask) {}
  ActionSet(std::initializer_list<ActionId> actions) {
    for (ActionId a : actions) insert(a);
  }

  static constexpr ActionSet all(std::size_t num_actions) {
    return ActionSet(num_actions >= 32 ? ~0u : ((1u << num_actions) - 1u));
  }

  void insert(ActionId a) {
    if (a >= 32) throw std::out_of_range("ActionSet holds actions 0..31");
    mask_ |= 1u << a;
  }
  constexpr bool contains(ActionId a) const { return a < 32 && ((mask_ >> a) & 1u) != 0; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(mask_)); }
  constexpr std::uint32_t mask() const { return mask_; }

  /// The k-th smallest member.
  ActionId nth(std::size_t k) const {
    std::uint32_t m = mask_;
    for (std::size_t i = 0; i < k; ++i) m &= m - 1;
    if (m == 0) throw std::out_of_range("ActionSet::nth");
    return static_cast<ActionId>(std::countr_zero(m));
  }

  std::vector<ActionId> to_vector() const {
    std::vector<ActionId> out;
    for (std::uint32_t m = mask_; m != 0; m &= m - 1) out.push_back(static_cast<ActionId>(std::countr_zero(m)));
    return out;
  }

  friend constexpr ActionSet operator&(ActionSet a, ActionSet b) { return ActionSet(a.mask_ & b.mask_); }
  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  std::uint32_t mask_ = 0;
};

/// {a : p[a] - margin > lambda}.
inline ActionSet acceptable_from(std::span<const double> probs, double lambda, double margin) {
  ActionSet set;
  for (ActionId a = 0; a < probs.size(); ++a) {
    if (probs[a] - margin > lambda) set.insert(a);
  }
  return set;
}

/// Lowest-index argmax.
inline ActionId argmax_action(std::span<const double> probs) {
  ActionId best = 0;
  for (ActionId a = 1; a < probs.size(); ++a) {
    if (probs[a] > probs[best]) best = a;
  }
  return best;
}

/// Threshold monitor over a discrete probability table.
class Shield {
 public:
  Shield(std::shared_ptr<const ProbTable> prob, double lambda, double margin = 0.0)
      : prob_(std::move(prob)), lambda_(lambda), margin_(margin) {
    if (!prob_) throw std::invalid_argument("shield needs a probability table");
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
    if (!(margin >= 0.0)) throw std::invalid_argument("margin must be non-negative");
    if (!(lambda + margin < 1.0)) throw std::invalid_argument("lambda + margin must stay below 1");
    if (prob_->num_actions > 32) throw std::invalid_argument("shields support at most 32 actions");
  }

  double lambda() const { return lambda_; }
  double margin() const { return margin_; }
  const ProbTable& table() const { return *prob_; }
  std::shared_ptr<const ProbTable> table_ptr() const { return prob_; }
  std::size_t num_actions() const { return prob_->num_actions; }

  ActionSet acceptable_actions(StateId s) const {
    return acceptable_from(prob_->row(s), lambda_, margin_);
  }

  ActionId safest_action(StateId s) const { return argmax_action(prob_->row(s)); }

  /// pi*(s) = argmax_a P(s, a) on raw probabilities, ties to the lowest index.
  std::vector<ActionId> safest_policy() const { return argmax_policy(*prob_); }

 private:
  std::shared_ptr<const ProbTable> prob_;
  double lambda_;
  double margin_;
};

/// A grid mapping continuous states onto rows of a probability table.
/// `interpolants` fills weighted table rows and reports clamping;
/// `unconstrained` marks states the sub-problem says nothing about (its
/// participant is absent), which leave every action acceptable.
template <class G, class State>
concept InterpolationGrid = requires(const G& g, const State& s, std::vector<Interpolant>& out) {
  { g.interpolants(s, out) } -> std::convertible_to<bool>;
  { g.unconstrained(s) } -> std::convertible_to<bool>;
  { g.num_states() } -> std::convertible_to<std::size_t>;
};

/// Sum_i w_i P(s_i, a).
template <class G, class State>
  requires InterpolationGrid<G, State>
double interpolate(const G& grid, const ProbTable& prob, const State& state, ActionId a,
                   bool* clamped = nullptr) {
  thread_local std::vector<Interpolant> pts;
  const bool c = grid.interpolants(state, pts);
  if (clamped) *clamped = c;
  double v = 0.0;
  for (const auto& ip : pts) v += ip.weight * prob.at(static_cast<StateId>(ip.index), a);
  return v;
}

/// Interpolated probabilities of all actions at a continuous state.
template <class G, class State>
  requires InterpolationGrid<G, State>
std::vector<double> interpolate_all(const G& grid, const ProbTable& prob, const State& state,
                                    bool* clamped = nullptr) {
  thread_local std::vector<Interpolant> pts;
  const bool c = grid.interpolants(state, pts);
  if (clamped) *clamped = c;
  std::vector<double> v(prob.num_actions, 0.0);
  for (const auto& ip : pts) {
    const auto row = prob.row(static_cast<StateId>(ip.index));
    for (std::size_t a = 0; a < v.size(); ++a) v[a] += ip.weight * row[a];
  }
  return v;
}

/// A shield over a grid-discretised sub-problem, queried at continuous states.
template <class G>
class GridShield {
 public:
  GridShield(Shield shield, G grid) : shield_(std::move(shield)), grid_(std::move(grid)) {
    if (grid_.num_states() != shield_.table().num_states) {
      throw std::invalid_argument("grid and probability table disagree on state count");
    }
  }

  const Shield& shield() const { return shield_; }
  const G& grid() const { return grid_; }
  std::size_t num_actions() const { return shield_.num_actions(); }

  template <class State>
  std::vector<double> probabilities(const State& s, bool* clamped = nullptr) const {
    return interpolate_all(grid_, shield_.table(), s, clamped);
  }

  template <class State>
  ActionSet acceptable(const State& s, bool* clamped = nullptr) const {
    if (grid_.unconstrained(s)) {
      if (clamped) *clamped = false;
      return ActionSet::all(num_actions());
    }
    const auto p = probabilities(s, clamped);
    return acceptable_from(p, shield_.lambda(), shield_.margin());
  }

  template <class State>
  ActionId safest(const State& s) const {
    return argmax_action(probabilities(s));
  }

 private:
  Shield shield_;
  G grid_;
};

/// Result of querying a shield at a continuous state: the acceptable set
/// (possibly empty) and the action to take when it is empty.
struct ShieldQuery {
  ActionSet acceptable;
  ActionId safest = 0;
  std::size_t clamped = 0;
};

/// Intersection of per-hazard shields with a fixed fallback action.
template <class G>
class CompositeShield {
 public:
  CompositeShield(std::vector<GridShield<G>> parts, ActionId fallback)
      : parts_(std::move(parts)), fallback_(fallback) {
    if (parts_.empty()) throw std::invalid_argument("composite shield needs at least one part");
    for (const auto& p : parts_) {
      if (p.num_actions() != parts_.front().num_actions()) {
        throw std::invalid_argument("composite shield parts must share the action space");
      }
    }
    if (fallback_ >= num_actions()) throw std::invalid_argument("fallback action out of range");
  }

  std::size_t num_actions() const { return parts_.front().num_actions(); }
  ActionId fallback_action() const { return fallback_; }
  const std::vector<GridShield<G>>& parts() const { return parts_; }

  /// Intersection of part sets, or {fallback} when it is empty. `clamped`
  /// counts parts whose query left the grid hull.
  template <class State>
  ActionSet compose(const State& s, std::size_t* clamped = nullptr) const {
    ActionSet result = ActionSet::all(num_actions());
    for (const auto& part : parts_) {
      bool c = false;
      result = result & part.acceptable(s, &c);
      if (clamped && c) ++*clamped;
    }
    if (result.empty()) return ActionSet{fallback_};
    return result;
  }

  /// Raw intersection plus the safe action for an empty set: the part's own
  /// pi* when there is a single part, the fallback otherwise.
  template <class State>
  ShieldQuery query(const State& s) const {
    ShieldQuery q;
    q.acceptable = ActionSet::all(num_actions());
    for (const auto& part : parts_) {
      bool c = false;
      q.acceptable = q.acceptable & part.acceptable(s, &c);
      if (c) ++q.clamped;
    }
    q.safest = parts_.size() == 1 ? parts_.front().safest(s) : fallback_;
    return q;
  }

 private:
  std::vector<GridShield<G>> parts_;
  ActionId fallback_;
};

}  // namespace probshield
