#pragma once

// Discretisation of a two-agent sub-problem (ego + car or ego + pedestrian)
// into a product grid. Interpolation runs independently per participant on
// its (position, velocity) plane; the route axis is matched exactly and the
// joint weight of a grid point is the product of the participant weights.

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "probshield/grid.hpp"
#include "probshield/intersection.hpp"

namespace probshield {

enum class Participant { Car, Pedestrian };

inline std::string to_string(Participant p) { return p == Participant::Car ? "car" : "pedestrian"; }

/// How an absent participant is treated when the shield is queried.
enum class AbsentRule {
  LookupTable,    // use the table's absent row (covers the appearance risk)
  Unconstrained,  // every action acceptable
};

struct GridResolution {
  double position = 2.0;
  double vehicle_velocity = 2.0;
  double pedestrian_velocity = 1.0;
};

class TrafficGrid {
 public:
  TrafficGrid() = default;

  TrafficGrid(Participant other, Axis ego_position, Axis ego_velocity, std::size_t routes, Axis other_position,
              Axis other_velocity, AbsentRule absent_rule = AbsentRule::LookupTable)
      : other_(other), ego_pos_(std::move(ego_position)), ego_vel_(std::move(ego_velocity)), routes_(routes),
        other_pos_(std::move(other_position)), other_vel_(std::move(other_velocity)), absent_rule_(absent_rule) {
    if (routes_ == 0) throw std::invalid_argument("grid needs at least one route");
  }

  /// Grid over the layout's path lengths at the given resolutions.
  static TrafficGrid for_layout(const Layout& layout, Participant other, const GridResolution& res = {},
                                AbsentRule absent_rule = AbsentRule::LookupTable) {
    const auto& cfg = layout.config();
    Axis ego_pos = Axis::uniform(0.0, cfg.ego_path_length, res.position);
    Axis ego_vel = Axis::uniform(0.0, cfg.ego_max_speed, res.vehicle_velocity);
    if (other == Participant::Car) {
      return {other, ego_pos, ego_vel, kNumCarRoutes, Axis::uniform(0.0, cfg.car_route_length, res.position),
              Axis::uniform(0.0, cfg.car_max_speed, res.vehicle_velocity), absent_rule};
    }
    const double vmax = cfg.pedestrian_speed + cfg.pedestrian_noise.back();
    return {other, ego_pos, ego_vel, kNumPedestrianRoutes,
            Axis::uniform(0.0, layout.pedestrian_route_length(), res.position),
            Axis::uniform(0.0, vmax, res.pedestrian_velocity), absent_rule};
  }

  Participant participant() const { return other_; }
  const Axis& ego_position_axis() const { return ego_pos_; }
  const Axis& ego_velocity_axis() const { return ego_vel_; }
  const Axis& other_position_axis() const { return other_pos_; }
  const Axis& other_velocity_axis() const { return other_vel_; }
  std::size_t routes() const { return routes_; }
  AbsentRule absent_rule() const { return absent_rule_; }
  void set_absent_rule(AbsentRule r) { absent_rule_ = r; }

  std::size_t ego_states() const { return ego_pos_.size() * ego_vel_.size(); }
  /// Participant physical states including the absent one (index 0).
  std::size_t other_states() const { return 1 + routes_ * other_pos_.size() * other_vel_.size(); }
  std::size_t num_states() const { return ego_states() * other_states(); }

  std::size_t ego_index(std::size_t pos, std::size_t vel) const { return pos * ego_vel_.size() + vel; }
  std::size_t other_index(std::size_t route, std::size_t pos, std::size_t vel) const {
    return 1 + (route * other_pos_.size() + pos) * other_vel_.size() + vel;
  }
  std::size_t state_index(std::size_t ego, std::size_t other) const { return ego * other_states() + other; }

  const PhysicalState& other_of(const TrafficState& s) const {
    return other_ == Participant::Car ? s.car : s.pedestrian;
  }

  /// Bilinear interpolants of the ego on its own (position, velocity) grid.
  bool ego_interpolants(double position, double velocity, std::vector<Interpolant>& out) const {
    return plane(ego_pos_, ego_vel_, position, velocity, 0, out);
  }

  /// Interpolants of the participant, offset into its index space.
  bool other_interpolants(const PhysicalState& p, std::vector<Interpolant>& out) const {
    if (!p.present) {
      out.assign(1, {0, 1.0});
      return false;
    }
    if (p.route >= routes_) throw std::out_of_range("route not in grid");
    const std::size_t base = 1 + p.route * other_pos_.size() * other_vel_.size();
    return plane(other_pos_, other_vel_, p.position, p.velocity, base, out);
  }

  /// Product-grid interpolants of a continuous state; true if clamped.
  bool interpolants(const TrafficState& s, std::vector<Interpolant>& out) const {
    thread_local std::vector<Interpolant> ego, other;
    bool clamped = ego_interpolants(s.ego.position, s.ego.velocity, ego);
    clamped = other_interpolants(other_of(s), other) || clamped;
    out.clear();
    for (const auto& e : ego) {
      for (const auto& o : other) out.push_back({state_index(e.index, o.index), e.weight * o.weight});
    }
    return clamped;
  }

  bool unconstrained(const TrafficState& s) const {
    return absent_rule_ == AbsentRule::Unconstrained && !other_of(s).present;
  }

  /// Nearest grid state.
  std::size_t discretize(const TrafficState& s) const {
    const std::size_t e = ego_index(ego_pos_.nearest(s.ego.position), ego_vel_.nearest(s.ego.velocity));
    const auto& p = other_of(s);
    if (!p.present) return state_index(e, 0);
    return state_index(e, other_index(p.route, other_pos_.nearest(p.position), other_vel_.nearest(p.velocity)));
  }

  /// The continuous state at a grid point (the third participant absent).
  TrafficState decode(std::size_t index) const {
    if (index >= num_states()) throw std::out_of_range("grid index out of range");
    const std::size_t e = index / other_states();
    const std::size_t o = index % other_states();
    TrafficState s;
    s.ego = PhysicalState::at(0, ego_pos_[e / ego_vel_.size()], ego_vel_[e % ego_vel_.size()]);
    if (o != 0) {
      const std::size_t k = o - 1;
      const std::size_t per_route = other_pos_.size() * other_vel_.size();
      const auto route = static_cast<std::uint8_t>(k / per_route);
      const std::size_t rem = k % per_route;
      auto p = PhysicalState::at(route, other_pos_[rem / other_vel_.size()], other_vel_[rem % other_vel_.size()]);
      (other_ == Participant::Car ? s.car : s.pedestrian) = p;
    }
    return s;
  }

  friend bool operator==(const TrafficGrid&, const TrafficGrid&) = default;

 private:
  static bool plane(const Axis& pos_axis, const Axis& vel_axis, double pos, double vel, std::size_t base,
                    std::vector<Interpolant>& out) {
    const AxisWeights wp = pos_axis.weights(pos);
    const AxisWeights wv = vel_axis.weights(vel);
    out.clear();
    const std::size_t nv = vel_axis.size();
    auto push = [&](std::size_t ip, std::size_t iv, double w) {
      if (w > 0.0) out.push_back({base + ip * nv + iv, w});
    };
    push(wp.lower, wv.lower, wp.lower_weight * wv.lower_weight);
    if (wv.upper != wv.lower) push(wp.lower, wv.upper, wp.lower_weight * (1.0 - wv.lower_weight));
    if (wp.upper != wp.lower) {
      push(wp.upper, wv.lower, (1.0 - wp.lower_weight) * wv.lower_weight);
      if (wv.upper != wv.lower) push(wp.upper, wv.upper, (1.0 - wp.lower_weight) * (1.0 - wv.lower_weight));
    }
    return wp.clamped || wv.clamped;
  }

  Participant other_ = Participant::Car;
  Axis ego_pos_, ego_vel_;
  std::size_t routes_ = 1;
  Axis other_pos_, other_vel_;
  AbsentRule absent_rule_ = AbsentRule::LookupTable;
};

inline nlohmann::json to_json(const TrafficGrid& g) {
  return {{"participant", to_string(g.participant())},
          {"ego_position", g.ego_position_axis().points()},
          {"ego_velocity", g.ego_velocity_axis().points()},
          {"routes", g.routes()},
          {"other_position", g.other_position_axis().points()},
          {"other_velocity", g.other_velocity_axis().points()},
          {"absent_rule", g.absent_rule() == AbsentRule::LookupTable ? "lookup" : "unconstrained"}};
}

inline TrafficGrid traffic_grid_from_json(const nlohmann::json& j) {
  const std::string who = j.at("participant").get<std::string>();
  if (who != "car" && who != "pedestrian") throw std::invalid_argument("unknown participant '" + who + "'");
  const auto rule = j.value("absent_rule", std::string("lookup")) == "unconstrained" ? AbsentRule::Unconstrained
                                                                                      : AbsentRule::LookupTable;
  return {who == "car" ? Participant::Car : Participant::Pedestrian,
          Axis(j.at("ego_position").get<std::vector<double>>()),
          Axis(j.at("ego_velocity").get<std::vector<double>>()),
          j.at("routes").get<std::size_t>(),
          Axis(j.at("other_position").get<std::vector<double>>()),
          Axis(j.at("other_velocity").get<std::vector<double>>()),
          rule};
}

/// Weight of each breakpoint when a coordinate is drawn uniformly from
/// [lo, hi] and spread over the axis by linear interpolation. Exact: the hat
/// functions are integrated piecewise between breakpoints.
inline std::vector<double> uniform_projection(const Axis& axis, double lo, double hi) {
  std::vector<double> w(axis.size(), 0.0);
  if (!(hi > lo)) {
    const auto aw = axis.weights(lo);
    w[aw.lower] += aw.lower_weight;
    if (aw.upper != aw.lower) w[aw.upper] += 1.0 - aw.lower_weight;
    return w;
  }
  std::vector<double> cuts{lo, hi};
  for (double b : axis.points()) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double x0 = cuts[i], x1 = cuts[i + 1];
    const double share = (x1 - x0) / (hi - lo) / 2.0;
    for (double x : {x0, x1}) {
      const auto aw = axis.weights(x);
      w[aw.lower] += share * aw.lower_weight;
      if (aw.upper != aw.lower) w[aw.upper] += share * (1.0 - aw.lower_weight);
    }
  }
  return w;
}

}  // namespace probshield
