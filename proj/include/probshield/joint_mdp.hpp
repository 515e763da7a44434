#pragma once

// Explicit product MDP of a two-agent sub-problem on a TrafficGrid.
// Transitions are estimated from each grid point by enumerating the
// participant's stochastic outcomes (driver noise or pedestrian speed
// variation, appearance, route and entry speed) and spreading every
// continuous successor over the grid with the same multilinear weights the
// shield uses at query time.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "probshield/mdp.hpp"
#include "probshield/simulator.hpp"
#include "probshield/traffic_grid.hpp"

namespace probshield {

inline const std::string kCollisionLabel = "collision";
inline const std::string kGoalLabel = "goal";

struct JointMdpOptions {
  /// Extra clearance around the ego footprint when labelling collision cells.
  double collision_margin = 0.5;
};

class ModelConstructionError : public std::runtime_error {
 public:
  ModelConstructionError(StateId s, ActionId a, double mass)
      : std::runtime_error("transition mass " + std::to_string(mass) + " at state " + std::to_string(s) +
                           ", action " + std::to_string(a) + " cannot be normalised") {}
};

namespace detail {

// Sorts by index and sums duplicates.
inline void merge_interpolants(std::vector<Interpolant>& v) {
  std::sort(v.begin(), v.end(), [](const Interpolant& a, const Interpolant& b) { return a.index < b.index; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (out > 0 && v[out - 1].index == v[i].index) v[out - 1].weight += v[i].weight;
    else v[out++] = v[i];
  }
  v.resize(out);
}

// Distribution over participant grid states one step after `state`.
inline void participant_successors(const Layout& layout, const TrafficGrid& grid, const TrafficState& state,
                                   std::vector<Interpolant>& out) {
  const auto& cfg = layout.config();
  const double dt = cfg.time_step;
  out.clear();
  std::vector<Interpolant> tmp;
  const PhysicalState& p = grid.other_of(state);
  const double appear = cfg.appearance_probability;

  if (!p.present) {
    out.push_back({0, 1.0 - appear});
    if (appear <= 0.0) return;
    const Axis& vel = grid.other_velocity_axis();
    const std::size_t routes = grid.routes();
    if (grid.participant() == Participant::Car) {
      const auto speed_w = uniform_projection(vel, 0.0, cfg.car_spawn_speed_max);
      for (std::size_t r = 0; r < routes; ++r) {
        for (std::size_t iv = 0; iv < vel.size(); ++iv) {
          if (speed_w[iv] > 0.0) out.push_back({grid.other_index(r, 0, iv), appear / routes * speed_w[iv]});
        }
      }
    } else {
      for (std::size_t r = 0; r < routes; ++r) {
        for (double n : cfg.pedestrian_noise) {
          const PhysicalState spawn = PhysicalState::at(static_cast<std::uint8_t>(r), 0.0,
                                                        std::max(0.0, cfg.pedestrian_speed + n));
          grid.other_interpolants(spawn, tmp);
          const double w = appear / routes / static_cast<double>(cfg.pedestrian_noise.size());
          for (const auto& ip : tmp) out.push_back({ip.index, w * ip.weight});
        }
      }
    }
    merge_interpolants(out);
    return;
  }

  if (grid.participant() == Participant::Car) {
    const double share = 1.0 / static_cast<double>(cfg.car_noise.size());
    const double base = rule_driver_action(layout, state, DriverRole::Car, cfg.driver);
    for (double n : cfg.car_noise) {
      const auto next = integrate(p.position, p.velocity, base + n, dt, cfg.car_max_speed);
      if (next.position > cfg.car_route_length) {
        out.push_back({0, share});
        continue;
      }
      grid.other_interpolants(PhysicalState::at(p.route, next.position, next.velocity), tmp);
      for (const auto& ip : tmp) out.push_back({ip.index, share * ip.weight});
    }
  } else {
    const double share = 1.0 / static_cast<double>(cfg.pedestrian_noise.size());
    for (double n : cfg.pedestrian_noise) {
      const double speed = std::max(0.0, cfg.pedestrian_speed + n);
      const double pos = p.position + speed * dt;
      if (pos > layout.pedestrian_route_length()) {
        out.push_back({0, share});
        continue;
      }
      grid.other_interpolants(PhysicalState::at(p.route, pos, speed), tmp);
      for (const auto& ip : tmp) out.push_back({ip.index, share * ip.weight});
    }
  }
  merge_interpolants(out);
}

}  // namespace detail

/// Product MDP over ego grid x participant grid (with its absent state).
/// Grid points are labelled `collision` when the (margin-inflated) ego
/// footprint overlaps the participant and `goal` when the ego has reached the
/// goal without colliding; both kinds are terminal.
inline LabelledMdp build_joint_mdp(const Layout& layout, const TrafficGrid& grid, const JointMdpOptions& opt = {}) {
  const auto& cfg = layout.config();
  const std::size_t n = grid.num_states();
  MdpBuilder builder(n, kNumEgoActions);
  builder.declare_proposition(kCollisionLabel).declare_proposition(kGoalLabel);
  builder.reserve(n * kNumEgoActions * 20);

  std::vector<Interpolant> other_next, ego_next, joint;
  for (std::size_t s = 0; s < n; ++s) {
    const TrafficState centre = grid.decode(s);
    const auto sid = static_cast<StateId>(s);
    if (collision(layout, centre, opt.collision_margin)) {
      builder.add_label(sid, kCollisionLabel).mark_terminal(sid);
      continue;
    }
    if (goal_reached(layout, centre)) {
      builder.add_label(sid, kGoalLabel).mark_terminal(sid);
      continue;
    }
    detail::participant_successors(layout, grid, centre, other_next);
    for (ActionId a = 0; a < kNumEgoActions; ++a) {
      const auto ego = integrate(centre.ego.position, centre.ego.velocity, kEgoAccelerations[a], cfg.time_step,
                                 cfg.ego_max_speed);
      grid.ego_interpolants(ego.position, ego.velocity, ego_next);
      joint.clear();
      for (const auto& e : ego_next) {
        for (const auto& o : other_next) joint.push_back({grid.state_index(e.index, o.index), e.weight * o.weight});
      }
      detail::merge_interpolants(joint);
      double mass = 0.0;
      for (const auto& ip : joint) mass += ip.weight;
      if (!(mass > 0.5 && mass < 1.5)) throw ModelConstructionError(sid, a, mass);
      for (const auto& ip : joint) builder.add_transition(sid, a, static_cast<StateId>(ip.index), ip.weight / mass);
    }
  }
  return builder.build();
}

}  // namespace probshield
