#pragma once

// Discrete-time point-mass simulation of the intersection.

#include <algorithm>
#include <random>
#include <stdexcept>

#include "probshield/driver.hpp"
#include "probshield/intersection.hpp"

namespace probshield {

using Rng = std::mt19937_64;

struct Longitudinal {
  double position = 0.0;
  double velocity = 0.0;
};

/// Constant-acceleration step that stops at zero speed and saturates at
/// `max_speed` mid-step instead of overshooting either bound.
inline Longitudinal integrate(double position, double velocity, double accel, double dt, double max_speed) {
  const double v = std::clamp(velocity, 0.0, max_speed);
  const double v_end = v + accel * dt;
  if (v_end < 0.0) return {position + v * v / (2.0 * -accel), 0.0};
  if (v_end > max_speed) {
    const double t = (max_speed - v) / accel;
    return {position + v * t + 0.5 * accel * t * t + max_speed * (dt - t), max_speed};
  }
  return {position + v * dt + 0.5 * accel * dt * dt, v_end};
}

/// Ego footprint overlapping another present participant; `margin` inflates
/// the ego footprint. Ignores the ego's speed.
inline bool overlap(const Layout& layout, const TrafficState& s, double margin = 0.0) {
  const OrientedBox ego = layout.ego_box(s.ego.position).inflated(margin);
  if (s.car.present && overlaps(ego, layout.car_box(s.car.route, s.car.position))) return true;
  if (s.pedestrian.present && overlaps(ego, layout.pedestrian_disc(s.pedestrian.route, s.pedestrian.position))) {
    return true;
  }
  return false;
}

/// An overlap the ego is charged with: always when the configuration counts
/// stationary contacts, otherwise only while the ego is moving.
inline bool collision(const Layout& layout, const TrafficState& s, double margin = 0.0) {
  if (!layout.config().stationary_contact_is_collision && !(s.ego.velocity > 0.0)) return false;
  return overlap(layout, s, margin);
}

inline bool goal_reached(const Layout& layout, const TrafficState& s) {
  return s.ego.position >= layout.goal_position();
}

class Simulator {
 public:
  explicit Simulator(const ScenarioConfig& cfg) : layout_(cfg) {}

  const Layout& layout() const { return layout_; }
  const ScenarioConfig& config() const { return layout_.config(); }

  /// Ego at its start; the car and pedestrian present at their route start
  /// with the appearance probability, otherwise absent.
  TrafficState initial_state(Rng& rng) const {
    const auto& cfg = config();
    TrafficState s;
    s.ego = PhysicalState::at(0, 0.0, cfg.ego_initial_speed);
    if (has_car(cfg.scenario)) maybe_spawn_car(s.car, rng);
    if (has_pedestrian(cfg.scenario)) maybe_spawn_pedestrian(s.pedestrian, rng);
    return s;
  }

  struct Outcome {
    TrafficState state;
    StepEvents events;
  };

  Outcome step(const TrafficState& s, std::uint32_t ego_action, Rng& rng) const {
    if (ego_action >= kNumEgoActions) throw std::invalid_argument("invalid ego action");
    const auto& cfg = config();
    const double dt = cfg.time_step;
    TrafficState next = s;
    ++next.step_count;

    const auto ego = integrate(s.ego.position, s.ego.velocity, kEgoAccelerations[ego_action], dt, cfg.ego_max_speed);
    next.ego.position = ego.position;
    next.ego.velocity = ego.velocity;

    std::uniform_int_distribution<std::size_t> car_noise(0, cfg.car_noise.size() - 1);
    std::uniform_int_distribution<std::size_t> ped_noise(0, cfg.pedestrian_noise.size() - 1);
    if (s.car.present) {
      const double accel = rule_driver_action(layout_, s, DriverRole::Car, cfg.driver) + cfg.car_noise[car_noise(rng)];
      const auto car = integrate(s.car.position, s.car.velocity, accel, dt, cfg.car_max_speed);
      next.car.position = car.position;
      next.car.velocity = car.velocity;
      if (car.position > cfg.car_route_length) next.car = PhysicalState::absent();
    }
    if (s.pedestrian.present) {
      const double speed = std::max(0.0, cfg.pedestrian_speed + cfg.pedestrian_noise[ped_noise(rng)]);
      next.pedestrian.velocity = speed;
      next.pedestrian.position = s.pedestrian.position + speed * dt;
      if (next.pedestrian.position > layout_.pedestrian_route_length()) next.pedestrian = PhysicalState::absent();
    }
    if (!s.car.present && has_car(cfg.scenario)) maybe_spawn_car(next.car, rng);
    if (!s.pedestrian.present && has_pedestrian(cfg.scenario)) maybe_spawn_pedestrian(next.pedestrian, rng);

    StepEvents events;
    events.collision = collision(layout_, next);
    events.stationary_contact = !events.collision && overlap(layout_, next);
    events.goal_reached = !events.collision && goal_reached(layout_, next);
    return {next, events};
  }

 private:
  void maybe_spawn_car(PhysicalState& car, Rng& rng) const {
    const auto& cfg = config();
    std::bernoulli_distribution appear(cfg.appearance_probability);
    if (!appear(rng)) return;
    std::uniform_int_distribution<int> route(0, static_cast<int>(kNumCarRoutes) - 1);
    std::uniform_real_distribution<double> speed(0.0, cfg.car_spawn_speed_max);
    const auto r = static_cast<std::uint8_t>(route(rng));
    car = PhysicalState::at(r, 0.0, speed(rng));
  }

  void maybe_spawn_pedestrian(PhysicalState& ped, Rng& rng) const {
    const auto& cfg = config();
    std::bernoulli_distribution appear(cfg.appearance_probability);
    if (!appear(rng)) return;
    std::uniform_int_distribution<int> route(0, static_cast<int>(kNumPedestrianRoutes) - 1);
    std::uniform_int_distribution<std::size_t> noise_index(0, cfg.pedestrian_noise.size() - 1);
    const auto r = static_cast<std::uint8_t>(route(rng));
    ped = PhysicalState::at(r, 0.0, std::max(0.0, cfg.pedestrian_speed + cfg.pedestrian_noise[noise_index(rng)]));
  }

  Layout layout_;
};

}  // namespace probshield
