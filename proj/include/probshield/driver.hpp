#pragma once

// Rule-based longitudinal driver shared by the other car and the
// rule-based ego baseline: yield to crossing pedestrians, gap acceptance by
// time to collision when turning left, Intelligent Driver Model otherwise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "probshield/intersection.hpp"

namespace probshield {

/// Something ahead along the path: net distance and speed along the path.
struct Obstacle {
  double gap = 0.0;
  double speed = 0.0;
};

inline double idm_acceleration(const DriverParams& p, double v, std::optional<Obstacle> leader) {
  double a = 1.0 - std::pow(std::max(v, 0.0) / p.desired_speed, p.exponent);
  if (leader) {
    const double gap = std::max(leader->gap, 0.1);
    const double dv = v - leader->speed;
    const double desired =
        p.jam_distance + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
    a -= (desired / gap) * (desired / gap);
  }
  return p.max_accel * a;
}

/// IDM toward a standstill at centre position `line`.
inline double idm_stop_at(const DriverParams& p, double position, double v, double line) {
  return idm_acceleration(p, v, Obstacle{line - position + p.jam_distance, 0.0});
}

/// Distance the footprint on `path` at `position` can advance before touching
/// `other`, searched up to `lookahead` in 0.5 m steps.
inline std::optional<double> gap_along_path(const Path& path, double position, double length, double width,
                                            const OrientedBox& other, double lookahead) {
  for (double d = 0.0; d <= lookahead; d += 0.5) {
    if (overlaps(footprint(path.pose(position + d), length, width), other)) return d;
  }
  return std::nullopt;
}

/// Time for a vehicle to reach a conflict zone; 0 inside it, infinity once past.
inline double time_to_zone(double position, double velocity, double enter, double exit) {
  if (position > exit) return std::numeric_limits<double>::infinity();
  if (position >= enter) return 0.0;
  return (enter - position) / std::max(velocity, 0.1);
}

enum class DriverRole { Car, Ego };

namespace detail {

inline double pedestrian_yield(const Layout& layout, const DriverParams& p, const std::vector<CrosswalkSpan>& spans,
                               double position, double v, const PhysicalState& ped) {
  double a = std::numeric_limits<double>::infinity();
  if (!ped.present || !layout.pedestrian_on_road(ped.position)) return a;
  const Crosswalk cw = Layout::crosswalk_of(ped.route);
  for (const auto& span : spans) {
    if (span.crosswalk != cw) continue;
    const double line = span.enter - 0.5;
    if (position <= line) a = std::min(a, idm_stop_at(p, position, v, line));
  }
  return a;
}

}  // namespace detail

/// Acceleration of `role` in `state`, clamped to the driver's output range
/// (noise is added by the caller).
inline double rule_driver_action(const Layout& layout, const TrafficState& state, DriverRole role,
                                 const DriverParams& p) {
  const auto& cfg = layout.config();
  const bool ego = role == DriverRole::Ego;
  const PhysicalState& self = ego ? state.ego : state.car;
  const PhysicalState& other = ego ? state.car : state.ego;
  if (!self.present) return 0.0;

  const Path& path = ego ? layout.ego_path() : layout.car_path(self.route);
  const auto& spans = ego ? layout.ego_crosswalks() : layout.car_crosswalks(self.route);
  const double s = self.position;
  const double v = self.velocity;

  double accel = detail::pedestrian_yield(layout, p, spans, s, v, state.pedestrian);

  // Left-turners give way; both the ego and the car on the TurnLeft route.
  const bool turning_left = ego || self.route == static_cast<std::uint8_t>(CarRoute::TurnLeft);
  if (turning_left && other.present) {
    const auto& zone = layout.ego_car_conflict(ego ? other.route : self.route);
    const double stop = ego ? layout.ego_stop_position() : layout.car_stop_position();
    if (zone && s <= stop) {
      const double ttc = ego ? time_to_zone(other.position, other.velocity, zone->other_enter, zone->other_exit)
                             : time_to_zone(other.position, other.velocity, zone->self_enter, zone->self_exit);
      if (ttc < p.ttc_threshold) accel = std::min(accel, idm_stop_at(p, s, v, stop));
    }
  }

  std::optional<Obstacle> leader;
  if (other.present) {
    const OrientedBox other_box = ego ? layout.car_box(other.route, other.position) : layout.ego_box(other.position);
    if (auto gap = gap_along_path(path, s, cfg.vehicle_length, cfg.vehicle_width, other_box, p.lookahead)) {
      const double rel = other_box.heading - path.pose(s + *gap).heading;
      leader = Obstacle{*gap, std::max(0.0, other.velocity * std::cos(rel))};
    }
  }
  accel = std::min(accel, idm_acceleration(p, v, leader));
  return std::clamp(accel, p.min_accel, p.max_output_accel);
}

/// Closest ego action to a desired acceleration. Ties go to the larger
/// magnitude so a request of +1 from standstill still moves the ego.
inline std::uint32_t nearest_ego_action(double accel) {
  std::uint32_t best = 0;
  for (std::uint32_t a = 1; a < kNumEgoActions; ++a) {
    const double d = std::abs(kEgoAccelerations[a] - accel);
    const double d_best = std::abs(kEgoAccelerations[best] - accel);
    if (d < d_best || (d == d_best && std::abs(kEgoAccelerations[a]) > std::abs(kEgoAccelerations[best]))) best = a;
  }
  return best;
}

}  // namespace probshield
