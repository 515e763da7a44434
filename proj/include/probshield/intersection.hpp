#pragma once

// Unsignalized T-intersection: scenario parameters, road layout and the
// physical state of the three traffic participants.
//
// Coordinates have the origin at the centre of the junction. The through
// road runs along x with one lane per direction (eastbound y < 0, westbound
// y > 0). The ego vehicle comes up the stem (y < 0) in its right lane and
// turns left into the westbound lane. Crosswalks sit on all three approaches.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "probshield/geometry.hpp"

namespace probshield {

enum class ScenarioKind { PedestrianOnly, CarOnly, CarAndPedestrian };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::PedestrianOnly: return "pedestrian-only";
    case ScenarioKind::CarOnly: return "car-only";
    case ScenarioKind::CarAndPedestrian: return "car-and-pedestrian";
  }
  return {};
}

inline ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "pedestrian-only") return ScenarioKind::PedestrianOnly;
  if (s == "car-only") return ScenarioKind::CarOnly;
  if (s == "car-and-pedestrian") return ScenarioKind::CarAndPedestrian;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

inline bool has_car(ScenarioKind k) { return k != ScenarioKind::PedestrianOnly; }
inline bool has_pedestrian(ScenarioKind k) { return k != ScenarioKind::CarOnly; }

/// Ego actions: longitudinal accelerations in m/s^2, hard brake first.
inline constexpr std::array<double, 4> kEgoAccelerations{-4.0, -2.0, 0.0, 2.0};
inline constexpr std::size_t kNumEgoActions = kEgoAccelerations.size();
inline constexpr std::uint32_t kHardBrake = 0;

/// Car routes, by index. Cars enter from the left (eastbound) or the right
/// (westbound); the left-turner comes from the right and the right-turner
/// from the left, both leaving down the stem.
enum class CarRoute : std::uint8_t { StraightFromLeft, StraightFromRight, TurnLeft, TurnRight };
inline constexpr std::size_t kNumCarRoutes = 4;

/// Crosswalks: across the stem, the left arm and the right arm.
enum class Crosswalk : std::uint8_t { Stem, Left, Right };
inline constexpr std::size_t kNumCrosswalks = 3;
/// Pedestrian routes are (crosswalk, direction) pairs: route = 2 * crosswalk + direction.
inline constexpr std::size_t kNumPedestrianRoutes = 2 * kNumCrosswalks;

/// Intelligent Driver Model and gap-acceptance parameters.
struct DriverParams {
  double desired_speed = 8.0;
  double time_headway = 1.5;
  double max_accel = 1.0;
  double comfortable_decel = 2.0;
  double jam_distance = 2.0;
  double exponent = 4.0;
  double ttc_threshold = 4.5;
  double min_accel = -4.0;
  double max_output_accel = 2.0;
  double lookahead = 30.0;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::CarAndPedestrian;
  double time_step = 0.5;

  // Geometry (metres).
  double lane_width = 3.5;
  double crosswalk_width = 3.0;
  double crosswalk_offset = 2.0;    // road edge to crosswalk centre line
  double stop_line_offset = 4.0;    // road edge to stop line
  double curb_length = 3.5;         // sidewalk part of a crossing route, each side
  double ego_start_distance = 25.0; // ego front bumper to stop line at t = 0
  double ego_path_length = 66.0;
  double goal_offset = 20.0;        // beyond the junction, along the ego path
  double car_spawn_distance = 28.5; // car entry point to road edge
  double car_route_length = 64.0;
  double vehicle_length = 4.0;
  double vehicle_width = 2.0;
  double pedestrian_radius = 0.3;
  // Whether something running into a standing ego counts as a collision.
  // Off by default: the ego is only charged with collisions it drives into,
  // which is what makes hard braking a safe fallback.
  bool stationary_contact_is_collision = false;

  // Dynamics.
  double ego_initial_speed = 5.0;
  double ego_max_speed = 10.0;
  double car_max_speed = 10.0;
  double car_spawn_speed_max = 8.0;
  double pedestrian_speed = 1.0;
  double appearance_probability = 0.7;
  std::array<double, 3> car_noise{-1.0, 0.0, 1.0};
  std::array<double, 3> pedestrian_noise{-1.0, 0.0, 1.0};
  DriverParams driver{};

  std::size_t max_steps = 200;
  std::uint64_t seed = 0;

  void check() const {
    if (!(time_step > 0.0)) throw std::invalid_argument("time step must be positive");
    if (!(appearance_probability >= 0.0 && appearance_probability <= 1.0)) {
      throw std::invalid_argument("appearance probability must lie in [0, 1]");
    }
    if (!(goal_offset > 0.0) || !(ego_path_length > 0.0) || !(car_route_length > 0.0)) {
      throw std::invalid_argument("path lengths must be positive");
    }
    if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  }
};

inline nlohmann::json to_json(const DriverParams& d) {
  return {{"desired_speed", d.desired_speed}, {"time_headway", d.time_headway},
          {"max_accel", d.max_accel},         {"comfortable_decel", d.comfortable_decel},
          {"jam_distance", d.jam_distance},   {"exponent", d.exponent},
          {"ttc_threshold", d.ttc_threshold}, {"min_accel", d.min_accel},
          {"max_output_accel", d.max_output_accel}, {"lookahead", d.lookahead}};
}

inline DriverParams driver_params_from_json(const nlohmann::json& j, DriverParams d = {}) {
  d.desired_speed = j.value("desired_speed", d.desired_speed);
  d.time_headway = j.value("time_headway", d.time_headway);
  d.max_accel = j.value("max_accel", d.max_accel);
  d.comfortable_decel = j.value("comfortable_decel", d.comfortable_decel);
  d.jam_distance = j.value("jam_distance", d.jam_distance);
  d.exponent = j.value("exponent", d.exponent);
  d.ttc_threshold = j.value("ttc_threshold", d.ttc_threshold);
  d.min_accel = j.value("min_accel", d.min_accel);
  d.max_output_accel = j.value("max_output_accel", d.max_output_accel);
  d.lookahead = j.value("lookahead", d.lookahead);
  return d;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  return {{"scenario", to_string(c.scenario)},
          {"time_step", c.time_step},
          {"lane_width", c.lane_width},
          {"crosswalk_width", c.crosswalk_width},
          {"crosswalk_offset", c.crosswalk_offset},
          {"stop_line_offset", c.stop_line_offset},
          {"curb_length", c.curb_length},
          {"ego_start_distance", c.ego_start_distance},
          {"ego_path_length", c.ego_path_length},
          {"goal_offset", c.goal_offset},
          {"car_spawn_distance", c.car_spawn_distance},
          {"car_route_length", c.car_route_length},
          {"vehicle_length", c.vehicle_length},
          {"vehicle_width", c.vehicle_width},
          {"pedestrian_radius", c.pedestrian_radius},
          {"stationary_contact_is_collision", c.stationary_contact_is_collision},
          {"ego_initial_speed", c.ego_initial_speed},
          {"ego_max_speed", c.ego_max_speed},
          {"car_max_speed", c.car_max_speed},
          {"car_spawn_speed_max", c.car_spawn_speed_max},
          {"pedestrian_speed", c.pedestrian_speed},
          {"appearance_probability", c.appearance_probability},
          {"car_noise", c.car_noise},
          {"pedestrian_noise", c.pedestrian_noise},
          {"driver", to_json(c.driver)},
          {"max_steps", c.max_steps},
          {"seed", c.seed}};
}

inline ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  c.time_step = j.value("time_step", c.time_step);
  c.lane_width = j.value("lane_width", c.lane_width);
  c.crosswalk_width = j.value("crosswalk_width", c.crosswalk_width);
  c.crosswalk_offset = j.value("crosswalk_offset", c.crosswalk_offset);
  c.stop_line_offset = j.value("stop_line_offset", c.stop_line_offset);
  c.curb_length = j.value("curb_length", c.curb_length);
  c.ego_start_distance = j.value("ego_start_distance", c.ego_start_distance);
  c.ego_path_length = j.value("ego_path_length", c.ego_path_length);
  c.goal_offset = j.value("goal_offset", c.goal_offset);
  c.car_spawn_distance = j.value("car_spawn_distance", c.car_spawn_distance);
  c.car_route_length = j.value("car_route_length", c.car_route_length);
  c.vehicle_length = j.value("vehicle_length", c.vehicle_length);
  c.vehicle_width = j.value("vehicle_width", c.vehicle_width);
  c.pedestrian_radius = j.value("pedestrian_radius", c.pedestrian_radius);
  c.stationary_contact_is_collision = j.value("stationary_contact_is_collision", c.stationary_contact_is_collision);
  c.ego_initial_speed = j.value("ego_initial_speed", c.ego_initial_speed);
  c.ego_max_speed = j.value("ego_max_speed", c.ego_max_speed);
  c.car_max_speed = j.value("car_max_speed", c.car_max_speed);
  c.car_spawn_speed_max = j.value("car_spawn_speed_max", c.car_spawn_speed_max);
  c.pedestrian_speed = j.value("pedestrian_speed", c.pedestrian_speed);
  c.appearance_probability = j.value("appearance_probability", c.appearance_probability);
  c.car_noise = j.value("car_noise", c.car_noise);
  c.pedestrian_noise = j.value("pedestrian_noise", c.pedestrian_noise);
  if (j.contains("driver")) c.driver = driver_params_from_json(j.at("driver"));
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  c.check();
  return c;
}

/// Lane-relative physical state, or absent.
struct PhysicalState {
  bool present = false;
  std::uint8_t route = 0;
  double position = 0.0;  // metres along the route path
  double velocity = 0.0;

  static PhysicalState absent() { return {}; }
  static PhysicalState at(std::uint8_t route, double position, double velocity) {
    return {true, route, position, velocity};
  }

  friend bool operator==(const PhysicalState&, const PhysicalState&) = default;
};

struct TrafficState {
  PhysicalState ego{true, 0, 0.0, 0.0};
  PhysicalState car;
  PhysicalState pedestrian;
  std::size_t step_count = 0;

  friend bool operator==(const TrafficState&, const TrafficState&) = default;
};

struct StepEvents {
  bool collision = false;
  bool goal_reached = false;
  // Overlap with a standing ego that was not counted as a collision.
  bool stationary_contact = false;

  bool terminal() const { return collision || goal_reached; }
};

/// Where a path overlaps a crosswalk, as centre positions along the path.
struct CrosswalkSpan {
  Crosswalk crosswalk;
  double enter = 0.0;
  double exit = 0.0;
};

/// Stretch of two paths whose footprints can touch.
struct ConflictZone {
  double self_enter = 0.0;
  double self_exit = 0.0;
  double other_enter = 0.0;
  double other_exit = 0.0;
};

/// Paths, crosswalks and precomputed conflict zones for a scenario.
class Layout {
 public:
  explicit Layout(const ScenarioConfig& cfg) : cfg_(cfg) {
    cfg.check();
    const double w = cfg.lane_width;
    const double turn_left_radius = 1.5 * w;
    const double turn_right_radius = 0.5 * w;
    const double half_pi = std::numbers::pi / 2.0;

    const double ego_approach = cfg.ego_start_distance + cfg.stop_line_offset;
    ego_path_ = Path({w / 2.0, -w - ego_approach}, half_pi);
    ego_path_.straight(ego_approach).arc(turn_left_radius, half_pi);
    goal_position_ = ego_path_.length() + cfg.goal_offset;
    ego_path_.straight(std::max(0.0, cfg.ego_path_length - ego_path_.length()));
    ego_stop_position_ = cfg.ego_start_distance - cfg.vehicle_length / 2.0;

    const double a = cfg.car_spawn_distance;
    const double len = cfg.car_route_length;
    car_paths_[0] = Path({-w - a, -w / 2.0}, 0.0);
    car_paths_[0].straight(len);
    car_paths_[1] = Path({w + a, w / 2.0}, std::numbers::pi);
    car_paths_[1].straight(len);
    car_paths_[2] = Path({w + a, w / 2.0}, std::numbers::pi);
    car_paths_[2].straight(a).arc(turn_left_radius, half_pi);
    car_paths_[2].straight(std::max(0.0, len - car_paths_[2].length()));
    car_paths_[3] = Path({-w - a, -w / 2.0}, 0.0);
    car_paths_[3].straight(a).arc(turn_right_radius, -half_pi);
    car_paths_[3].straight(std::max(0.0, len - car_paths_[3].length()));
    car_stop_position_ = a - cfg.stop_line_offset - cfg.vehicle_length / 2.0;

    const double reach = w + cfg.curb_length;
    const double c = w + cfg.crosswalk_offset;
    pedestrian_route_length_ = 2.0 * reach;
    crosswalk_areas_[0] = {{0.0, -c}, 0.0, reach, cfg.crosswalk_width / 2.0};
    crosswalk_areas_[1] = {{-c, 0.0}, half_pi, reach, cfg.crosswalk_width / 2.0};
    crosswalk_areas_[2] = {{c, 0.0}, half_pi, reach, cfg.crosswalk_width / 2.0};
    for (std::size_t k = 0; k < kNumCrosswalks; ++k) {
      const auto& area = crosswalk_areas_[k];
      const Vec2 dir = unit(area.heading);
      pedestrian_paths_[2 * k] = Path(area.centre - reach * dir, area.heading);
      pedestrian_paths_[2 * k].straight(pedestrian_route_length_);
      pedestrian_paths_[2 * k + 1] = Path(area.centre + reach * dir, area.heading + std::numbers::pi);
      pedestrian_paths_[2 * k + 1].straight(pedestrian_route_length_);
    }

    ego_crosswalks_ = crosswalk_spans(ego_path_);
    for (std::size_t r = 0; r < kNumCarRoutes; ++r) {
      car_crosswalks_[r] = crosswalk_spans(car_paths_[r]);
      ego_vs_car_[r] = conflict(ego_path_, car_paths_[r]);
    }
  }

  const ScenarioConfig& config() const { return cfg_; }
  const Path& ego_path() const { return ego_path_; }
  const Path& car_path(std::size_t route) const { return car_paths_.at(route); }
  const Path& pedestrian_path(std::size_t route) const { return pedestrian_paths_.at(route); }
  double goal_position() const { return goal_position_; }
  double ego_stop_position() const { return ego_stop_position_; }
  double car_stop_position() const { return car_stop_position_; }
  double pedestrian_route_length() const { return pedestrian_route_length_; }
  const OrientedBox& crosswalk_area(Crosswalk c) const { return crosswalk_areas_[static_cast<std::size_t>(c)]; }

  const std::vector<CrosswalkSpan>& ego_crosswalks() const { return ego_crosswalks_; }
  const std::vector<CrosswalkSpan>& car_crosswalks(std::size_t route) const { return car_crosswalks_.at(route); }

  /// Conflict between the ego path (self) and a car route (other), if any.
  const std::optional<ConflictZone>& ego_car_conflict(std::size_t route) const { return ego_vs_car_.at(route); }

  /// Portion of a crossing route lying on the carriageway, padded by 1 m.
  bool pedestrian_on_road(double position) const {
    const double curb = cfg_.curb_length;
    return position >= curb - 1.0 && position <= pedestrian_route_length_ - curb + 1.0;
  }

  static Crosswalk crosswalk_of(std::size_t pedestrian_route) {
    return static_cast<Crosswalk>(pedestrian_route / 2);
  }

  OrientedBox ego_box(double position) const {
    return footprint(ego_path_.pose(position), cfg_.vehicle_length, cfg_.vehicle_width);
  }
  OrientedBox car_box(std::size_t route, double position) const {
    return footprint(car_paths_.at(route).pose(position), cfg_.vehicle_length, cfg_.vehicle_width);
  }
  Disc pedestrian_disc(std::size_t route, double position) const {
    return {pedestrian_paths_.at(route).pose(position).position, cfg_.pedestrian_radius};
  }

 private:
  static constexpr double kSampleStep = 0.25;

  std::vector<CrosswalkSpan> crosswalk_spans(const Path& path) const {
    std::vector<CrosswalkSpan> spans;
    for (std::size_t k = 0; k < kNumCrosswalks; ++k) {
      std::optional<double> enter, exit;
      for (double s = 0.0; s <= path.length(); s += kSampleStep) {
        const auto box = footprint(path.pose(s), cfg_.vehicle_length, cfg_.vehicle_width);
        if (overlaps(box, crosswalk_areas_[k])) {
          if (!enter) enter = s;
          exit = s;
        }
      }
      if (enter) spans.push_back({static_cast<Crosswalk>(k), *enter, *exit});
    }
    return spans;
  }

  std::optional<ConflictZone> conflict(const Path& self, const Path& other) const {
    std::optional<ConflictZone> zone;
    for (double s = 0.0; s <= self.length(); s += 2.0 * kSampleStep) {
      const auto a = footprint(self.pose(s), cfg_.vehicle_length, cfg_.vehicle_width);
      for (double o = 0.0; o <= other.length(); o += 2.0 * kSampleStep) {
        const auto b = footprint(other.pose(o), cfg_.vehicle_length, cfg_.vehicle_width);
        if (!overlaps(a, b)) continue;
        if (!zone) zone = ConflictZone{s, s, o, o};
        zone->self_enter = std::min(zone->self_enter, s);
        zone->self_exit = std::max(zone->self_exit, s);
        zone->other_enter = std::min(zone->other_enter, o);
        zone->other_exit = std::max(zone->other_exit, o);
      }
    }
    return zone;
  }

  ScenarioConfig cfg_;
  Path ego_path_;
  std::array<Path, kNumCarRoutes> car_paths_;
  std::array<Path, kNumPedestrianRoutes> pedestrian_paths_;
  std::array<OrientedBox, kNumCrosswalks> crosswalk_areas_{};
  double goal_position_ = 0.0;
  double ego_stop_position_ = 0.0;
  double car_stop_position_ = 0.0;
  double pedestrian_route_length_ = 0.0;
  std::vector<CrosswalkSpan> ego_crosswalks_;
  std::array<std::vector<CrosswalkSpan>, kNumCarRoutes> car_crosswalks_;
  std::array<std::optional<ConflictZone>, kNumCarRoutes> ego_vs_car_;
};

}  // namespace probshield
