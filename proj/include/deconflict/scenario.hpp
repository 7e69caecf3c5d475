#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "deconflict/reward.hpp"
#include "deconflict/rng.hpp"

namespace deconflict {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

enum class WaypointKind { kOrigin, kMerge, kIntersection, kDestination };

inline bool is_bottleneck(WaypointKind k) {
  return k == WaypointKind::kMerge || k == WaypointKind::kIntersection;
}

struct Waypoint {
  std::string id;
  Vec2 position;
  WaypointKind kind = WaypointKind::kOrigin;
};

enum class FleetId : uint8_t { kA = 0, kB = 1 };
inline constexpr int kNumFleets = 2;

inline char fleet_char(FleetId f) { return f == FleetId::kA ? 'A' : 'B'; }
inline int fleet_index(FleetId f) { return static_cast<int>(f); }

/// A route is a polyline through scenario waypoints. The geometry is copied
/// in so position queries need no back-reference to the scenario.
struct Route {
  std::string id;
  std::vector<std::string> waypoint_ids;
  FleetId owner_fleet = FleetId::kA;
  double length = 0.0;

  // Per waypoint on the route: index into ScenarioSpec::waypoints, its
  // position, kind and arc length from the origin.
  std::vector<size_t> waypoint_index;
  std::vector<Vec2> points;
  std::vector<WaypointKind> kinds;
  std::vector<double> arc_at;

  Vec2 destination() const { return points.back(); }
};

/// Vehicle capability profile (configuration X or Y).
struct FleetConfig {
  std::string id;
  double v_min = 0.0;
  double v_max = 0.0;
  double accel_mag = 0.0;
  double sensing_range = 0.0;
  double spawn_speed = 20.0;
};

/// Thresholds of the rule-based controller. A non-positive cruise speed means
/// "derive from the fleet: v_max - eta2_v - 1".
struct RuleParams {
  double eta_buffer = 15.0;
  double follow_gap = 600.0;
  double cruise_speed = 0.0;
};

struct ScenarioSpec {
  std::vector<Waypoint> waypoints;
  std::vector<Route> routes;
  std::vector<FleetConfig> configs;

  int agents_per_route = 5;
  double spawn_base = 35.0;
  double spawn_step = 5.0;
  int spawn_k_max = 10;
  double dt = 3.0;
  double mission_horizon = 1080.0;
  double d_nmac = 100.0;
  double d_lowc = 500.0;
  double goal_tolerance = 50.0;

  RewardWeights reward;
  RuleParams rules;

  int total_agents() const { return agents_per_route * static_cast<int>(routes.size()); }
  /// Agents are numbered route-major: route r owns ids [r*n, (r+1)*n).
  size_t route_of_agent(int agent_id) const { return static_cast<size_t>(agent_id / agents_per_route); }

  const FleetConfig& config(std::string_view id) const;
  const Waypoint& waypoint(std::string_view id) const;
  std::optional<size_t> find_waypoint(std::string_view id) const;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a scenario document. Grammar: '#' comments, section
/// headers [waypoints] [routes] [fleets] [params], and 'key = value' lines.
///   [waypoints]  WP1 = -6400, 1800, origin
///   [routes]     I = A: WP1 WP3 WP9 WP4
///   [fleets]     X.v_max = 44.88   (v_min, v_max, accel, sensing_range, spawn_speed)
///   [params]     d_nmac = 100, reward.alpha = 0.1, rule.eta_buffer = 15, ...
/// Throws ScenarioError with the line number or the violated invariant.
ScenarioSpec load_scenario(std::string_view text);
ScenarioSpec load_scenario_file(const std::string& path);

/// The built-in reference scenario; identical to scenarios/reference.scn.
std::string_view reference_scenario_text();
const ScenarioSpec& reference_scenario();

/// Throws ScenarioError naming the first violated invariant.
void validate(const ScenarioSpec& spec);

struct Pose {
  Vec2 position;
  double bearing = 0.0;  // radians in [0, 2*pi), measured from +x counter-clockwise
};

Pose position_on_route(const Route& route, double arc);

/// Index (into route.points) of the first merge/intersection strictly ahead
/// of arc, if any.
std::optional<size_t> next_bottleneck(const Route& route, double arc);

/// Index (into route.points) of the next waypoint strictly ahead of arc; the
/// destination once arc has reached it.
size_t next_waypoint(const Route& route, double arc);

double spawn_time_for(const ScenarioSpec& spec, int k);

/// One spawn time per agent, k drawn independently and uniformly from
/// {0..spawn_k_max}.
std::vector<double> sample_spawn_times(const ScenarioSpec& spec, Rng& rng);

}  // namespace deconflict
