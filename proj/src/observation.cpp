#include "deconflict/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace deconflict {

namespace {
constexpr double kMinEtaSpeed = 0.1;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double eta_to_bottleneck(const AircraftState& agent, const ScenarioSpec& spec) {
  const auto& route = spec.routes[agent.route];
  auto bn = next_bottleneck(route, agent.arc);
  if (!bn || agent.speed < kMinEtaSpeed) return kInf;
  return (route.arc_at[*bn] - agent.arc) / agent.speed;
}

std::vector<const AircraftState*> sense_intruders(const AircraftState& ownship, const WorldState& world,
                                                  const ScenarioSpec& spec, const FleetConfig& own_config) {
  std::vector<const AircraftState*> out;
  const auto& own_route = spec.routes[ownship.route];
  auto own_bn = next_bottleneck(own_route, ownship.arc);
  if (!own_bn) return out;
  const size_t own_wp = own_route.waypoint_index[*own_bn];
  const double own_eta = eta_to_bottleneck(ownship, spec);
  const Vec2 own_pos = position_of(ownship, spec);

  std::vector<std::pair<double, const AircraftState*>> found;
  for (const auto& other : world.aircraft) {
    if (other.status != AgentStatus::kActive || other.agent_id == ownship.agent_id) continue;
    const double d = distance(own_pos, position_of(other, spec));
    if (d > own_config.sensing_range) continue;
    const auto& route = spec.routes[other.route];
    auto bn = next_bottleneck(route, other.arc);
    if (!bn || route.waypoint_index[*bn] != own_wp) continue;
    if (!(eta_to_bottleneck(other, spec) < own_eta)) continue;
    found.emplace_back(d, &other);
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second->agent_id < b.second->agent_id;
  });
  out.reserve(found.size());
  for (const auto& [d, a] : found) out.push_back(a);
  return out;
}

Observation build_observation(const AircraftState& ownship, const std::vector<const AircraftState*>& intruders,
                              const ScenarioSpec& spec, const FleetConfig& own_config) {
  constexpr double kTwoPi = 2 * std::numbers::pi;
  const auto& route = spec.routes[ownship.route];
  const Pose own = pose_of(ownship, spec);
  const double accel_scale = own_config.accel_mag * spec.dt;

  Observation obs;
  const Vec2 next_wp = route.points[next_waypoint(route, ownship.arc)];
  obs.ownship = {static_cast<float>(distance(own.position, next_wp) / route.length),
                 static_cast<float>(ownship.speed / own_config.v_max), static_cast<float>(own.bearing / kTwoPi),
                 static_cast<float>(ownship.last_speed_delta / accel_scale)};

  obs.intruders.reserve(intruders.size());
  for (const auto* in : intruders) {
    const Pose p = pose_of(*in, spec);
    obs.intruders.push_back({static_cast<float>(distance(own.position, p.position) / own_config.sensing_range),
                             static_cast<float>(in->speed / own_config.v_max), static_cast<float>(p.bearing / kTwoPi),
                             static_cast<float>(in->last_speed_delta / accel_scale)});
  }
  return obs;
}

double nearest_aircraft_distance(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                                 const FleetConfig& own_config) {
  const Vec2 own_pos = position_of(ownship, spec);
  double best = kInf;
  for (const auto& other : world.aircraft) {
    if (other.status != AgentStatus::kActive || other.agent_id == ownship.agent_id) continue;
    const double d = distance(own_pos, position_of(other, spec));
    if (d <= own_config.sensing_range) best = std::min(best, d);
  }
  return best;
}

}  // namespace deconflict
