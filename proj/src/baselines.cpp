#include "deconflict/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace deconflict {

double cruise_speed_for(const RuleParams& params, const FleetConfig& config, const RewardWeights& weights) {
  if (params.cruise_speed > 0) return std::min(params.cruise_speed, config.v_max);
  return config.v_max - weights.eta2_v - 1.0;
}

const AircraftState* nearest_follower(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                                      double max_gap) {
  const auto& route = spec.routes[ownship.route];
  const size_t next = next_waypoint(route, ownship.arc);
  const size_t next_id = route.waypoint_index[next];
  const double own_to_next = route.arc_at[next] - ownship.arc;
  const Vec2 own_pos = position_of(ownship, spec);

  const AircraftState* best = nullptr;
  double best_gap = max_gap;
  for (const auto& other : world.aircraft) {
    if (other.status != AgentStatus::kActive || other.agent_id == ownship.agent_id) continue;
    const auto& r = spec.routes[other.route];
    const size_t n = next_waypoint(r, other.arc);
    if (r.waypoint_index[n] != next_id) continue;
    // Same segment into the same waypoint: the corridors have merged.
    if (n == 0 || r.waypoint_index[n - 1] != route.waypoint_index[next - 1]) continue;
    if (r.arc_at[n] - other.arc <= own_to_next) continue;
    const double gap = distance(own_pos, position_of(other, spec));
    if (gap <= best_gap) {
      best_gap = gap;
      best = &other;
    }
  }
  return best;
}

std::vector<const AircraftState*> front_aircraft(const AircraftState& ownship, const WorldState& world,
                                                 const ScenarioSpec& spec, const FleetConfig& own_config) {
  std::vector<const AircraftState*> out;
  const auto& route = spec.routes[ownship.route];
  const auto own_bn = next_bottleneck(route, ownship.arc);
  if (!own_bn) return out;
  const size_t own_wp = route.waypoint_index[*own_bn];
  const double own_eta = eta_to_bottleneck(ownship, spec);
  const double own_dist = route.arc_at[*own_bn] - ownship.arc;
  const Vec2 own_pos = position_of(ownship, spec);

  std::vector<std::pair<double, const AircraftState*>> found;
  for (const auto& other : world.aircraft) {
    if (other.status != AgentStatus::kActive || other.agent_id == ownship.agent_id) continue;
    const double d = distance(own_pos, position_of(other, spec));
    if (d > own_config.sensing_range) continue;
    const auto& r = spec.routes[other.route];
    const auto bn = next_bottleneck(r, other.arc);
    if (!bn || r.waypoint_index[*bn] != own_wp) continue;
    const double dist = r.arc_at[*bn] - other.arc;
    const double eta = eta_to_bottleneck(other, spec);
    // Exact ties (symmetric routes) go to the lower agent id.
    const bool tie = eta == own_eta && std::abs(dist - own_dist) < 1e-6 && other.agent_id < ownship.agent_id;
    if (eta < own_eta || dist < own_dist || tie) found.emplace_back(d, &other);
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second->agent_id < b.second->agent_id;
  });
  for (const auto& [d, a] : found) out.push_back(a);
  return out;
}

Action rule_based_action(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                         const FleetConfig& own_config, const RuleParams& params) {
  const auto& route = spec.routes[ownship.route];
  const double own_eta = eta_to_bottleneck(ownship, spec);

  for (const auto* front : front_aircraft(ownship, world, spec, own_config)) {
    if (own_eta - eta_to_bottleneck(*front, spec) >= params.eta_buffer) continue;
    const double own_dist = route.arc_at[*next_bottleneck(route, ownship.arc)] - ownship.arc;
    const auto& fr = spec.routes[front->route];
    const double front_dist = fr.arc_at[*next_bottleneck(fr, front->arc)] - front->arc;
    return own_dist < front_dist ? Action::kHold : Action::kDecel;
  }

  const double cruise = cruise_speed_for(params, own_config, spec.reward);
  const double half_step = 0.5 * own_config.accel_mag * spec.dt;
  if (ownship.speed < cruise - half_step) return Action::kAccel;
  if (ownship.speed > cruise + half_step) {
    if (nearest_follower(ownship, world, spec, params.follow_gap) != nullptr) return Action::kHold;
    return Action::kDecel;
  }
  return Action::kHold;
}

Action random_action(Rng& rng) { return static_cast<Action>(uniform_index(rng, kNumActions)); }

}  // namespace deconflict
