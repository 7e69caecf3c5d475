#include "deconflict/sim.hpp"

#include <algorithm>
#include <cmath>

namespace deconflict {

WorldState make_world(const ScenarioSpec& spec, std::span<const double> spawn_times) {
  WorldState w;
  w.aircraft.resize(static_cast<size_t>(spec.total_agents()));
  for (size_t i = 0; i < w.aircraft.size(); ++i) {
    auto& a = w.aircraft[i];
    a.agent_id = static_cast<int>(i);
    a.route = spec.route_of_agent(a.agent_id);
    a.fleet = spec.routes[a.route].owner_fleet;
    a.spawn_time = spawn_times[i];
  }
  return w;
}

Vec2 position_of(const AircraftState& a, const ScenarioSpec& spec) {
  return position_on_route(spec.routes[a.route], a.arc).position;
}

Pose pose_of(const AircraftState& a, const ScenarioSpec& spec) { return position_on_route(spec.routes[a.route], a.arc); }

AircraftState apply_action(AircraftState agent, Action action, const FleetConfig& config, double dt) {
  const double sign = action == Action::kAccel ? 1.0 : action == Action::kDecel ? -1.0 : 0.0;
  const double before = agent.speed;
  agent.speed = std::clamp(before + sign * config.accel_mag * dt, config.v_min, config.v_max);
  agent.last_speed_delta = agent.speed - before;
  agent.prev_action = action;
  return agent;
}

void advance_kinematics(WorldState& world, const ScenarioSpec& spec, const FleetConfigs& configs) {
  world.step_index += 1;
  world.sim_time = world.step_index * spec.dt;

  for (auto& a : world.aircraft) {
    a.spawned_in_step = false;
    if (a.status != AgentStatus::kActive) continue;
    a.prev_arc = a.arc;
    a.arc = std::min(a.arc + a.speed * spec.dt, spec.routes[a.route].length);
  }

  for (auto& a : world.aircraft) {
    if (a.status != AgentStatus::kPending || a.spawn_time > world.sim_time) continue;
    const auto& cfg = configs[fleet_index(a.fleet)];
    const auto& route = spec.routes[a.route];
    const double arc =
        a.spawn_deferred ? 0.0 : std::min(cfg.spawn_speed * (world.sim_time - a.spawn_time), route.length);
    const Vec2 at = position_on_route(route, arc).position;
    bool clear = true;
    for (const auto& b : world.aircraft) {
      if (b.status == AgentStatus::kActive && distance(position_of(b, spec), at) < spec.d_nmac) {
        clear = false;
        break;
      }
    }
    if (!clear) {
      a.spawn_deferred = true;
      continue;
    }
    if (a.spawn_deferred) a.spawn_time = world.sim_time;
    a.status = AgentStatus::kActive;
    a.arc = arc;
    a.prev_arc = arc;
    a.spawned_in_step = true;
    a.speed = cfg.spawn_speed;
    a.prev_action = Action::kHold;
    a.last_speed_delta = 0.0;
  }
}

std::pair<double, Vec2> closest_approach(const AircraftState& a, const AircraftState& b, const ScenarioSpec& spec) {
  const auto& ra = spec.routes[a.route];
  const auto& rb = spec.routes[b.route];
  const Vec2 a1 = position_on_route(ra, a.arc).position;
  const Vec2 b1 = position_on_route(rb, b.arc).position;
  // A fresh spawn did not exist at the start of the step.
  if (a.spawned_in_step || b.spawned_in_step) return {distance(a1, b1), 0.5 * (a1 + b1)};
  const Vec2 a0 = position_on_route(ra, a.prev_arc).position;
  const Vec2 b0 = position_on_route(rb, b.prev_arc).position;
  const Vec2 d0 = a0 - b0;
  const Vec2 dv = (a1 - a0) - (b1 - b0);
  const double vv = dv.x * dv.x + dv.y * dv.y;
  double tau = 1.0;
  if (vv > 0) tau = std::clamp(-(d0.x * dv.x + d0.y * dv.y) / vv, 0.0, 1.0);
  // Never report more than the end-of-step separation.
  const double end_sep = distance(a1, b1);
  const double sweep_sep = norm(d0 + tau * dv);
  if (end_sep <= sweep_sep) return {end_sep, 0.5 * (a1 + b1)};
  const Vec2 pa = a0 + tau * (a1 - a0);
  const Vec2 pb = b0 + tau * (b1 - b0);
  return {sweep_sep, 0.5 * (pa + pb)};
}

std::vector<ConflictEvent> detect_events(WorldState& world, const ScenarioSpec& spec) {
  std::vector<ConflictEvent> events;
  auto& ac = world.aircraft;

  std::vector<int> active;
  for (const auto& a : ac)
    if (a.status == AgentStatus::kActive) active.push_back(a.agent_id);

  std::vector<bool> collided(ac.size(), false);
  for (size_t i = 0; i < active.size(); ++i) {
    for (size_t j = i + 1; j < active.size(); ++j) {
      const auto& a = ac[static_cast<size_t>(active[i])];
      const auto& b = ac[static_cast<size_t>(active[j])];
      auto [sep, mid] = closest_approach(a, b, spec);
      if (sep < spec.d_nmac) {
        events.push_back({EventKind::kNmac, a.agent_id, b.agent_id, world.sim_time, mid, sep});
        collided[static_cast<size_t>(a.agent_id)] = true;
        collided[static_cast<size_t>(b.agent_id)] = true;
      }
    }
  }
  for (int id : active)
    if (collided[static_cast<size_t>(id)]) ac[static_cast<size_t>(id)].status = AgentStatus::kDoneNmac;

  for (int id : active) {
    auto& a = ac[static_cast<size_t>(id)];
    if (a.status != AgentStatus::kActive) continue;
    const auto& route = spec.routes[a.route];
    // A route end outside the tolerance only happens in modified scenarios.
    if (distance(position_of(a, spec), route.destination()) < spec.goal_tolerance || a.arc >= route.length) {
      a.status = AgentStatus::kDoneSuccess;
      events.push_back({EventKind::kGoal, id, -1, world.sim_time, {}, 0.0});
    }
  }
  for (int id : active) {
    auto& a = ac[static_cast<size_t>(id)];
    if (a.status != AgentStatus::kActive) continue;
    if (world.sim_time - a.spawn_time >= spec.mission_horizon) {
      a.status = AgentStatus::kDoneTimeout;
      events.push_back({EventKind::kTimeout, id, -1, world.sim_time, {}, 0.0});
    }
  }
  return events;
}

bool is_episode_done(const WorldState& world) {
  if (world.step_index >= kMaxEpisodeSteps) return true;
  return std::none_of(world.aircraft.begin(), world.aircraft.end(), [](const AircraftState& a) {
    return a.status == AgentStatus::kPending || a.status == AgentStatus::kActive;
  });
}

std::vector<ConflictEvent> truncate_episode(WorldState& world) {
  std::vector<ConflictEvent> events;
  for (auto& a : world.aircraft) {
    if (a.status == AgentStatus::kPending || a.status == AgentStatus::kActive) {
      a.status = AgentStatus::kDoneTimeout;
      events.push_back({EventKind::kTimeout, a.agent_id, -1, world.sim_time, {}, 0.0});
    }
  }
  return events;
}

}  // namespace deconflict
