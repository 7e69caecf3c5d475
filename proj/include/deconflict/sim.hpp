#pragma once

#include <array>
#include <span>
#include <vector>

#include "deconflict/reward.hpp"
#include "deconflict/scenario.hpp"

namespace deconflict {

enum class AgentStatus { kPending, kActive, kDoneSuccess, kDoneNmac, kDoneTimeout };

inline bool is_done(AgentStatus s) {
  return s == AgentStatus::kDoneSuccess || s == AgentStatus::kDoneNmac || s == AgentStatus::kDoneTimeout;
}

struct AircraftState {
  int agent_id = 0;
  FleetId fleet = FleetId::kA;
  size_t route = 0;  // index into ScenarioSpec::routes
  double arc = 0.0;
  double prev_arc = 0.0;  // arc at the start of the last kinematic step
  double speed = 0.0;
  Action prev_action = Action::kHold;
  double last_speed_delta = 0.0;
  double spawn_time = 0.0;
  bool spawn_deferred = false;  // origin was occupied at the scheduled spawn
  bool spawned_in_step = false;  // became active during the last kinematic step
  AgentStatus status = AgentStatus::kPending;
};

struct WorldState {
  double sim_time = 0.0;
  int step_index = 0;
  std::vector<AircraftState> aircraft;  // indexed by agent_id
};

enum class EventKind { kNmac, kGoal, kTimeout };

struct ConflictEvent {
  EventKind kind = EventKind::kNmac;
  int agent_a = -1;
  int agent_b = -1;  // NMAC only
  double sim_time = 0.0;
  Vec2 midpoint;            // NMAC only
  double separation = 0.0;  // NMAC only: minimum separation within the step
};

/// Configuration assigned to each fleet for a run.
using FleetConfigs = std::array<FleetConfig, kNumFleets>;

inline constexpr int kMaxEpisodeSteps = 500;

/// Fresh world with every agent pending at its spawn time.
WorldState make_world(const ScenarioSpec& spec, std::span<const double> spawn_times);

Vec2 position_of(const AircraftState& a, const ScenarioSpec& spec);
Pose pose_of(const AircraftState& a, const ScenarioSpec& spec);

/// Speed change of +-accel_mag*dt clamped to [v_min, v_max].
AircraftState apply_action(AircraftState agent, Action action, const FleetConfig& config, double dt);

/// Advances time by dt: moves active agents along their routes (held at the
/// route end) and activates pending agents whose spawn time has come.
/// A spawning agent is placed where it would be had it flown since its spawn
/// time; if another aircraft sits within d_nmac of that spot the spawn is
/// deferred and retried at arc 0 on later steps.
void advance_kinematics(WorldState& world, const ScenarioSpec& spec, const FleetConfigs& configs);

/// Closest approach of two agents over the last step, assuming straight-line
/// motion between the step-boundary positions. Returns (distance, midpoint).
std::pair<double, Vec2> closest_approach(const AircraftState& a, const AircraftState& b, const ScenarioSpec& spec);

/// Emits NMAC, GOAL and TIMEOUT events and retires the affected agents.
/// NMAC takes precedence over GOAL over TIMEOUT.
std::vector<ConflictEvent> detect_events(WorldState& world, const ScenarioSpec& spec);

bool is_episode_done(const WorldState& world);

/// Marks every remaining pending/active agent done_timeout (hard step cap).
std::vector<ConflictEvent> truncate_episode(WorldState& world);

}  // namespace deconflict
