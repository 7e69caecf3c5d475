#pragma once

#include <vector>

#include "deconflict/observation.hpp"
#include "deconflict/rng.hpp"
#include "deconflict/sim.hpp"

namespace deconflict {

/// Cruise speed the rule-based controller settles at for a fleet.
double cruise_speed_for(const RuleParams& params, const FleetConfig& config, const RewardWeights& weights);

/// Nearest aircraft behind the ownship on the same corridor (same next
/// waypoint, farther from it) within `max_gap` meters; nullptr if none.
const AircraftState* nearest_follower(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                                      double max_gap);

/// Active aircraft within sensing range whose next bottleneck is the
/// ownship's and that are ahead of it, by ETA or by distance to that
/// bottleneck. Nearest first.
std::vector<const AircraftState*> front_aircraft(const AircraftState& ownship, const WorldState& world,
                                                 const ScenarioSpec& spec, const FleetConfig& own_config);

/// Enhanced rule-based speed controller:
///  1. looks at front aircraft converging on the ownship's next bottleneck
///     from any route, nearest first;
///  2. if one arrives less than eta_buffer seconds ahead, decelerates, or
///     holds when the ownship is itself closer to the bottleneck;
///  3. otherwise tracks the cruise speed, but never slows down onto a close
///     follower on the same corridor.
Action rule_based_action(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                         const FleetConfig& own_config, const RuleParams& params);

/// Uniform over {DECEL, HOLD, ACCEL}.
Action random_action(Rng& rng);

}  // namespace deconflict
