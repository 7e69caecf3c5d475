#pragma once

#include <array>
#include <vector>

#include "deconflict/sim.hpp"

namespace deconflict {

inline constexpr int kObsDim = 4;
using FeatureVec = std::array<float, kObsDim>;

/// Normalized network input for one ownship.
///   ownship:  [dist to next waypoint / route length, speed / v_max,
///              heading / 2pi, speed delta / (accel * dt)]
///   intruder: [dist to ownship / sensing range, speed / own v_max,
///              heading / 2pi, speed delta / (own accel * dt)]
struct Observation {
  FeatureVec ownship{};
  std::vector<FeatureVec> intruders;
};

/// Seconds to reach the next bottleneck at current speed; +inf when the
/// speed is below 0.1 m/s or no bottleneck remains.
double eta_to_bottleneck(const AircraftState& agent, const ScenarioSpec& spec);

/// Front intruders: active aircraft within the ownship's sensing range that
/// share its next bottleneck and will reach it strictly earlier. Sorted by
/// distance, ties by agent id.
std::vector<const AircraftState*> sense_intruders(const AircraftState& ownship, const WorldState& world,
                                                  const ScenarioSpec& spec, const FleetConfig& own_config);

Observation build_observation(const AircraftState& ownship, const std::vector<const AircraftState*>& intruders,
                              const ScenarioSpec& spec, const FleetConfig& own_config);

/// Distance to the nearest other active aircraft within sensing range, in
/// any direction; +inf when none.
double nearest_aircraft_distance(const AircraftState& ownship, const WorldState& world, const ScenarioSpec& spec,
                                 const FleetConfig& own_config);

}  // namespace deconflict
