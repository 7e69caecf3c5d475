#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconflict/sim.hpp"

namespace deconflict {

enum class PairCategory { kAA = 0, kAB = 1, kBB = 2 };
enum class BottleneckCategory { kM1 = 0, kM2 = 1, kIN = 2 };

const char* to_string(PairCategory c);
const char* to_string(BottleneckCategory c);

struct NmacClass {
  PairCategory pair;
  BottleneckCategory bottleneck;
};

/// Pair category from the fleets involved. Bottleneck category from the
/// bottleneck both aircraft were heading to, else the bottleneck waypoint
/// nearest to the NMAC midpoint. M1 is the merge of route I, M2 the merge of
/// route III, IN the intersection.
NmacClass classify_nmac(const ConflictEvent& event, const WorldState& world, const ScenarioSpec& spec);

struct EpisodeMetrics {
  int n_success = 0;
  std::array<int, 3> nmac_by_pair{};
  std::array<int, 3> nmac_by_bottleneck{};
  std::array<double, kNumFleets> fleet_reward{};
  std::array<std::vector<double>, kNumFleets> mission_times;  // seconds, successful agents
  std::array<int, kNumFleets> fleet_success{};
  std::array<int, kNumFleets> fleet_nmac{};  // NMAC events involving the fleet
  int steps = 0;

  int total_nmac() const { return nmac_by_pair[0] + nmac_by_pair[1] + nmac_by_pair[2]; }
  double total_reward() const { return fleet_reward[0] + fleet_reward[1]; }
};

/// Time-based fairness in percent: 100 (1 - |t1 - t2| / max(t1, t2)).
/// Throws std::invalid_argument unless both times are positive.
double fairness(double t1, double t2);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation across episodes
};

inline constexpr const char* kReportSchema = "deconflict-eval/1";

struct EvalReport {
  std::string model;
  int episodes = 0;
  std::array<MeanSd, 3> nmac_by_pair{};
  std::array<MeanSd, 3> nmac_by_bottleneck{};
  MeanSd nmac_total;
  MeanSd n_success;
  MeanSd reward;  // total reward of both fleets per episode
  std::array<MeanSd, kNumFleets> fleet_reward{};
  MeanSd steps;
  std::optional<double> mission_time_a;  // minutes, over successful agents
  std::optional<double> mission_time_b;
  std::optional<double> fairness;        // percent
};

/// Means and sample standard deviations over the episodes. Throws
/// std::invalid_argument on an empty list.
EvalReport aggregate(std::span<const EpisodeMetrics> episodes, std::string model = {});

nlohmann::ordered_json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

/// Column names of the single-row CSV form.
const std::vector<std::string>& report_csv_columns();
std::string to_csv(const EvalReport& r);

/// Table with one column per model and one row per metric
/// (AA, AB, BB, M1, M2, IN, Total, N_s, N_s_sd, R, T_A, T_B, F_t).
std::string comparison_table(std::span<const EvalReport> reports);

}  // namespace deconflict
