#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "deconflict/checkpoint.hpp"
#include "deconflict/episode.hpp"
#include "deconflict/ppo.hpp"

namespace deconflict {

/// Invalid command-line level input (policy strings, missing paths).
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::kRandom;
  std::string config = "X";

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

/// Parses "<policy>:<config>", e.g. "ppoa2c:X" or "rulebased:Y".
PolicySpec parse_policy(std::string_view text);
/// "PPOA2C(X)"
std::string policy_label(const PolicySpec& p);

struct RunSpec {
  std::string scenario_path;  // empty: built-in reference scenario
  std::array<PolicySpec, kNumFleets> fleets;
  int episodes = 400;
  uint64_t seed = 0;
  std::string out_dir;
  std::array<std::string, kNumFleets> checkpoints;  // evaluation only
  bool trajectories = false;
  bool greedy = true;
  ppo::TrainConfig train;
};

/// "PPOA2C(X)+Rule-based(Y)"
std::string model_label(const RunSpec& run);

ScenarioSpec load_run_scenario(const RunSpec& run);

/// Per-fleet JSON description of a fixed policy (kind, fleet config and, for
/// rule-based fleets, the rule thresholds).
std::string fixed_policy_json(const PolicySpec& policy, const ScenarioSpec& spec);

struct TrainLogRow {
  int episode = 0;
  FleetId fleet = FleetId::kA;
  double mean_reward = 0.0;  // per agent of the fleet
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int nmac = 0;
  int success = 0;
};

const char* train_log_header();
std::string format_train_log_row(const TrainLogRow& row);

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::vector<EpisodeMetrics> episodes;  // one per training episode
  std::array<std::optional<Checkpoint>, kNumFleets> checkpoints;
  std::vector<ActionLog> actions;  // when TrainOptions::record_actions
};

struct TrainOptions {
  /// Keep the per-step action log of every training episode.
  bool record_actions = false;
  /// Called after each episode with its index and metrics.
  std::function<void(int, const EpisodeMetrics&)> on_episode;
};

/// Trains every ppoa2c fleet independently, one PPO update per fleet after
/// each episode. Writes train_log.csv, one checkpoint_<fleet>.bin per
/// learned fleet and fixed_<fleet>.json per fixed fleet into run.out_dir,
/// which is required.
TrainResult cmd_train(const RunSpec& run, const TrainOptions& options = {});

struct EvalOutput {
  EvalReport report;
  std::vector<EpisodeMetrics> episodes;
};

/// Greedy (unless run.greedy is false) evaluation without parameter updates.
/// When run.out_dir is set, writes report.json, report.csv and, with
/// run.trajectories, trajectories.csv.
EvalOutput cmd_evaluate(const RunSpec& run);

struct ReportOutput {
  std::string table;
  std::vector<EvalReport> reports;
  std::vector<std::string> errors;  // one per directory that could not be read
};

/// Merges report.json from each run directory. Directories that fail to load
/// are listed in `errors`; the rest are still merged. Throws RunError when no
/// directory could be read.
ReportOutput cmd_report(const std::vector<std::string>& run_dirs);

}  // namespace deconflict
