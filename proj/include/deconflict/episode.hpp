#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "deconflict/metrics.hpp"
#include "deconflict/nn.hpp"
#include "deconflict/ppo.hpp"

namespace deconflict {

enum class PolicyKind { kPpoa2c, kRuleBased, kRandom, kReplay };

const char* to_string(PolicyKind k);
/// Display name as used in model labels: PPOA2C, Rule-based, Random.
const char* display_name(PolicyKind k);

/// Recorded actions, indexed [step][agent_id]; -1 where the agent did not act.
using ActionLog = std::vector<std::vector<int>>;

/// How one fleet picks its actions during an episode.
struct FleetController {
  PolicyKind kind = PolicyKind::kRandom;
  FleetConfig config;
  const nn::PolicyNetwork<float>* net = nullptr;  // kPpoa2c
  bool greedy = false;                            // argmax instead of sampling
  ppo::FleetBuffer* buffer = nullptr;             // record transitions when set
  const ActionLog* replay = nullptr;              // kReplay
};

using Controllers = std::array<FleetController, kNumFleets>;

struct EpisodeResult {
  EpisodeMetrics metrics;
  ActionLog actions;
  std::string trajectory_csv;  // rows only, see trajectory_csv_header()
};

struct EpisodeOptions {
  bool record_actions = false;
  bool record_trajectory = false;
};

const char* trajectory_csv_header();

/// Runs one episode to completion. All randomness (spawn times, sampled
/// actions) derives from episode_seed, so the result is a pure function of
/// (scenario, controllers, seed).
EpisodeResult run_episode(const ScenarioSpec& spec, const Controllers& controllers, uint64_t episode_seed,
                          const EpisodeOptions& options = {});

/// Evaluates `episodes` episodes concurrently (OpenMP), with seeds
/// derive_seed(seed, {episode}). Results are in episode order.
std::vector<EpisodeResult> run_episodes(const ScenarioSpec& spec, const Controllers& controllers, uint64_t seed,
                                        int episodes, const EpisodeOptions& options = {});

/// Single-threaded reference of run_episodes.
std::vector<EpisodeResult> run_episodes_serial(const ScenarioSpec& spec, const Controllers& controllers,
                                               uint64_t seed, int episodes, const EpisodeOptions& options = {});

}  // namespace deconflict
