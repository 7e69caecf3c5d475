#include "deconflict/runner.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "deconflict/baselines.hpp"
#include "json.hpp"

namespace deconflict {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw RunError(fmt::format("write to '{}' failed", path.string()));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RunError(fmt::format("cannot create output directory '{}': {}", dir, ec.message()));
}

std::string fleet_file(const char* stem, FleetId f, const char* ext) {
  return fmt::format("{}_{}.{}", stem, fleet_char(f), ext);
}

// Agents of each fleet in the scenario.
std::array<int, kNumFleets> fleet_sizes(const ScenarioSpec& spec) {
  std::array<int, kNumFleets> n{};
  for (const auto& r : spec.routes) n[static_cast<size_t>(fleet_index(r.owner_fleet))] += spec.agents_per_route;
  return n;
}

Controllers fixed_controllers(const RunSpec& run, const ScenarioSpec& spec) {
  Controllers ctl;
  for (size_t f = 0; f < kNumFleets; ++f) {
    ctl[f].kind = run.fleets[f].kind;
    ctl[f].config = spec.config(run.fleets[f].config);
  }
  return ctl;
}

}  // namespace

PolicySpec parse_policy(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw RunError(fmt::format("policy '{}' must look like <policy>:<config>, e.g. ppoa2c:X", text));
  const auto kind = text.substr(0, colon);
  PolicySpec p;
  p.config = std::string(text.substr(colon + 1));
  if (kind == "ppoa2c")
    p.kind = PolicyKind::kPpoa2c;
  else if (kind == "rulebased")
    p.kind = PolicyKind::kRuleBased;
  else if (kind == "random")
    p.kind = PolicyKind::kRandom;
  else
    throw RunError(fmt::format("unknown policy '{}' (expected ppoa2c, rulebased or random)", kind));
  if (p.config.empty()) throw RunError(fmt::format("policy '{}' has no configuration", text));
  return p;
}

std::string policy_label(const PolicySpec& p) { return fmt::format("{}({})", display_name(p.kind), p.config); }

std::string model_label(const RunSpec& run) {
  return policy_label(run.fleets[0]) + "+" + policy_label(run.fleets[1]);
}

ScenarioSpec load_run_scenario(const RunSpec& run) {
  ScenarioSpec spec = run.scenario_path.empty() ? reference_scenario() : load_scenario_file(run.scenario_path);
  for (const auto& p : run.fleets) spec.config(p.config);  // throws on an unknown configuration
  return spec;
}

std::string fixed_policy_json(const PolicySpec& policy, const ScenarioSpec& spec) {
  const auto& c = spec.config(policy.config);
  nlohmann::ordered_json j;
  j["policy"] = to_string(policy.kind);
  j["config"] = {{"id", c.id},
                 {"v_min", c.v_min},
                 {"v_max", c.v_max},
                 {"accel", c.accel_mag},
                 {"sensing_range", c.sensing_range},
                 {"spawn_speed", c.spawn_speed}};
  if (policy.kind == PolicyKind::kRuleBased) {
    j["rules"] = {{"eta_buffer", spec.rules.eta_buffer},
                  {"follow_gap", spec.rules.follow_gap},
                  {"cruise_speed", cruise_speed_for(spec.rules, c, spec.reward)}};
  }
  return j.dump(2) + "\n";
}

const char* train_log_header() { return "episode,fleet,mean_reward,policy_loss,value_loss,entropy,nmac,success\n"; }

std::string format_train_log_row(const TrainLogRow& r) {
  return fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{},{}\n", r.episode, fleet_char(r.fleet), r.mean_reward,
                     r.policy_loss, r.value_loss, r.entropy, r.nmac, r.success);
}

TrainResult cmd_train(const RunSpec& run, const TrainOptions& options) {
  ppo::validate(run.train);
  if (run.episodes <= 0) throw RunError("episodes must be positive");
  bool any_learned = false;
  for (const auto& p : run.fleets) any_learned |= p.kind == PolicyKind::kPpoa2c;
  if (!any_learned) throw RunError("train needs at least one ppoa2c fleet");
  if (run.out_dir.empty()) throw RunError("train needs an output directory (--out)");
  ensure_dir(run.out_dir);

  const ScenarioSpec spec = load_run_scenario(run);
  const auto sizes = fleet_sizes(spec);
  Controllers ctl = fixed_controllers(run, spec);

  std::array<std::optional<ppo::FleetLearner>, kNumFleets> learners;
  for (size_t f = 0; f < kNumFleets; ++f) {
    if (run.fleets[f].kind != PolicyKind::kPpoa2c) continue;
    const auto fleet = static_cast<FleetId>(f);
    learners[f].emplace(fleet, nn::init_network<float>(derive_seed(run.seed, {kStreamInit, f})), run.train,
                        derive_seed(run.seed, {kStreamShuffle, f}));
    ctl[f].net = &learners[f]->net();
    ctl[f].buffer = &learners[f]->buffer();
    ctl[f].greedy = false;
  }

  TrainResult result;
  std::string log = train_log_header();
  EpisodeOptions eo;
  eo.record_actions = options.record_actions;
  for (int ep = 0; ep < run.episodes; ++ep) {
    auto er = run_episode(spec, ctl, derive_seed(run.seed, {static_cast<uint64_t>(ep)}), eo);
    const auto& m = er.metrics;
    for (size_t f = 0; f < kNumFleets; ++f) {
      if (!learners[f]) continue;
      const auto ts = learners[f]->train();
      TrainLogRow row;
      row.episode = ep;
      row.fleet = static_cast<FleetId>(f);
      row.mean_reward = sizes[f] > 0 ? m.fleet_reward[f] / sizes[f] : 0.0;
      row.policy_loss = ts.policy_loss;
      row.value_loss = ts.value_loss;
      row.entropy = ts.entropy;
      row.nmac = m.fleet_nmac[f];
      row.success = m.fleet_success[f];
      log += format_train_log_row(row);
      result.log.push_back(row);
    }
    if (options.on_episode) options.on_episode(ep, m);
    if ((ep + 1) % 25 == 0 || ep + 1 == run.episodes)
      spdlog::info("episode {}/{}: success {} nmac {} steps {}", ep + 1, run.episodes, m.n_success, m.total_nmac(),
                   m.steps);
    result.episodes.push_back(m);
    if (options.record_actions) result.actions.push_back(std::move(er.actions));
  }

  const fs::path out(run.out_dir);
  write_file(out / "train_log.csv", log);
  for (size_t f = 0; f < kNumFleets; ++f) {
    const auto fleet = static_cast<FleetId>(f);
    if (learners[f]) {
      Checkpoint ck{fleet, run.seed, static_cast<uint64_t>(run.episodes), learners[f]->net()};
      save_checkpoint(ck, (out / fleet_file("checkpoint", fleet, "bin")).string());
      result.checkpoints[f] = std::move(ck);
    } else {
      write_file(out / fleet_file("fixed", fleet, "json"), fixed_policy_json(run.fleets[f], spec));
    }
  }
  return result;
}

EvalOutput cmd_evaluate(const RunSpec& run) {
  if (run.episodes <= 0) throw RunError("episodes must be positive");
  const ScenarioSpec spec = load_run_scenario(run);
  Controllers ctl = fixed_controllers(run, spec);

  std::array<std::optional<nn::PolicyNetwork<float>>, kNumFleets> nets;
  for (size_t f = 0; f < kNumFleets; ++f) {
    if (run.fleets[f].kind != PolicyKind::kPpoa2c) continue;
    if (run.checkpoints[f].empty())
      throw RunError(fmt::format("fleet {} is ppoa2c and needs a checkpoint (--checkpoint-{})",
                                 fleet_char(static_cast<FleetId>(f)), f == 0 ? 'a' : 'b'));
    auto ck = load_checkpoint(run.checkpoints[f]);
    if (ck.fleet != static_cast<FleetId>(f))
      spdlog::warn("checkpoint '{}' was trained for fleet {}, using it for fleet {}", run.checkpoints[f],
                   fleet_char(ck.fleet), fleet_char(static_cast<FleetId>(f)));
    nets[f] = std::move(ck.net);
    ctl[f].net = &*nets[f];
    ctl[f].greedy = run.greedy;
  }

  EpisodeOptions eo;
  eo.record_trajectory = run.trajectories;
  auto results = run_episodes(spec, ctl, run.seed, run.episodes, eo);

  EvalOutput out;
  for (const auto& r : results) out.episodes.push_back(r.metrics);
  out.report = aggregate(out.episodes, model_label(run));

  if (!run.out_dir.empty()) {
    ensure_dir(run.out_dir);
    const fs::path dir(run.out_dir);
    write_file(dir / "report.json", to_json(out.report).dump(2) + "\n");
    write_file(dir / "report.csv", to_csv(out.report));
    if (run.trajectories) {
      std::string csv = std::string("episode,") + trajectory_csv_header();
      for (size_t e = 0; e < results.size(); ++e) {
        std::istringstream rows(results[e].trajectory_csv);
        std::string line;
        while (std::getline(rows, line)) csv += fmt::format("{},{}\n", e, line);
      }
      write_file(dir / "trajectories.csv", csv);
    }
  }
  return out;
}

ReportOutput cmd_report(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw RunError("report needs at least one run directory");
  ReportOutput out;
  for (const auto& dir : run_dirs) {
    const fs::path path = fs::path(dir) / "report.json";
    try {
      std::ifstream in(path);
      if (!in) throw RunError("missing report.json");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw RunError(fmt::format("malformed report.json: {}", e.what()));
      }
      out.reports.push_back(report_from_json(j));
    } catch (const std::exception& e) {
      out.errors.push_back(fmt::format("{}: {}", dir, e.what()));
    }
  }
  if (out.reports.empty()) throw RunError("no readable run directory");
  out.table = comparison_table(out.reports);
  return out;
}

}  // namespace deconflict
