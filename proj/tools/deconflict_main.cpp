// Command-line driver: train, evaluate and report.
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "deconflict/runner.hpp"

using namespace deconflict;

namespace {

struct CommonArgs {
  std::string scenario;
  std::string fleet_a = "rulebased:X";
  std::string fleet_b = "rulebased:X";
  int episodes = 0;
  uint64_t seed = 0;
  int seed_count = 1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a, int default_episodes) {
  a.episodes = default_episodes;
  cmd->add_option("--scenario", a.scenario, "Scenario file (default: built-in reference)");
  cmd->add_option("--fleet-a", a.fleet_a, "Fleet A policy, <ppoa2c|rulebased|random>:<config>")->capture_default_str();
  cmd->add_option("--fleet-b", a.fleet_b, "Fleet B policy")->capture_default_str();
  cmd->add_option("--episodes", a.episodes, "Number of episodes")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Base seed")->capture_default_str();
  cmd->add_option("--seed-count", a.seed_count, "Repeat for seeds seed..seed+n-1, each into <out>/seed_<s>")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", a.out, "Output directory");
}

RunSpec make_run(const CommonArgs& a) {
  RunSpec run;
  run.scenario_path = a.scenario;
  run.fleets = {parse_policy(a.fleet_a), parse_policy(a.fleet_b)};
  run.episodes = a.episodes;
  run.seed = a.seed;
  run.out_dir = a.out;
  return run;
}

// Runs fn once per seed of the sweep.
template <typename Fn>
void for_each_seed(RunSpec run, int count, Fn fn) {
  const uint64_t base = run.seed;
  const std::string out = run.out_dir;
  for (int i = 0; i < count; ++i) {
    run.seed = base + static_cast<uint64_t>(i);
    if (count > 1 && !out.empty()) run.out_dir = (std::filesystem::path(out) / fmt::format("seed_{}", run.seed)).string();
    fn(run);
  }
}

void print_summary(const EvalReport& r) {
  fmt::print("{}: N_s {:.2f} +- {:.2f}, NMAC {:.2f}, reward {:.2f}, steps {:.1f}\n", r.model, r.n_success.mean,
             r.n_success.sd, r.nmac_total.mean, r.reward.mean, r.steps.mean);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-fleet UAM speed-control deconfliction: training and evaluation"};
  app.require_subcommand(1);

  CommonArgs train_args;
  double lr = 1e-4;
  int epochs = 8;
  int batch = 512;
  auto* train = app.add_subcommand("train", "Train ppoa2c fleets and write checkpoints");
  add_common(train, train_args, 400);
  train->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
  train->add_option("--epochs", epochs, "PPO epochs per episode")->capture_default_str();
  train->add_option("--batch", batch, "Minibatch size")->capture_default_str();

  CommonArgs eval_args;
  std::string ckpt_a, ckpt_b;
  bool trajectories = false;
  bool sample = false;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy combination");
  add_common(evaluate, eval_args, 100);
  evaluate->add_option("--checkpoint-a", ckpt_a, "Checkpoint for a ppoa2c fleet A");
  evaluate->add_option("--checkpoint-b", ckpt_b, "Checkpoint for a ppoa2c fleet B");
  evaluate->add_flag("--trajectories", trajectories, "Write trajectories.csv");
  auto* greedy_flag = evaluate->add_flag("--greedy", "Argmax actions for ppoa2c fleets (default)");
  evaluate->add_flag("--sample", sample, "Sample actions for ppoa2c fleets")->excludes(greedy_flag);

  std::vector<std::string> dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Merge evaluation reports into one comparison table");
  report->add_option("dirs", dirs, "Evaluation output directories")->required();
  report->add_option("--out", report_out, "Write the table to this CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      RunSpec run = make_run(train_args);
      run.train.learning_rate = lr;
      run.train.epochs_per_episode = epochs;
      run.train.batch_size = batch;
      for_each_seed(run, train_args.seed_count, [](const RunSpec& r) {
        spdlog::info("training {} seed {} for {} episodes", model_label(r), r.seed, r.episodes);
        cmd_train(r);
        spdlog::info("wrote {}", r.out_dir);
      });
    } else if (*evaluate) {
      RunSpec run = make_run(eval_args);
      run.checkpoints = {ckpt_a, ckpt_b};
      run.trajectories = trajectories;
      run.greedy = !sample;
      for_each_seed(run, eval_args.seed_count, [](const RunSpec& r) { print_summary(cmd_evaluate(r).report); });
    } else if (*report) {
      auto out = cmd_report(dirs);
      for (const auto& e : out.errors) spdlog::error("{}", e);
      if (report_out.empty()) {
        std::cout << out.table;
      } else {
        std::ofstream f(report_out, std::ios::binary);
        f << out.table;
        if (!f) throw RunError(fmt::format("cannot write '{}'", report_out));
      }
      return out.errors.empty() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
