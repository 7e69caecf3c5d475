#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include "deconflict/episode.hpp"
#include "deconflict/ppo.hpp"

using namespace deconflict;

namespace {

struct LossFixture {
  nn::PolicyNetwork<float> net = nn::init_network<float>(1);
  std::vector<ppo::Transition> transitions;
  std::vector<ppo::Sample> batch;

  explicit LossFixture(size_t n) : transitions(n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    std::normal_distribution<double> n01;
    for (auto& t : transitions) {
      for (auto& x : t.obs.ownship) x = u(rng);
      for (size_t i = rng() % 5; i > 0; --i) t.obs.intruders.push_back({u(rng), u(rng), u(rng), u(rng)});
      t.action = static_cast<int>(rng() % 3);
      t.log_prob_old = std::log(1.f / 3);
    }
    for (const auto& t : transitions) batch.push_back({&t, n01(rng), n01(rng)});
  }
};

template <bool kParallel>
void BM_PpoLoss(benchmark::State& state) {
  LossFixture f(static_cast<size_t>(state.range(0)));
  const ppo::TrainConfig cfg;
  auto grads = f.net.make_grad_buffer();
  for (auto _ : state) {
    auto st = kParallel ? ppo::ppo_loss<float>(f.batch, f.net, cfg, grads)
                        : ppo::ppo_loss_serial<float>(f.batch, f.net, cfg, grads);
    benchmark::DoNotOptimize(st);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

Controllers rule_based() {
  const auto& spec = reference_scenario();
  Controllers ctl;
  for (auto& c : ctl) {
    c.kind = PolicyKind::kRuleBased;
    c.config = spec.config("X");
  }
  return ctl;
}

template <bool kParallel>
void BM_RunEpisodes(benchmark::State& state) {
  const auto& spec = reference_scenario();
  const auto ctl = rule_based();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto r = kParallel ? run_episodes(spec, ctl, 1, n) : run_episodes_serial(spec, ctl, 1, n);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(BM_PpoLoss<false>)->Name("ppo_loss/serial")->Arg(512)->Arg(4096);
BENCHMARK(BM_PpoLoss<true>)->Name("ppo_loss/openmp")->Arg(512)->Arg(4096);
BENCHMARK(BM_RunEpisodes<false>)->Name("run_episodes/serial")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunEpisodes<true>)->Name("run_episodes/openmp")->Arg(8)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
