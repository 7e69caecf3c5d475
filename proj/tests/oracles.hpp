#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "deconflict/ppo.hpp"

namespace deconflict::oracle {

/// Brute-force GAE: A_t = sum_{l>=0} (gamma lambda)^l delta_{t+l}, stopping
/// after the first done step, with delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<bool>& done, double g, double lam, double boot) {
  const size_t n = r.size();
  std::vector<double> delta(n);
  for (size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : boot;
    delta[t] = r[t] + g * next * (done[t] ? 0.0 : 1.0) - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (size_t k = t; k < n; ++k) {
      adv[t] += w * delta[k];
      if (done[k]) break;
      w *= g * lam;
    }
  }
  return adv;
}

/// Max |recursive - brute force| over `trials` random trajectories.
inline double gae_max_error(uint64_t seed, int trials, size_t max_len) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const size_t n = 1 + rng() % max_len;
    std::vector<double> r(n), v(n);
    std::vector<bool> d(n);
    bool dones[64] = {};
    for (size_t i = 0; i < n; ++i) {
      r[i] = u(rng);
      v[i] = u(rng);
      d[i] = rng() % 5 == 0;
      dones[i] = d[i];
    }
    const double boot = u(rng);
    const auto got = ppo::compute_gae(r, v, std::span<const bool>(dones, n), 0.99, 0.95, boot);
    const auto want = gae(r, v, d, 0.99, 0.95, boot);
    for (size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(got.advantages[i] - want[i]));
      worst = std::max(worst, std::abs(got.returns[i] - (want[i] + v[i])));
    }
  }
  return worst;
}

/// Random transitions whose stored log-probabilities sit near the current
/// policy, so that some but not all ratios are clipped.
inline std::vector<ppo::Transition> random_transitions(std::mt19937_64& rng, size_t n,
                                                       const nn::PolicyNetwork<double>& net) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::uniform_real_distribution<double> shift(-0.3, 0.3);
  std::vector<ppo::Transition> out(n);
  for (auto& t : out) {
    for (auto& x : t.obs.ownship) x = u(rng);
    const size_t k = rng() % 4;
    for (size_t i = 0; i < k; ++i) {
      FeatureVec f;
      for (auto& x : f) x = u(rng);
      t.obs.intruders.push_back(f);
    }
    t.action = static_cast<int>(rng() % 3);
    nn::ForwardCache<double> c;
    net.forward(t.obs, c);
    t.log_prob_old = static_cast<float>(std::log(c.probs[static_cast<size_t>(t.action)]) + shift(rng));
  }
  return out;
}

inline std::vector<ppo::Sample> random_samples(const std::vector<ppo::Transition>& ts, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<ppo::Sample> s;
  for (const auto& t : ts) s.push_back({&t, n01(rng), n01(rng)});
  return s;
}

/// Max relative error of the analytic PPO loss gradient against central
/// differences over `batches` random batches on a small double network.
inline double loss_gradient_max_rel_error(uint64_t seed, int batches, double h = 1e-4) {
  const nn::NetworkDims dims{4, 8, 8, 3};
  std::mt19937_64 rng(seed);
  const ppo::TrainConfig cfg;
  double worst = 0;
  for (int b = 0; b < batches; ++b) {
    auto net = nn::init_network<double>(seed + 1 + static_cast<uint64_t>(b), dims);
    const auto ts = random_transitions(rng, 12, net);
    const auto batch = random_samples(ts, rng);
    auto g = net.make_grad_buffer();
    ppo::ppo_loss_serial<double>(batch, net, cfg, g);
    auto scratch = net.make_grad_buffer();
    for (size_t t = 0; t < net.params().size(); ++t) {
      for (size_t k = 0; k < net.params()[t].values.size(); ++k) {
        double& v = net.params()[t].values[k];
        const double saved = v;
        v = saved + h;
        const double lp = ppo::ppo_loss_serial<double>(batch, net, cfg, scratch).loss;
        v = saved - h;
        const double lm = ppo::ppo_loss_serial<double>(batch, net, cfg, scratch).loss;
        v = saved;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[t][k]) / std::max({std::abs(fd), std::abs(g[t][k]), 1e-6}));
      }
    }
  }
  return worst;
}

}  // namespace deconflict::oracle
