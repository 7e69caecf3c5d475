#include "deconflict/ppo.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace deconflict::ppo {

namespace {

constexpr double kMaxLogRatio = 20.0;
// Fixed reduction width of the parallel gradient kernel.
constexpr size_t kGradChunks = 8;

template <typename Real>
struct SampleTerms {
  bool used = false;
  bool clipped = false;
  double surrogate = 0.0;
  double value_sq = 0.0;
  double entropy = 0.0;
  std::vector<double> dlogits;  // of the per-sample loss
  double dvalue = 0.0;
};

template <typename Real>
SampleTerms<Real> sample_terms(const Sample& s, const nn::ForwardCache<Real>& c, const TrainConfig& cfg) {
  SampleTerms<Real> out;
  const size_t k = c.logits.size();
  double mx = -INFINITY;
  for (auto l : c.logits) mx = std::max(mx, static_cast<double>(l));
  double lse = 0.0;
  for (auto l : c.logits) lse += std::exp(static_cast<double>(l) - mx);
  lse = mx + std::log(lse);
  std::vector<double> logp(k), p(k);
  for (size_t j = 0; j < k; ++j) {
    logp[j] = static_cast<double>(c.logits[j]) - lse;
    p[j] = std::exp(logp[j]);
  }

  const auto a = static_cast<size_t>(s.transition->action);
  const double log_diff = logp[a] - static_cast<double>(s.transition->log_prob_old);
  if (!(std::abs(log_diff) <= kMaxLogRatio)) return out;
  out.used = true;

  const double ratio = std::exp(log_diff);
  const double adv = s.advantage;
  const double unclipped = ratio * adv;
  const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
  out.surrogate = std::min(unclipped, clipped);
  out.clipped = clipped < unclipped;
  // d(-surrogate)/d log pi(a|s); zero when the clipped branch is active.
  const double g_logp = out.clipped ? 0.0 : -ratio * adv;

  double h = 0.0;
  for (size_t j = 0; j < k; ++j) h -= p[j] * logp[j];
  out.entropy = h;

  out.dlogits.assign(k, 0.0);
  for (size_t j = 0; j < k; ++j) {
    const double onehot = j == a ? 1.0 : 0.0;
    out.dlogits[j] = g_logp * (onehot - p[j]) + cfg.entropy_coef * p[j] * (logp[j] + h);
  }
  const double err = s.ret - static_cast<double>(c.value);
  out.value_sq = err * err;
  out.dvalue = -2.0 * cfg.value_coef * err;
  return out;
}

template <typename Real>
LossStats summarize(const std::vector<SampleTerms<Real>>& terms, const TrainConfig& cfg) {
  LossStats st;
  size_t clipped = 0;
  for (const auto& t : terms) {
    if (!t.used) {
      ++st.skipped;
      continue;
    }
    ++st.used;
    st.policy_loss -= t.surrogate;
    st.value_loss += t.value_sq;
    st.entropy += t.entropy;
    clipped += t.clipped ? 1 : 0;
  }
  if (st.used > 0) {
    const double inv = 1.0 / static_cast<double>(st.used);
    st.policy_loss *= inv;
    st.value_loss *= inv;
    st.entropy *= inv;
    st.clip_fraction = static_cast<double>(clipped) * inv;
  }
  st.loss = st.policy_loss - cfg.entropy_coef * st.entropy + cfg.value_coef * st.value_loss;
  return st;
}

template <typename Real>
void backward_scaled(const nn::PolicyNetwork<Real>& net, const nn::ForwardCache<Real>& cache,
                     const SampleTerms<Real>& t, double inv, std::vector<Real>& dl, nn::GradBuffer<Real>& out) {
  for (size_t j = 0; j < dl.size(); ++j) dl[j] = static_cast<Real>(t.dlogits[j] * inv);
  net.backward(cache, dl, static_cast<Real>(t.dvalue * inv), out);
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.clip > 0 && c.clip < 1)) throw std::invalid_argument("clip must lie in (0,1)");
  if (!(c.gamma > 0 && c.gamma <= 1)) throw std::invalid_argument("gamma must lie in (0,1]");
  if (!(c.gae_lambda > 0 && c.gae_lambda <= 1)) throw std::invalid_argument("gae_lambda must lie in (0,1]");
  if (c.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (c.epochs_per_episode <= 0) throw std::invalid_argument("epochs_per_episode must be positive");
  if (!(c.learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
}

void FleetBuffer::add(Transition t) {
  for (auto& [id, traj] : trajectories_) {
    if (id == t.agent_id) {
      traj.push_back(std::move(t));
      return;
    }
  }
  const int id = t.agent_id;
  auto pos = std::find_if(trajectories_.begin(), trajectories_.end(), [id](const auto& p) { return p.first > id; });
  trajectories_.insert(pos, {id, std::vector<Transition>{std::move(t)}});
}

bool FleetBuffer::empty() const { return size() == 0; }

size_t FleetBuffer::size() const {
  size_t n = 0;
  for (const auto& [id, traj] : trajectories_) n += traj.size();
  return n;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                      double gamma, double lambda, double bootstrap_value) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw std::invalid_argument("compute_gae: rewards, values and dones differ in length");
  const size_t n = rewards.size();
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    r.advantages[i] = next_adv;
    r.returns[i] = next_adv + values[i];
  }
  return r;
}

void normalize_advantages(std::span<double> adv) {
  constexpr double kEps = 1e-8;
  if (adv.empty()) return;
  if (adv.size() == 1) {
    adv[0] /= std::abs(adv[0]) + kEps;
    return;
  }
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  for (double& a : adv) a = (a - mean) / (sd + kEps);
}

template <typename Real>
LossStats ppo_loss_serial(std::span<const Sample> batch, const nn::PolicyNetwork<Real>& net, const TrainConfig& cfg,
                          nn::GradBuffer<Real>& grads) {
  const size_t n = batch.size();
  std::vector<nn::ForwardCache<Real>> caches(n);
  std::vector<SampleTerms<Real>> terms(n);
  for (size_t i = 0; i < n; ++i) {
    net.forward(batch[i].transition->obs, caches[i]);
    terms[i] = sample_terms(batch[i], caches[i], cfg);
  }
  LossStats st = summarize(terms, cfg);
  if (st.used == 0) return st;
  const double inv = 1.0 / static_cast<double>(st.used);
  std::vector<Real> dl(static_cast<size_t>(net.dims().actions));
  for (size_t i = 0; i < n; ++i)
    if (terms[i].used) backward_scaled(net, caches[i], terms[i], inv, dl, grads);
  return st;
}

template <typename Real>
LossStats ppo_loss(std::span<const Sample> batch, const nn::PolicyNetwork<Real>& net, const TrainConfig& cfg,
                   nn::GradBuffer<Real>& grads) {
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<nn::ForwardCache<Real>> caches(batch.size());
  std::vector<SampleTerms<Real>> terms(batch.size());
  std::exception_ptr error;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto u = static_cast<size_t>(i);
      net.forward(batch[u].transition->obs, caches[u]);
      terms[u] = sample_terms(batch[u], caches[u], cfg);
    } catch (...) {
#pragma omp critical(ppo_loss_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  LossStats st = summarize(terms, cfg);
  if (st.used == 0) return st;
  const double inv = 1.0 / static_cast<double>(st.used);

  const size_t chunks = std::min(kGradChunks, batch.size());
  std::vector<nn::GradBuffer<Real>> partial(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const auto uc = static_cast<size_t>(c);
    const size_t begin = batch.size() * uc / chunks;
    const size_t end = batch.size() * (uc + 1) / chunks;
    auto& buf = partial[uc];
    buf = net.make_grad_buffer();
    std::vector<Real> dl(static_cast<size_t>(net.dims().actions));
    for (size_t i = begin; i < end; ++i)
      if (terms[i].used) backward_scaled(net, caches[i], terms[i], inv, dl, buf);
  }
  for (const auto& buf : partial)
    for (size_t t = 0; t < grads.size(); ++t)
      for (size_t k = 0; k < grads[t].size(); ++k) grads[t][k] += buf[t][k];
  return st;
}

template <typename Real>
bool adam_step(nn::PolicyNetwork<Real>& net, AdamState<Real>& st, double lr, double max_grad_norm) {
  auto& params = net.params();
  double sq = 0.0;
  for (const auto& p : params)
    for (Real g : p.grad) {
      if (!std::isfinite(g)) {
        spdlog::error("adam_step: non-finite gradient in '{}', update skipped", p.name);
        net.zero_grad();
        return false;
      }
      sq += static_cast<double>(g) * static_cast<double>(g);
    }
  double scale = 1.0;
  if (max_grad_norm > 0.0) {
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm) scale = max_grad_norm / norm;
  }
  if (st.m.size() != params.size()) {
    st.m.clear();
    st.v.clear();
    for (const auto& p : params) {
      st.m.emplace_back(p.size(), Real(0));
      st.v.emplace_back(p.size(), Real(0));
    }
  }
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const auto b1 = static_cast<Real>(st.beta1), b2 = static_cast<Real>(st.beta2);
  const auto step_size = static_cast<Real>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<Real>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<Real>(st.eps);
  for (size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    auto& m = st.m[t];
    auto& v = st.v[t];
    for (size_t k = 0; k < p.size(); ++k) {
      const Real g = p.grad[k] * static_cast<Real>(scale);
      m[k] = b1 * m[k] + (Real(1) - b1) * g;
      v[k] = b2 * v[k] + (Real(1) - b2) * g * g;
      p.values[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
  net.zero_grad();
  return true;
}

std::vector<size_t> minibatch_sizes(size_t n, size_t batch_size) {
  std::vector<size_t> out;
  for (size_t done = 0; done < n; done += batch_size) out.push_back(std::min(batch_size, n - done));
  return out;
}

FleetLearner::FleetLearner(FleetId fleet, nn::PolicyNetwork<float> net, TrainConfig cfg, uint64_t shuffle_seed)
    : net_(std::move(net)), cfg_(cfg), buffer_(fleet), rng_(shuffle_seed) {
  validate(cfg_);
}

FleetTrainStats FleetLearner::train() {
  FleetTrainStats stats;
  if (buffer_.empty()) {
    spdlog::warn("fleet {}: empty experience buffer, skipping update", fleet_char(buffer_.fleet()));
    return stats;
  }

  std::vector<Sample> samples;
  samples.reserve(buffer_.size());
  for (const auto& [id, traj] : buffer_.trajectories()) {
    std::vector<double> r, v;
    auto done = std::make_unique<bool[]>(traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
      r.push_back(traj[i].reward);
      v.push_back(traj[i].value_old);
      done[i] = traj[i].done;
    }
    auto gae = compute_gae(r, v, std::span<const bool>(done.get(), traj.size()), cfg_.gamma, cfg_.gae_lambda);
    for (size_t i = 0; i < traj.size(); ++i) samples.push_back({&traj[i], gae.advantages[i], gae.returns[i]});
  }
  stats.transitions = samples.size();

  auto grads = net_.make_grad_buffer();
  std::vector<size_t> order(samples.size());
  std::vector<Sample> mb;
  std::vector<double> adv;
  for (int epoch = 0; epoch < cfg_.epochs_per_episode; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    shuffle(order, rng_);
    size_t offset = 0;
    for (size_t len : minibatch_sizes(order.size(), static_cast<size_t>(cfg_.batch_size))) {
      mb.clear();
      adv.clear();
      for (size_t i = offset; i < offset + len; ++i) {
        mb.push_back(samples[order[i]]);
        adv.push_back(mb.back().advantage);
      }
      offset += len;
      normalize_advantages(adv);
      for (size_t i = 0; i < mb.size(); ++i) mb[i].advantage = adv[i];

      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
      const LossStats ls = ppo_loss<float>(mb, net_, cfg_, grads);
      stats.skipped_transitions += ls.skipped;
      for (size_t t = 0; t < grads.size(); ++t) net_.params()[t].grad = grads[t];
      if (adam_step(net_, adam_, cfg_.learning_rate, cfg_.max_grad_norm)) {
        ++stats.updates;
        stats.policy_loss += ls.policy_loss;
        stats.value_loss += ls.value_loss;
        stats.entropy += ls.entropy;
      } else {
        ++stats.skipped_updates;
      }
    }
  }
  if (stats.updates > 0) {
    const double inv = 1.0 / static_cast<double>(stats.updates);
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
  }
  stats.trained = true;
  buffer_.clear();
  return stats;
}

template LossStats ppo_loss<float>(std::span<const Sample>, const nn::PolicyNetwork<float>&, const TrainConfig&,
                                   nn::GradBuffer<float>&);
template LossStats ppo_loss<double>(std::span<const Sample>, const nn::PolicyNetwork<double>&, const TrainConfig&,
                                    nn::GradBuffer<double>&);
template LossStats ppo_loss_serial<float>(std::span<const Sample>, const nn::PolicyNetwork<float>&,
                                          const TrainConfig&, nn::GradBuffer<float>&);
template LossStats ppo_loss_serial<double>(std::span<const Sample>, const nn::PolicyNetwork<double>&,
                                           const TrainConfig&, nn::GradBuffer<double>&);
template bool adam_step<float>(nn::PolicyNetwork<float>&, AdamState<float>&, double, double);
template bool adam_step<double>(nn::PolicyNetwork<double>&, AdamState<double>&, double, double);

}  // namespace deconflict::ppo
