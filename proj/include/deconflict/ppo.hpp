#pragma once

#include <optional>
#include <span>
#include <vector>

#include "deconflict/nn.hpp"
#include "deconflict/scenario.hpp"

namespace deconflict::ppo {

struct TrainConfig {
  double learning_rate = 1e-4;
  double entropy_coef = 1e-3;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  int batch_size = 512;
  int epochs_per_episode = 8;
  double max_grad_norm = 0.0;  // global-norm clip, 0 disables
};

/// Throws std::invalid_argument naming the violated bound.
void validate(const TrainConfig& cfg);

struct Transition {
  Observation obs;
  int action = 0;
  float log_prob_old = 0.0f;
  float reward = 0.0f;
  float value_old = 0.0f;
  bool done = false;
  int agent_id = 0;
  int step = 0;
};

/// Experience of one fleet for one episode, grouped per agent trajectory.
class FleetBuffer {
 public:
  explicit FleetBuffer(FleetId fleet = FleetId::kA) : fleet_(fleet) {}

  FleetId fleet() const { return fleet_; }
  void add(Transition t);
  void clear() { trajectories_.clear(); }
  bool empty() const;
  size_t size() const;
  /// Trajectories ordered by agent id.
  const std::vector<std::pair<int, std::vector<Transition>>>& trajectories() const { return trajectories_; }

 private:
  FleetId fleet_;
  std::vector<std::pair<int, std::vector<Transition>>> trajectories_;
};

struct GaeResult {
  std::vector<double> advantages;  // not normalized
  std::vector<double> returns;     // advantages + values
};

/// Recursive generalized advantage estimate over one trajectory. Steps with
/// done set do not bootstrap; `bootstrap_value` is V after the last step
/// when that step is not terminal.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                      double gamma, double lambda, double bootstrap_value = 0.0);

/// Zero mean, unit variance (population std, 1e-8 guard). A single element
/// keeps its sign: it is scaled to +-1.
void normalize_advantages(std::span<double> adv);

struct Sample {
  const Transition* transition = nullptr;
  double advantage = 0.0;  // normalized
  double ret = 0.0;
};

struct LossStats {
  double loss = 0.0;
  double policy_loss = 0.0;  // -mean clipped surrogate
  double value_loss = 0.0;   // mean (return - V)^2
  double entropy = 0.0;      // mean policy entropy
  double clip_fraction = 0.0;
  size_t used = 0;
  size_t skipped = 0;  // |log ratio| > 20
};

/// Minimized objective
///   -mean[min(r A, clip(r, 1-eps, 1+eps) A)] - beta mean[H] + c_v mean[(R - V)^2]
/// with r = exp(log pi(a|s) - log_prob_old). Gradients are accumulated (+=)
/// into `grads`. This kernel splits the batch into a fixed number of chunks
/// reduced in chunk order, so results do not depend on the thread count.
template <typename Real>
LossStats ppo_loss(std::span<const Sample> batch, const nn::PolicyNetwork<Real>& net, const TrainConfig& cfg,
                   nn::GradBuffer<Real>& grads);

/// Single-threaded reference of ppo_loss, accumulating in sample order.
template <typename Real>
LossStats ppo_loss_serial(std::span<const Sample> batch, const nn::PolicyNetwork<Real>& net, const TrainConfig& cfg,
                          nn::GradBuffer<Real>& grads);

template <typename Real>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;
};

/// One Adam update from the gradients stored in the network, which are then
/// zeroed. Returns false (and leaves parameters and moments untouched) when
/// a gradient is non-finite.
template <typename Real>
bool adam_step(nn::PolicyNetwork<Real>& net, AdamState<Real>& state, double lr, double max_grad_norm = 0.0);

/// Sizes of the consecutive minibatches covering n samples.
std::vector<size_t> minibatch_sizes(size_t n, size_t batch_size);

struct FleetTrainStats {
  bool trained = false;
  size_t transitions = 0;
  size_t updates = 0;
  size_t skipped_updates = 0;
  size_t skipped_transitions = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Network, optimizer state and experience of one trainable fleet. Nothing
/// here is shared with the other fleet.
class FleetLearner {
 public:
  FleetLearner(FleetId fleet, nn::PolicyNetwork<float> net, TrainConfig cfg, uint64_t shuffle_seed);

  FleetId fleet() const { return buffer_.fleet(); }
  nn::PolicyNetwork<float>& net() { return net_; }
  const nn::PolicyNetwork<float>& net() const { return net_; }
  FleetBuffer& buffer() { return buffer_; }
  const TrainConfig& config() const { return cfg_; }

  /// GAE per trajectory, then `epochs_per_episode` passes of shuffled
  /// minibatches with one Adam step each. Clears the buffer. An empty buffer
  /// is a no-op.
  FleetTrainStats train();

 private:
  nn::PolicyNetwork<float> net_;
  AdamState<float> adam_;
  TrainConfig cfg_;
  FleetBuffer buffer_;
  Rng rng_;
};

}  // namespace deconflict::ppo
