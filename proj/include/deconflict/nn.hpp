#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deconflict/observation.hpp"
#include "deconflict/rng.hpp"

namespace deconflict::nn {

/// Layer widths. The production network is {4, 64, 128, 3}; tests use a
/// downsized one.
struct NetworkDims {
  int obs = kObsDim;
  int enc = 64;
  int trunk = 128;
  int actions = kNumActions;

  friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

/// Raised when a forward pass produces a non-finite value, or on API misuse.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Real>
struct ParamTensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<Real> values;
  std::vector<Real> grad;

  size_t size() const { return values.size(); }
};

/// One gradient slot per parameter tensor, same layout as the network.
template <typename Real>
using GradBuffer = std::vector<std::vector<Real>>;

/// Intermediate activations of one forward pass, consumed by backward().
template <typename Real>
struct ForwardCache {
  bool valid = false;
  std::vector<Real> x_own;     // obs
  std::vector<Real> x_intr;    // n * obs
  std::vector<Real> h_own;     // enc
  std::vector<Real> h_intr;    // n * enc
  std::vector<Real> query;     // enc, W^T h_own
  std::vector<Real> attn;      // n, softmax of scores
  std::vector<Real> trunk_in;  // 2*enc: [h_own, context]
  std::vector<Real> t1;        // trunk
  std::vector<Real> t2;        // trunk
  std::vector<Real> logits;    // actions
  std::vector<Real> probs;     // actions
  Real value = 0;
  size_t score_evals = 0;

  size_t num_intruders() const { return attn.size(); }
};

/// Attention-based actor-critic.
///
///   ownship obs --dense(obs->enc), tanh--> h_own
///   each intruder --dense(obs->enc), tanh--> h_i        (shared weights)
///   score_i = h_own^T W h_i / sqrt(enc), a = softmax(score)
///   context = sum_i a_i h_i                               (zero if no intruders)
///   [h_own, context] --dense(2enc->trunk), tanh --dense(trunk->trunk), tanh--> t
///   t --dense(trunk->actions), softmax--> action probabilities
///   t --dense(trunk->1)--> state value
///
/// Parameter tensors are kept in a fixed declared order (see Index), which is
/// also the checkpoint order.
template <typename Real>
class PolicyNetwork {
 public:
  enum Index : size_t {
    kOwnW,
    kOwnB,
    kIntrW,
    kIntrB,
    kAttnW,
    kTrunk1W,
    kTrunk1B,
    kTrunk2W,
    kTrunk2B,
    kActorW,
    kActorB,
    kCriticW,
    kCriticB,
    kNumTensors
  };

  explicit PolicyNetwork(NetworkDims dims = {});

  const NetworkDims& dims() const { return dims_; }
  std::vector<ParamTensor<Real>>& params() { return params_; }
  const std::vector<ParamTensor<Real>>& params() const { return params_; }
  size_t num_parameters() const;

  /// Writes the action distribution and value into `cache`. Throws
  /// NumericFault naming the layer on a non-finite intermediate.
  void forward(std::span<const Real> ownship, std::span<const Real> intruders, size_t num_intruders,
               ForwardCache<Real>& cache) const;
  void forward(const Observation& obs, ForwardCache<Real>& cache) const;

  /// Reverse pass for the computation recorded in `cache`, seeded with
  /// dLoss/dlogits and dLoss/dvalue. Accumulates (+=) into `grads`.
  void backward(const ForwardCache<Real>& cache, std::span<const Real> dlogits, Real dvalue,
                GradBuffer<Real>& grads) const;
  /// Same, accumulating into each ParamTensor::grad.
  void backward(const ForwardCache<Real>& cache, std::span<const Real> dlogits, Real dvalue);

  GradBuffer<Real> make_grad_buffer() const;
  void zero_grad();

  template <typename Other>
  PolicyNetwork<Other> cast() const {
    PolicyNetwork<Other> out(dims_);
    for (size_t t = 0; t < params_.size(); ++t)
      for (size_t k = 0; k < params_[t].values.size(); ++k)
        out.params()[t].values[k] = static_cast<Other>(params_[t].values[k]);
    return out;
  }

 private:
  NetworkDims dims_;
  std::vector<ParamTensor<Real>> params_;
};

/// Glorot-uniform weights, zero biases, reproducible from the seed.
template <typename Real>
PolicyNetwork<Real> init_network(uint64_t seed, NetworkDims dims = {});

/// Context vector of the multiplicative attention; exposed for testing.
/// `intruder_encs` holds n rows of width enc.
template <typename Real>
std::vector<Real> attention_context(std::span<const Real> ownship_enc, std::span<const Real> intruder_encs,
                                    std::span<const Real> weight, size_t enc);

/// Numerically stable softmax.
template <typename Real>
void softmax(std::span<const Real> logits, std::span<Real> out);

struct SampledAction {
  int index = 0;
  double log_prob = 0.0;
};

SampledAction sample_action(std::span<const float> probs, Rng& rng);
SampledAction sample_action(std::span<const double> probs, Rng& rng);

template <typename Real>
int argmax(std::span<const Real> probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
  return best;
}

}  // namespace deconflict::nn
