#include "deconflict/nn.hpp"

#include <algorithm>
#include <cmath>

namespace deconflict::nn {

namespace {

template <typename Real>
void dense(const std::vector<Real>& w, const std::vector<Real>& b, std::span<const Real> x, std::span<Real> out) {
  const size_t in = x.size();
  for (size_t r = 0; r < out.size(); ++r) {
    Real acc = b[r];
    const Real* row = w.data() + r * in;
    for (size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

template <typename Real>
void tanh_inplace(std::span<Real> v) {
  for (auto& x : v) x = std::tanh(x);
}

template <typename Real>
void check_finite(std::span<const Real> v, const char* layer) {
  for (Real x : v)
    if (!std::isfinite(x)) throw NumericFault(std::string("non-finite value in layer '") + layer + "'");
}

/// grad_w += dout x^T, grad_b += dout, dx (optional) += W^T dout.
template <typename Real>
void dense_backward(const std::vector<Real>& w, std::span<const Real> x, std::span<const Real> dout,
                    std::vector<Real>& grad_w, std::vector<Real>& grad_b, std::span<Real> dx) {
  const size_t in = x.size();
  for (size_t r = 0; r < dout.size(); ++r) {
    const Real g = dout[r];
    grad_b[r] += g;
    if (g == Real(0)) continue;
    Real* gw = grad_w.data() + r * in;
    const Real* row = w.data() + r * in;
    for (size_t c = 0; c < in; ++c) gw[c] += g * x[c];
    if (!dx.empty())
      for (size_t c = 0; c < in; ++c) dx[c] += row[c] * g;
  }
}

template <typename Real>
ParamTensor<Real> tensor(std::string name, std::vector<size_t> shape) {
  size_t n = 1;
  for (auto s : shape) n *= s;
  return {std::move(name), std::move(shape), std::vector<Real>(n, Real(0)), std::vector<Real>(n, Real(0))};
}

}  // namespace

template <typename Real>
void softmax(std::span<const Real> logits, std::span<Real> out) {
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real sum = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
}

template <typename Real>
std::vector<Real> attention_context(std::span<const Real> ownship_enc, std::span<const Real> intruder_encs,
                                    std::span<const Real> weight, size_t enc) {
  const size_t n = intruder_encs.size() / enc;
  std::vector<Real> ctx(enc, Real(0));
  if (n == 0) return ctx;
  std::vector<Real> query(enc, Real(0));
  for (size_t l = 0; l < enc; ++l)
    for (size_t m = 0; m < enc; ++m) query[m] += ownship_enc[l] * weight[l * enc + m];
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(enc));
  std::vector<Real> scores(n), attn(n);
  for (size_t i = 0; i < n; ++i) {
    Real s = 0;
    for (size_t m = 0; m < enc; ++m) s += query[m] * intruder_encs[i * enc + m];
    scores[i] = s * scale;
  }
  softmax<Real>(scores, attn);
  for (size_t i = 0; i < n; ++i)
    for (size_t m = 0; m < enc; ++m) ctx[m] += attn[i] * intruder_encs[i * enc + m];
  return ctx;
}

template <typename Real>
PolicyNetwork<Real>::PolicyNetwork(NetworkDims d) : dims_(d) {
  const auto obs = static_cast<size_t>(d.obs), enc = static_cast<size_t>(d.enc),
             trunk = static_cast<size_t>(d.trunk), act = static_cast<size_t>(d.actions);
  params_.reserve(kNumTensors);
  params_.push_back(tensor<Real>("ownship_encoder.weight", {enc, obs}));
  params_.push_back(tensor<Real>("ownship_encoder.bias", {enc}));
  params_.push_back(tensor<Real>("intruder_encoder.weight", {enc, obs}));
  params_.push_back(tensor<Real>("intruder_encoder.bias", {enc}));
  params_.push_back(tensor<Real>("attention.weight", {enc, enc}));
  params_.push_back(tensor<Real>("trunk1.weight", {trunk, 2 * enc}));
  params_.push_back(tensor<Real>("trunk1.bias", {trunk}));
  params_.push_back(tensor<Real>("trunk2.weight", {trunk, trunk}));
  params_.push_back(tensor<Real>("trunk2.bias", {trunk}));
  params_.push_back(tensor<Real>("actor.weight", {act, trunk}));
  params_.push_back(tensor<Real>("actor.bias", {act}));
  params_.push_back(tensor<Real>("critic.weight", {1, trunk}));
  params_.push_back(tensor<Real>("critic.bias", {1}));
}

template <typename Real>
size_t PolicyNetwork<Real>::num_parameters() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename Real>
void PolicyNetwork<Real>::forward(const Observation& obs, ForwardCache<Real>& cache) const {
  std::vector<Real> own(obs.ownship.begin(), obs.ownship.end());
  std::vector<Real> intr;
  intr.reserve(obs.intruders.size() * kObsDim);
  for (const auto& f : obs.intruders) intr.insert(intr.end(), f.begin(), f.end());
  forward(own, intr, obs.intruders.size(), cache);
}

template <typename Real>
void PolicyNetwork<Real>::forward(std::span<const Real> ownship, std::span<const Real> intruders,
                                  size_t num_intruders, ForwardCache<Real>& c) const {
  const auto obs = static_cast<size_t>(dims_.obs), enc = static_cast<size_t>(dims_.enc),
             trunk = static_cast<size_t>(dims_.trunk), act = static_cast<size_t>(dims_.actions);
  if (ownship.size() != obs || intruders.size() != num_intruders * obs)
    throw NumericFault("forward: observation size does not match the network input width");
  const auto& P = params_;
  c.valid = false;
  c.x_own.assign(ownship.begin(), ownship.end());
  c.x_intr.assign(intruders.begin(), intruders.end());
  check_finite<Real>(c.x_own, "input.ownship");
  check_finite<Real>(c.x_intr, "input.intruders");

  c.h_own.resize(enc);
  dense<Real>(P[kOwnW].values, P[kOwnB].values, c.x_own, c.h_own);
  tanh_inplace<Real>(c.h_own);
  check_finite<Real>(c.h_own, "ownship_encoder");

  c.h_intr.resize(num_intruders * enc);
  for (size_t i = 0; i < num_intruders; ++i)
    dense<Real>(P[kIntrW].values, P[kIntrB].values, std::span<const Real>(c.x_intr).subspan(i * obs, obs),
                std::span<Real>(c.h_intr).subspan(i * enc, enc));
  tanh_inplace<Real>(c.h_intr);
  check_finite<Real>(c.h_intr, "intruder_encoder");

  // Attention: one bilinear score per intruder.
  const auto& W = P[kAttnW].values;
  c.query.assign(enc, Real(0));
  for (size_t l = 0; l < enc; ++l) {
    const Real hl = c.h_own[l];
    const Real* row = W.data() + l * enc;
    for (size_t m = 0; m < enc; ++m) c.query[m] += hl * row[m];
  }
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(enc));
  c.attn.resize(num_intruders);
  c.trunk_in.assign(2 * enc, Real(0));
  std::copy(c.h_own.begin(), c.h_own.end(), c.trunk_in.begin());
  c.score_evals = 0;
  if (num_intruders > 0) {
    std::vector<Real> scores(num_intruders);
    for (size_t i = 0; i < num_intruders; ++i) {
      Real s = 0;
      const Real* h = c.h_intr.data() + i * enc;
      for (size_t m = 0; m < enc; ++m) s += c.query[m] * h[m];
      scores[i] = s * scale;
      ++c.score_evals;
    }
    softmax<Real>(scores, c.attn);
    for (size_t i = 0; i < num_intruders; ++i) {
      const Real* h = c.h_intr.data() + i * enc;
      for (size_t m = 0; m < enc; ++m) c.trunk_in[enc + m] += c.attn[i] * h[m];
    }
  }
  check_finite<Real>(c.trunk_in, "attention");

  c.t1.resize(trunk);
  dense<Real>(P[kTrunk1W].values, P[kTrunk1B].values, c.trunk_in, c.t1);
  tanh_inplace<Real>(c.t1);
  check_finite<Real>(c.t1, "trunk1");
  c.t2.resize(trunk);
  dense<Real>(P[kTrunk2W].values, P[kTrunk2B].values, c.t1, c.t2);
  tanh_inplace<Real>(c.t2);
  check_finite<Real>(c.t2, "trunk2");

  c.logits.resize(act);
  dense<Real>(P[kActorW].values, P[kActorB].values, c.t2, c.logits);
  check_finite<Real>(c.logits, "actor");
  c.probs.resize(act);
  softmax<Real>(c.logits, c.probs);
  Real v = 0;
  dense<Real>(P[kCriticW].values, P[kCriticB].values, c.t2, std::span<Real>(&v, 1));
  check_finite<Real>(std::span<const Real>(&v, 1), "critic");
  c.value = v;
  c.valid = true;
}

template <typename Real>
GradBuffer<Real> PolicyNetwork<Real>::make_grad_buffer() const {
  GradBuffer<Real> g(params_.size());
  for (size_t t = 0; t < params_.size(); ++t) g[t].assign(params_[t].size(), Real(0));
  return g;
}

template <typename Real>
void PolicyNetwork<Real>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), Real(0));
}

template <typename Real>
void PolicyNetwork<Real>::backward(const ForwardCache<Real>& cache, std::span<const Real> dlogits, Real dvalue) {
  GradBuffer<Real> g(params_.size());
  for (size_t t = 0; t < params_.size(); ++t) g[t] = std::move(params_[t].grad);
  try {
    backward(cache, dlogits, dvalue, g);
  } catch (...) {
    for (size_t t = 0; t < params_.size(); ++t) params_[t].grad = std::move(g[t]);
    throw;
  }
  for (size_t t = 0; t < params_.size(); ++t) params_[t].grad = std::move(g[t]);
}

template <typename Real>
void PolicyNetwork<Real>::backward(const ForwardCache<Real>& c, std::span<const Real> dlogits, Real dvalue,
                                   GradBuffer<Real>& g) const {
  if (!c.valid) throw NumericFault("backward called without a recorded forward pass");
  const auto obs = static_cast<size_t>(dims_.obs), enc = static_cast<size_t>(dims_.enc),
             trunk = static_cast<size_t>(dims_.trunk);
  const auto& P = params_;
  const size_t n = c.num_intruders();

  // Heads.
  std::vector<Real> dt2(trunk, Real(0));
  dense_backward<Real>(P[kActorW].values, c.t2, dlogits, g[kActorW], g[kActorB], dt2);
  dense_backward<Real>(P[kCriticW].values, c.t2, std::span<const Real>(&dvalue, 1), g[kCriticW], g[kCriticB], dt2);

  // Trunk.
  for (size_t r = 0; r < trunk; ++r) dt2[r] *= Real(1) - c.t2[r] * c.t2[r];
  std::vector<Real> dt1(trunk, Real(0));
  dense_backward<Real>(P[kTrunk2W].values, c.t1, dt2, g[kTrunk2W], g[kTrunk2B], dt1);
  for (size_t r = 0; r < trunk; ++r) dt1[r] *= Real(1) - c.t1[r] * c.t1[r];
  std::vector<Real> dz(2 * enc, Real(0));
  dense_backward<Real>(P[kTrunk1W].values, c.trunk_in, dt1, g[kTrunk1W], g[kTrunk1B], dz);

  std::vector<Real> dh_own(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(enc));
  std::vector<Real> dh_intr(n * enc, Real(0));

  // Attention.
  if (n > 0) {
    const Real* dctx = dz.data() + enc;
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(enc));
    std::vector<Real> dweight(n);
    Real mean = 0;
    for (size_t i = 0; i < n; ++i) {
      const Real* h = c.h_intr.data() + i * enc;
      Real s = 0;
      for (size_t m = 0; m < enc; ++m) {
        s += dctx[m] * h[m];
        dh_intr[i * enc + m] += c.attn[i] * dctx[m];
      }
      dweight[i] = s;
      mean += c.attn[i] * s;
    }
    std::vector<Real> dquery(enc, Real(0));
    for (size_t i = 0; i < n; ++i) {
      const Real dscore = c.attn[i] * (dweight[i] - mean) * scale;
      const Real* h = c.h_intr.data() + i * enc;
      for (size_t m = 0; m < enc; ++m) {
        dquery[m] += dscore * h[m];
        dh_intr[i * enc + m] += dscore * c.query[m];
      }
    }
    const auto& W = P[kAttnW].values;
    auto& gW = g[kAttnW];
    for (size_t l = 0; l < enc; ++l) {
      const Real hl = c.h_own[l];
      const Real* row = W.data() + l * enc;
      Real* grow = gW.data() + l * enc;
      Real acc = 0;
      for (size_t m = 0; m < enc; ++m) {
        grow[m] += hl * dquery[m];
        acc += row[m] * dquery[m];
      }
      dh_own[l] += acc;
    }
  }

  // Encoders.
  for (size_t m = 0; m < enc; ++m) dh_own[m] *= Real(1) - c.h_own[m] * c.h_own[m];
  dense_backward<Real>(P[kOwnW].values, c.x_own, dh_own, g[kOwnW], g[kOwnB], {});
  for (size_t i = 0; i < n; ++i) {
    auto dh = std::span<Real>(dh_intr).subspan(i * enc, enc);
    for (size_t m = 0; m < enc; ++m) dh[m] *= Real(1) - c.h_intr[i * enc + m] * c.h_intr[i * enc + m];
    dense_backward<Real>(P[kIntrW].values, std::span<const Real>(c.x_intr).subspan(i * obs, obs), dh, g[kIntrW],
                         g[kIntrB], {});
  }
}

template <typename Real>
PolicyNetwork<Real> init_network(uint64_t seed, NetworkDims dims) {
  PolicyNetwork<Real> net(dims);
  Rng rng(seed);
  for (auto& p : net.params()) {
    if (p.shape.size() != 2) continue;  // biases stay zero
    const double fan_out = static_cast<double>(p.shape[0]);
    const double fan_in = static_cast<double>(p.shape[1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : p.values) v = static_cast<Real>((2.0 * uniform01(rng) - 1.0) * bound);
  }
  return net;
}

namespace {
template <typename Real>
SampledAction sample_impl(std::span<const Real> probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int chosen = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    cum += static_cast<double>(probs[i]);
    if (u < cum) {
      chosen = static_cast<int>(i);
      break;
    }
  }
  if (chosen < 0) {
    // Rounding left u above the total mass; take the last index with mass.
    for (size_t i = probs.size(); i-- > 0;)
      if (probs[i] > 0) {
        chosen = static_cast<int>(i);
        break;
      }
  }
  return {chosen, std::log(static_cast<double>(probs[static_cast<size_t>(chosen)]))};
}
}  // namespace

SampledAction sample_action(std::span<const float> probs, Rng& rng) { return sample_impl(probs, rng); }
SampledAction sample_action(std::span<const double> probs, Rng& rng) { return sample_impl(probs, rng); }

template class PolicyNetwork<float>;
template class PolicyNetwork<double>;
template PolicyNetwork<float> init_network<float>(uint64_t, NetworkDims);
template PolicyNetwork<double> init_network<double>(uint64_t, NetworkDims);
template std::vector<float> attention_context<float>(std::span<const float>, std::span<const float>,
                                                     std::span<const float>, size_t);
template std::vector<double> attention_context<double>(std::span<const double>, std::span<const double>,
                                                       std::span<const double>, size_t);
template void softmax<float>(std::span<const float>, std::span<float>);
template void softmax<double>(std::span<const double>, std::span<double>);

}  // namespace deconflict::nn
