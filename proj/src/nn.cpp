#include "polygen/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polygen {

const char* activation_name(Activation a) {
  return a == Activation::rectifier ? "rectifier" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "rectifier") return Activation::rectifier;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + name);
}

MlpLayout MlpLayout::chain(std::span<const int> sizes, Activation hidden_act) {
  if (sizes.size() < 2) throw std::invalid_argument("MlpLayout::chain: need at least input and output size");
  MlpLayout layout;
  std::size_t offset = 0;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    if (sizes[k] < 1 || sizes[k + 1] < 1) throw std::invalid_argument("MlpLayout::chain: sizes must be >= 1");
    LayerSpec spec;
    spec.in = sizes[k];
    spec.out = sizes[k + 1];
    spec.act = (k + 2 == sizes.size()) ? Activation::identity : hidden_act;
    layout.layers.push_back(spec);
    layout.weight_offset.push_back(offset);
    offset += static_cast<std::size_t>(spec.out) * spec.in;
    layout.bias_offset.push_back(offset);
    offset += spec.out;
  }
  layout.param_count = offset;
  return layout;
}

void MlpCache::resize(const MlpLayout& layout) {
  input.assign(static_cast<std::size_t>(layout.input_width()), 0.0);
  pre.resize(layout.layers.size());
  post.resize(layout.layers.size());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    pre[l].assign(static_cast<std::size_t>(layout.layers[l].out), 0.0);
    post[l].assign(static_cast<std::size_t>(layout.layers[l].out), 0.0);
  }
}

void MlpWork::resize(const MlpLayout& layout) {
  std::size_t width = static_cast<std::size_t>(layout.input_width());
  for (const auto& l : layout.layers) width = std::max(width, static_cast<std::size_t>(l.out));
  a.assign(width, 0.0);
  b.assign(width, 0.0);
}

namespace {

// y = W x + b with W row-major (out x in). Four accumulators keep the
// summation order fixed while letting the FPU pipeline.
void affine(const double* w, const double* bias, const double* x, double* y, int out, int in) {
  for (int k = 0; k < out; ++k) {
    const double* row = w + static_cast<std::size_t>(k) * in;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int j = 0;
    for (; j + 4 <= in; j += 4) {
      s0 += row[j] * x[j];
      s1 += row[j + 1] * x[j + 1];
      s2 += row[j + 2] * x[j + 2];
      s3 += row[j + 3] * x[j + 3];
    }
    for (; j < in; ++j) s0 += row[j] * x[j];
    y[k] = ((s0 + s1) + (s2 + s3)) + bias[k];
  }
}

}  // namespace

void mlp_forward(const MlpLayout& layout, std::span<const double> params, MlpCache& cache) {
  if (params.size() != layout.param_count) throw std::invalid_argument("mlp_forward: parameter size mismatch");
  if (cache.input.size() != static_cast<std::size_t>(layout.input_width()))
    throw std::invalid_argument("mlp_forward: input width mismatch");
  const double* x = cache.input.data();
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerSpec& spec = layout.layers[l];
    affine(params.data() + layout.weight_offset[l], params.data() + layout.bias_offset[l], x,
           cache.pre[l].data(), spec.out, spec.in);
    if (spec.act == Activation::rectifier) {
      for (int k = 0; k < spec.out; ++k) cache.post[l][k] = cache.pre[l][k] > 0.0 ? cache.pre[l][k] : 0.0;
    } else {
      cache.post[l] = cache.pre[l];
    }
    x = cache.post[l].data();
  }
}

void mlp_backward(const MlpLayout& layout, std::span<const double> params,
                  const MlpCache& cache, std::span<const double> grad_logits,
                  std::span<double> grad_params, std::span<double> grad_input,
                  MlpWork& work) {
  if (grad_params.size() != layout.param_count) throw std::invalid_argument("mlp_backward: gradient size mismatch");
  const int n_layers = static_cast<int>(layout.layers.size());
  if (grad_logits.size() != static_cast<std::size_t>(layout.output_width()))
    throw std::invalid_argument("mlp_backward: logit gradient width mismatch");

  // dpost for the current layer, starting at the top.
  std::copy(grad_logits.begin(), grad_logits.end(), work.a.begin());
  double* dpost = work.a.data();
  double* dnext = work.b.data();

  for (int l = n_layers - 1; l >= 0; --l) {
    const LayerSpec& spec = layout.layers[l];
    // Through the activation: dpre.
    if (spec.act == Activation::rectifier) {
      for (int k = 0; k < spec.out; ++k)
        if (!(cache.pre[l][k] > 0.0)) dpost[k] = 0.0;
    }
    const double* layer_in = (l == 0) ? cache.input.data() : cache.post[l - 1].data();
    double* gw = grad_params.data() + layout.weight_offset[l];
    double* gb = grad_params.data() + layout.bias_offset[l];
    for (int k = 0; k < spec.out; ++k) {
      const double d = dpost[k];
      double* gw_row = gw + static_cast<std::size_t>(k) * spec.in;
      for (int j = 0; j < spec.in; ++j) gw_row[j] += d * layer_in[j];
      gb[k] += d;
    }
    // Gradient with respect to this layer's input.
    double* target = (l == 0) ? grad_input.data() : dnext;
    if (l == 0 && grad_input.size() != static_cast<std::size_t>(spec.in))
      throw std::invalid_argument("mlp_backward: input gradient width mismatch");
    std::fill(target, target + spec.in, 0.0);
    const double* w = params.data() + layout.weight_offset[l];
    for (int k = 0; k < spec.out; ++k) {
      const double d = dpost[k];
      const double* w_row = w + static_cast<std::size_t>(k) * spec.in;
      for (int j = 0; j < spec.in; ++j) target[j] += w_row[j] * d;
    }
    std::swap(dpost, dnext);
  }
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  double max_logit = logits[0];
  for (double v : logits) {
    if (std::isnan(v)) throw std::invalid_argument("softmax: NaN logit");
    max_logit = std::max(max_logit, v);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - max_logit);
    sum += probs[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < logits.size(); ++j) probs[j] *= inv;
}

void init_mlp(SeededRng& rng, const MlpLayout& layout, std::span<double> params) {
  if (params.size() != layout.param_count) throw std::invalid_argument("init_mlp: parameter size mismatch");
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const LayerSpec& spec = layout.layers[l];
    const double fan_in = static_cast<double>(spec.in);
    const double sigma =
        spec.act == Activation::rectifier ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
    double* w = params.data() + layout.weight_offset[l];
    const std::size_t n_w = static_cast<std::size_t>(spec.out) * spec.in;
    for (std::size_t i = 0; i < n_w; ++i) w[i] = sigma * rng.gaussian();
    double* b = params.data() + layout.bias_offset[l];
    std::fill(b, b + spec.out, 0.0);
  }
}

AdamState::AdamState(std::size_t param_count, AdamConfig cfg)
    : cfg_(cfg), m_(param_count, 0.0), v_(param_count, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads,
                     std::size_t trainable_count,
                     const std::function<std::string(std::size_t)>* block_name) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("AdamState::step: shape mismatch");
  if (trainable_count > m_.size())
    throw std::invalid_argument("AdamState::step: trainable_count out of range");
  for (std::size_t i = 0; i < trainable_count; ++i) {
    if (!std::isfinite(grads[i])) {
      std::string where = block_name ? (*block_name)(i) : ("parameter " + std::to_string(i));
      throw std::runtime_error("non-finite gradient in " + where);
    }
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < trainable_count; ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    params[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

void AdamState::restore(std::int64_t step_count, std::span<const double> m,
                        std::span<const double> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("AdamState::restore: shape mismatch");
  step_count_ = step_count;
  std::copy(m.begin(), m.end(), m_.begin());
  std::copy(v.begin(), v.end(), v_.begin());
}

}  // namespace polygen
