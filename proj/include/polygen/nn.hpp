#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polygen/rng.hpp"

namespace polygen {

enum class Activation { rectifier, identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
};

// Shape of a dense multilayer perceptron whose parameters live in one flat
// array: per layer a row-major (out x in) weight block followed by the bias
// block. Flat order is the deterministic parameter order used by the
// optimizer, by checkpoints, and by finite-difference tests.
struct MlpLayout {
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;
  std::size_t param_count = 0;

  // sizes = {input, hidden..., output}; hidden layers get hidden_act, the
  // final layer is identity.
  static MlpLayout chain(std::span<const int> sizes, Activation hidden_act);

  int input_width() const { return layers.front().in; }
  int output_width() const { return layers.back().out; }
};

// Activation record of one forward pass, reused across calls.
struct MlpCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // per layer, before activation
  std::vector<std::vector<double>> post;  // per layer, after activation

  void resize(const MlpLayout& layout);
  std::span<const double> logits() const { return post.back(); }
};

// Ping-pong buffers for backpropagation, one per thread.
struct MlpWork {
  std::vector<double> a, b;
  void resize(const MlpLayout& layout);
};

// Runs the network on cache.input (caller fills it first); logits land in
// cache.post.back().
void mlp_forward(const MlpLayout& layout, std::span<const double> params, MlpCache& cache);

// Exact reverse-mode pass for the forward recorded in `cache`. Accumulates
// parameter gradients into grad_params (layout-sized span, not cleared) and
// writes the gradient with respect to the input into grad_input.
void mlp_backward(const MlpLayout& layout, std::span<const double> params,
                  const MlpCache& cache, std::span<const double> grad_logits,
                  std::span<double> grad_params, std::span<double> grad_input,
                  MlpWork& work);

// Max-subtracted softmax; output sums to 1 within 1e-12.
void softmax(std::span<const double> logits, std::span<double> probs);

// Fan-in-scaled Gaussian init: variance 2/fan_in for rectifier layers,
// 1/fan_in for identity layers; biases zero. Draw order is flat order.
void init_mlp(SeededRng& rng, const MlpLayout& layout, std::span<double> params);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive moment estimation over a flat parameter array.
class AdamState {
 public:
  AdamState(std::size_t param_count, AdamConfig cfg);

  // Updates params[0, trainable_count). Throws on a non-finite gradient,
  // naming the coordinate via block_name when provided.
  void step(std::span<double> params, std::span<const double> grads,
            std::size_t trainable_count,
            const std::function<std::string(std::size_t)>* block_name = nullptr);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_count_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  void restore(std::int64_t step_count, std::span<const double> m, std::span<const double> v);

 private:
  AdamConfig cfg_;
  std::int64_t step_count_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace polygen
