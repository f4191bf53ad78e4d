#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "polygen/nn.hpp"
#include "polygen/rng.hpp"

using namespace polygen;

namespace {

std::vector<double> run_forward(const MlpLayout& layout, std::span<const double> params,
                                std::span<const double> input) {
  MlpCache cache;
  cache.resize(layout);
  std::copy(input.begin(), input.end(), cache.input.begin());
  mlp_forward(layout, params, cache);
  return {cache.logits().begin(), cache.logits().end()};
}

}  // namespace

TEST_CASE("zero-initialized network maps any input to zero logits") {
  const int sizes[] = {3, 4, 2};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  std::vector<double> params(layout.param_count, 0.0);
  const std::vector<double> input = {1.5, -2.0, 0.25};
  for (double v : run_forward(layout, params, input)) CHECK(v == 0.0);
}

TEST_CASE("identity single layer with identity weights reproduces the input") {
  const int sizes[] = {3, 3};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  std::vector<double> params(layout.param_count, 0.0);
  for (int k = 0; k < 3; ++k) params[layout.weight_offset[0] + k * 3 + k] = 1.0;
  const std::vector<double> input = {0.5, -1.25, 3.0};
  const std::vector<double> out = run_forward(layout, params, input);
  for (int k = 0; k < 3; ++k) CHECK(out[k] == input[k]);
}

TEST_CASE("hand-unrolled two-layer rectifier forward pass") {
  // 3 -> 2 rectifier -> 2 identity with hand-set weights:
  //   z1 = (3.35, -4.7), h1 = (3.35, 0), logits = (3.4, 1.625)
  const int sizes[] = {3, 2, 2};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  std::vector<double> params(layout.param_count, 0.0);
  const double w1[] = {0.5, -1.0, 0.25, 1.0, 2.0, -0.5};
  const double b1[] = {0.1, -0.2};
  const double w2[] = {1.0, -1.0, 0.5, 0.25};
  const double b2[] = {0.05, -0.05};
  std::copy(w1, w1 + 6, params.begin() + layout.weight_offset[0]);
  std::copy(b1, b1 + 2, params.begin() + layout.bias_offset[0]);
  std::copy(w2, w2 + 4, params.begin() + layout.weight_offset[1]);
  std::copy(b2, b2 + 2, params.begin() + layout.bias_offset[1]);
  const std::vector<double> out = run_forward(layout, params, std::vector<double>{1.0, -2.0, 3.0});
  CHECK(out[0] == doctest::Approx(3.4).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(1.625).epsilon(1e-15));
}

TEST_CASE("softmax basics") {
  SUBCASE("equal logits over 100 entries are uniform") {
    std::vector<double> logits(100, 3.7), probs(100);
    softmax(logits, probs);
    for (double p : probs) CHECK(p == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("extreme logits do not overflow") {
    std::vector<double> logits = {1000.0, 0.0}, probs(2);
    softmax(logits, probs);
    CHECK(probs[0] == doctest::Approx(1.0));
    CHECK(probs[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(probs[0]));
  }
  SUBCASE("shift invariance") {
    SeededRng rng(3);
    std::vector<double> logits(17), shifted(17), p1(17), p2(17);
    for (int i = 0; i < 17; ++i) {
      logits[i] = 3.0 * rng.gaussian();
      shifted[i] = logits[i] + 123.456;
    }
    softmax(logits, p1);
    softmax(shifted, p2);
    for (int i = 0; i < 17; ++i) CHECK(std::abs(p1[i] - p2[i]) < 1e-12);
  }
  SUBCASE("sums to one within 1e-12") {
    SeededRng rng(4);
    std::vector<double> logits(64), probs(64);
    for (auto& v : logits) v = 5.0 * rng.gaussian();
    softmax(logits, probs);
    CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-12);
  }
  SUBCASE("NaN input throws") {
    std::vector<double> logits = {0.0, std::nan("")}, probs(2);
    CHECK_THROWS(softmax(logits, probs));
  }
}

TEST_CASE("backward matches central finite differences") {
  const int sizes[] = {6, 8, 5};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  SeededRng rng(77);
  std::vector<double> params(layout.param_count);
  init_mlp(rng, layout, params);
  // Nonzero biases so their gradients are exercised too.
  for (std::size_t l = 0; l < layout.layers.size(); ++l)
    for (int k = 0; k < layout.layers[l].out; ++k)
      params[layout.bias_offset[l] + k] = 0.1 * rng.gaussian();

  std::vector<double> input(6), grad_logits(5);
  for (auto& v : input) v = rng.gaussian();
  for (auto& v : grad_logits) v = rng.gaussian();

  // Scalar loss: dot(grad_logits, logits).
  auto loss = [&](std::span<const double> p) {
    const std::vector<double> out = run_forward(layout, p, input);
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += grad_logits[k] * out[k];
    return s;
  };

  MlpCache cache;
  cache.resize(layout);
  std::copy(input.begin(), input.end(), cache.input.begin());
  mlp_forward(layout, params, cache);
  std::vector<double> grad_params(layout.param_count, 0.0), grad_input(6, 0.0);
  MlpWork work;
  work.resize(layout);
  mlp_backward(layout, params, cache, grad_logits, grad_params, grad_input, work);

  const double h = 1e-5;
  int checked = 0;
  for (std::size_t i = 0; i < layout.param_count; ++i) {
    std::vector<double> p = params;
    p[i] += h;
    const double up = loss(p);
    p[i] -= 2 * h;
    const double down = loss(p);
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad_params[i]), 1e-8});
    CHECK(std::abs(fd - grad_params[i]) / scale <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);

  // Input gradient against finite differences as well.
  for (int j = 0; j < 6; ++j) {
    std::vector<double> x = input;
    x[j] += h;
    MlpCache c2;
    c2.resize(layout);
    std::copy(x.begin(), x.end(), c2.input.begin());
    mlp_forward(layout, params, c2);
    double up = 0.0;
    for (int k = 0; k < 5; ++k) up += grad_logits[k] * c2.logits()[k];
    x[j] -= 2 * h;
    std::copy(x.begin(), x.end(), c2.input.begin());
    mlp_forward(layout, params, c2);
    double down = 0.0;
    for (int k = 0; k < 5; ++k) down += grad_logits[k] * c2.logits()[k];
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad_input[j]), 1e-8});
    CHECK(std::abs(fd - grad_input[j]) / scale <= 1e-4);
  }
}

TEST_CASE("backward trivial identities") {
  const int sizes[] = {4, 3};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  SeededRng rng(5);
  std::vector<double> params(layout.param_count);
  init_mlp(rng, layout, params);
  MlpCache cache;
  cache.resize(layout);
  for (auto& v : cache.input) v = rng.gaussian();
  mlp_forward(layout, params, cache);
  MlpWork work;
  work.resize(layout);

  SUBCASE("zero logit gradient gives zero parameter gradients") {
    std::vector<double> gp(layout.param_count, 0.0), gi(4, 0.0);
    const std::vector<double> gl(3, 0.0);
    mlp_backward(layout, params, cache, gl, gp, gi, work);
    for (double g : gp) CHECK(g == 0.0);
    for (double g : gi) CHECK(g == 0.0);
  }
  SUBCASE("single identity layer weight gradient is the outer product") {
    std::vector<double> gp(layout.param_count, 0.0), gi(4, 0.0);
    const std::vector<double> gl = {0.5, -1.0, 2.0};
    mlp_backward(layout, params, cache, gl, gp, gi, work);
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 4; ++j)
        CHECK(gp[layout.weight_offset[0] + k * 4 + j] ==
              doctest::Approx(gl[k] * cache.input[j]).epsilon(1e-15));
    for (int k = 0; k < 3; ++k) CHECK(gp[layout.bias_offset[0] + k] == gl[k]);
  }
}

TEST_CASE("adam optimizer") {
  AdamConfig cfg;
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState adam(3, cfg);
    std::vector<double> params = {1.0, -2.0, 0.5};
    const std::vector<double> before = params;
    adam.step(params, std::vector<double>{0.0, 0.0, 0.0}, 3);
    CHECK(params == before);
  }
  SUBCASE("first step moves by about lr against the gradient sign") {
    AdamState adam(2, cfg);
    std::vector<double> params = {0.0, 0.0};
    adam.step(params, std::vector<double>{3.0, -0.004}, 2);
    CHECK(params[0] == doctest::Approx(-cfg.lr).epsilon(1e-4));
    CHECK(params[1] == doctest::Approx(cfg.lr).epsilon(2e-3));
  }
  SUBCASE("identical gradient sequences give bit-identical trajectories") {
    AdamState a(4, cfg), b(4, cfg);
    std::vector<double> pa = {0.1, 0.2, 0.3, 0.4}, pb = pa;
    SeededRng rng(11);
    for (int step = 0; step < 50; ++step) {
      std::vector<double> g(4);
      for (auto& v : g) v = rng.gaussian();
      a.step(pa, g, 4);
      b.step(pb, g, 4);
    }
    CHECK(pa == pb);
  }
  SUBCASE("non-finite gradient throws naming the coordinate") {
    AdamState adam(2, cfg);
    std::vector<double> params = {0.0, 0.0};
    CHECK_THROWS_WITH_AS(adam.step(params, std::vector<double>{0.0, std::nan("")}, 2),
                         doctest::Contains("parameter 1"), std::runtime_error);
  }
  SUBCASE("frozen tail is untouched") {
    AdamState adam(3, cfg);
    std::vector<double> params = {1.0, 1.0, 1.0};
    adam.step(params, std::vector<double>{1.0, 1.0, 1.0}, 2);
    CHECK(params[0] != 1.0);
    CHECK(params[1] != 1.0);
    CHECK(params[2] == 1.0);
  }
}

TEST_CASE("fan-in scaled initialization") {
  const int sizes[] = {200, 64, 10};
  const MlpLayout layout = MlpLayout::chain(sizes, Activation::rectifier);
  SeededRng rng(123);
  std::vector<double> params(layout.param_count);
  init_mlp(rng, layout, params);

  // Rectifier layer: variance 2/200 = 0.01 over 200*64 = 12800 entries.
  double sum = 0.0, sum_sq = 0.0;
  const std::size_t n_w = 200 * 64;
  for (std::size_t i = 0; i < n_w; ++i) {
    sum += params[layout.weight_offset[0] + i];
    sum_sq += params[layout.weight_offset[0] + i] * params[layout.weight_offset[0] + i];
  }
  const double mean = sum / n_w;
  const double var = sum_sq / n_w - mean * mean;
  CHECK(std::abs(var - 0.01) < 0.001);

  // Final identity layer: variance 1/64.
  double sum2 = 0.0, sum_sq2 = 0.0;
  const std::size_t n_w2 = 64 * 10;
  for (std::size_t i = 0; i < n_w2; ++i) {
    sum2 += params[layout.weight_offset[1] + i];
    sum_sq2 += params[layout.weight_offset[1] + i] * params[layout.weight_offset[1] + i];
  }
  const double var2 = sum_sq2 / n_w2 - (sum2 / n_w2) * (sum2 / n_w2);
  CHECK(std::abs(var2 - 1.0 / 64) < 0.004);

  for (std::size_t l = 0; l < layout.layers.size(); ++l)
    for (int k = 0; k < layout.layers[l].out; ++k) CHECK(params[layout.bias_offset[l] + k] == 0.0);

  SeededRng rng2(123);
  std::vector<double> params2(layout.param_count);
  init_mlp(rng2, layout, params2);
  CHECK(params == params2);
}
