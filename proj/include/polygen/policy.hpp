#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "polygen/nn.hpp"
#include "polygen/problem.hpp"
#include "polygen/rng.hpp"

namespace polygen {

// Probabilities are floored at this value inside logs so losses stay finite;
// gradients flow through the unclamped probability.
inline constexpr double kProbFloor = 1e-300;

inline double floored_log(double p) { return std::log(p > kProbFloor ? p : kProbFloor); }

struct PolicyConfig {
  int dim = 3;
  std::vector<int> cardinalities;  // per variable; filled from the problem
  int noise_dim = 64;
  int emb_dim = 8;
  int num_classes = 1;
  bool conditional = false;  // false forces num_classes == 1 and a frozen zero embedding
  std::vector<int> hidden = {128, 128};

  void validate() const;
  int cell_input_width() const { return noise_dim + emb_dim; }

  static PolicyConfig for_problem(const SyntProblem& problem, int num_classes,
                                  int noise_dim = 64, int emb_dim = 8,
                                  std::vector<int> hidden = {128, 128});
};

// Per-variable categorical distributions produced by one (noise, label) input.
struct ActionDistribution {
  std::vector<std::vector<double>> per_cell;

  int dim() const { return static_cast<int>(per_cell.size()); }
};

struct SampledAction {
  Assignment assignment;
  double log_prob = 0.0;
  ActionDistribution distribution;
  std::vector<double> noise;  // flat dim x noise_dim, filled by the caller
  int label = 0;
};

// T independent softmax cells over a shared class-embedding table. All
// parameters live in one flat array: cell 0 .. cell T-1, then the embedding
// rows; that order is the deterministic update and checkpoint order.
class PolicyGenerator {
 public:
  PolicyGenerator(PolicyConfig cfg, SeededRng& init_rng);

  // All-zero parameters: every cell emits the uniform distribution.
  static PolicyGenerator zeroed(PolicyConfig cfg);

  const PolicyConfig& config() const { return cfg_; }
  int dim() const { return cfg_.dim; }
  int num_classes() const { return cfg_.num_classes; }

  std::span<const double> params() const { return params_; }
  std::span<double> params_mut() { return params_; }
  std::size_t param_count() const { return params_.size(); }
  // Parameters the optimizer may touch; excludes the frozen embedding of
  // unconditional generators (the embedding block is last).
  std::size_t trainable_count() const;

  const MlpLayout& cell_layout(int t) const { return layouts_[t]; }
  std::size_t cell_offset(int t) const { return cell_offsets_[t]; }
  std::size_t embedding_offset() const { return emb_offset_; }
  std::span<const double> cell_params(int t) const;
  std::span<const double> embedding_row(int label) const;

  std::string param_block_name(std::size_t index) const;

  // Concatenates one cell's noise block with the label's embedding row into
  // cache.input, runs the cell, and softmaxes the logits into probs.
  void cell_distribution(int t, std::span<const double> cell_noise, int label,
                         MlpCache& cache, std::span<double> probs) const;

  // noise: flat dim x noise_dim, cell-major.
  ActionDistribution act_distribution(std::span<const double> noise, int label) const;

 private:
  void build_layout();
  void check_label(int label) const;

  PolicyConfig cfg_;
  std::vector<MlpLayout> layouts_;
  std::vector<std::size_t> cell_offsets_;
  std::size_t emb_offset_ = 0;
  std::vector<double> params_;
};

// Inverse-CDF draw per cell; fills assignment values when problem is given.
SampledAction sample_action(SeededRng& rng, const ActionDistribution& dist,
                            const SyntProblem* problem = nullptr);

double log_prob(const ActionDistribution& dist, std::span<const int> indices);
double log_prob(const ActionDistribution& dist, const Assignment& a);

// Joint entropy of the product distribution = sum of per-cell entropies.
double entropy(const ActionDistribution& dist);

// log sum_{a in region} pi(a) = sum_t log sum_{j in allowed_t} p_t[j].
double region_log_mass(const ActionDistribution& dist, const RegionSpec& region);

// sum_{a in region} log pi(a) = sum_t (|region|/|allowed_t|) sum_{j in allowed_t} log p_t[j].
double region_sum_log(const ActionDistribution& dist, const RegionSpec& region);

// Versioned JSON checkpoint; round-trips parameters to full double precision.
nlohmann::json checkpoint_save(const PolicyGenerator& gen, const AdamState* optimizer = nullptr);
PolicyGenerator checkpoint_load(const nlohmann::json& doc, AdamState* optimizer = nullptr);

}  // namespace polygen
