#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "polygen/policy.hpp"
#include "polygen/problem.hpp"

namespace polygen {

struct EvalOptions {
  std::int64_t n = 5000;
  std::optional<int> label;  // fixed class; unset = draw uniformly (or 0 when L = 1)
  std::uint64_t seed = 1;
  int threads = 0;
  double coverage_threshold = 0.02;  // octant counts as covered at this share of satisfying samples
};

struct SampleRow {
  std::int64_t id = 0;
  int label = 0;
  std::vector<int> indices;
  std::vector<double> values;
  double f = 0.0;
  double reward = 0.0;
  int octant = 0;
  bool satisfied = false;
};

struct EvalReport {
  std::int64_t n_samples = 0;
  double recovery_rate = 0.0;
  double mean_reward = 0.0;
  std::vector<std::int64_t> per_octant_counts;      // all samples
  std::vector<std::int64_t> per_octant_satisfying;  // samples meeting the static constraint
  int mode_coverage = 0;
  double uniformity = 0.0;  // normalized octant-histogram entropy of satisfying samples
  std::int64_t distinct_solutions = 0;
  std::optional<std::int64_t> oracle_total;
  std::optional<double> oracle_coverage;
};

// Draws n (noise, action) pairs from the generator, one random stream per
// sample, and aggregates the report; fills `raw` with one row per sample when
// given. Deterministic for fixed seed regardless of thread count.
EvalReport evaluate(const PolicyGenerator& gen, const SyntProblem& problem,
                    const EvalOptions& options, std::vector<SampleRow>* raw = nullptr,
                    const OracleResult* oracle = nullptr);

struct ConfusionMatrix {
  int num_classes = 0;
  std::int64_t n_per_class = 0;
  std::vector<std::int64_t> counts;  // num_classes x num_classes, row = class, col = octant
  std::vector<double> per_class_accuracy;
  double overall_accuracy = 0.0;
  // Fraction per class that lands in the class region AND satisfies the
  // static constraint.
  std::vector<double> joint_rate;

  std::int64_t at(int row, int col) const {
    return counts[static_cast<std::size_t>(row) * num_classes + col];
  }
};

// Class-conditioned octant binning; requires conditions with one region per
// octant (num_classes == 2^dim).
ConfusionMatrix confusion(const PolicyGenerator& gen, const SyntProblem& problem,
                          const ConditionSet& conditions, std::int64_t n_per_class,
                          std::uint64_t seed, int threads = 0);

// Equal-width bins over [-1, 0]; a reward of exactly 0 lands in the last bin.
std::vector<std::int64_t> reward_histogram(const std::vector<SampleRow>& rows, int bins);

}  // namespace polygen
