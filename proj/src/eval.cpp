#include "polygen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polygen/parallel.hpp"

namespace polygen {

namespace {

// Per-thread forward buffers for one generator.
struct EvalScratch {
  std::vector<MlpCache> caches;              // per cell
  std::vector<std::vector<double>> probs;    // per cell

  EvalScratch(const PolicyGenerator& gen) {
    const int t_dim = gen.dim();
    caches.resize(t_dim);
    probs.resize(t_dim);
    for (int t = 0; t < t_dim; ++t) {
      caches[t].resize(gen.cell_layout(t));
      probs[t].assign(gen.config().cardinalities[t], 0.0);
    }
  }
};

// One generator draw: label handling, noise, per-cell inverse-CDF sampling.
// Draw order per stream: optional label, noise block, one uniform per cell.
void draw_sample(const PolicyGenerator& gen, const SyntProblem& problem, SeededRng& rng,
                 std::optional<int> fixed_label, EvalScratch& scratch, int* out_label,
                 int* out_indices, double* out_values, double* out_f, double* out_reward,
                 int* out_octant, bool* out_satisfied) {
  const PolicyConfig& cfg = gen.config();
  const int t_dim = cfg.dim;
  int label = 0;
  if (fixed_label.has_value())
    label = *fixed_label;
  else if (cfg.num_classes > 1)
    label = static_cast<int>(rng.uniform_index(cfg.num_classes));
  *out_label = label;

  std::vector<double> noise(static_cast<std::size_t>(t_dim) * cfg.noise_dim);
  for (double& z : noise) z = rng.gaussian();

  Assignment a;
  a.indices.resize(t_dim);
  a.values.resize(t_dim);
  for (int t = 0; t < t_dim; ++t) {
    gen.cell_distribution(t,
                          std::span<const double>(noise).subspan(
                              static_cast<std::size_t>(t) * cfg.noise_dim, cfg.noise_dim),
                          label, scratch.caches[t], scratch.probs[t]);
    const std::vector<double>& p = scratch.probs[t];
    const double u = rng.uniform01();
    double acc = 0.0;
    int chosen = static_cast<int>(p.size()) - 1;
    for (std::size_t j = 0; j < p.size(); ++j) {
      acc += p[j];
      if (u < acc) {
        chosen = static_cast<int>(j);
        break;
      }
    }
    a.indices[t] = chosen;
    a.values[t] = problem.domains[t].value(chosen);
    out_indices[t] = chosen;
    out_values[t] = a.values[t];
  }
  *out_f = f_test(problem, a);
  *out_reward = reward(problem, a);
  *out_octant = octant_of(a);
  *out_satisfied = *out_f < problem.threshold;
}

}  // namespace

EvalReport evaluate(const PolicyGenerator& gen, const SyntProblem& problem,
                    const EvalOptions& options, std::vector<SampleRow>* raw,
                    const OracleResult* oracle) {
  const PolicyConfig& cfg = gen.config();
  if (cfg.dim != problem.dim)
    throw std::invalid_argument("evaluate: generator has " + std::to_string(cfg.dim) +
                                " cells but the problem has " + std::to_string(problem.dim) +
                                " variables");
  for (int t = 0; t < cfg.dim; ++t)
    if (cfg.cardinalities[t] != problem.domains[t].cardinality)
      throw std::invalid_argument("evaluate: cell " + std::to_string(t) + " cardinality mismatch");
  if (options.label.has_value()) {
    if (!cfg.conditional)
      throw std::invalid_argument("evaluate: class label given to an unconditional generator");
    if (*options.label < 0 || *options.label >= cfg.num_classes)
      throw std::out_of_range("evaluate: class label out of range");
  }
  if (options.n < 1) throw std::invalid_argument("evaluate: sample count must be positive");

  const int t_dim = cfg.dim;
  const std::int64_t n = options.n;
  const int n_octants = 1 << t_dim;
  const SeededRng base(options.seed);

  std::vector<int> labels(n), octants(n);
  std::vector<std::uint8_t> satisfied(n);
  std::vector<double> fs(n), rewards(n);
  std::vector<int> indices(static_cast<std::size_t>(n) * t_dim);
  std::vector<double> values(static_cast<std::size_t>(n) * t_dim);

  const int threads = resolve_threads(options.threads);
  std::vector<EvalScratch> scratch(threads, EvalScratch(gen));
  parallel_for(n, threads, [&](std::int64_t i, int rank) {
    SeededRng rng = base.split(static_cast<std::uint64_t>(i));
    bool sat = false;
    draw_sample(gen, problem, rng, options.label, scratch[rank], &labels[i],
                indices.data() + static_cast<std::size_t>(i) * t_dim,
                values.data() + static_cast<std::size_t>(i) * t_dim, &fs[i], &rewards[i],
                &octants[i], &sat);
    satisfied[i] = sat ? 1 : 0;
  });

  EvalReport report;
  report.n_samples = n;
  report.per_octant_counts.assign(n_octants, 0);
  report.per_octant_satisfying.assign(n_octants, 0);
  double reward_sum = 0.0;
  std::int64_t n_satisfied = 0;
  std::vector<std::vector<int>> sat_indices;
  for (std::int64_t i = 0; i < n; ++i) {
    reward_sum += rewards[i];
    ++report.per_octant_counts[octants[i]];
    if (satisfied[i]) {
      ++n_satisfied;
      ++report.per_octant_satisfying[octants[i]];
      sat_indices.emplace_back(indices.begin() + static_cast<std::size_t>(i) * t_dim,
                               indices.begin() + static_cast<std::size_t>(i + 1) * t_dim);
    }
  }
  report.mean_reward = reward_sum / static_cast<double>(n);
  report.recovery_rate = static_cast<double>(n_satisfied) / static_cast<double>(n);

  if (n_satisfied > 0) {
    double h = 0.0;
    for (std::int64_t c : report.per_octant_satisfying) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(n_satisfied);
      h -= p * std::log(p);
    }
    report.uniformity = n_octants > 1 ? h / std::log(static_cast<double>(n_octants)) : 1.0;
    const double bar = options.coverage_threshold * static_cast<double>(n_satisfied);
    for (std::int64_t c : report.per_octant_satisfying)
      if (static_cast<double>(c) >= bar && c > 0) ++report.mode_coverage;
  }

  std::sort(sat_indices.begin(), sat_indices.end());
  sat_indices.erase(std::unique(sat_indices.begin(), sat_indices.end()), sat_indices.end());
  report.distinct_solutions = static_cast<std::int64_t>(sat_indices.size());
  if (oracle != nullptr) {
    report.oracle_total = oracle->total_count;
    if (oracle->total_count > 0)
      report.oracle_coverage =
          static_cast<double>(report.distinct_solutions) / static_cast<double>(oracle->total_count);
  }

  if (raw != nullptr) {
    raw->clear();
    raw->reserve(n);
    for (std::int64_t i = 0; i < n; ++i) {
      SampleRow row;
      row.id = i;
      row.label = labels[i];
      row.indices.assign(indices.begin() + static_cast<std::size_t>(i) * t_dim,
                         indices.begin() + static_cast<std::size_t>(i + 1) * t_dim);
      row.values.assign(values.begin() + static_cast<std::size_t>(i) * t_dim,
                        values.begin() + static_cast<std::size_t>(i + 1) * t_dim);
      row.f = fs[i];
      row.reward = rewards[i];
      row.octant = octants[i];
      row.satisfied = satisfied[i] != 0;
      raw->push_back(std::move(row));
    }
  }
  return report;
}

ConfusionMatrix confusion(const PolicyGenerator& gen, const SyntProblem& problem,
                          const ConditionSet& conditions, std::int64_t n_per_class,
                          std::uint64_t seed, int threads) {
  const PolicyConfig& cfg = gen.config();
  if (!cfg.conditional) throw std::invalid_argument("confusion: generator is unconditional");
  const int num_classes = conditions.num_classes();
  if (num_classes != cfg.num_classes)
    throw std::invalid_argument("confusion: condition count does not match generator classes");
  if (num_classes != (1 << problem.dim))
    throw std::invalid_argument("confusion: expected one region per octant (2^dim classes)");
  if (n_per_class < 1) throw std::invalid_argument("confusion: n_per_class must be positive");

  const int t_dim = problem.dim;
  const std::int64_t total = static_cast<std::int64_t>(num_classes) * n_per_class;
  const SeededRng base(seed);

  std::vector<int> octants(total);
  std::vector<std::uint8_t> joint(total);
  const int p = resolve_threads(threads);
  std::vector<EvalScratch> scratch(p, EvalScratch(gen));
  parallel_for(total, p, [&](std::int64_t k, int rank) {
    const int label = static_cast<int>(k / n_per_class);
    SeededRng rng = base.split(static_cast<std::uint64_t>(k));
    int drawn_label = 0;
    std::vector<int> idx(t_dim);
    std::vector<double> vals(t_dim);
    double f = 0.0, r = 0.0;
    int octant = 0;
    bool sat = false;
    draw_sample(gen, problem, rng, label, scratch[rank], &drawn_label, idx.data(), vals.data(),
                &f, &r, &octant, &sat);
    octants[k] = octant;
    Assignment a{idx, vals};
    joint[k] = (region_membership(a, conditions.regions[label]) && sat) ? 1 : 0;
  });

  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.n_per_class = n_per_class;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  cm.per_class_accuracy.assign(num_classes, 0.0);
  cm.joint_rate.assign(num_classes, 0.0);
  std::int64_t diag = 0;
  for (std::int64_t k = 0; k < total; ++k) {
    const int label = static_cast<int>(k / n_per_class);
    ++cm.counts[static_cast<std::size_t>(label) * num_classes + octants[k]];
    if (joint[k]) cm.joint_rate[label] += 1.0;
  }
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t d = cm.at(c, c);
    diag += d;
    cm.per_class_accuracy[c] = static_cast<double>(d) / static_cast<double>(n_per_class);
    cm.joint_rate[c] /= static_cast<double>(n_per_class);
  }
  cm.overall_accuracy = static_cast<double>(diag) / static_cast<double>(total);
  return cm;
}

std::vector<std::int64_t> reward_histogram(const std::vector<SampleRow>& rows, int bins) {
  if (rows.empty()) throw std::invalid_argument("reward_histogram: empty sample table");
  if (bins < 1) throw std::invalid_argument("reward_histogram: bins must be positive");
  std::vector<std::int64_t> counts(bins, 0);
  const double width = 1.0 / bins;  // over [-1, 0]
  for (const SampleRow& row : rows) {
    int b = static_cast<int>(std::floor((row.reward + 1.0) / width));
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  return counts;
}

}  // namespace polygen
