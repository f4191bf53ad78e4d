#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polygen/policy.hpp"
#include "polygen/problem.hpp"

namespace polygen {

enum class NllForm { log_mass, sum_log };

const char* nll_form_name(NllForm form);
NllForm nll_form_from_name(const std::string& name);

struct TrainConfig {
  std::int64_t iterations = 30000;
  int batch_size = 32;
  // Entropy weight: large enough that the entropy force rebalances the
  // per-cell +/- masses within a run (mode coverage), small enough that the
  // Gibbs-like stationary policy keeps little mass on just-outside-boundary
  // grid cells (recovery). Calibrated on Synt-3D.
  double alpha = 0.007;
  double beta_max = 1.0;
  std::int64_t beta_ramp = 5000;  // iterations over which beta rises linearly from 0
  NllForm nll_form = NllForm::log_mass;
  AdamConfig optimizer;
  std::uint64_t seed = 0;
  int noise_dim = 64;
  int emb_dim = 8;
  std::vector<int> hidden = {128, 128};
  std::int64_t checkpoint_every = 0;  // 0 = only at completion
  int threads = 0;
  // Optional early exit once the trailing-window mean reward clears the bar.
  bool stop_on_converge = false;
  double converge_reward = -0.05;
  int converge_window = 1000;

  void validate() const;
};

struct TrainRecord {
  std::int64_t iteration = 0;  // 1-based
  std::int64_t samples_cum = 0;
  double mean_reward = 0.0;
  double loss_pg = 0.0;
  double loss_ent = 0.0;
  double loss_nll = 0.0;
  double loss_total = 0.0;
  double beta = 0.0;
  double baseline = 0.0;
};

struct LossComponents {
  double pg = 0.0;
  double ent = 0.0;
  double nll = 0.0;
  double total() const { return pg + ent + nll; }
};

// One drawn training sample; self-contained so losses and gradients are pure
// functions of the generator parameters.
struct BatchSample {
  std::vector<double> noise;  // flat dim x noise_dim, cell-major
  int label = 0;
  std::vector<int> action;  // domain indices, one per cell
  double reward = 0.0;
};

struct Batch {
  std::vector<BatchSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  double mean_reward() const;
};

// Scratch for assembling batches and accumulating gradients without
// per-iteration allocation. Parallel paths write per-(cell, sample) slots and
// reduce in a fixed order, so results are independent of the thread count.
struct TrainWorkspace {
  TrainWorkspace(const PolicyGenerator& gen, int batch_size, int threads);

  int batch_size = 0;
  int dim = 0;
  int threads = 1;
  Batch batch;
  std::vector<MlpCache> caches;              // batch_size x dim, index i*dim+t
  std::vector<std::vector<double>> probs;    // batch_size x dim
  std::vector<MlpWork> works;                // per thread
  std::vector<std::vector<double>> in_grads; // per thread, cell input width
  std::vector<std::vector<double>> glogits;  // per thread, widest cell
  std::vector<double> grad;                  // param_count
  std::vector<double> emb_grads;             // dim x batch_size x emb_dim, slot (t*N+i)
  std::vector<double> lp, ent, nll;          // dim x batch_size scalars, slot t*N+i
};

double beta_at(const TrainConfig& config, std::int64_t iteration);

// Draws one batch from the current generator: per sample an own random
// stream yields the class label, the noise block, and the action draws; the
// reward comes from the problem. Fills workspace caches for the gradient pass.
void assemble_batch(const PolicyGenerator& gen, const SyntProblem& problem,
                    const ConditionSet& conditions, const SeededRng& base,
                    std::int64_t iteration, TrainWorkspace& ws);

// Loss components of the three-term objective on a fixed batch; pure in the
// generator parameters (forward passes only).
LossComponents batch_losses(const PolicyGenerator& gen, const ConditionSet& conditions,
                            const Batch& batch, double baseline, double alpha, double beta,
                            NllForm form);

// Exact gradient of batch_losses with respect to every cell parameter and the
// embedding table, accumulated in fixed sample order into ws.grad. Returns
// the loss components of the same batch. Cells run in parallel; reductions
// are ordered, so the result is bit-identical for any thread count.
LossComponents batch_gradients(const PolicyGenerator& gen, const ConditionSet& conditions,
                               double baseline, double alpha, double beta, NllForm form,
                               TrainWorkspace& ws);

// Sample-major reference implementation of batch_gradients, kept for testing
// the parallel kernel; writes into grad (param_count, cleared here).
LossComponents batch_gradients_serial(const PolicyGenerator& gen, const ConditionSet& conditions,
                                      const Batch& batch, double baseline, double alpha,
                                      double beta, NllForm form, std::vector<double>& grad);

struct TrainCallbacks {
  // Called after each recorded iteration (1-based); return value ignored.
  std::function<void(const TrainRecord&, const PolicyGenerator&)> on_record;
  // Called at the checkpoint cadence and at completion.
  std::function<void(std::int64_t iteration, const PolicyGenerator&)> on_checkpoint;
};

struct TrainResult {
  PolicyGenerator gen;
  std::vector<TrainRecord> trajectory;
  bool aborted = false;
  std::string abort_reason;
  std::optional<std::int64_t> converged_at;  // first iteration meeting the trailing criterion
};

// Full training loop: initialize, iterate sample/evaluate/update with the
// previous-batch mean reward as baseline, record one row per iteration.
// Deterministic for a fixed config regardless of thread count.
TrainResult train(const SyntProblem& problem, const ConditionSet& conditions,
                  const TrainConfig& config, const TrainCallbacks* callbacks = nullptr);

// First 1-based iteration whose trailing `window` mean reward exceeds
// `bar`, or nullopt. Windows shorter than `window` do not count.
std::optional<std::int64_t> convergence_iteration(const std::vector<TrainRecord>& trajectory,
                                                  int window = 1000, double bar = -0.05);

}  // namespace polygen
