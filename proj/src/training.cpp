#include "polygen/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polygen/parallel.hpp"

namespace polygen {

const char* nll_form_name(NllForm form) {
  return form == NllForm::log_mass ? "log-mass" : "sum-log";
}

NllForm nll_form_from_name(const std::string& name) {
  if (name == "log-mass") return NllForm::log_mass;
  if (name == "sum-log") return NllForm::sum_log;
  throw std::invalid_argument("unknown nll form: " + name + " (expected log-mass or sum-log)");
}

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (alpha < 0.0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
  if (beta_max < 0.0) throw std::invalid_argument("TrainConfig: beta_max must be >= 0");
  if (beta_ramp < 0) throw std::invalid_argument("TrainConfig: beta_ramp must be >= 0");
  if (optimizer.lr <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
  if (noise_dim < 1 || emb_dim < 1) throw std::invalid_argument("TrainConfig: noise/embedding dims must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
  if (converge_window < 1) throw std::invalid_argument("TrainConfig: converge_window must be positive");
}

double Batch::mean_reward() const {
  double sum = 0.0;
  for (const BatchSample& s : samples) sum += s.reward;
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

double beta_at(const TrainConfig& config, std::int64_t iteration) {
  if (iteration < 0) throw std::invalid_argument("beta_at: iteration must be >= 0");
  if (iteration >= config.beta_ramp) return config.beta_max;
  return config.beta_max * static_cast<double>(iteration) / static_cast<double>(config.beta_ramp);
}

TrainWorkspace::TrainWorkspace(const PolicyGenerator& gen, int batch_size_, int threads_)
    : batch_size(batch_size_), dim(gen.dim()), threads(resolve_threads(threads_)) {
  const PolicyConfig& cfg = gen.config();
  batch.samples.resize(batch_size);
  for (BatchSample& s : batch.samples) {
    s.noise.assign(static_cast<std::size_t>(dim) * cfg.noise_dim, 0.0);
    s.action.assign(dim, 0);
  }
  caches.resize(static_cast<std::size_t>(batch_size) * dim);
  probs.resize(static_cast<std::size_t>(batch_size) * dim);
  int widest_cell = 0;
  for (int t = 0; t < dim; ++t)
    if (cfg.cardinalities[t] > cfg.cardinalities[widest_cell]) widest_cell = t;
  for (int i = 0; i < batch_size; ++i) {
    for (int t = 0; t < dim; ++t) {
      caches[static_cast<std::size_t>(i) * dim + t].resize(gen.cell_layout(t));
      probs[static_cast<std::size_t>(i) * dim + t].assign(cfg.cardinalities[t], 0.0);
    }
  }
  works.resize(threads);
  in_grads.resize(threads);
  glogits.resize(threads);
  for (int r = 0; r < threads; ++r) {
    works[r].resize(gen.cell_layout(widest_cell));
    in_grads[r].assign(cfg.cell_input_width(), 0.0);
    glogits[r].assign(cfg.cardinalities[widest_cell], 0.0);
  }
  grad.assign(gen.param_count(), 0.0);
  emb_grads.assign(static_cast<std::size_t>(dim) * batch_size * cfg.emb_dim, 0.0);
  lp.assign(static_cast<std::size_t>(dim) * batch_size, 0.0);
  ent.assign(static_cast<std::size_t>(dim) * batch_size, 0.0);
  nll.assign(static_cast<std::size_t>(dim) * batch_size, 0.0);
}

namespace {

// Precomputed per-(label, cell) region structure for the NLL term.
struct RegionTables {
  int num_classes = 0;
  int dim = 0;
  // member[label][t][j]
  std::vector<std::vector<std::vector<std::uint8_t>>> member;
  std::vector<std::vector<int>> set_size;         // [label][t]
  std::vector<std::vector<double>> sumlog_weight; // [label][t] = prod_{s != t} |S_s|
};

RegionTables build_region_tables(const PolicyConfig& cfg, const ConditionSet& conditions) {
  RegionTables rt;
  rt.num_classes = conditions.num_classes();
  rt.dim = cfg.dim;
  rt.member.resize(rt.num_classes);
  rt.set_size.resize(rt.num_classes);
  rt.sumlog_weight.resize(rt.num_classes);
  for (int l = 0; l < rt.num_classes; ++l) {
    const RegionSpec& region = conditions.regions[l];
    if (static_cast<int>(region.allowed.size()) != cfg.dim)
      throw std::invalid_argument("condition region dimension mismatch");
    rt.member[l].resize(cfg.dim);
    rt.set_size[l].resize(cfg.dim);
    rt.sumlog_weight[l].resize(cfg.dim);
    for (int t = 0; t < cfg.dim; ++t) {
      rt.member[l][t].assign(cfg.cardinalities[t], 0);
      for (int j : region.allowed[t]) {
        if (j < 0 || j >= cfg.cardinalities[t])
          throw std::invalid_argument("condition region index out of range");
        rt.member[l][t][j] = 1;
      }
      rt.set_size[l][t] = static_cast<int>(region.allowed[t].size());
      double w = 1.0;
      for (int s = 0; s < cfg.dim; ++s)
        if (s != t) w *= static_cast<double>(region.allowed[s].size());
      rt.sumlog_weight[l][t] = w;
    }
  }
  return rt;
}

// Everything the three loss terms need from one (cell, sample) pair. When
// glogits is non-null it receives the combined gradient at the cell's logits.
void cell_terms(std::span<const double> probs, int action, double adv_coeff, double ent_coeff,
                double nll_coeff, NllForm form, const std::vector<std::uint8_t>& member,
                int set_size, double sumlog_weight, double* glogits, double& lp_out,
                double& ent_out, double& nll_out) {
  const int card = static_cast<int>(probs.size());
  double cell_entropy = 0.0;
  for (int k = 0; k < card; ++k) cell_entropy -= probs[k] * floored_log(probs[k]);
  lp_out = floored_log(probs[action]);
  ent_out = cell_entropy;

  double mass = 0.0;
  double masked_sum_log = 0.0;
  if (nll_coeff != 0.0) {
    if (form == NllForm::log_mass) {
      for (int k = 0; k < card; ++k)
        if (member[k]) mass += probs[k];
      nll_out = floored_log(mass);
    } else {
      for (int k = 0; k < card; ++k)
        if (member[k]) masked_sum_log += floored_log(probs[k]);
      nll_out = sumlog_weight * masked_sum_log;
    }
  } else {
    nll_out = 0.0;
  }

  if (glogits == nullptr) return;
  const double safe_mass = mass > kProbFloor ? mass : kProbFloor;
  for (int k = 0; k < card; ++k) {
    const double p = probs[k];
    double g = adv_coeff * ((k == action ? 1.0 : 0.0) - p);
    g += ent_coeff * p * (floored_log(p) + cell_entropy);
    if (nll_coeff != 0.0) {
      if (form == NllForm::log_mass) {
        g += -nll_coeff * (member[k] ? p / safe_mass : 0.0) + nll_coeff * p;
      } else {
        g += -nll_coeff * sumlog_weight * ((member[k] ? 1.0 : 0.0) - set_size * p);
      }
    }
    glogits[k] = g;
  }
}

LossComponents reduce_losses(const Batch& batch, const double* lp, const double* ent,
                             const double* nll, int dim, double baseline, double alpha,
                             double beta) {
  const int n = batch.size();
  double acc_pg = 0.0, acc_ent = 0.0, acc_nll = 0.0;
  for (int i = 0; i < n; ++i) {
    double lp_i = 0.0, ent_i = 0.0, nll_i = 0.0;
    for (int t = 0; t < dim; ++t) {
      lp_i += lp[static_cast<std::size_t>(t) * n + i];
      ent_i += ent[static_cast<std::size_t>(t) * n + i];
      nll_i += nll[static_cast<std::size_t>(t) * n + i];
    }
    acc_pg += (batch.samples[i].reward - baseline) * lp_i;
    acc_ent += ent_i;
    acc_nll += nll_i;
  }
  LossComponents out;
  out.pg = -acc_pg / n;
  out.ent = -alpha * acc_ent / n;
  out.nll = -beta * acc_nll / n;
  return out;
}

void check_batch_labels(const Batch& batch, int num_classes) {
  for (const BatchSample& s : batch.samples)
    if (s.label < 0 || s.label >= num_classes)
      throw std::invalid_argument("batch sample label out of range");
}

}  // namespace

void assemble_batch(const PolicyGenerator& gen, const SyntProblem& problem,
                    const ConditionSet& conditions, const SeededRng& base,
                    std::int64_t iteration, TrainWorkspace& ws) {
  const PolicyConfig& cfg = gen.config();
  const int n = ws.batch_size;
  const int t_dim = ws.dim;
  const int num_classes = conditions.num_classes();
  if (num_classes != gen.num_classes())
    throw std::invalid_argument("assemble_batch: condition count does not match generator classes");

  parallel_for(n, ws.threads, [&](std::int64_t i, int) {
    BatchSample& s = ws.batch.samples[i];
    // Stream 0 belongs to initialization; samples use 1 + global index.
    // Draw order per sample: class label, noise block, one action per cell.
    SeededRng rng = base.split(1 + static_cast<std::uint64_t>(iteration) * n + i);
    s.label = num_classes > 1 ? static_cast<int>(rng.uniform_index(num_classes)) : 0;
    for (double& z : s.noise) z = rng.gaussian();
    Assignment a;
    a.indices.resize(t_dim);
    a.values.resize(t_dim);
    for (int t = 0; t < t_dim; ++t) {
      MlpCache& cache = ws.caches[static_cast<std::size_t>(i) * t_dim + t];
      std::vector<double>& p = ws.probs[static_cast<std::size_t>(i) * t_dim + t];
      gen.cell_distribution(t,
                            std::span<const double>(s.noise).subspan(
                                static_cast<std::size_t>(t) * cfg.noise_dim, cfg.noise_dim),
                            s.label, cache, p);
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
      s.action[t] = chosen;
    }
    s.reward = reward(problem, a);
  });
}

LossComponents batch_losses(const PolicyGenerator& gen, const ConditionSet& conditions,
                            const Batch& batch, double baseline, double alpha, double beta,
                            NllForm form) {
  const PolicyConfig& cfg = gen.config();
  const int n = batch.size();
  const int t_dim = cfg.dim;
  if (n == 0) throw std::invalid_argument("batch_losses: empty batch");
  check_batch_labels(batch, conditions.num_classes());

  std::vector<double> lp(static_cast<std::size_t>(t_dim) * n, 0.0);
  std::vector<double> ent(static_cast<std::size_t>(t_dim) * n, 0.0);
  std::vector<double> nll(static_cast<std::size_t>(t_dim) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const BatchSample& s = batch.samples[i];
    const ActionDistribution dist = gen.act_distribution(s.noise, s.label);
    const RegionSpec& region = conditions.regions[s.label];
    for (int t = 0; t < t_dim; ++t) {
      const std::size_t slot = static_cast<std::size_t>(t) * n + i;
      lp[slot] = floored_log(dist.per_cell[t][s.action[t]]);
      double h = 0.0;
      for (double p : dist.per_cell[t]) h -= p * floored_log(p);
      ent[slot] = h;
      if (beta != 0.0) {
        if (form == NllForm::log_mass) {
          double mass = 0.0;
          for (int j : region.allowed[t]) mass += dist.per_cell[t][j];
          nll[slot] = floored_log(mass);
        } else {
          double w = 1.0;
          for (int u = 0; u < t_dim; ++u)
            if (u != t) w *= static_cast<double>(region.allowed[u].size());
          double sum_log = 0.0;
          for (int j : region.allowed[t]) sum_log += floored_log(dist.per_cell[t][j]);
          nll[slot] = w * sum_log;
        }
      }
    }
  }
  return reduce_losses(batch, lp.data(), ent.data(), nll.data(), t_dim, baseline, alpha, beta);
}

LossComponents batch_gradients(const PolicyGenerator& gen, const ConditionSet& conditions,
                               double baseline, double alpha, double beta, NllForm form,
                               TrainWorkspace& ws) {
  const PolicyConfig& cfg = gen.config();
  const int n = ws.batch_size;
  const int t_dim = ws.dim;
  check_batch_labels(ws.batch, conditions.num_classes());
  const RegionTables rt = build_region_tables(cfg, conditions);

  std::fill(ws.grad.begin(), ws.grad.end(), 0.0);
  const std::span<const double> params = gen.params();

  // Cells own disjoint parameter slices, so each can accumulate its block
  // independently; per-sample work stays in sample order inside a cell.
  parallel_for(t_dim, ws.threads, [&](std::int64_t t, int rank) {
    const MlpLayout& layout = gen.cell_layout(static_cast<int>(t));
    const std::span<const double> cell_params(params.data() + gen.cell_offset(static_cast<int>(t)),
                                              layout.param_count);
    std::span<double> cell_grad(ws.grad.data() + gen.cell_offset(static_cast<int>(t)),
                                layout.param_count);
    MlpWork& work = ws.works[rank];
    std::vector<double>& in_grad = ws.in_grads[rank];
    std::vector<double>& glog = ws.glogits[rank];
    for (int i = 0; i < n; ++i) {
      const BatchSample& s = ws.batch.samples[i];
      const std::size_t pair = static_cast<std::size_t>(i) * t_dim + t;
      const std::size_t slot = static_cast<std::size_t>(t) * n + i;
      const double adv_coeff = -(s.reward - baseline) / n;
      const double ent_coeff = alpha / n;
      const double nll_coeff = beta / n;
      cell_terms(ws.probs[pair], s.action[t], adv_coeff, ent_coeff, nll_coeff, form,
                 rt.member[s.label][t], rt.set_size[s.label][t], rt.sumlog_weight[s.label][t],
                 glog.data(), ws.lp[slot], ws.ent[slot], ws.nll[slot]);
      mlp_backward(layout, cell_params, ws.caches[pair],
                   std::span<const double>(glog.data(), ws.probs[pair].size()), cell_grad,
                   in_grad, work);
      // Embedding slice of the input gradient, reduced later in sample order.
      std::copy(in_grad.begin() + cfg.noise_dim, in_grad.begin() + cfg.cell_input_width(),
                ws.emb_grads.begin() + (static_cast<std::size_t>(t) * n + i) * cfg.emb_dim);
    }
  });

  // Sample-major embedding reduction matches the serial reference order.
  double* emb_grad = ws.grad.data() + gen.embedding_offset();
  for (int i = 0; i < n; ++i) {
    const int label = ws.batch.samples[i].label;
    for (int t = 0; t < t_dim; ++t) {
      const double* src = ws.emb_grads.data() + (static_cast<std::size_t>(t) * n + i) * cfg.emb_dim;
      double* dst = emb_grad + static_cast<std::size_t>(label) * cfg.emb_dim;
      for (int d = 0; d < cfg.emb_dim; ++d) dst[d] += src[d];
    }
  }

  return reduce_losses(ws.batch, ws.lp.data(), ws.ent.data(), ws.nll.data(), t_dim, baseline,
                       alpha, beta);
}

LossComponents batch_gradients_serial(const PolicyGenerator& gen, const ConditionSet& conditions,
                                      const Batch& batch, double baseline, double alpha,
                                      double beta, NllForm form, std::vector<double>& grad) {
  const PolicyConfig& cfg = gen.config();
  const int n = batch.size();
  const int t_dim = cfg.dim;
  if (n == 0) throw std::invalid_argument("batch_gradients_serial: empty batch");
  check_batch_labels(batch, conditions.num_classes());
  const RegionTables rt = build_region_tables(cfg, conditions);

  grad.assign(gen.param_count(), 0.0);
  const std::span<const double> params = gen.params();
  double* emb_grad = grad.data() + gen.embedding_offset();

  std::vector<double> lp(static_cast<std::size_t>(t_dim) * n, 0.0);
  std::vector<double> ent(static_cast<std::size_t>(t_dim) * n, 0.0);
  std::vector<double> nll(static_cast<std::size_t>(t_dim) * n, 0.0);
  MlpCache cache;
  MlpWork work;
  std::vector<double> in_grad(cfg.cell_input_width(), 0.0);
  std::vector<double> glog;
  std::vector<double> probs;
  for (int i = 0; i < n; ++i) {
    const BatchSample& s = batch.samples[i];
    for (int t = 0; t < t_dim; ++t) {
      const MlpLayout& layout = gen.cell_layout(t);
      cache.resize(layout);
      work.resize(layout);
      probs.assign(cfg.cardinalities[t], 0.0);
      glog.assign(cfg.cardinalities[t], 0.0);
      gen.cell_distribution(t,
                            std::span<const double>(s.noise).subspan(
                                static_cast<std::size_t>(t) * cfg.noise_dim, cfg.noise_dim),
                            s.label, cache, probs);
      const std::size_t slot = static_cast<std::size_t>(t) * n + i;
      cell_terms(probs, s.action[t], -(s.reward - baseline) / n, alpha / n, beta / n, form,
                 rt.member[s.label][t], rt.set_size[s.label][t], rt.sumlog_weight[s.label][t],
                 glog.data(), lp[slot], ent[slot], nll[slot]);
      const std::span<const double> cell_params(params.data() + gen.cell_offset(t),
                                                layout.param_count);
      std::span<double> cell_grad(grad.data() + gen.cell_offset(t), layout.param_count);
      mlp_backward(layout, cell_params, cache, glog, cell_grad, in_grad, work);
      double* dst = emb_grad + static_cast<std::size_t>(s.label) * cfg.emb_dim;
      for (int d = 0; d < cfg.emb_dim; ++d) dst[d] += in_grad[cfg.noise_dim + d];
    }
  }
  return reduce_losses(batch, lp.data(), ent.data(), nll.data(), t_dim, baseline, alpha, beta);
}

TrainResult train(const SyntProblem& problem, const ConditionSet& conditions,
                  const TrainConfig& config, const TrainCallbacks* callbacks) {
  config.validate();
  validate_conditions(problem, conditions);
  const int num_classes = conditions.num_classes();

  PolicyConfig pcfg = PolicyConfig::for_problem(problem, num_classes, config.noise_dim,
                                                config.emb_dim, config.hidden);
  SeededRng root(config.seed);
  SeededRng init_rng = root.split(0);
  TrainResult result{PolicyGenerator(pcfg, init_rng), {}, false, "", std::nullopt};
  PolicyGenerator& gen = result.gen;

  if (config.iterations == 0) return result;

  AdamState optimizer(gen.param_count(), config.optimizer);
  TrainWorkspace ws(gen, config.batch_size, config.threads);
  const std::function<std::string(std::size_t)> block_name = [&gen](std::size_t i) {
    return gen.param_block_name(i);
  };

  double baseline = 0.0;  // first batch uses b = 0
  result.trajectory.reserve(static_cast<std::size_t>(config.iterations));

  for (std::int64_t iter = 0; iter < config.iterations; ++iter) {
    // The NLL term only exists for a real classification task.
    const double beta = num_classes > 1 ? beta_at(config, iter) : 0.0;
    assemble_batch(gen, problem, conditions, root, iter, ws);
    const LossComponents losses =
        batch_gradients(gen, conditions, baseline, config.alpha, beta, config.nll_form, ws);
    const double mean_reward = ws.batch.mean_reward();

    TrainRecord record;
    record.iteration = iter + 1;
    record.samples_cum = (iter + 1) * config.batch_size;
    record.mean_reward = mean_reward;
    record.loss_pg = losses.pg;
    record.loss_ent = losses.ent;
    record.loss_nll = losses.nll;
    record.loss_total = losses.total();
    record.beta = beta;
    record.baseline = baseline;
    result.trajectory.push_back(record);
    if (callbacks && callbacks->on_record) callbacks->on_record(record, gen);

    if (!std::isfinite(record.loss_total)) {
      result.aborted = true;
      result.abort_reason = "non-finite loss at iteration " + std::to_string(record.iteration);
      return result;
    }
    try {
      optimizer.step(gen.params_mut(), ws.grad, gen.trainable_count(), &block_name);
    } catch (const std::runtime_error& e) {
      result.aborted = true;
      result.abort_reason = std::string(e.what()) + " at iteration " + std::to_string(record.iteration);
      return result;
    }
    baseline = mean_reward;

    if (!result.converged_at && record.iteration >= config.converge_window) {
      double sum = 0.0;
      const std::size_t count = result.trajectory.size();
      for (std::size_t k = count - config.converge_window; k < count; ++k)
        sum += result.trajectory[k].mean_reward;
      if (sum / config.converge_window > config.converge_reward)
        result.converged_at = record.iteration;
    }
    if (callbacks && callbacks->on_checkpoint && config.checkpoint_every > 0 &&
        record.iteration % config.checkpoint_every == 0)
      callbacks->on_checkpoint(record.iteration, gen);
    if (config.stop_on_converge && result.converged_at) break;
  }
  return result;
}

std::optional<std::int64_t> convergence_iteration(const std::vector<TrainRecord>& trajectory,
                                                  int window, double bar) {
  if (window < 1) throw std::invalid_argument("convergence_iteration: window must be positive");
  for (std::size_t i = static_cast<std::size_t>(window) - 1; i < trajectory.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = i + 1 - window; k <= i; ++k) sum += trajectory[k].mean_reward;
    if (sum / window > bar) return trajectory[i].iteration;
  }
  return std::nullopt;
}

}  // namespace polygen
