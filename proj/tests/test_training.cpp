#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"

#include "polygen/problem.hpp"
#include "polygen/training.hpp"

using namespace polygen;

namespace {

PolicyConfig toy_config(int dim, int card, int num_classes, std::vector<int> hidden,
                        int noise_dim, int emb_dim) {
  PolicyConfig cfg;
  cfg.dim = dim;
  cfg.cardinalities.assign(dim, card);
  cfg.noise_dim = noise_dim;
  cfg.emb_dim = emb_dim;
  cfg.num_classes = num_classes;
  cfg.conditional = num_classes > 1;
  cfg.hidden = std::move(hidden);
  return cfg;
}

// Random per-class factorized regions (non-empty, in-range, sorted).
ConditionSet random_conditions(SeededRng& rng, int dim, int card, int num_classes) {
  ConditionSet cs;
  for (int l = 0; l < num_classes; ++l) {
    RegionSpec region;
    for (int t = 0; t < dim; ++t) {
      std::vector<int> allowed;
      for (int j = 0; j < card; ++j)
        if (rng.uniform01() < 0.5) allowed.push_back(j);
      if (allowed.empty()) allowed.push_back(static_cast<int>(rng.uniform_index(card)));
      region.allowed.push_back(std::move(allowed));
    }
    cs.regions.push_back(std::move(region));
  }
  return cs;
}

// Central finite differences of batch_losses totals against the analytic
// gradient, every parameter coordinate.
void check_gradient_fd(const PolicyGenerator& gen, const ConditionSet& conditions,
                       const Batch& batch, double baseline, double alpha, double beta,
                       NllForm form) {
  std::vector<double> grad;
  batch_gradients_serial(gen, conditions, batch, baseline, alpha, beta, form, grad);
  PolicyGenerator probe = gen;
  const double h = 1e-5;
  for (std::size_t i = 0; i < probe.param_count(); ++i) {
    const double saved = probe.params()[i];
    probe.params_mut()[i] = saved + h;
    const double up = batch_losses(probe, conditions, batch, baseline, alpha, beta, form).total();
    probe.params_mut()[i] = saved - h;
    const double down = batch_losses(probe, conditions, batch, baseline, alpha, beta, form).total();
    probe.params_mut()[i] = saved;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    const double rel = std::abs(fd - grad[i]) / scale;
    if (rel > 1e-4) {
      CAPTURE(i);
      CAPTURE(fd);
      CAPTURE(grad[i]);
      CHECK(rel <= 1e-4);
      return;
    }
  }
  CHECK(true);
}

}  // namespace

TEST_CASE("beta schedule") {
  TrainConfig cfg;
  cfg.beta_max = 1.0;
  cfg.beta_ramp = 5000;
  CHECK(beta_at(cfg, 0) == 0.0);
  CHECK(beta_at(cfg, 2500) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(beta_at(cfg, 5000) == 1.0);
  CHECK(beta_at(cfg, 123456) == 1.0);
  double prev = -1.0;
  for (int i = 0; i < 7000; i += 13) {
    const double b = beta_at(cfg, i);
    CHECK(b >= prev);
    CHECK(b <= cfg.beta_max);
    prev = b;
  }
  cfg.beta_ramp = 0;
  CHECK(beta_at(cfg, 0) == 1.0);
  CHECK_THROWS(beta_at(cfg, -1));
}

TEST_CASE("hand-computed batch losses on a single-cell toy policy") {
  // T=1, card=3, no hidden layer, noise_dim=2, emb_dim=1, two classes.
  const PolicyConfig cfg = toy_config(1, 3, 2, {}, 2, 1);
  PolicyGenerator gen = PolicyGenerator::zeroed(cfg);
  auto params = gen.params_mut();
  const double w[] = {0.2, -0.3, 0.5, -0.1, 0.4, 0.2, 0.0, 0.1, -0.6};
  const double b[] = {0.05, -0.1, 0.0};
  std::copy(w, w + 9, params.begin());
  std::copy(b, b + 3, params.begin() + 9);
  params[gen.embedding_offset()] = 0.7;
  params[gen.embedding_offset() + 1] = -0.9;

  ConditionSet conditions;
  conditions.regions.push_back(RegionSpec{{{0, 1}}});
  conditions.regions.push_back(RegionSpec{{{2}}});

  Batch batch;
  batch.samples.resize(2);
  batch.samples[0].noise = {0.3, -0.7};
  batch.samples[0].label = 0;
  batch.samples[0].action = {1};
  batch.samples[0].reward = -0.4;
  batch.samples[1].noise = {-1.1, 0.2};
  batch.samples[1].label = 1;
  batch.samples[1].action = {2};
  batch.samples[1].reward = -0.1;

  const double baseline = -0.2, alpha = 0.01, beta = 0.5;
  const LossComponents lm =
      batch_losses(gen, conditions, batch, baseline, alpha, beta, NllForm::log_mass);
  CHECK(lm.pg == doctest::Approx(-0.11759870442727348).epsilon(1e-12));
  CHECK(lm.ent == doctest::Approx(-0.009707245844160998).epsilon(1e-12));
  CHECK(lm.nll == doctest::Approx(0.1993516493748969).epsilon(1e-12));

  const LossComponents sl =
      batch_losses(gen, conditions, batch, baseline, alpha, beta, NllForm::sum_log);
  CHECK(sl.pg == lm.pg);
  CHECK(sl.ent == lm.ent);
  CHECK(sl.nll == doctest::Approx(0.6500518149719476).epsilon(1e-12));

  // The gradient path reports the same components.
  std::vector<double> grad;
  const LossComponents gm = batch_gradients_serial(gen, conditions, batch, baseline, alpha, beta,
                                                   NllForm::log_mass, grad);
  CHECK(gm.pg == doctest::Approx(lm.pg).epsilon(1e-12));
  CHECK(gm.ent == doctest::Approx(lm.ent).epsilon(1e-12));
  CHECK(gm.nll == doctest::Approx(lm.nll).epsilon(1e-12));
}

TEST_CASE("degenerate losses") {
  const PolicyConfig cfg = toy_config(2, 4, 1, {3}, 2, 1);
  SeededRng init(31);
  const PolicyGenerator gen(cfg, init);
  const SyntProblem problem = SyntProblem::synt(2, 4);
  const ConditionSet conditions = unconditional_conditions(problem);
  TrainWorkspace ws(gen, 4, 1);
  assemble_batch(gen, problem, conditions, SeededRng(5), 0, ws);

  SUBCASE("zero advantage kills the policy-gradient term") {
    Batch batch = ws.batch;
    for (auto& s : batch.samples) s.reward = -0.25;
    const LossComponents l = batch_losses(gen, conditions, batch, -0.25, 0.0, 0.0, NllForm::log_mass);
    CHECK(l.pg == 0.0);
    CHECK(l.ent == 0.0);
    CHECK(l.nll == 0.0);
    std::vector<double> grad;
    batch_gradients_serial(gen, conditions, batch, -0.25, 0.0, 0.0, NllForm::log_mass, grad);
    for (double g : grad) CHECK(g == 0.0);
  }
  SUBCASE("alpha = beta = 0 reduces to plain reward-weighted log-likelihood") {
    const LossComponents l = batch_losses(gen, conditions, ws.batch, 0.0, 0.0, 0.0, NllForm::log_mass);
    CHECK(l.ent == 0.0);
    CHECK(l.nll == 0.0);
    double expect = 0.0;
    for (const BatchSample& s : ws.batch.samples) {
      const ActionDistribution dist = gen.act_distribution(s.noise, s.label);
      expect += s.reward * log_prob(dist, std::span<const int>(s.action));
    }
    expect = -expect / ws.batch.size();
    CHECK(l.pg == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("entropy gradient vanishes at the uniform distribution") {
    const PolicyGenerator uniform_gen = PolicyGenerator::zeroed(cfg);
    TrainWorkspace ws2(uniform_gen, 4, 1);
    assemble_batch(uniform_gen, problem, conditions, SeededRng(6), 0, ws2);
    Batch batch = ws2.batch;
    for (auto& s : batch.samples) s.reward = 0.0;  // no advantage, entropy only
    std::vector<double> grad;
    batch_gradients_serial(uniform_gen, conditions, batch, 0.0, 0.5, 0.0, NllForm::log_mass, grad);
    for (double g : grad) CHECK(std::abs(g) < 1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences across toy configurations") {
  SeededRng meta(2718);
  const double weights[] = {0.0, 0.01, 1.0};
  int configs_checked = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const int dim = 1 + static_cast<int>(meta.uniform_index(2));
    const int card = 3 + static_cast<int>(meta.uniform_index(4));
    const int num_classes = 1 + static_cast<int>(meta.uniform_index(3));
    const int noise_dim = 2 + static_cast<int>(meta.uniform_index(3));
    const int emb_dim = 1 + static_cast<int>(meta.uniform_index(3));
    std::vector<int> hidden;
    if (meta.uniform_index(2) == 1) hidden.push_back(4 + static_cast<int>(meta.uniform_index(5)));
    const PolicyConfig cfg = toy_config(dim, card, num_classes, hidden, noise_dim, emb_dim);
    SeededRng init(1000 + rep);
    const PolicyGenerator gen(cfg, init);
    const ConditionSet conditions = random_conditions(meta, dim, card, num_classes);
    const SyntProblem problem = SyntProblem::synt(dim, card);
    TrainWorkspace ws(gen, 3, 1);
    assemble_batch(gen, problem, conditions, SeededRng(500 + rep), 0, ws);

    for (NllForm form : {NllForm::log_mass, NllForm::sum_log})
      for (double alpha : weights)
        for (double beta : weights)
          check_gradient_fd(gen, conditions, ws.batch, -0.3, alpha, beta, form);
    ++configs_checked;
  }
  CHECK(configs_checked == 6);
}

TEST_CASE("parallel batch gradients equal the sample-major serial reference bit for bit") {
  SeededRng meta(99);
  for (int rep = 0; rep < 4; ++rep) {
    const int dim = 1 + static_cast<int>(meta.uniform_index(3));
    const int card = 3 + static_cast<int>(meta.uniform_index(5));
    const int num_classes = 1 + static_cast<int>(meta.uniform_index(4));
    const PolicyConfig cfg = toy_config(dim, card, num_classes, {6}, 3, 2);
    SeededRng init(7000 + rep);
    const PolicyGenerator gen(cfg, init);
    const ConditionSet conditions = random_conditions(meta, dim, card, num_classes);
    const SyntProblem problem = SyntProblem::synt(dim, card);

    TrainWorkspace ws(gen, 8, 0);  // all threads
    assemble_batch(gen, problem, conditions, SeededRng(123 + rep), rep, ws);
    const LossComponents par =
        batch_gradients(gen, conditions, -0.2, 0.01, 0.7, NllForm::log_mass, ws);

    std::vector<double> serial_grad;
    const LossComponents ser = batch_gradients_serial(gen, conditions, ws.batch, -0.2, 0.01, 0.7,
                                                      NllForm::log_mass, serial_grad);
    CHECK(par.pg == ser.pg);
    CHECK(par.ent == ser.ent);
    CHECK(par.nll == ser.nll);
    REQUIRE(serial_grad.size() == ws.grad.size());
    CHECK(std::memcmp(serial_grad.data(), ws.grad.data(),
                      serial_grad.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("assembly is invariant to the thread count") {
  const SyntProblem problem = SyntProblem::synt(3, 10);
  const ConditionSet conditions = octant_regions(problem);
  const PolicyConfig cfg = toy_config(3, 10, 8, {8}, 4, 2);
  SeededRng init(55);
  const PolicyGenerator gen(cfg, init);
  TrainWorkspace ws1(gen, 16, 1), ws2(gen, 16, 0);
  assemble_batch(gen, problem, conditions, SeededRng(77), 3, ws1);
  assemble_batch(gen, problem, conditions, SeededRng(77), 3, ws2);
  for (int i = 0; i < 16; ++i) {
    CHECK(ws1.batch.samples[i].noise == ws2.batch.samples[i].noise);
    CHECK(ws1.batch.samples[i].label == ws2.batch.samples[i].label);
    CHECK(ws1.batch.samples[i].action == ws2.batch.samples[i].action);
    CHECK(ws1.batch.samples[i].reward == ws2.batch.samples[i].reward);
  }
}

TEST_CASE("baseline uses the previous batch and zeroes constant-reward advantages") {
  const SyntProblem problem = SyntProblem::synt(1, 4);
  const ConditionSet conditions = unconditional_conditions(problem);
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 4;
  cfg.alpha = 0.0;
  cfg.hidden = {4};
  cfg.noise_dim = 2;
  cfg.emb_dim = 1;
  cfg.seed = 13;
  const TrainResult result = train(problem, conditions, cfg);
  REQUIRE(result.trajectory.size() == 3);
  CHECK(result.trajectory[0].baseline == 0.0);
  CHECK(result.trajectory[1].baseline == result.trajectory[0].mean_reward);
  CHECK(result.trajectory[2].baseline == result.trajectory[1].mean_reward);

  // Constant rewards with the matching baseline give exactly zero advantage.
  const PolicyConfig pcfg = toy_config(1, 4, 1, {4}, 2, 1);
  const PolicyGenerator gen = PolicyGenerator::zeroed(pcfg);
  Batch batch;
  batch.samples.resize(2);
  for (auto& s : batch.samples) {
    s.noise = {0.1, -0.2};
    s.label = 0;
    s.action = {1};
    s.reward = -0.5;
  }
  const LossComponents l = batch_losses(gen, conditions, batch, -0.5, 0.0, 0.0, NllForm::log_mass);
  CHECK(l.pg == 0.0);
}

TEST_CASE("expected policy gradient is unchanged by the running baseline") {
  // Fixed policy; M batches; PG-only gradient with the previous-batch mean
  // baseline versus zero baseline must agree in expectation (3 standard
  // errors per coordinate).
  const SyntProblem problem = SyntProblem::synt(1, 4);
  const ConditionSet conditions = unconditional_conditions(problem);
  const PolicyConfig cfg = toy_config(1, 4, 1, {}, 2, 1);
  SeededRng init(8);
  const PolicyGenerator gen(cfg, init);

  const int batch_size = 8;
  const int m_batches = 20000;
  TrainWorkspace ws(gen, batch_size, 1);
  const std::size_t n_params = gen.param_count();
  std::vector<double> sum_diff(n_params, 0.0), sum_sq(n_params, 0.0);
  std::vector<double> grad_b, grad_0;
  double prev_mean = 0.0;
  const SeededRng base(31337);
  for (int m = 0; m < m_batches; ++m) {
    assemble_batch(gen, problem, conditions, base, m, ws);
    batch_gradients_serial(gen, conditions, ws.batch, prev_mean, 0.0, 0.0, NllForm::log_mass,
                           grad_b);
    batch_gradients_serial(gen, conditions, ws.batch, 0.0, 0.0, 0.0, NllForm::log_mass, grad_0);
    for (std::size_t i = 0; i < n_params; ++i) {
      const double d = grad_b[i] - grad_0[i];
      sum_diff[i] += d;
      sum_sq[i] += d * d;
    }
    prev_mean = ws.batch.mean_reward();
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    const double mean = sum_diff[i] / m_batches;
    const double var = sum_sq[i] / m_batches - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / m_batches);
    CHECK(std::abs(mean) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("train is deterministic and honors iterations = 0") {
  const SyntProblem problem = SyntProblem::synt(2, 8);
  const ConditionSet conditions = octant_regions(problem);
  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.batch_size = 4;
  cfg.hidden = {6};
  cfg.noise_dim = 3;
  cfg.emb_dim = 2;
  cfg.seed = 77;
  cfg.beta_ramp = 10;

  const TrainResult a = train(problem, conditions, cfg);
  const TrainResult b = train(problem, conditions, cfg);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].mean_reward == b.trajectory[i].mean_reward);
    CHECK(a.trajectory[i].loss_total == b.trajectory[i].loss_total);
    CHECK(a.trajectory[i].loss_total ==
          a.trajectory[i].loss_pg + a.trajectory[i].loss_ent + a.trajectory[i].loss_nll);
    CHECK(a.trajectory[i].samples_cum == a.trajectory[i].iteration * cfg.batch_size);
  }
  const auto pa = a.gen.params();
  const auto pb = b.gen.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  cfg.iterations = 0;
  const TrainResult zero = train(problem, conditions, cfg);
  CHECK(zero.trajectory.empty());
  CHECK_FALSE(zero.aborted);
  // Matches a freshly initialized generator on the same seed stream.
  SeededRng root(cfg.seed);
  SeededRng init = root.split(0);
  const PolicyGenerator fresh(PolicyConfig::for_problem(problem, 4, cfg.noise_dim, cfg.emb_dim,
                                                        cfg.hidden),
                              init);
  const auto pz = zero.gen.params();
  const auto pf = fresh.params();
  REQUIRE(pz.size() == pf.size());
  for (std::size_t i = 0; i < pz.size(); ++i) CHECK(pz[i] == pf[i]);
}

TEST_CASE("train rejects invalid inputs") {
  const SyntProblem problem = SyntProblem::synt(2, 6);
  ConditionSet overlapping;
  overlapping.regions.push_back(RegionSpec{{{0, 1}, {0, 1}}});
  overlapping.regions.push_back(RegionSpec{{{1, 2}, {1, 2}}});
  TrainConfig cfg;
  cfg.iterations = 1;
  CHECK_THROWS(train(problem, overlapping, cfg));

  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS(train(problem, unconditional_conditions(problem), bad));
}

TEST_CASE("nan rewards surface as non-finite loss components") {
  const PolicyConfig cfg = toy_config(1, 3, 1, {}, 2, 1);
  const PolicyGenerator gen = PolicyGenerator::zeroed(cfg);
  Batch batch;
  batch.samples.resize(1);
  batch.samples[0].noise = {0.0, 0.0};
  batch.samples[0].label = 0;
  batch.samples[0].action = {0};
  batch.samples[0].reward = std::nan("");
  ConditionSet conditions;
  conditions.regions.push_back(RegionSpec{{{0, 1, 2}}});
  const LossComponents l = batch_losses(gen, conditions, batch, 0.0, 0.0, 0.0, NllForm::log_mass);
  CHECK_FALSE(std::isfinite(l.pg));
}

TEST_CASE("convergence iteration helper") {
  std::vector<TrainRecord> trajectory(10);
  for (int i = 0; i < 10; ++i) {
    trajectory[i].iteration = i + 1;
    trajectory[i].mean_reward = i < 5 ? -1.0 : 0.0;
  }
  CHECK(convergence_iteration(trajectory, 3, -0.05).value() == 8);  // window 6,7,8 -> mean 0
  CHECK(convergence_iteration(trajectory, 3, -0.5).value() == 7);
  CHECK_FALSE(convergence_iteration(trajectory, 11, -0.05).has_value());
  CHECK_FALSE(convergence_iteration(trajectory, 3, 0.5).has_value());
}

TEST_CASE("stop_on_converge truncates the run at the convergence iteration") {
  const SyntProblem problem = SyntProblem::synt(1);
  const ConditionSet conditions = unconditional_conditions(problem);
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.batch_size = 8;
  cfg.hidden = {16};
  cfg.noise_dim = 4;
  cfg.emb_dim = 1;
  cfg.seed = 3;
  cfg.converge_window = 50;
  cfg.converge_reward = -0.2;
  cfg.stop_on_converge = true;
  const TrainResult r = train(problem, conditions, cfg);
  REQUIRE(r.converged_at.has_value());
  CHECK(static_cast<std::int64_t>(r.trajectory.size()) == *r.converged_at);
  CHECK(convergence_iteration(r.trajectory, cfg.converge_window, cfg.converge_reward).value() ==
        *r.converged_at);
}
