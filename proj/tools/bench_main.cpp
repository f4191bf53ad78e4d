// Compares the OpenMP kernels against their serial references and checks
// that both produce identical results.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "polygen/eval.hpp"
#include "polygen/parallel.hpp"
#include "polygen/policy.hpp"
#include "polygen/problem.hpp"
#include "polygen/training.hpp"

using namespace polygen;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-24s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", name, serial_s,
              parallel_s, serial_s / parallel_s, identical ? "bit-identical" : "MISMATCH");
}

bool same_grad(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void bench_oracle() {
  const SyntProblem problem = SyntProblem::synt(4, 56);  // ~1e7 grid points
  auto t0 = std::chrono::steady_clock::now();
  const OracleResult serial = enumerate_solutions_serial(problem);
  const double serial_s = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const OracleResult parallel = enumerate_solutions(problem);
  const double parallel_s = seconds_since(t0);
  bool identical = serial.total_count == parallel.total_count &&
                   serial.per_octant_counts == parallel.per_octant_counts &&
                   serial.solutions.size() == parallel.solutions.size();
  for (std::size_t i = 0; identical && i < serial.solutions.size(); ++i)
    identical = serial.solutions[i].indices == parallel.solutions[i].indices;
  report("oracle enumeration", serial_s, parallel_s, identical);
}

void bench_batch_gradients() {
  const SyntProblem problem = SyntProblem::synt(3);
  const ConditionSet conditions = octant_regions(problem);
  const PolicyConfig cfg = PolicyConfig::for_problem(problem, conditions.num_classes());
  SeededRng init(42);
  const PolicyGenerator gen(cfg, init);
  const SeededRng base(42);

  const int reps = 200;
  TrainWorkspace ws(gen, 32, 0);
  std::vector<double> serial_grad;
  LossComponents serial_losses{}, parallel_losses{};

  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    assemble_batch(gen, problem, conditions, base, r, ws);
    serial_losses = batch_gradients_serial(gen, conditions, ws.batch, -0.3, 0.01, 0.7,
                                           NllForm::log_mass, serial_grad);
  }
  const double serial_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    assemble_batch(gen, problem, conditions, base, r, ws);
    parallel_losses = batch_gradients(gen, conditions, -0.3, 0.01, 0.7, NllForm::log_mass, ws);
  }
  const double parallel_s = seconds_since(t0);

  // Both loops end on the same batch, so the last gradients must agree.
  const bool identical = same_grad(serial_grad, ws.grad) &&
                         serial_losses.pg == parallel_losses.pg &&
                         serial_losses.ent == parallel_losses.ent &&
                         serial_losses.nll == parallel_losses.nll;
  report("batch gradients", serial_s, parallel_s, identical);
}

void bench_eval_sampling() {
  const SyntProblem problem = SyntProblem::synt(3);
  const PolicyConfig cfg = PolicyConfig::for_problem(problem, 1);
  SeededRng init(7);
  const PolicyGenerator gen(cfg, init);

  EvalOptions options;
  options.n = 20000;
  options.seed = 9;

  options.threads = 1;
  auto t0 = std::chrono::steady_clock::now();
  const EvalReport serial = evaluate(gen, problem, options);
  const double serial_s = seconds_since(t0);

  options.threads = 0;
  t0 = std::chrono::steady_clock::now();
  const EvalReport parallel = evaluate(gen, problem, options);
  const double parallel_s = seconds_since(t0);

  const bool identical = serial.recovery_rate == parallel.recovery_rate &&
                         serial.mean_reward == parallel.mean_reward &&
                         serial.per_octant_counts == parallel.per_octant_counts &&
                         serial.distinct_solutions == parallel.distinct_solutions;
  report("evaluation sampling", serial_s, parallel_s, identical);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", resolve_threads(0));
  bench_oracle();
  bench_batch_gradients();
  bench_eval_sampling();
  return 0;
}
