#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "polygen/eval.hpp"
#include "polygen/io.hpp"
#include "polygen/policy.hpp"
#include "polygen/problem.hpp"
#include "polygen/training.hpp"
#include "polygen/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polygen;

namespace {

// Exit codes: 0 success, 1 usage error, 2 runtime failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
void merge_key(const CLI::Option* opt, const json& section, const char* key, T& value) {
  if (opt != nullptr && opt->count() == 0 && section.is_object() && section.contains(key))
    value = section.at(key).get<T>();
}

json load_config_file(const std::string& path, const std::string& command) {
  json doc = read_json_file(path);
  if (doc.contains("command") && doc.at("command").get<std::string>() != command)
    throw UsageError("config file " + path + " is for command '" +
                     doc.at("command").get<std::string>() + "', not '" + command + "'");
  return doc;
}

struct ProblemFlags {
  int dim = 3;
  int cardinality = 100;
  double lower = -5.0;
  double upper = 5.0;
  double threshold = 1.2;

  SyntProblem build() const { return SyntProblem::synt(dim, cardinality, threshold, lower, upper); }
  json to_json() const {
    return {{"dim", dim}, {"cardinality", cardinality}, {"lower", lower}, {"upper", upper},
            {"threshold", threshold}};
  }
};

struct TrainFlags {
  bool conditional = false;
  std::int64_t iterations = 30000;
  int batch = 32;
  double alpha = 0.007;
  double beta_max = 1.0;
  std::int64_t beta_ramp = 5000;
  std::string nll_form = "log-mass";
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int noise_dim = 64;
  int emb_dim = 8;
  std::vector<int> hidden = {128, 128};
  std::int64_t checkpoint_every = 0;
  bool stop_on_converge = false;
  double converge_reward = -0.05;
  int converge_window = 1000;

  TrainConfig build(int threads) const {
    TrainConfig cfg;
    cfg.iterations = iterations;
    cfg.batch_size = batch;
    cfg.alpha = alpha;
    cfg.beta_max = beta_max;
    cfg.beta_ramp = beta_ramp;
    cfg.nll_form = nll_form_from_name(nll_form);
    cfg.optimizer = AdamConfig{lr, adam_beta1, adam_beta2, adam_eps};
    cfg.seed = seed;
    cfg.noise_dim = noise_dim;
    cfg.emb_dim = emb_dim;
    cfg.hidden = hidden;
    cfg.checkpoint_every = checkpoint_every;
    cfg.threads = threads;
    cfg.stop_on_converge = stop_on_converge;
    cfg.converge_reward = converge_reward;
    cfg.converge_window = converge_window;
    return cfg;
  }

  json to_json() const {
    return {{"conditional", conditional},
            {"iterations", iterations},
            {"batch", batch},
            {"alpha", alpha},
            {"beta_max", beta_max},
            {"beta_ramp", beta_ramp},
            {"nll_form", nll_form},
            {"lr", lr},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"seed", seed},
            {"noise_dim", noise_dim},
            {"emb_dim", emb_dim},
            {"hidden", hidden},
            {"checkpoint_every", checkpoint_every},
            {"stop_on_converge", stop_on_converge},
            {"converge_reward", converge_reward},
            {"converge_window", converge_window}};
  }
};

struct ProblemOptions {
  CLI::Option* dim = nullptr;
  CLI::Option* cardinality = nullptr;
  CLI::Option* lower = nullptr;
  CLI::Option* upper = nullptr;
  CLI::Option* threshold = nullptr;
};

ProblemOptions add_problem_flags(CLI::App* cmd, ProblemFlags& f, bool with_dim = true) {
  ProblemOptions o;
  if (with_dim)
    o.dim = cmd->add_option("--dim", f.dim, "number of variables")->check(CLI::PositiveNumber);
  o.cardinality = cmd->add_option("--cardinality", f.cardinality, "grid points per variable")
                      ->check(CLI::Range(2, 1000000));
  o.lower = cmd->add_option("--lower", f.lower, "domain lower bound");
  o.upper = cmd->add_option("--upper", f.upper, "domain upper bound");
  o.threshold = cmd->add_option("--threshold", f.threshold, "static-constraint threshold");
  return o;
}

void merge_problem(const ProblemOptions& o, const json& section, ProblemFlags& f) {
  merge_key(o.dim, section, "dim", f.dim);
  merge_key(o.cardinality, section, "cardinality", f.cardinality);
  merge_key(o.lower, section, "lower", f.lower);
  merge_key(o.upper, section, "upper", f.upper);
  merge_key(o.threshold, section, "threshold", f.threshold);
}

struct TrainOptions {
  CLI::Option* conditional = nullptr;
  CLI::Option* iterations = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* alpha = nullptr;
  CLI::Option* beta_max = nullptr;
  CLI::Option* beta_ramp = nullptr;
  CLI::Option* nll_form = nullptr;
  CLI::Option* lr = nullptr;
  CLI::Option* adam_beta1 = nullptr;
  CLI::Option* adam_beta2 = nullptr;
  CLI::Option* adam_eps = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* noise_dim = nullptr;
  CLI::Option* emb_dim = nullptr;
  CLI::Option* hidden = nullptr;
  CLI::Option* checkpoint_every = nullptr;
  CLI::Option* stop_on_converge = nullptr;
  CLI::Option* converge_reward = nullptr;
  CLI::Option* converge_window = nullptr;
};

TrainOptions add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_conditional = true) {
  TrainOptions o;
  if (with_conditional)
    o.conditional = cmd->add_flag("--conditional", f.conditional,
                                  "train the class-conditional generator on the octant regions");
  o.iterations = cmd->add_option("--iterations", f.iterations, "training iterations")
                     ->check(CLI::NonNegativeNumber);
  o.batch = cmd->add_option("--batch", f.batch, "minibatch size N")->check(CLI::PositiveNumber);
  o.alpha = cmd->add_option("--alpha", f.alpha, "entropy bonus weight")->check(CLI::NonNegativeNumber);
  o.beta_max = cmd->add_option("--beta-max", f.beta_max, "final classification-loss weight")
                   ->check(CLI::NonNegativeNumber);
  o.beta_ramp = cmd->add_option("--beta-ramp", f.beta_ramp,
                                "iterations over which beta ramps linearly from 0")
                    ->check(CLI::NonNegativeNumber);
  o.nll_form = cmd->add_option("--nll-form", f.nll_form, "classification term: log-mass or sum-log")
                   ->check(CLI::IsMember({"log-mass", "sum-log"}));
  o.lr = cmd->add_option("--lr", f.lr, "optimizer step size")->check(CLI::PositiveNumber);
  o.adam_beta1 = cmd->add_option("--adam-beta1", f.adam_beta1, "first-moment decay");
  o.adam_beta2 = cmd->add_option("--adam-beta2", f.adam_beta2, "second-moment decay");
  o.adam_eps = cmd->add_option("--adam-eps", f.adam_eps, "optimizer epsilon");
  o.seed = cmd->add_option("--seed", f.seed, "random seed");
  o.noise_dim = cmd->add_option("--noise-dim", f.noise_dim, "noise dimensions per cell")
                    ->check(CLI::PositiveNumber);
  o.emb_dim = cmd->add_option("--emb-dim", f.emb_dim, "class embedding width")->check(CLI::PositiveNumber);
  o.hidden = cmd->add_option("--hidden", f.hidden, "hidden layer widths")->delimiter(',');
  o.checkpoint_every = cmd->add_option("--checkpoint-every", f.checkpoint_every,
                                       "write an intermediate checkpoint every K iterations")
                           ->check(CLI::NonNegativeNumber);
  o.stop_on_converge = cmd->add_flag("--stop-on-converge", f.stop_on_converge,
                                     "stop once the trailing mean reward clears the bar");
  o.converge_reward = cmd->add_option("--converge-reward", f.converge_reward,
                                      "trailing mean reward bar for convergence");
  o.converge_window = cmd->add_option("--converge-window", f.converge_window,
                                      "trailing window length in iterations")
                          ->check(CLI::PositiveNumber);
  return o;
}

void merge_train(const TrainOptions& o, const json& section, TrainFlags& f) {
  merge_key(o.conditional, section, "conditional", f.conditional);
  merge_key(o.iterations, section, "iterations", f.iterations);
  merge_key(o.batch, section, "batch", f.batch);
  merge_key(o.alpha, section, "alpha", f.alpha);
  merge_key(o.beta_max, section, "beta_max", f.beta_max);
  merge_key(o.beta_ramp, section, "beta_ramp", f.beta_ramp);
  merge_key(o.nll_form, section, "nll_form", f.nll_form);
  merge_key(o.lr, section, "lr", f.lr);
  merge_key(o.adam_beta1, section, "adam_beta1", f.adam_beta1);
  merge_key(o.adam_beta2, section, "adam_beta2", f.adam_beta2);
  merge_key(o.adam_eps, section, "adam_eps", f.adam_eps);
  merge_key(o.seed, section, "seed", f.seed);
  merge_key(o.noise_dim, section, "noise_dim", f.noise_dim);
  merge_key(o.emb_dim, section, "emb_dim", f.emb_dim);
  merge_key(o.hidden, section, "hidden", f.hidden);
  merge_key(o.checkpoint_every, section, "checkpoint_every", f.checkpoint_every);
  merge_key(o.stop_on_converge, section, "stop_on_converge", f.stop_on_converge);
  merge_key(o.converge_reward, section, "converge_reward", f.converge_reward);
  merge_key(o.converge_window, section, "converge_window", f.converge_window);
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

json checkpoint_with_problem(const PolicyGenerator& gen, const ProblemFlags& p) {
  json doc = checkpoint_save(gen);
  doc["problem"] = p.to_json();
  return doc;
}

// One training run with its standard artifact files. Returns the result;
// callers inspect .aborted.
TrainResult run_training_to_dir(const ProblemFlags& pf, const TrainFlags& tf, int threads,
                                const fs::path& out_dir, const json& resolved_config) {
  const SyntProblem problem = pf.build();
  const ConditionSet conditions =
      tf.conditional ? octant_regions(problem) : unconditional_conditions(problem);
  const TrainConfig cfg = tf.build(threads);
  cfg.validate();

  write_json_file(out_dir / "config.json", resolved_config);

  TrainCallbacks callbacks;
  callbacks.on_checkpoint = [&](std::int64_t iteration, const PolicyGenerator& gen) {
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_%08lld.json", static_cast<long long>(iteration));
    write_json_file(out_dir / name, checkpoint_with_problem(gen, pf));
  };
  callbacks.on_record = [&](const TrainRecord& r, const PolicyGenerator&) {
    if (r.iteration % 5000 == 0)
      std::fprintf(stderr, "[polygen] iteration %lld mean_reward %.4f loss %.4f\n",
                   static_cast<long long>(r.iteration), r.mean_reward, r.loss_total);
  };

  TrainResult result = train(problem, conditions, cfg, &callbacks);
  write_text_file(out_dir / "trajectory.csv", trajectory_csv(result.trajectory));
  write_json_file(out_dir / "checkpoint.json", checkpoint_with_problem(result.gen, pf));
  if (result.aborted) std::fprintf(stderr, "error: training aborted: %s\n", result.abort_reason.c_str());
  return result;
}

int cmd_train(const ProblemFlags& pf, const TrainFlags& tf, int threads, const std::string& out) {
  const fs::path out_dir = prepare_out_dir(out);
  const json config{{"build", kBuildId},
                    {"command", "train"},
                    {"problem", pf.to_json()},
                    {"train", tf.to_json()}};
  const TrainResult result = run_training_to_dir(pf, tf, threads, out_dir, config);
  if (result.aborted) return 2;
  if (result.converged_at)
    std::fprintf(stderr, "[polygen] converged at iteration %lld\n",
                 static_cast<long long>(*result.converged_at));
  return 0;
}

int cmd_oracle(const ProblemFlags& pf, double budget, int threads, const std::string& out) {
  const fs::path out_dir = prepare_out_dir(out);
  const SyntProblem problem = pf.build();
  const json config{{"build", kBuildId},
                    {"command", "oracle"},
                    {"problem", pf.to_json()},
                    {"budget", budget}};
  write_json_file(out_dir / "config.json", config);
  OracleOptions options;
  options.budget = budget;
  options.threads = threads;
  const OracleResult result = enumerate_solutions(problem, options);
  write_text_file(out_dir / "solutions.csv", solutions_csv(problem, result));
  write_json_file(out_dir / "summary.json", oracle_summary_json(problem, result));
  std::fprintf(stderr, "[polygen] oracle: %lld solutions\n",
               static_cast<long long>(result.total_count));
  return 0;
}

struct EvalFlags {
  std::string checkpoint;
  std::int64_t samples = 5000;
  std::optional<int> label;
  std::uint64_t seed = 1;
  int bins = 50;
  double coverage_threshold = 0.02;
  bool with_confusion = false;
  std::int64_t per_class = 1000;
};

int cmd_eval(EvalFlags& ef, ProblemFlags& pf, const ProblemOptions& po, const json& file_config,
             int threads, const std::string& out) {
  if (ef.checkpoint.empty()) throw UsageError("--checkpoint is required");
  const fs::path out_dir = prepare_out_dir(out);
  const json doc = read_json_file(ef.checkpoint);
  const PolicyGenerator gen = checkpoint_load(doc);

  // Precedence for bounds/threshold: checkpoint problem section, then the
  // config file, then explicit flags.
  if (doc.contains("problem")) merge_problem(po, doc.at("problem"), pf);
  if (file_config.contains("problem")) merge_problem(po, file_config.at("problem"), pf);
  if (po.dim != nullptr && po.dim->count() > 0 && pf.dim != gen.dim())
    throw std::runtime_error("checkpoint has " + std::to_string(gen.dim()) +
                             " cells; requested problem has " + std::to_string(pf.dim) +
                             " variables (cell count mismatch)");
  if (po.cardinality->count() > 0 && pf.cardinality != gen.config().cardinalities.front())
    throw std::runtime_error("checkpoint cell cardinality " +
                             std::to_string(gen.config().cardinalities.front()) +
                             " does not match requested " + std::to_string(pf.cardinality));
  pf.dim = gen.dim();
  pf.cardinality = gen.config().cardinalities.front();
  const SyntProblem problem = pf.build();

  const json config{{"build", kBuildId},
                    {"command", "eval"},
                    {"checkpoint", ef.checkpoint},
                    {"problem", pf.to_json()},
                    {"eval",
                     {{"samples", ef.samples},
                      {"class", ef.label ? json(*ef.label) : json(nullptr)},
                      {"seed", ef.seed},
                      {"bins", ef.bins},
                      {"coverage_threshold", ef.coverage_threshold},
                      {"confusion", ef.with_confusion},
                      {"per_class", ef.per_class}}}};
  write_json_file(out_dir / "config.json", config);

  // Exact diversity baseline when the grid is small enough to enumerate fast.
  OracleResult oracle;
  const OracleResult* oracle_ptr = nullptr;
  double points = 1.0;
  for (const DiscreteDomain& d : problem.domains) points *= static_cast<double>(d.cardinality);
  if (points <= 1e7) {
    OracleOptions oracle_options;
    oracle_options.budget = 1e7;
    oracle_options.threads = threads;
    oracle = enumerate_solutions(problem, oracle_options);
    oracle_ptr = &oracle;
  }

  EvalOptions options;
  options.n = ef.samples;
  options.label = ef.label;
  options.seed = ef.seed;
  options.threads = threads;
  options.coverage_threshold = ef.coverage_threshold;
  std::vector<SampleRow> rows;
  const EvalReport report = evaluate(gen, problem, options, &rows, oracle_ptr);
  write_text_file(out_dir / "samples.csv", samples_csv(rows));
  write_json_file(out_dir / "report.json", eval_report_json(report, reward_histogram(rows, ef.bins)));

  if (ef.with_confusion) {
    const ConditionSet conditions = octant_regions(problem);
    const ConfusionMatrix cm = confusion(gen, problem, conditions, ef.per_class, ef.seed, threads);
    write_json_file(out_dir / "confusion.json", confusion_json(cm));
  }
  std::fprintf(stderr, "[polygen] eval: recovery_rate %.4f mode_coverage %d uniformity %.4f\n",
               report.recovery_rate, report.mode_coverage, report.uniformity);
  return 0;
}

int cmd_sweep(const std::vector<int>& dims, const ProblemFlags& pf_base, const TrainFlags& tf,
              int threads, const std::string& out) {
  if (dims.empty()) throw UsageError("--dims requires at least one dimension");
  const fs::path out_dir = prepare_out_dir(out);
  json config{{"build", kBuildId},
              {"command", "sweep"},
              {"dims", dims},
              {"problem", pf_base.to_json()},
              {"train", tf.to_json()}};
  config["problem"].erase("dim");
  write_json_file(out_dir / "config.json", config);

  json runs = json::array();
  bool ok = true;
  for (int dim : dims) {
    ProblemFlags pf = pf_base;
    pf.dim = dim;
    const fs::path run_dir = out_dir / ("synt" + std::to_string(dim) + "d");
    fs::create_directories(run_dir);
    const json run_config{{"build", kBuildId},
                          {"command", "train"},
                          {"problem", pf.to_json()},
                          {"train", tf.to_json()}};
    std::fprintf(stderr, "[polygen] sweep: dim %d\n", dim);
    const TrainResult result = run_training_to_dir(pf, tf, threads, run_dir, run_config);
    if (result.aborted) ok = false;
    const auto converged =
        convergence_iteration(result.trajectory, tf.converge_window, tf.converge_reward);
    double final_trailing = 0.0;
    const std::int64_t window = std::min<std::int64_t>(
        tf.converge_window, static_cast<std::int64_t>(result.trajectory.size()));
    if (window > 0) {
      for (std::size_t k = result.trajectory.size() - window; k < result.trajectory.size(); ++k)
        final_trailing += result.trajectory[k].mean_reward;
      final_trailing /= static_cast<double>(window);
    }
    runs.push_back({{"dim", dim},
                    {"convergence_iteration", converged ? json(*converged) : json(nullptr)},
                    {"converged", converged.has_value()},
                    {"iterations_run", static_cast<std::int64_t>(result.trajectory.size())},
                    {"final_trailing_mean_reward", final_trailing}});
  }
  write_json_file(out_dir / "sweep_summary.json",
                  json{{"build", kBuildId},
                       {"dims", dims},
                       {"converge_window", tf.converge_window},
                       {"converge_reward", tf.converge_reward},
                       {"runs", runs}});
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional policy generator for dynamic constraint satisfaction benchmarks"};
  app.set_version_flag("--version", std::string(kBuildId));
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "train a policy generator");
  ProblemFlags train_pf;
  TrainFlags train_tf;
  std::string train_out, train_config;
  int train_threads = 0;
  const ProblemOptions train_po = add_problem_flags(train_cmd, train_pf);
  const TrainOptions train_to = add_train_flags(train_cmd, train_tf);
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--config", train_config, "JSON config; explicit flags override");
  train_cmd->add_option("--threads", train_threads, "worker threads (0 = all)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
  EvalFlags ef;
  ProblemFlags eval_pf;
  std::string eval_out, eval_config;
  int eval_threads = 0;
  int eval_label = 0;
  const ProblemOptions eval_po = add_problem_flags(eval_cmd, eval_pf);
  auto* eval_checkpoint = eval_cmd->add_option("--checkpoint", ef.checkpoint, "checkpoint JSON path");
  auto* eval_samples = eval_cmd->add_option("--samples", ef.samples, "evaluation sample count")
                           ->check(CLI::PositiveNumber);
  auto* eval_class = eval_cmd->add_option("--class", eval_label, "fixed class label");
  auto* eval_seed = eval_cmd->add_option("--seed", ef.seed, "evaluation seed");
  auto* eval_bins =
      eval_cmd->add_option("--bins", ef.bins, "reward histogram bins")->check(CLI::PositiveNumber);
  auto* eval_cov =
      eval_cmd->add_option("--coverage-threshold", ef.coverage_threshold, "octant coverage share");
  auto* eval_confusion =
      eval_cmd->add_flag("--confusion", ef.with_confusion, "also emit the per-class confusion matrix");
  auto* eval_per_class = eval_cmd->add_option("--per-class", ef.per_class,
                                              "samples per class for the confusion matrix")
                             ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--config", eval_config, "JSON config; explicit flags override");
  eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = all)");

  auto* oracle_cmd = app.add_subcommand("oracle", "enumerate all satisfying assignments");
  ProblemFlags oracle_pf;
  std::string oracle_out, oracle_config;
  double oracle_budget = 1e8;
  int oracle_threads = 0;
  const ProblemOptions oracle_po = add_problem_flags(oracle_cmd, oracle_pf);
  auto* oracle_budget_opt =
      oracle_cmd->add_option("--budget", oracle_budget, "maximum grid points to enumerate");
  oracle_cmd->add_option("--out", oracle_out, "output directory")->required();
  oracle_cmd->add_option("--config", oracle_config, "JSON config; explicit flags override");
  oracle_cmd->add_option("--threads", oracle_threads, "worker threads (0 = all)");

  auto* sweep_cmd = app.add_subcommand("sweep", "unconditional training across dimensions");
  ProblemFlags sweep_pf;
  TrainFlags sweep_tf;
  std::vector<int> sweep_dims = {2, 5, 10};
  std::string sweep_out, sweep_config;
  int sweep_threads = 0;
  const ProblemOptions sweep_po = add_problem_flags(sweep_cmd, sweep_pf, /*with_dim=*/false);
  auto* sweep_dims_opt = sweep_cmd->add_option("--dims", sweep_dims, "dimensions to train")
                             ->delimiter(',')
                             ->check(CLI::PositiveNumber);
  const TrainOptions sweep_to = add_train_flags(sweep_cmd, sweep_tf, /*with_conditional=*/false);
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_cmd->add_option("--config", sweep_config, "JSON config; explicit flags override");
  sweep_cmd->add_option("--threads", sweep_threads, "worker threads (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train_cmd->parsed()) {
      if (!train_config.empty()) {
        const json cfg = load_config_file(train_config, "train");
        if (cfg.contains("problem")) merge_problem(train_po, cfg.at("problem"), train_pf);
        if (cfg.contains("train")) merge_train(train_to, cfg.at("train"), train_tf);
      }
      return cmd_train(train_pf, train_tf, train_threads, train_out);
    }
    if (eval_cmd->parsed()) {
      json file_config = json::object();
      if (!eval_config.empty()) {
        file_config = load_config_file(eval_config, "eval");
        merge_key(eval_checkpoint, file_config, "checkpoint", ef.checkpoint);
        if (file_config.contains("eval")) {
          const json& section = file_config.at("eval");
          merge_key(eval_samples, section, "samples", ef.samples);
          merge_key(eval_seed, section, "seed", ef.seed);
          merge_key(eval_bins, section, "bins", ef.bins);
          merge_key(eval_cov, section, "coverage_threshold", ef.coverage_threshold);
          merge_key(eval_confusion, section, "confusion", ef.with_confusion);
          merge_key(eval_per_class, section, "per_class", ef.per_class);
          if (eval_class->count() == 0 && section.contains("class") && !section.at("class").is_null()) {
            eval_label = section.at("class").get<int>();
            ef.label = eval_label;
          }
        }
      }
      if (eval_class->count() > 0) ef.label = eval_label;
      return cmd_eval(ef, eval_pf, eval_po, file_config, eval_threads, eval_out);
    }
    if (oracle_cmd->parsed()) {
      if (!oracle_config.empty()) {
        const json cfg = load_config_file(oracle_config, "oracle");
        if (cfg.contains("problem")) merge_problem(oracle_po, cfg.at("problem"), oracle_pf);
        merge_key(oracle_budget_opt, cfg, "budget", oracle_budget);
      }
      return cmd_oracle(oracle_pf, oracle_budget, oracle_threads, oracle_out);
    }
    if (sweep_cmd->parsed()) {
      if (!sweep_config.empty()) {
        const json cfg = load_config_file(sweep_config, "sweep");
        if (cfg.contains("problem")) merge_problem(sweep_po, cfg.at("problem"), sweep_pf);
        if (cfg.contains("train")) merge_train(sweep_to, cfg.at("train"), sweep_tf);
        merge_key(sweep_dims_opt, cfg, "dims", sweep_dims);
      }
      return cmd_sweep(sweep_dims, sweep_pf, sweep_tf, sweep_threads, sweep_out);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
