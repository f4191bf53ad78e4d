#include "polygen/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "polygen/version.hpp"

namespace polygen {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return nlohmann::json(v).dump();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_text_file(path));
}

std::string trajectory_csv(const std::vector<TrainRecord>& trajectory) {
  std::string out = "iteration,samples_cum,mean_reward,loss_pg,loss_ent,loss_nll,loss_total,beta,baseline\n";
  for (const TrainRecord& r : trajectory) {
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.samples_cum);
    out += ',';
    out += fmt_double(r.mean_reward);
    out += ',';
    out += fmt_double(r.loss_pg);
    out += ',';
    out += fmt_double(r.loss_ent);
    out += ',';
    out += fmt_double(r.loss_nll);
    out += ',';
    out += fmt_double(r.loss_total);
    out += ',';
    out += fmt_double(r.beta);
    out += ',';
    out += fmt_double(r.baseline);
    out += '\n';
  }
  return out;
}

std::string samples_csv(const std::vector<SampleRow>& rows) {
  if (rows.empty()) return "sample_id,class_label,f_test,reward,octant,satisfied\n";
  const int t_dim = static_cast<int>(rows.front().indices.size());
  std::string out = "sample_id,class_label";
  for (int t = 1; t <= t_dim; ++t) out += ",idx_" + std::to_string(t);
  for (int t = 1; t <= t_dim; ++t) out += ",x_" + std::to_string(t);
  out += ",f_test,reward,octant,satisfied\n";
  for (const SampleRow& r : rows) {
    out += std::to_string(r.id);
    out += ',';
    out += std::to_string(r.label);
    for (int idx : r.indices) {
      out += ',';
      out += std::to_string(idx);
    }
    for (double v : r.values) {
      out += ',';
      out += fmt_double(v);
    }
    out += ',';
    out += fmt_double(r.f);
    out += ',';
    out += fmt_double(r.reward);
    out += ',';
    out += std::to_string(r.octant);
    out += ',';
    out += r.satisfied ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string solutions_csv(const SyntProblem& problem, const OracleResult& result) {
  const int t_dim = problem.dim;
  std::string out;
  for (int t = 1; t <= t_dim; ++t) out += (t == 1 ? "idx_" : ",idx_") + std::to_string(t);
  for (int t = 1; t <= t_dim; ++t) out += ",x_" + std::to_string(t);
  out += ",f_test,octant\n";
  for (const Assignment& a : result.solutions) {
    bool first = true;
    for (int idx : a.indices) {
      if (!first) out += ',';
      first = false;
      out += std::to_string(idx);
    }
    for (double v : a.values) {
      out += ',';
      out += fmt_double(v);
    }
    out += ',';
    out += fmt_double(f_test(problem, a));
    out += ',';
    out += std::to_string(octant_of(a));
    out += '\n';
  }
  return out;
}

nlohmann::json oracle_summary_json(const SyntProblem& problem, const OracleResult& result) {
  return nlohmann::json{
      {"build", kBuildId},
      {"dim", problem.dim},
      {"cardinality", problem.domains.front().cardinality},
      {"lower", problem.domains.front().lower},
      {"upper", problem.domains.front().upper},
      {"threshold", problem.threshold},
      {"octant_encoding", "bit t set when variable t positive"},
      {"per_octant_counts", result.per_octant_counts},
      {"total_count", result.total_count},
  };
}

nlohmann::json eval_report_json(const EvalReport& report,
                                const std::vector<std::int64_t>& histogram) {
  nlohmann::json doc{
      {"build", kBuildId},
      {"n_samples", report.n_samples},
      {"recovery_rate", report.recovery_rate},
      {"mean_reward", report.mean_reward},
      {"per_octant_counts", report.per_octant_counts},
      {"per_octant_satisfying", report.per_octant_satisfying},
      {"mode_coverage", report.mode_coverage},
      {"uniformity", report.uniformity},
      {"distinct_solutions", report.distinct_solutions},
      {"oracle_total", nullptr},
      {"oracle_coverage", nullptr},
      {"reward_histogram", {{"lo", -1.0}, {"hi", 0.0}, {"counts", histogram}}},
  };
  if (report.oracle_total) doc["oracle_total"] = *report.oracle_total;
  if (report.oracle_coverage) doc["oracle_coverage"] = *report.oracle_coverage;
  return doc;
}

nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  nlohmann::json matrix = nlohmann::json::array();
  for (int r = 0; r < cm.num_classes; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < cm.num_classes; ++c) row.push_back(cm.at(r, c));
    matrix.push_back(std::move(row));
  }
  return nlohmann::json{
      {"build", kBuildId},
      {"num_classes", cm.num_classes},
      {"n_per_class", cm.n_per_class},
      {"matrix", std::move(matrix)},
      {"per_class_accuracy", cm.per_class_accuracy},
      {"overall_accuracy", cm.overall_accuracy},
      {"joint_satisfaction_rate", cm.joint_rate},
  };
}

}  // namespace polygen
