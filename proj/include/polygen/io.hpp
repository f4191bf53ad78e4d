#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "polygen/eval.hpp"
#include "polygen/problem.hpp"
#include "polygen/training.hpp"

namespace polygen {

// Shortest round-trip decimal representation (the JSON one), so CSV and JSON
// carry identical text for identical doubles.
std::string fmt_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

std::string trajectory_csv(const std::vector<TrainRecord>& trajectory);
std::string samples_csv(const std::vector<SampleRow>& rows);
std::string solutions_csv(const SyntProblem& problem, const OracleResult& result);

nlohmann::json oracle_summary_json(const SyntProblem& problem, const OracleResult& result);
nlohmann::json eval_report_json(const EvalReport& report,
                                const std::vector<std::int64_t>& histogram);
nlohmann::json confusion_json(const ConfusionMatrix& cm);

}  // namespace polygen
