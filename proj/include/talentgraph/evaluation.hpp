#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "talentgraph/profile_store.hpp"

namespace talent {

struct EvalRecord {
  std::string candidate_id;
  std::string selection_id;
  int true_stage = 0;
  int predicted_stage = 0;
  double score_high = 0.0;  // predicted P(stage >= 2)
};

struct MetricReport {
  double balanced_accuracy = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double weighted_f1 = 0.0;
  std::optional<double> auc;  // absent when truth has a single group
  std::array<std::size_t, kNumStages> support{};
  std::size_t count = 0;
};

/// Mean per-class recall over classes present in the truth.
double balanced_accuracy(const std::vector<EvalRecord>& records);
std::pair<double, double> mae_rmse(const std::vector<EvalRecord>& records);
/// Support-weighted mean of per-class F1; a class with no true positives scores 0.
double weighted_f1(const std::vector<EvalRecord>& records);
/// Mann-Whitney AUC of score_high for stages {2,3} against {0,1}; ties count 1/2.
std::optional<double> grouped_auc(const std::vector<EvalRecord>& records);

/// All metrics; requires at least one record.
MetricReport evaluate(const std::vector<EvalRecord>& records);

struct EvaluationSummary {
  MetricReport pooled;
  std::map<std::string, MetricReport> per_selection;
};

EvaluationSummary summarize(const std::vector<EvalRecord>& records);

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const EvaluationSummary& summary);

/// Fixed-width text table with the columns Acc. (percent), MAE, RMSE, F1, AUC.
std::string render_table(const std::string& model_label, const std::string& head_label,
                         const MetricReport& report);

}  // namespace talent
