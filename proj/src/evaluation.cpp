#include "talentgraph/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "talentgraph/errors.hpp"

namespace talent {

namespace {

void require_records(const std::vector<EvalRecord>& records, const char* metric) {
  if (records.empty()) throw ValidationError(std::string(metric) + ": no records");
  for (const auto& r : records) {
    if (r.true_stage < 0 || r.true_stage >= static_cast<int>(kNumStages) || r.predicted_stage < 0 ||
        r.predicted_stage >= static_cast<int>(kNumStages)) {
      throw ValidationError(std::string(metric) + ": stage outside 0..3");
    }
  }
}

using Confusion = std::array<std::array<std::size_t, kNumStages>, kNumStages>;  // [true][pred]

Confusion confusion(const std::vector<EvalRecord>& records) {
  Confusion m{};
  for (const auto& r : records) m[r.true_stage][r.predicted_stage] += 1;
  return m;
}

}  // namespace

double balanced_accuracy(const std::vector<EvalRecord>& records) {
  require_records(records, "balanced_accuracy");
  const auto m = confusion(records);
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < kNumStages; ++c) {
    std::size_t support = 0;
    for (auto v : m[c]) support += v;
    if (support == 0) continue;
    sum += static_cast<double>(m[c][c]) / static_cast<double>(support);
    ++present;
  }
  return sum / present;
}

std::pair<double, double> mae_rmse(const std::vector<EvalRecord>& records) {
  require_records(records, "mae_rmse");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (const auto& r : records) {
    const double d = r.true_stage - r.predicted_stage;
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(records.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double weighted_f1(const std::vector<EvalRecord>& records) {
  require_records(records, "weighted_f1");
  const auto m = confusion(records);
  const double n = static_cast<double>(records.size());
  double total = 0.0;
  for (std::size_t c = 0; c < kNumStages; ++c) {
    std::size_t support = 0;
    std::size_t predicted = 0;
    for (std::size_t k = 0; k < kNumStages; ++k) {
      support += m[c][k];
      predicted += m[k][c];
    }
    if (support == 0) continue;
    const std::size_t tp = m[c][c];
    // F1 = 2TP / (support + predicted), which is 0 when TP = 0.
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(support + predicted);
    total += static_cast<double>(support) / n * f1;
  }
  return total;
}

std::optional<double> grouped_auc(const std::vector<EvalRecord>& records) {
  std::vector<double> pos, neg;
  for (const auto& r : records) {
    (r.true_stage >= 2 ? pos : neg).push_back(r.score_high);
  }
  if (pos.empty() || neg.empty()) return std::nullopt;
  // Rank-sum with midranks for ties.
  std::vector<std::pair<double, bool>> all;
  all.reserve(records.size());
  for (double s : pos) all.emplace_back(s, true);
  for (double s : neg) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

MetricReport evaluate(const std::vector<EvalRecord>& records) {
  MetricReport rep;
  rep.balanced_accuracy = balanced_accuracy(records);
  std::tie(rep.mae, rep.rmse) = mae_rmse(records);
  rep.weighted_f1 = weighted_f1(records);
  rep.auc = grouped_auc(records);
  for (const auto& r : records) rep.support[r.true_stage] += 1;
  rep.count = records.size();
  return rep;
}

EvaluationSummary summarize(const std::vector<EvalRecord>& records) {
  EvaluationSummary s;
  s.pooled = evaluate(records);
  std::map<std::string, std::vector<EvalRecord>> by_selection;
  for (const auto& r : records) by_selection[r.selection_id].push_back(r);
  for (const auto& [sel, recs] : by_selection) s.per_selection.emplace(sel, evaluate(recs));
  return s;
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"balanced_accuracy", r.balanced_accuracy},
          {"mae", r.mae},
          {"rmse", r.rmse},
          {"weighted_f1", r.weighted_f1},
          {"auc", r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr)},
          {"support", r.support},
          {"count", r.count}};
}

nlohmann::json to_json(const EvaluationSummary& s) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [sel, rep] : s.per_selection) per[sel] = to_json(rep);
  return {{"pooled", to_json(s.pooled)}, {"per_selection", std::move(per)}};
}

std::string render_table(const std::string& model_label, const std::string& head_label,
                         const MetricReport& r) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-8s %-12s %7s %7s %7s %7s %7s\n", "Model", "Learning", "Acc.",
                "MAE", "RMSE", "F1", "AUC");
  out += line;
  char auc[16];
  if (r.auc) {
    std::snprintf(auc, sizeof auc, "%.3f", *r.auc);
  } else {
    std::snprintf(auc, sizeof auc, "%s", "n/a");
  }
  std::snprintf(line, sizeof line, "%-8s %-12s %7.1f %7.3f %7.3f %7.3f %7s\n", model_label.c_str(),
                head_label.c_str(), 100.0 * r.balanced_accuracy, r.mae, r.rmse, r.weighted_f1, auc);
  out += line;
  return out;
}

}  // namespace talent
