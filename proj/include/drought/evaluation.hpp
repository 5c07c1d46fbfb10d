#pragma once

// Scoring a trained model on the chronological holdout: regression metrics,
// phase classification accuracy (overall and per county), the confusion
// matrix, Hand-Till AUROC and a month-by-month phase table.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drought/ann.hpp"
#include "drought/error.hpp"
#include "drought/features.hpp"
#include "drought/metrics.hpp"

namespace drought {

struct PhaseRow {
  std::string county;
  YearMonth date;
  double actual_vci = 0.0;
  double predicted_vci = 0.0;
  int actual_phase = 0;
  int predicted_phase = 0;
};

struct CountyAccuracy {
  std::string county;
  std::size_t rows = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct EvaluationReport {
  std::string model_id;
  std::size_t rows = 0;
  MetricSet metrics;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<CountyAccuracy> counties;
  std::optional<double> auroc;  // absent when the labels hold a single class
  std::vector<int> classes_present;
  std::array<std::vector<RocPoint>, kPhaseCount> roc;
  std::vector<PhaseRow> months;
};

inline EvaluationReport evaluate_predictions(const std::string& model_id, const FeatureTable& table,
                                             std::span<const std::size_t> rows, std::span<const double> predicted) {
  if (rows.empty()) throw UsageError("no rows to evaluate");
  if (rows.size() != predicted.size()) throw UsageError("prediction count does not match row count");
  EvaluationReport report;
  report.model_id = model_id;
  report.rows = rows.size();

  std::vector<double> actual;
  std::vector<int> actual_class, predicted_class;
  std::vector<ClassScores> scores;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = table.rows[rows[i]];
    actual.push_back(row.target);
    PhaseRow p{row.county, row.date, row.target, predicted[i], classify_phase(row.target), classify_phase(predicted[i])};
    actual_class.push_back(p.actual_phase);
    predicted_class.push_back(p.predicted_phase);
    scores.push_back(class_scores_from_prediction(predicted[i]));
    report.months.push_back(std::move(p));
  }
  report.metrics = regression_metrics(actual, predicted);

  const auto summary = confusion_and_accuracy(actual_class, predicted_class);
  report.confusion = summary.matrix;
  report.accuracy = summary.accuracy;

  std::map<std::string, CountyAccuracy> by_county;
  for (const auto& m : report.months) {
    auto& c = by_county[m.county];
    c.county = m.county;
    ++c.rows;
    if (m.actual_phase == m.predicted_phase) ++c.correct;
  }
  for (auto& [name, c] : by_county) {
    c.accuracy = static_cast<double>(c.correct) / static_cast<double>(c.rows);
    report.counties.push_back(c);
  }

  for (int c = 1; c <= kPhaseCount; ++c) {
    if (std::find(actual_class.begin(), actual_class.end(), c) != actual_class.end()) report.classes_present.push_back(c);
    report.roc[static_cast<std::size_t>(c - 1)] = one_vs_rest_roc(scores, actual_class, c);
  }
  if (report.classes_present.size() >= 2) report.auroc = hand_till_auroc(scores, actual_class);
  return report;
}

inline EvaluationReport evaluate_model(const ScoredNetwork& model, const FeatureTable& table,
                                       std::span<const std::size_t> rows) {
  const auto predicted = model.predict(table, rows);
  return evaluate_predictions(model.model_id, table, rows, predicted);
}

}  // namespace drought
