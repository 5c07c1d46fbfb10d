#pragma once

// Evaluation: regression metrics, the train/validation overfit index, drought
// phase classification, confusion matrices and the Hand-Till multi-class AUC.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "drought/error.hpp"

namespace drought {

struct MetricSet {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent, over rows with |actual| >= 1
  double nmse = 0.0;  // mse / population variance of actual
  double nmae = 0.0;  // mae / mean absolute deviation of actual
  double r2 = 0.0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline constexpr double kMapeFloor = 1.0;

inline MetricSet regression_metrics(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw UsageError("metric inputs differ in length (" + std::to_string(actual.size()) + " vs " +
                     std::to_string(predicted.size()) + ")");
  }
  if (actual.size() < 2) throw UsageError("metrics need at least two rows");
  const auto n = static_cast<double>(actual.size());
  const double mean_y = std::accumulate(actual.begin(), actual.end(), 0.0) / n;

  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0, ss_tot = 0.0, mad_sum = 0.0;
  std::size_t pct_rows = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(actual[i]) >= kMapeFloor) {
      pct_sum += std::abs(e / actual[i]);
      ++pct_rows;
    }
    ss_tot += (actual[i] - mean_y) * (actual[i] - mean_y);
    mad_sum += std::abs(actual[i] - mean_y);
  }
  if (!(ss_tot > 0.0)) throw UsageError("actual values are constant; r2, nmse and nmae are undefined");

  MetricSet m;
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  m.mape = pct_rows > 0 ? 100.0 * pct_sum / static_cast<double>(pct_rows) : 0.0;
  m.nmse = m.mse / (ss_tot / n);
  m.nmae = m.mae / (mad_sum / n);
  m.r2 = 1.0 - sq_sum / ss_tot;
  return m;
}

// Element-wise mean of several metric sets.
inline MetricSet mean_metrics(std::span<const MetricSet> sets) {
  MetricSet out;
  if (sets.empty()) return out;
  for (const auto& s : sets) {
    out.mae += s.mae;
    out.mse += s.mse;
    out.rmse += s.rmse;
    out.mape += s.mape;
    out.nmse += s.nmse;
    out.nmae += s.nmae;
    out.r2 += s.r2;
  }
  const auto n = static_cast<double>(sets.size());
  out.mae /= n;
  out.mse /= n;
  out.rmse /= n;
  out.mape /= n;
  out.nmse /= n;
  out.nmae /= n;
  out.r2 /= n;
  return out;
}

inline constexpr double kOverfitThreshold = 0.03;

struct OverfitAssessment {
  double index = 0.0;
  bool overfit = false;
};

// A model is overfit when training R² exceeds validation R² by 0.03 or more.
// The threshold comparison allows for one ulp-scale rounding slack so that a
// gap printed as 0.03 (e.g. 0.86 - 0.83) counts as reaching it.
inline OverfitAssessment overfit_index(double r2_train, double r2_valid) {
  const double index = r2_train - r2_valid;
  return {index, index >= kOverfitThreshold - 1e-12};
}

// ---------------------------------------------------------------------------
// Drought phases on VCI3M.

inline constexpr int kPhaseCount = 5;

struct PhaseBand {
  double lower;
  double upper;
  std::string_view label;
};

inline constexpr std::array<PhaseBand, kPhaseCount> kPhaseBands = {{
    {0.0, 10.0, "Extreme vegetation deficit"},
    {10.0, 20.0, "Severe vegetation deficit"},
    {20.0, 35.0, "Moderate vegetation deficit"},
    {35.0, 50.0, "Normal vegetation conditions"},
    {50.0, 100.0, "Above normal vegetation conditions"},
}};

// Bands are [lower, upper) except the last, which is closed at 100. Inputs
// outside [0, 100] fall into the nearest end class.
inline int classify_phase(double vci3m) {
  for (int c = 0; c < kPhaseCount - 1; ++c) {
    if (vci3m < kPhaseBands[static_cast<std::size_t>(c)].upper) return c + 1;
  }
  return kPhaseCount;
}

inline std::string_view phase_label(int phase) { return kPhaseBands.at(static_cast<std::size_t>(phase - 1)).label; }

struct ConfusionMatrix {
  std::array<std::array<std::size_t, kPhaseCount>, kPhaseCount> counts{};  // [actual-1][predicted-1]

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < kPhaseCount; ++i) t += counts[i][i];
    return t;
  }
};

struct ClassificationSummary {
  ConfusionMatrix matrix;
  double accuracy = 0.0;
};

inline ClassificationSummary confusion_and_accuracy(std::span<const int> actual, std::span<const int> predicted) {
  if (actual.size() != predicted.size()) throw UsageError("class vectors differ in length");
  if (actual.empty()) throw UsageError("no rows to classify");
  ClassificationSummary out;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 1 || actual[i] > kPhaseCount || predicted[i] < 1 || predicted[i] > kPhaseCount) {
      throw UsageError("phase class outside 1..5");
    }
    ++out.matrix.counts[static_cast<std::size_t>(actual[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
  }
  out.accuracy = static_cast<double>(out.matrix.trace()) / static_cast<double>(out.matrix.total());
  return out;
}

// ---------------------------------------------------------------------------
// Class scores from a scalar VCI prediction: a triangular kernel per phase,
// centred on the band midpoint with half-support equal to the band width,
// normalised onto the simplex.

using ClassScores = std::array<double, kPhaseCount>;

inline ClassScores class_scores_from_prediction(double predicted_vci) {
  const double v = std::clamp(predicted_vci, 0.0, 100.0);
  ClassScores scores{};
  double total = 0.0;
  for (std::size_t c = 0; c < kPhaseCount; ++c) {
    const auto& band = kPhaseBands[c];
    const double center = 0.5 * (band.lower + band.upper);
    const double width = band.upper - band.lower;
    scores[c] = std::max(0.0, 1.0 - std::abs(v - center) / width);
    total += scores[c];
  }
  if (!(total > 0.0)) {
    scores.fill(0.0);
    scores[static_cast<std::size_t>(classify_phase(v) - 1)] = 1.0;
    return scores;
  }
  for (auto& s : scores) s /= total;
  return scores;
}

namespace detail {

// Probability that a random row of class i (score column i) outranks a random
// row of class j, ties counting one half, via the Mann-Whitney rank sum.
inline double pairwise_separability(std::span<const ClassScores> scores, std::span<const int> actual, int i, int j) {
  struct Item {
    double score;
    bool is_i;
  };
  std::vector<Item> items;
  const auto col = static_cast<std::size_t>(i - 1);
  for (std::size_t r = 0; r < actual.size(); ++r) {
    if (actual[r] == i) items.push_back({scores[r][col], true});
    if (actual[r] == j) items.push_back({scores[r][col], false});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  double n_i = 0.0;
  for (std::size_t start = 0; start < items.size();) {
    std::size_t end = start;
    while (end < items.size() && items[end].score == items[start].score) ++end;
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);  // average of ranks start+1..end
    for (std::size_t k = start; k < end; ++k) {
      if (items[k].is_i) {
        rank_sum += mid_rank;
        n_i += 1.0;
      }
    }
    start = end;
  }
  const double n_j = static_cast<double>(items.size()) - n_i;
  return (rank_sum - n_i * (n_i + 1.0) / 2.0) / (n_i * n_j);
}

}  // namespace detail

// Hand & Till (2001) M measure over the classes present in `actual`.
inline double hand_till_auroc(std::span<const ClassScores> scores, std::span<const int> actual) {
  if (scores.size() != actual.size()) throw UsageError("scores and labels differ in length");
  std::vector<int> present;
  for (int label : actual) {
    if (label < 1 || label > kPhaseCount) throw UsageError("phase class outside 1..5");
    if (std::find(present.begin(), present.end(), label) == present.end()) present.push_back(label);
  }
  std::sort(present.begin(), present.end());
  if (present.size() < 2) throw UsageError("Hand-Till AUROC needs at least two classes in the labels");

  double total = 0.0;
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      const double a_ij = detail::pairwise_separability(scores, actual, present[a], present[b]);
      const double a_ji = detail::pairwise_separability(scores, actual, present[b], present[a]);
      total += 0.5 * (a_ij + a_ji);
    }
  }
  const auto c = static_cast<double>(present.size());
  return 2.0 * total / (c * (c - 1.0));
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// One-vs-rest ROC for `phase`, thresholds at each distinct score, descending.
inline std::vector<RocPoint> one_vs_rest_roc(std::span<const ClassScores> scores, std::span<const int> actual, int phase) {
  const auto col = static_cast<std::size_t>(phase - 1);
  std::vector<std::size_t> order(actual.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a][col] > scores[b][col]; });
  double pos = 0.0, neg = 0.0;
  for (int label : actual) (label == phase ? pos : neg) += 1.0;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  if (pos == 0.0 || neg == 0.0) return curve;
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]][col];
    while (k < order.size() && scores[order[k]][col] == s) {
      (actual[order[k]] == phase ? tp : fp) += 1.0;
      ++k;
    }
    curve.push_back({fp / neg, tp / pos});
  }
  return curve;
}

}  // namespace drought
