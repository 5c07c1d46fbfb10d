#pragma once

// Gaussian additive models fitted by penalised least squares:
//   target = intercept + linear predictor terms + f(month) [+ f_i(x_i)]
// with f(month) a cyclic cubic spline and smoothing parameters chosen by GCV.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drought/error.hpp"
#include "drought/features.hpp"
#include "drought/metrics.hpp"
#include "drought/model_space.hpp"
#include "drought/parallel.hpp"
#include "drought/spline.hpp"

namespace drought {

inline std::vector<double> log_spaced_grid(double lo, double hi, int n) {
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
  }
  return grid;
}

inline std::vector<double> default_lambda_grid() { return log_spaced_grid(1e-4, 1e6, 25); }

inline constexpr int kPredictorBasisDimension = 10;
inline constexpr std::size_t kMinGamRows = 30;

struct GamOptions {
  bool smooth_all = false;
  std::vector<double> lambda_grid = default_lambda_grid();
  int sweeps = 3;  // coordinate sweeps when several smooths share the search
};

// One smooth term after absorbing the sum-to-zero constraint:
// contribution = spline.row(x) * constraint * coefficients.
struct SmoothTerm {
  std::string variable;  // "month" or a predictor name
  std::size_t column = 0;
  CubicSpline spline;
  Eigen::MatrixXd constraint;  // k x (k - 1), orthogonal to the training column sums
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  double edf = 0.0;

  double evaluate(double x) const { return (spline.row(x) * constraint * coefficients)(0); }
};

struct GamFit {
  std::string model_id;
  double intercept = 0.0;
  std::vector<std::string> linear_names;
  std::vector<std::size_t> linear_columns;
  std::vector<double> linear_coefficients;
  std::vector<SmoothTerm> smooths;
  double edf = 0.0;  // trace of the influence matrix
  double gcv = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
  MetricSet training;

  const SmoothTerm& month_smooth() const { return smooths.front(); }
};

// n RSS / (n - edf)^2 with edf = tr(A^-1 X'X), A = X'X + S.
struct GcvScore {
  double gcv = 0.0;
  double rss = 0.0;
  double edf = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd influence;  // A^-1 X'X
};

inline GcvScore penalized_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty,
                              const Eigen::VectorXd& y, const Eigen::MatrixXd& penalty) {
  const Eigen::MatrixXd a = xtx + penalty;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularityError("penalized normal equations are singular");
  }
  GcvScore out;
  out.beta = ldlt.solve(xty);
  out.influence = ldlt.solve(xtx);
  out.edf = out.influence.trace();
  out.rss = (y - x * out.beta).squaredNorm();
  const auto n = static_cast<double>(x.rows());
  out.gcv = n * out.rss / ((n - out.edf) * (n - out.edf));
  if (!std::isfinite(out.gcv) || !out.beta.allFinite()) throw SingularityError("penalized fit is not finite");
  return out;
}

// tr(X A^-1 X') summed from the hat-matrix diagonal, for cross-checking the
// trace identity used by penalized_fit.
inline double hat_diagonal_sum(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    sum += xi.dot(ldlt.solve(xi));
  }
  return sum;
}

namespace detail {

inline Eigen::MatrixXd sum_to_zero_constraint(const Eigen::MatrixXd& basis_design) {
  const Eigen::VectorXd sums = basis_design.colwise().sum().transpose();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(sums);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(sums.size(), sums.size());
  return q.rightCols(sums.size() - 1);
}

struct DesignLayout {
  Eigen::MatrixXd x;
  std::vector<Eigen::Index> smooth_offsets;
  std::vector<Eigen::Index> smooth_sizes;
  std::vector<Eigen::MatrixXd> smooth_penalties;  // constrained, k-1 square
};

}  // namespace detail

inline GamFit fit_gam(const ModelSpec& spec, const FeatureTable& table, std::span<const std::size_t> rows,
                      const GamOptions& options = {}) {
  if (rows.size() < kMinGamRows) {
    throw UsageError("GAM fit needs at least " + std::to_string(kMinGamRows) + " rows, got " +
                     std::to_string(rows.size()));
  }
  if (options.lambda_grid.empty()) throw UsageError("empty smoothing-parameter grid");
  const auto n = static_cast<Eigen::Index>(rows.size());

  Eigen::VectorXd y(n);
  std::vector<double> months(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[rows[static_cast<std::size_t>(i)]];
    y[i] = row.target;
    months[static_cast<std::size_t>(i)] = row.month();
  }

  GamFit fit;
  fit.model_id = spec.id();
  fit.n = rows.size();

  // Smooth terms: month first, then each predictor in smooth-all mode.
  fit.smooths.push_back({"month", FeatureTable::column_id("month"), CubicSpline::cyclic(kMonthBasisDimension, 1.0, 12.0),
                         {}, {}, 0.0, 0.0});
  std::vector<std::vector<double>> smooth_inputs{months};
  for (const auto& p : spec.predictors) {
    std::vector<double> xs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) xs[i] = table.rows[rows[i]].predictors[p.column()];
    if (options.smooth_all) {
      fit.smooths.push_back({p.name(), p.column(), CubicSpline::natural_at_quantiles(xs, kPredictorBasisDimension),
                             {}, {}, 0.0, 0.0});
      smooth_inputs.push_back(std::move(xs));
    } else {
      fit.linear_names.push_back(p.name());
      fit.linear_columns.push_back(p.column());
    }
  }

  detail::DesignLayout layout;
  Eigen::Index cols = 1 + static_cast<Eigen::Index>(fit.linear_columns.size());
  std::vector<Eigen::MatrixXd> constrained;
  for (std::size_t s = 0; s < fit.smooths.size(); ++s) {
    const Eigen::MatrixXd raw = fit.smooths[s].spline.design(smooth_inputs[s]);
    fit.smooths[s].constraint = detail::sum_to_zero_constraint(raw);
    constrained.push_back(raw * fit.smooths[s].constraint);
    layout.smooth_offsets.push_back(cols);
    layout.smooth_sizes.push_back(constrained.back().cols());
    const auto& z = fit.smooths[s].constraint;
    layout.smooth_penalties.push_back(z.transpose() * fit.smooths[s].spline.penalty() * z);
    cols += constrained.back().cols();
  }
  layout.x.resize(n, cols);
  layout.x.col(0).setOnes();
  for (std::size_t j = 0; j < fit.linear_columns.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      layout.x(i, 1 + static_cast<Eigen::Index>(j)) = table.rows[rows[static_cast<std::size_t>(i)]].predictors[fit.linear_columns[j]];
    }
  }
  for (std::size_t s = 0; s < constrained.size(); ++s) {
    layout.x.middleCols(layout.smooth_offsets[s], layout.smooth_sizes[s]) = constrained[s];
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(layout.x);
  if (qr.rank() < cols) {
    throw SingularityError("design for model " + fit.model_id + " is rank deficient (rank " +
                           std::to_string(qr.rank()) + " of " + std::to_string(cols) + ")");
  }

  const Eigen::MatrixXd xtx = layout.x.transpose() * layout.x;
  const Eigen::VectorXd xty = layout.x.transpose() * y;
  auto total_penalty = [&](const std::vector<double>& lambdas) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(cols, cols);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      s.block(layout.smooth_offsets[k], layout.smooth_offsets[k], layout.smooth_sizes[k], layout.smooth_sizes[k]) +=
          lambdas[k] * layout.smooth_penalties[k];
    }
    return s;
  };

  // Grid search on GCV; ties go to the larger (smoother) value. Several
  // smooths are tuned one at a time in repeated sweeps.
  const auto& grid = options.lambda_grid;
  std::vector<double> lambdas(fit.smooths.size(), grid.back());
  std::optional<GcvScore> best;
  for (int sweep = 0; sweep < std::max(1, options.sweeps); ++sweep) {
    bool changed = false;
    for (std::size_t s = 0; s < lambdas.size(); ++s) {
      std::vector<double> trial = lambdas;
      std::optional<GcvScore> best_here;
      double best_lambda = lambdas[s];
      for (double lambda : grid) {
        trial[s] = lambda;
        GcvScore score = penalized_fit(layout.x, xtx, xty, y, total_penalty(trial));
        if (!best_here || score.gcv <= best_here->gcv) {
          best_lambda = lambda;
          best_here = std::move(score);
        }
      }
      if (best_lambda != lambdas[s]) changed = true;
      lambdas[s] = best_lambda;
      best = std::move(best_here);
    }
    if (!changed || lambdas.size() == 1) break;
  }

  const GcvScore& chosen = *best;
  fit.intercept = chosen.beta[0];
  for (std::size_t j = 0; j < fit.linear_columns.size(); ++j) {
    fit.linear_coefficients.push_back(chosen.beta[1 + static_cast<Eigen::Index>(j)]);
  }
  for (std::size_t s = 0; s < fit.smooths.size(); ++s) {
    auto& term = fit.smooths[s];
    term.coefficients = chosen.beta.segment(layout.smooth_offsets[s], layout.smooth_sizes[s]);
    term.lambda = lambdas[s];
    term.edf = chosen.influence.diagonal().segment(layout.smooth_offsets[s], layout.smooth_sizes[s]).sum();
  }
  fit.edf = chosen.edf;
  fit.gcv = chosen.gcv;
  fit.rss = chosen.rss;

  const Eigen::VectorXd fitted = layout.x * chosen.beta;
  fit.training = regression_metrics(std::span<const double>(y.data(), rows.size()),
                                    std::span<const double>(fitted.data(), rows.size()));
  return fit;
}

inline double predict_gam(const GamFit& fit, const FeatureRow& row) {
  double value = fit.intercept;
  for (std::size_t j = 0; j < fit.linear_columns.size(); ++j) {
    value += fit.linear_coefficients[j] * row.predictors[fit.linear_columns[j]];
  }
  for (const auto& term : fit.smooths) value += term.evaluate(FeatureTable::value(row, term.column));
  return value;
}

inline std::vector<double> predict_gam(const GamFit& fit, const FeatureTable& table, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(predict_gam(fit, table.rows[r]));
  return out;
}

// ---------------------------------------------------------------------------
// The GAM screening stage.

inline double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

struct PartitionScores {
  MetricSet train;
  MetricSet validation;
};

struct GamModelResult {
  ModelSpec spec;
  std::string id;
  int lag = 1;
  bool ok = false;
  std::string error;
  std::vector<PartitionScores> partitions;
  MetricSet train;       // mean over partitions
  MetricSet validation;  // mean over partitions
  double r2_train = 0.0;
  double r2_validation = 0.0;
  double overfit_index = 0.0;
  bool overfit = false;
  bool selected = false;
  int rank = 0;
};

struct GamStageReport {
  double threshold = 0.70;
  bool smooth_all = false;
  std::vector<GamModelResult> models;  // sorted by mean training R², best first

  std::vector<ModelSpec> selected() const {
    std::vector<ModelSpec> out;
    for (const auto& m : models) {
      if (m.selected) out.push_back(m.spec);
    }
    return out;
  }
  std::vector<ModelSpec> not_selected() const {
    std::vector<ModelSpec> out;
    for (const auto& m : models) {
      if (!m.selected) out.push_back(m.spec);
    }
    return out;
  }
};

struct GamStageOptions {
  double threshold = 0.70;
  GamOptions fit;
  unsigned jobs = 1;
};

inline GamModelResult evaluate_gam_model(const ModelSpec& spec, const FeatureTable& table, const SplitPlan& plan,
                                         const GamOptions& options) {
  GamModelResult result;
  result.spec = spec;
  result.id = spec.id();
  result.lag = spec.lag();
  try {
    for (const auto& part : plan.partitions) {
      const GamFit fit = fit_gam(spec, table, part.train, options);
      std::vector<double> actual;
      for (std::size_t r : part.validation) actual.push_back(table.rows[r].target);
      const auto predicted = predict_gam(fit, table, part.validation);
      result.partitions.push_back({fit.training, regression_metrics(actual, predicted)});
    }
    std::vector<MetricSet> train, valid;
    for (const auto& p : result.partitions) {
      train.push_back(p.train);
      valid.push_back(p.validation);
    }
    result.train = mean_metrics(train);
    result.validation = mean_metrics(valid);
    result.r2_train = result.train.r2;
    result.r2_validation = result.validation.r2;
    const auto assessment = overfit_index(result.r2_train, result.r2_validation);
    result.overfit_index = assessment.index;
    result.overfit = assessment.overfit;
    result.ok = true;
  } catch (const Error& e) {
    result.ok = false;
    result.error = e.what();
    result.partitions.clear();
  }
  return result;
}

inline void rank_gam_results(std::vector<GamModelResult>& models) {
  std::sort(models.begin(), models.end(), [](const GamModelResult& a, const GamModelResult& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.ok && a.r2_train != b.r2_train) return a.r2_train > b.r2_train;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < models.size(); ++i) models[i].rank = static_cast<int>(i + 1);
}

inline GamStageReport run_gam_stage(const std::vector<ModelSpec>& models, const FeatureTable& table,
                                    const SplitPlan& plan, const GamStageOptions& options = {}) {
  if (models.empty()) throw StageError("GAM stage received no models");
  if (plan.partitions.empty()) throw StageError("split plan has no partitions");
  GamStageReport report;
  report.threshold = options.threshold;
  report.smooth_all = options.fit.smooth_all;
  report.models.resize(models.size());
  parallel_for(models.size(), options.jobs,
               [&](std::size_t i) { report.models[i] = evaluate_gam_model(models[i], table, plan, options.fit); });
  for (auto& m : report.models) m.selected = m.ok && round_to(m.r2_train, 2) >= options.threshold;
  rank_gam_results(report.models);
  return report;
}

}  // namespace drought
