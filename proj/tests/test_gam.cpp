#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "drought/gam.hpp"

using namespace drought;

namespace {

constexpr std::size_t kVci1 = predictor_column(IndexKind::Vci1M, 1);
constexpr std::size_t kSpi1 = predictor_column(IndexKind::Spi1M, 1);

// target = 20 + 0.6 x + 8 sin(month) + noise
FeatureTable toy_table(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  FeatureTable table;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRow row;
    row.county = "a";
    row.date = YearMonth{2000, 1}.plus(static_cast<int>(i));
    row.month_sine = encode_month_sine(row.date.month);
    for (auto& p : row.predictors) p = rng.uniform(0.0, 100.0);
    row.target = 20.0 + 0.6 * row.predictors[kVci1] + 8.0 * row.month_sine + noise * rng.normal();
    table.rows.push_back(row);
  }
  return table;
}

std::vector<std::size_t> all_rows(const FeatureTable& t) {
  std::vector<std::size_t> rows(t.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

TEST(LambdaGrid, LogSpaced) {
  const auto g = default_lambda_grid();
  ASSERT_EQ(g.size(), 25u);
  EXPECT_NEAR(g.front(), 1e-4, 1e-18);
  EXPECT_NEAR(g.back(), 1e6, 1e-6);
  EXPECT_NEAR(g[1] / g[0], g[24] / g[23], 1e-9);
}

TEST(FitGam, RecoversLinearAndSeasonalTerms) {
  const auto table = toy_table(240, 0.5, 1);
  const auto rows = all_rows(table);
  const auto fit = fit_gam(parse_model_id("VCI1M_lag1"), table, rows);
  ASSERT_EQ(fit.linear_coefficients.size(), 1u);
  EXPECT_NEAR(fit.linear_coefficients[0], 0.6, 0.01);
  EXPECT_GT(fit.training.r2, 0.99);
  // Seasonal smooth tracks the sine between months 4 and 10 (peak and trough).
  EXPECT_NEAR(fit.month_smooth().evaluate(4.0) - fit.month_smooth().evaluate(10.0), 16.0, 0.5);
}

TEST(FitGam, SeasonalFitMatchesSineCosineLeastSquares) {
  const auto table = toy_table(240, 0.0, 2);
  const auto rows = all_rows(table);
  GamOptions options;
  options.lambda_grid = {1e-8};
  const auto fit = fit_gam(parse_model_id("VCI1M_lag1"), table, rows, options);
  for (const auto& row : table.rows) ASSERT_NEAR(predict_gam(fit, row), row.target, 1e-6);
}

TEST(FitGam, ResidualsHaveZeroMean) {
  const auto table = toy_table(120, 3.0, 3);
  const auto rows = all_rows(table);
  const auto fit = fit_gam(parse_model_id("VCI1M_lag1+SPI1M_lag1"), table, rows);
  double sum = 0.0;
  for (const auto& row : table.rows) sum += row.target - predict_gam(fit, row);
  EXPECT_NEAR(sum / static_cast<double>(table.size()), 0.0, 1e-9);
}

TEST(FitGam, DuplicateColumnIsSingular) {
  auto table = toy_table(80, 1.0, 4);
  for (auto& row : table.rows) row.predictors[kSpi1] = row.predictors[kVci1];
  const auto rows = all_rows(table);
  EXPECT_THROW(fit_gam(parse_model_id("VCI1M_lag1+SPI1M_lag1"), table, rows), SingularityError);
}

TEST(FitGam, TooFewRowsRejected) {
  const auto table = toy_table(20, 1.0, 5);
  const auto rows = all_rows(table);
  EXPECT_THROW(fit_gam(parse_model_id("VCI1M_lag1"), table, rows), UsageError);
}

TEST(FitGam, LargeLambdaApproachesOls) {
  const auto table = toy_table(150, 2.0, 6);
  const auto rows = all_rows(table);
  GamOptions options;
  options.lambda_grid = {1e14};
  const auto fit = fit_gam(parse_model_id("VCI1M_lag1"), table, rows, options);
  double mx = 0, my = 0;
  for (const auto& r : table.rows) {
    mx += r.predictors[kVci1];
    my += r.target;
  }
  mx /= static_cast<double>(table.size());
  my /= static_cast<double>(table.size());
  double sxy = 0, sxx = 0;
  for (const auto& r : table.rows) {
    sxy += (r.predictors[kVci1] - mx) * (r.target - my);
    sxx += (r.predictors[kVci1] - mx) * (r.predictors[kVci1] - mx);
  }
  EXPECT_NEAR(fit.linear_coefficients[0], sxy / sxx, 1e-6);
  EXPECT_NEAR(fit.intercept, my - sxy / sxx * mx, 1e-4);
  EXPECT_NEAR(fit.edf, 2.0, 1e-6);
}

TEST(Gcv, TraceIdentityAgreesWithHatDiagonal) {
  Rng rng(7);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(60, 6, [&] { return rng.uniform(-1.0, 1.0); });
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) y[i] = rng.normal();
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(6, 6) * 3.0;
  s(0, 0) = 0.0;
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const auto score = penalized_fit(x, xtx, x.transpose() * y, y, s);
  EXPECT_NEAR(score.edf, hat_diagonal_sum(x, xtx + s), 1e-10);
  const double n = 60.0;
  EXPECT_NEAR(score.gcv, n * score.rss / ((n - score.edf) * (n - score.edf)), 1e-12);
}

TEST(GamStage, ThresholdAboveOneSelectsNothing) {
  SyntheticConfig config;
  config.n_counties = 2;
  config.n_years = 8;
  const auto panel = generate_synthetic_panel(config);
  const auto table = build_feature_table(build_index_table(panel, default_baseline(panel)));
  const auto plan = make_split_plan(table, 12, 3, 42);
  const auto models = enumerate_models(catalog_for_lag(1));
  GamStageOptions options;
  options.threshold = 1.01;
  const auto report = run_gam_stage(models, table, plan, options);
  EXPECT_EQ(report.models.size(), 34u);
  EXPECT_TRUE(report.selected().empty());
  EXPECT_EQ(report.not_selected().size(), 34u);
  for (std::size_t i = 1; i < report.models.size(); ++i) {
    EXPECT_GE(report.models[i - 1].r2_train, report.models[i].r2_train);
  }

  options.threshold = 0.0;
  options.jobs = 2;
  const auto all = run_gam_stage(models, table, plan, options);
  EXPECT_EQ(all.selected().size(), 34u);
  EXPECT_THROW(run_gam_stage({}, table, plan, options), StageError);
}

TEST(GamStage, SmoothAllFitsEveryTermAsSmooth) {
  const auto table = toy_table(200, 1.0, 8);
  const auto rows = all_rows(table);
  GamOptions options;
  options.smooth_all = true;
  const auto fit = fit_gam(parse_model_id("VCI1M_lag1+SPI1M_lag1"), table, rows, options);
  EXPECT_TRUE(fit.linear_coefficients.empty());
  EXPECT_EQ(fit.smooths.size(), 3u);
  EXPECT_GT(fit.training.r2, 0.95);
}
