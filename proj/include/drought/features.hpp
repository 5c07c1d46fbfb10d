#pragma once

// Model-ready rows: 1-3 month lags of the ten indices, the calendar month,
// its sine encoding and the VCI3M target; min-max scaling; split plans.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "drought/error.hpp"
#include "drought/indices.hpp"
#include "drought/random.hpp"

namespace drought {

inline constexpr int kMaxLag = 3;
inline constexpr std::size_t kPredictorCount = kIndexCount * kMaxLag;

inline constexpr std::size_t predictor_column(IndexKind kind, int lag) {
  return static_cast<std::size_t>(kind) * kMaxLag + static_cast<std::size_t>(lag - 1);
}

inline std::string predictor_name(IndexKind kind, int lag) {
  return std::string(feature_stem(kind)) + "_lag" + std::to_string(lag);
}

inline const std::vector<std::string>& predictor_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (auto kind : kAllIndices) {
      for (int lag = 1; lag <= kMaxLag; ++lag) out.push_back(predictor_name(kind, lag));
    }
    return out;
  }();
  return names;
}

inline double encode_month_sine(int month) {
  if (month < 1 || month > 12) throw UsageError("month " + std::to_string(month) + " outside 1..12");
  return std::sin(2.0 * std::numbers::pi * (month - 1) / 12.0);
}

struct FeatureRow {
  std::string county;
  YearMonth date;
  double month_sine = 0.0;
  std::array<double, kPredictorCount> predictors{};
  double target = 0.0;

  int month() const noexcept { return date.month; }
};

struct FeatureTable {
  std::vector<FeatureRow> rows;

  std::size_t size() const noexcept { return rows.size(); }

  // Named access over predictors plus "month", "month_sine" and "target".
  static std::size_t column_id(const std::string& name) {
    const auto& names = predictor_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    if (name == "month") return kPredictorCount;
    if (name == "month_sine") return kPredictorCount + 1;
    if (name == "target") return kPredictorCount + 2;
    throw UsageError("unknown feature column '" + name + "'");
  }

  static double value(const FeatureRow& row, std::size_t column_id) {
    if (column_id < kPredictorCount) return row.predictors[column_id];
    if (column_id == kPredictorCount) return row.month();
    if (column_id == kPredictorCount + 1) return row.month_sine;
    return row.target;
  }
};

inline FeatureTable build_feature_table(const IndexTable& indices) {
  FeatureTable table;
  for (const auto& track : indices.tracks) {
    if (track.n_months() < 7) {
      throw StructuralError("county " + track.county + " spans " + std::to_string(track.n_months()) +
                            " months; lagged features need at least 7");
    }
    for (std::size_t t = kMaxLag; t < track.n_months(); ++t) {
      const auto& target = track[kTargetIndex][t];
      if (!target) continue;
      FeatureRow row;
      row.county = track.county;
      row.date = track.start.plus(static_cast<int>(t));
      row.month_sine = encode_month_sine(row.date.month);
      row.target = *target;
      bool complete = true;
      for (auto kind : kAllIndices) {
        for (int lag = 1; lag <= kMaxLag && complete; ++lag) {
          const auto& v = track[kind][t - static_cast<std::size_t>(lag)];
          if (!v) {
            complete = false;
          } else {
            row.predictors[predictor_column(kind, lag)] = *v;
          }
        }
      }
      if (complete) table.rows.push_back(std::move(row));
    }
  }
  return table;
}

inline void write_feature_csv(const FeatureTable& table, std::ostream& out) {
  out << "county,year,month,month_sine";
  for (const auto& name : predictor_names()) out << ',' << name;
  out << ",target\n";
  for (const auto& row : table.rows) {
    out << row.county << ',' << row.date.year << ',' << row.date.month << ','
        << detail::format_double(row.month_sine);
    for (double v : row.predictors) out << ',' << detail::format_double(v);
    out << ',' << detail::format_double(row.target) << '\n';
  }
}

inline void write_feature_csv(const FeatureTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write feature table '" + path + "'");
  write_feature_csv(table, out);
}

inline FeatureTable parse_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw StructuralError("no records");
  std::vector<std::string> expected = {"county", "year", "month", "month_sine"};
  for (const auto& name : predictor_names()) expected.push_back(name);
  expected.emplace_back("target");
  const auto header = detail::split_commas(line);
  if (header.size() != expected.size()) {
    throw ParseError("feature table header has " + std::to_string(header.size()) + " columns, expected " +
                     std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (header[i] != expected[i]) {
      throw ParseError("feature table header: column " + std::to_string(i + 1) + " is '" +
                       std::string(header[i]) + "', expected '" + expected[i] + "'");
    }
  }
  FeatureTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != expected.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected.size()) +
                       " fields");
    }
    FeatureRow row;
    row.county = std::string(fields[0]);
    row.date = {detail::parse_int(fields[1], line_no, "year"), detail::parse_int(fields[2], line_no, "month")};
    auto required = [&](std::size_t i) {
      const auto v = detail::parse_optional_double(fields[i], line_no, expected[i]);
      if (!v) throw ValidationError("line " + std::to_string(line_no) + ": null in column '" + expected[i] + "'");
      return *v;
    };
    row.month_sine = required(3);
    for (std::size_t k = 0; k < kPredictorCount; ++k) row.predictors[k] = required(4 + k);
    row.target = required(4 + kPredictorCount);
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw StructuralError("no records");
  return table;
}

inline FeatureTable parse_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open feature table '" + path + "'");
  return parse_feature_csv(static_cast<std::istream&>(in));
}

// ---------------------------------------------------------------------------
// Split plans. Row indices refer to FeatureTable::rows.

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;

  friend bool operator==(const Partition&, const Partition&) = default;
};

struct SplitPlan {
  int holdout_months = 24;
  int k = 10;
  std::uint64_t seed = 0;
  std::size_t n_rows = 0;
  std::vector<std::size_t> test;
  std::vector<std::size_t> dev;
  std::vector<Partition> partitions;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

inline constexpr double kTrainFraction = 0.7;

// The last `holdout_months` months of each county form the test set; the rest
// is split k times at random 70:30 into train and validation.
inline SplitPlan make_split_plan(const FeatureTable& table, int holdout_months, int k, std::uint64_t seed) {
  if (holdout_months < 0) throw ConfigError("holdout months must be >= 0");
  if (k < 1) throw ConfigError("number of partitions must be >= 1");
  SplitPlan plan;
  plan.holdout_months = holdout_months;
  plan.k = k;
  plan.seed = seed;
  plan.n_rows = table.size();

  std::map<std::string, std::pair<int, int>> span;  // first, last ordinal
  for (const auto& row : table.rows) {
    auto [it, inserted] = span.try_emplace(row.county, row.date.ordinal(), row.date.ordinal());
    if (!inserted) {
      it->second.first = std::min(it->second.first, row.date.ordinal());
      it->second.second = std::max(it->second.second, row.date.ordinal());
    }
  }
  for (const auto& [county, range] : span) {
    const int months = range.second - range.first + 1;
    if (holdout_months >= months) {
      throw ConfigError("holdout of " + std::to_string(holdout_months) + " months covers the whole " +
                        std::to_string(months) + "-month span of county " + county);
    }
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table.rows[i];
    const bool in_test = row.date.ordinal() > span.at(row.county).second - holdout_months;
    (in_test ? plan.test : plan.dev).push_back(i);
  }
  if (plan.dev.empty()) throw ConfigError("no development rows remain after the holdout");

  const auto n_train = static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(plan.dev.size())));
  for (int p = 0; p < k; ++p) {
    Rng rng(derive_seed(seed, "partition", static_cast<std::uint64_t>(p)));
    std::vector<std::size_t> order = plan.dev;
    rng.shuffle(order);
    Partition part;
    part.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    part.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.validation.begin(), part.validation.end());
    plan.partitions.push_back(std::move(part));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Min-max scaling. Fitting only accepts a TrainView, which can only be built
// from a partition's training rows, so validation and test rows never shape
// the scaling.

class TrainView {
public:
  TrainView(const FeatureTable& table, const Partition& partition) : table_(&table), rows_(partition.train) {}

  const FeatureTable& table() const noexcept { return *table_; }
  std::span<const std::size_t> rows() const noexcept { return rows_; }

private:
  const FeatureTable* table_;
  std::span<const std::size_t> rows_;
};

struct ColumnRange {
  std::string column;
  double min = 0.0;
  double max = 0.0;

  double normalize(double x) const noexcept { return std::clamp((x - min) / (max - min), 0.0, 1.0); }
  double denormalize(double z) const noexcept { return min + z * (max - min); }

  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

struct NormParams {
  std::vector<ColumnRange> columns;

  const ColumnRange& at(const std::string& name) const {
    for (const auto& c : columns) {
      if (c.column == name) return c;
    }
    throw UsageError("no normalization parameters for column '" + name + "'");
  }

  friend bool operator==(const NormParams&, const NormParams&) = default;
};

inline NormParams minmax_fit(const TrainView& view, const std::vector<std::string>& columns) {
  if (view.rows().empty()) throw UsageError("cannot fit normalization on zero training rows");
  NormParams params;
  for (const auto& name : columns) {
    const std::size_t id = FeatureTable::column_id(name);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r : view.rows()) {
      const double v = FeatureTable::value(view.table().rows[r], id);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw ValidationError("column '" + name + "' is constant on the training rows");
    params.columns.push_back({name, lo, hi});
  }
  return params;
}

// Row-major matrix of the parameter columns for the given rows, in [0, 1].
inline std::vector<std::vector<double>> minmax_apply(const NormParams& params, const FeatureTable& table,
                                                     std::span<const std::size_t> rows) {
  std::vector<std::size_t> ids;
  for (const auto& c : params.columns) ids.push_back(FeatureTable::column_id(c.column));
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    std::vector<double> values(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      values[j] = params.columns[j].normalize(FeatureTable::value(table.rows[r], ids[j]));
    }
    out.push_back(std::move(values));
  }
  return out;
}

}  // namespace drought
