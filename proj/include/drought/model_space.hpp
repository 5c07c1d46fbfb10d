#pragma once

// Candidate model enumeration under three reduction rules: at most two
// predictors, never two of the same category, and a single lag level.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "drought/error.hpp"
#include "drought/features.hpp"

namespace drought {

enum class Category { Vegetation, Precipitation };

inline std::string_view category_name(Category c) {
  return c == Category::Vegetation ? "vegetation" : "precipitation";
}

struct CatalogEntry {
  IndexKind index = IndexKind::NdviDekad;
  int lag = 1;

  std::string name() const { return predictor_name(index, lag); }
  Category category() const { return is_vegetation(index) ? Category::Vegetation : Category::Precipitation; }
  std::size_t column() const { return predictor_column(index, lag); }

  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

using VariableCatalog = std::vector<CatalogEntry>;

inline VariableCatalog full_catalog() {
  VariableCatalog catalog;
  for (auto kind : kAllIndices) {
    for (int lag = 1; lag <= kMaxLag; ++lag) catalog.push_back({kind, lag});
  }
  return catalog;
}

inline VariableCatalog catalog_for_lag(int lag) {
  VariableCatalog catalog;
  for (auto kind : kAllIndices) catalog.push_back({kind, lag});
  return catalog;
}

inline CatalogEntry parse_catalog_entry(const std::string& name) {
  for (auto kind : kAllIndices) {
    for (int lag = 1; lag <= kMaxLag; ++lag) {
      if (predictor_name(kind, lag) == name) return {kind, lag};
    }
  }
  throw ParseError("unknown predictor '" + name + "'");
}

// Seasonality is structural and always present; it is not one of the
// predictors.
struct ModelSpec {
  std::vector<CatalogEntry> predictors;  // vegetation first when paired
  bool seasonality = true;

  int lag() const { return predictors.front().lag; }

  // Predictor names joined by '+', vegetation before precipitation
  // ("VCIdekad_lag1+SPI1M_lag1").
  std::string id() const {
    std::string out;
    for (const auto& p : predictors) {
      if (!out.empty()) out += '+';
      out += p.name();
    }
    return out;
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline bool satisfies_reduction_rules(const std::vector<CatalogEntry>& predictors) {
  if (predictors.empty() || predictors.size() > 2) return false;
  if (predictors.size() == 2) {
    if (predictors[0].lag != predictors[1].lag) return false;
    if (predictors[0].category() == predictors[1].category()) return false;
  }
  return true;
}

inline ModelSpec make_model(std::vector<CatalogEntry> predictors) {
  if (!satisfies_reduction_rules(predictors)) throw UsageError("predictor set violates the model rules");
  std::stable_sort(predictors.begin(), predictors.end(), [](const auto& a, const auto& b) {
    return a.category() == Category::Vegetation && b.category() == Category::Precipitation;
  });
  return ModelSpec{std::move(predictors), true};
}

inline ModelSpec parse_model_id(const std::string& id) {
  std::vector<CatalogEntry> predictors;
  std::size_t pos = 0;
  while (pos <= id.size()) {
    const auto plus = id.find('+', pos);
    predictors.push_back(parse_catalog_entry(id.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos)));
    if (plus == std::string::npos) break;
    pos = plus + 1;
  }
  return make_model(std::move(predictors));
}

// Sum over r = 1..n of C(n, r), i.e. 2^n - 1.
inline std::uint64_t unconstrained_count(unsigned n) {
  if (n < 1 || n > 63) throw UsageError("unconstrained_count needs 1 <= n <= 63");
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(n, 0)
  for (unsigned r = 1; r <= n; ++r) {
    binom = static_cast<std::uint64_t>(static_cast<__uint128_t>(binom) * (n - r + 1) / r);
    total += binom;
  }
  return total;
}

inline std::uint64_t two_variable_count(unsigned n) {
  if (n < 2) throw UsageError("two_variable_count needs n >= 2");
  const std::uint64_t m = n;
  return m + m * (m - 1) / 2;
}

// Canonical order: lag ascending, then id lexicographic.
inline std::vector<ModelSpec> enumerate_models(const VariableCatalog& catalog) {
  std::vector<ModelSpec> models;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    models.push_back(make_model({catalog[i]}));
    for (std::size_t j = i + 1; j < catalog.size(); ++j) {
      if (satisfies_reduction_rules({catalog[i], catalog[j]})) models.push_back(make_model({catalog[i], catalog[j]}));
    }
  }
  std::sort(models.begin(), models.end(), [](const ModelSpec& a, const ModelSpec& b) {
    if (a.lag() != b.lag()) return a.lag() < b.lag();
    return a.id() < b.id();
  });
  return models;
}

}  // namespace drought
