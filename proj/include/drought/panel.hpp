#pragma once

// County panels of dekadal NDVI and monthly rainfall estimates: the CSV
// contract, a validator, and a seeded synthetic generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drought/error.hpp"
#include "drought/random.hpp"

namespace drought {

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  constexpr int ordinal() const noexcept { return year * 12 + (month - 1); }
  static constexpr YearMonth from_ordinal(int ordinal) noexcept {
    const int year = ordinal >= 0 ? ordinal / 12 : -((-ordinal + 11) / 12);
    return {year, ordinal - year * 12 + 1};
  }
  constexpr YearMonth plus(int months) const noexcept { return from_ordinal(ordinal() + months); }

  friend constexpr auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

inline std::string to_string(const YearMonth& ym) {
  std::ostringstream out;
  out << ym.year << '-' << std::setw(2) << std::setfill('0') << ym.month;
  return out.str();
}

using MaybeValue = std::optional<double>;
using DekadTriple = std::array<MaybeValue, 3>;

// One county's contiguous monthly record starting at `start`. Month i of the
// record is start.plus(i). Gaps are explicit nullopt entries.
struct CountyRecord {
  std::string county;
  YearMonth start;
  std::vector<DekadTriple> ndvi;
  std::vector<MaybeValue> rfe;

  std::size_t n_months() const noexcept { return rfe.size(); }
  YearMonth month_at(std::size_t i) const noexcept { return start.plus(static_cast<int>(i)); }
  YearMonth last() const noexcept { return month_at(n_months() - 1); }

  friend bool operator==(const CountyRecord&, const CountyRecord&) = default;
};

struct RawPanel {
  std::vector<CountyRecord> counties;

  std::vector<std::string> county_ids() const {
    std::vector<std::string> ids;
    ids.reserve(counties.size());
    for (const auto& c : counties) ids.push_back(c.county);
    return ids;
  }

  friend bool operator==(const RawPanel&, const RawPanel&) = default;
};

struct RangeViolation {
  std::string county;
  YearMonth date;
  int dekad = 0;  // 0 for monthly fields
  std::string field;
  double value = 0.0;
};

struct PanelGap {
  std::string county;
  YearMonth date;
};

struct CountySpan {
  std::string county;
  YearMonth first;
  YearMonth last;
};

struct ValidationReport {
  std::size_t n_rows = 0;  // dekad rows
  std::size_t n_gaps = 0;  // months with at least one null field
  std::vector<PanelGap> gaps;
  std::vector<RangeViolation> range_violations;
  std::vector<CountySpan> span_per_county;

  bool accepted() const noexcept { return range_violations.empty(); }
};

inline ValidationReport validate_panel(const RawPanel& panel) {
  ValidationReport report;
  for (const auto& c : panel.counties) {
    if (c.n_months() == 0) continue;
    report.span_per_county.push_back({c.county, c.start, c.last()});
    for (std::size_t i = 0; i < c.n_months(); ++i) {
      const YearMonth ym = c.month_at(i);
      report.n_rows += 3;
      bool gap = !c.rfe[i].has_value();
      for (int d = 0; d < 3; ++d) {
        const auto& v = c.ndvi[i][static_cast<std::size_t>(d)];
        if (!v) {
          gap = true;
        } else if (!(*v >= -1.0 && *v <= 1.0)) {
          report.range_violations.push_back({c.county, ym, d + 1, "ndvi", *v});
        }
      }
      if (c.rfe[i] && !(*c.rfe[i] >= 0.0)) {
        report.range_violations.push_back({c.county, ym, 0, "rfe", *c.rfe[i]});
      }
      if (gap) {
        ++report.n_gaps;
        report.gaps.push_back({c.county, ym});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV contract: county,year,month,dekad,ndvi,rfe (lowercase, exact order).
// rfe may be repeated on all three dekad rows of a month or given on dekad 3
// only; an empty field is a null.

inline constexpr std::array<std::string_view, 6> kPanelColumns = {
    "county", "year", "month", "dekad", "ndvi", "rfe"};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_optional_double(std::string_view field, std::size_t line,
                                                   std::string_view column) {
  if (field.empty()) return std::nullopt;
  std::string text(field);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) {
    throw ParseError("line " + std::to_string(line) + ": column '" + std::string(column) +
                     "' is not a number: '" + text + "'");
  }
  return value;
}

inline int parse_int(std::string_view field, std::size_t line, std::string_view column) {
  std::string text(field);
  char* end = nullptr;
  const long value = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ParseError("line " + std::to_string(line) + ": column '" + std::string(column) +
                     "' is not an integer: '" + text + "'");
  }
  return static_cast<int>(value);
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  const std::string full = out.str();
  for (int precision = 6; precision < 17; ++precision) {
    std::ostringstream shorter;
    shorter << std::setprecision(precision) << v;
    if (std::strtod(shorter.str().c_str(), nullptr) == v) return shorter.str();
  }
  return full;
}

inline std::string format_optional(const MaybeValue& v) { return v ? format_double(*v) : ""; }

}  // namespace detail

inline RawPanel parse_panel_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw StructuralError("no records");

  const auto header = detail::split_commas(line);
  for (std::size_t i = 0; i < kPanelColumns.size(); ++i) {
    if (i >= header.size()) {
      throw ParseError("header is missing column '" + std::string(kPanelColumns[i]) + "'");
    }
    if (header[i] != kPanelColumns[i]) {
      throw ParseError("header column " + std::to_string(i + 1) + " is '" + std::string(header[i]) +
                       "', expected '" + std::string(kPanelColumns[i]) + "'");
    }
  }
  if (header.size() > kPanelColumns.size()) {
    throw ParseError("unexpected header column '" + std::string(header[kPanelColumns.size()]) + "'");
  }

  struct MonthCell {
    std::array<bool, 3> seen{};
    DekadTriple ndvi{};
    MaybeValue rfe;
    std::size_t rfe_line = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<int, MonthCell>> cells;

  std::size_t n_records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != kPanelColumns.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields, found " +
                       std::to_string(fields.size()));
    }
    const std::string county(fields[0]);
    if (county.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty county");
    const int year = detail::parse_int(fields[1], line_no, "year");
    const int month = detail::parse_int(fields[2], line_no, "month");
    const int dekad = detail::parse_int(fields[3], line_no, "dekad");
    const auto ndvi = detail::parse_optional_double(fields[4], line_no, "ndvi");
    const auto rfe = detail::parse_optional_double(fields[5], line_no, "rfe");

    const auto where = "line " + std::to_string(line_no) + ": ";
    if (month < 1 || month > 12) throw ValidationError(where + "month " + std::to_string(month) + " outside 1..12");
    if (dekad < 1 || dekad > 3) throw ValidationError(where + "dekad " + std::to_string(dekad) + " outside 1..3");
    if (ndvi && !(*ndvi >= -1.0 && *ndvi <= 1.0)) {
      throw ValidationError(where + "ndvi=" + detail::format_double(*ndvi) + " outside [-1, 1]");
    }
    if (rfe && !(*rfe >= 0.0)) {
      throw ValidationError(where + "rfe=" + detail::format_double(*rfe) + " is negative");
    }

    if (!cells.contains(county)) order.push_back(county);
    auto& cell = cells[county][YearMonth{year, month}.ordinal()];
    const auto d = static_cast<std::size_t>(dekad - 1);
    if (cell.seen[d]) {
      throw StructuralError(where + "duplicate record for " + county + " " +
                            to_string({year, month}) + " dekad " + std::to_string(dekad));
    }
    cell.seen[d] = true;
    cell.ndvi[d] = ndvi;
    if (rfe) {
      if (cell.rfe && *cell.rfe != *rfe) {
        throw ValidationError(where + "rfe=" + detail::format_double(*rfe) +
                              " disagrees with line " + std::to_string(cell.rfe_line) +
                              " for the same month");
      }
      cell.rfe = rfe;
      cell.rfe_line = line_no;
    }
    ++n_records;
  }
  if (n_records == 0) throw StructuralError("no records");

  RawPanel panel;
  for (const auto& county : order) {
    const auto& months = cells.at(county);
    CountyRecord record;
    record.county = county;
    const int first = months.begin()->first;
    const int last = months.rbegin()->first;
    record.start = YearMonth::from_ordinal(first);
    for (int ord = first; ord <= last; ++ord) {
      const auto it = months.find(ord);
      if (it == months.end()) {
        throw StructuralError("non-contiguous months for county " + county + ": " +
                              to_string(YearMonth::from_ordinal(ord)) + " is missing");
      }
      for (int d = 0; d < 3; ++d) {
        if (!it->second.seen[static_cast<std::size_t>(d)]) {
          throw StructuralError("county " + county + " " + to_string(YearMonth::from_ordinal(ord)) +
                                " is missing dekad " + std::to_string(d + 1));
        }
      }
      record.ndvi.push_back(it->second.ndvi);
      record.rfe.push_back(it->second.rfe);
    }
    panel.counties.push_back(std::move(record));
  }
  return panel;
}

inline RawPanel parse_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open panel file '" + path + "'");
  return parse_panel_csv(static_cast<std::istream&>(in));
}

inline void write_panel_csv(const RawPanel& panel, std::ostream& out) {
  out << "county,year,month,dekad,ndvi,rfe\n";
  for (const auto& c : panel.counties) {
    for (std::size_t i = 0; i < c.n_months(); ++i) {
      const YearMonth ym = c.month_at(i);
      for (int d = 0; d < 3; ++d) {
        out << c.county << ',' << ym.year << ',' << ym.month << ',' << (d + 1) << ','
            << detail::format_optional(c.ndvi[i][static_cast<std::size_t>(d)]) << ','
            << detail::format_optional(c.rfe[i]) << '\n';
      }
    }
  }
}

inline void write_panel_csv(const RawPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write panel file '" + path + "'");
  write_panel_csv(panel, out);
}

// ---------------------------------------------------------------------------
// Synthetic panels.
//
// Rainfall: a 12-month sinusoidal climatology per county scaled by a county
// rainfall level, perturbed by AR(1) anomalies. NDVI: a county-specific level
// and gain applied to a soil-moisture state that integrates rainfall delayed
// by `rainfall_to_ndvi_lag` months. Dekads interpolate between consecutive
// month-end values, so the third dekad equals the month-end state.

struct SyntheticConfig {
  int n_counties = 4;
  int n_years = 15;
  std::uint64_t seed = 20190701;
  double seasonal_amplitude = 0.9;
  double noise_sd = 0.6;
  int rainfall_to_ndvi_lag = 1;
  double ar_coefficient = 0.0;
  int start_year = 2001;
  double vegetation_memory = 0.1;  // month-to-month persistence of soil moisture, [0, 1)
  double ndvi_noise_ratio = 0.01;   // NDVI observation noise sd as a fraction of noise_sd

  void validate() const {
    if (n_counties < 1) throw ConfigError("synthetic n_counties must be >= 1");
    if (n_years < 4) throw ConfigError("synthetic n_years must be >= 4");
    if (!(seasonal_amplitude >= 0.0)) throw ConfigError("synthetic seasonal_amplitude must be >= 0");
    if (!(noise_sd >= 0.0)) throw ConfigError("synthetic noise_sd must be >= 0");
    if (rainfall_to_ndvi_lag < 0) throw ConfigError("synthetic rainfall_to_ndvi_lag must be >= 0");
    if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) {
      throw ConfigError("synthetic ar_coefficient must lie in [0, 1)");
    }
    if (!(vegetation_memory >= 0.0 && vegetation_memory < 1.0)) {
      throw ConfigError("synthetic vegetation_memory must lie in [0, 1)");
    }
    if (!(ndvi_noise_ratio >= 0.0)) throw ConfigError("synthetic ndvi_noise_ratio must be >= 0");
  }
};

inline constexpr std::array<std::string_view, 4> kSyntheticCountyNames = {
    "turkana", "marsabit", "mandera", "wajir"};

inline RawPanel generate_synthetic_panel(const SyntheticConfig& config) {
  config.validate();
  constexpr int kBurnIn = 36;
  // Share of the current month-end state in each dekad; the rest is carried
  // over from the previous month.
  constexpr std::array<double, 3> kDekadWeights = {0.75, 0.9, 1.0};
  const int n_months = config.n_years * 12;
  const int lag = config.rainfall_to_ndvi_lag;

  RawPanel panel;
  for (int c = 0; c < config.n_counties; ++c) {
    Rng rng(derive_seed(config.seed, "county", static_cast<std::uint64_t>(c)));
    const double rain_level = rng.uniform(20.0, 45.0);
    const double phase = rng.uniform(-0.5, 0.5);
    const double ndvi_level = rng.uniform(0.10, 0.30);
    const double ndvi_gain = rng.uniform(0.15, 0.40);

    const int total = kBurnIn + lag + n_months;
    std::vector<double> rain(static_cast<std::size_t>(total));
    double anomaly = 0.0;
    for (int t = 0; t < total; ++t) {
      const int month0 = ((t - kBurnIn - lag) % 12 + 12) % 12;
      const double seasonal =
          1.0 + config.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * month0 / 12.0 + phase);
      anomaly = config.ar_coefficient * anomaly + config.noise_sd * rng.normal();
      rain[static_cast<std::size_t>(t)] = std::max(0.0, rain_level * (seasonal + anomaly));
    }

    std::vector<double> month_end(static_cast<std::size_t>(total), 0.0);
    double moisture = 0.0;
    const double obs_sd = config.ndvi_noise_ratio * config.noise_sd;
    for (int t = 0; t < total; ++t) {
      const double driver = t >= lag ? rain[static_cast<std::size_t>(t - lag)] / rain_level : 1.0;
      moisture = config.vegetation_memory * moisture + (1.0 - config.vegetation_memory) * driver;
      month_end[static_cast<std::size_t>(t)] = ndvi_level + ndvi_gain * std::tanh(moisture);
    }

    CountyRecord record;
    record.county = c < static_cast<int>(kSyntheticCountyNames.size())
                        ? std::string(kSyntheticCountyNames[static_cast<std::size_t>(c)])
                        : "county" + std::to_string(c + 1);
    record.start = {config.start_year, 1};
    record.ndvi.reserve(static_cast<std::size_t>(n_months));
    record.rfe.reserve(static_cast<std::size_t>(n_months));
    for (int i = 0; i < n_months; ++i) {
      const auto t = static_cast<std::size_t>(kBurnIn + lag + i);
      DekadTriple dekads;
      for (int d = 0; d < 3; ++d) {
        const double w = kDekadWeights[static_cast<std::size_t>(d)];
        double v = (1.0 - w) * month_end[t - 1] + w * month_end[t];
        if (obs_sd > 0.0) v += obs_sd * rng.normal();
        dekads[static_cast<std::size_t>(d)] = std::clamp(v, -1.0, 1.0);
      }
      record.ndvi.push_back(dekads);
      record.rfe.push_back(rain[t]);
    }
    panel.counties.push_back(std::move(record));
  }
  return panel;
}

}  // namespace drought
