#pragma once

// Anomaly indices over a RawPanel: climatologies, temporal aggregates, VCI,
// RCI and the z-score SPI, assembled into the ten-column monthly index table.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drought/error.hpp"
#include "drought/panel.hpp"

namespace drought {

enum class Level { Dekad, OneMonth, ThreeMonth };
enum class Quantity { Ndvi, Rainfall, Index };

inline std::string_view level_name(Level level) {
  switch (level) {
    case Level::Dekad: return "dekad";
    case Level::OneMonth: return "1-month";
    case Level::ThreeMonth: return "3-month";
  }
  return "?";
}

// Dekad tracks hold 3 values per month (index 3*i + d); monthly tracks one.
struct Track {
  std::string county;
  YearMonth start;
  std::vector<MaybeValue> values;
};

struct Series {
  Level level = Level::OneMonth;
  Quantity quantity = Quantity::Ndvi;
  std::vector<Track> tracks;

  int per_month() const noexcept { return level == Level::Dekad ? 3 : 1; }
};

inline Series ndvi_dekad_series(const RawPanel& panel) {
  Series s{Level::Dekad, Quantity::Ndvi, {}};
  for (const auto& c : panel.counties) {
    Track t{c.county, c.start, {}};
    t.values.reserve(3 * c.n_months());
    for (const auto& triple : c.ndvi) t.values.insert(t.values.end(), triple.begin(), triple.end());
    s.tracks.push_back(std::move(t));
  }
  return s;
}

inline Series rfe_monthly_series(const RawPanel& panel) {
  Series s{Level::OneMonth, Quantity::Rainfall, {}};
  for (const auto& c : panel.counties) s.tracks.push_back({c.county, c.start, c.rfe});
  return s;
}

// Temporal aggregate over `window` months ending at each month. NDVI is a
// state and is averaged; rainfall accumulates and is summed. Any null
// constituent, or an incomplete window at the head of a track, gives null.
inline Series aggregate(const Series& input, int window) {
  if (window != 1 && window != 3) throw UsageError("aggregation window must be 1 or 3 months");
  if (input.level == Level::ThreeMonth) throw UsageError("cannot aggregate a 3-month series further");
  if (input.quantity == Quantity::Index) throw UsageError("aggregate expects an NDVI or rainfall series");
  if (input.level == Level::OneMonth && window == 1) return input;

  const bool sum = input.quantity == Quantity::Rainfall;
  const int per = input.per_month();
  const auto span = static_cast<std::size_t>(window * per);
  Series out{window == 1 ? Level::OneMonth : Level::ThreeMonth, input.quantity, {}};
  for (const auto& track : input.tracks) {
    const std::size_t n_months = track.values.size() / static_cast<std::size_t>(per);
    Track t{track.county, track.start, std::vector<MaybeValue>(n_months)};
    for (std::size_t i = 0; i < n_months; ++i) {
      const std::size_t end = (i + 1) * static_cast<std::size_t>(per);
      if (end < span) continue;
      double acc = 0.0;
      bool complete = true;
      for (std::size_t j = end - span; j < end; ++j) {
        if (!track.values[j]) {
          complete = false;
          break;
        }
        acc += *track.values[j];
      }
      if (complete) t.values[i] = sum ? acc : acc / static_cast<double>(span);
    }
    out.tracks.push_back(std::move(t));
  }
  return out;
}

struct Baseline {
  int first_year = 0;
  int last_year = 0;
};

// Parses "2003..2013".
inline Baseline parse_baseline(std::string_view text) {
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) throw ConfigError("baseline must look like <y0>..<y1>");
  Baseline b;
  try {
    b.first_year = std::stoi(std::string(text.substr(0, dots)));
    b.last_year = std::stoi(std::string(text.substr(dots + 2)));
  } catch (const std::exception&) {
    throw ConfigError("baseline must look like <y0>..<y1>, got '" + std::string(text) + "'");
  }
  if (b.last_year < b.first_year) throw ConfigError("baseline end precedes its start");
  return b;
}

inline std::string to_string(const Baseline& b) {
  return std::to_string(b.first_year) + ".." + std::to_string(b.last_year);
}

// All but the last two years of the shortest county record.
inline Baseline default_baseline(const RawPanel& panel) {
  if (panel.counties.empty()) throw StructuralError("no records");
  Baseline b{panel.counties.front().start.year, panel.counties.front().last().year};
  for (const auto& c : panel.counties) {
    b.first_year = std::max(b.first_year, c.start.year);
    b.last_year = std::min(b.last_year, c.last().year);
  }
  b.last_year -= 2;
  if (b.last_year < b.first_year) throw ClimatologyError("panel too short for a default baseline");
  return b;
}

struct UnitStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stdev = 0.0;  // sample (n - 1) standard deviation
  std::size_t count = 0;
};

struct CountyClimatology {
  std::string county;
  std::vector<UnitStats> units;  // 12 month-of-year units, or 36 (month, dekad)
};

struct Climatology {
  Level level = Level::OneMonth;
  Quantity quantity = Quantity::Ndvi;
  Baseline baseline;
  std::vector<CountyClimatology> counties;

  const CountyClimatology& county(const std::string& id) const {
    for (const auto& c : counties) {
      if (c.county == id) return c;
    }
    throw UsageError("climatology has no county '" + id + "'");
  }
};

namespace detail {

inline std::size_t calendar_unit(const YearMonth& ym, int per_month, std::size_t slot) {
  return static_cast<std::size_t>((ym.month - 1) * per_month) + slot;
}

inline std::string unit_name(std::size_t unit, int per_month) {
  if (per_month == 1) return "month " + std::to_string(unit + 1);
  return "month " + std::to_string(unit / 3 + 1) + " dekad " + std::to_string(unit % 3 + 1);
}

}  // namespace detail

inline Climatology compute_climatology(const Series& series, const Baseline& baseline) {
  if (series.quantity == Quantity::Index) throw UsageError("climatology expects an NDVI or rainfall series");
  const int per = series.per_month();
  Climatology clim{series.level, series.quantity, baseline, {}};
  for (const auto& track : series.tracks) {
    const std::size_t n_months = track.values.size() / static_cast<std::size_t>(per);
    if (n_months == 0) throw ClimatologyError("county " + track.county + " has an empty record");
    const YearMonth last = track.start.plus(static_cast<int>(n_months) - 1);
    if (track.start.year > baseline.first_year || last.year < baseline.last_year) {
      throw ClimatologyError("baseline " + to_string(baseline) + " is outside the span of county " +
                             track.county + " (" + to_string(track.start) + " to " + to_string(last) + ")");
    }
    std::vector<std::vector<double>> samples(static_cast<std::size_t>(12 * per));
    for (std::size_t i = 0; i < n_months; ++i) {
      const YearMonth ym = track.start.plus(static_cast<int>(i));
      if (ym.year < baseline.first_year || ym.year > baseline.last_year) continue;
      for (int d = 0; d < per; ++d) {
        const auto& v = track.values[i * static_cast<std::size_t>(per) + static_cast<std::size_t>(d)];
        if (v) samples[detail::calendar_unit(ym, per, static_cast<std::size_t>(d))].push_back(*v);
      }
    }
    CountyClimatology cc{track.county, std::vector<UnitStats>(samples.size())};
    for (std::size_t u = 0; u < samples.size(); ++u) {
      const auto& xs = samples[u];
      if (xs.size() < 2) {
        throw ClimatologyError("county " + track.county + ", " + detail::unit_name(u, per) + ": " +
                               std::to_string(xs.size()) + " baseline value(s), need at least 2");
      }
      UnitStats s;
      s.count = xs.size();
      s.min = *std::min_element(xs.begin(), xs.end());
      s.max = *std::max_element(xs.begin(), xs.end());
      double sum = 0.0;
      for (double x : xs) sum += x;
      s.mean = sum / static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
      cc.units[u] = s;
    }
    clim.counties.push_back(std::move(cc));
  }
  return clim;
}

namespace detail {

template <typename Transform>
Series apply_climatology(const Series& series, const Climatology& clim, Transform&& transform) {
  if (series.level != clim.level || series.quantity != clim.quantity) {
    throw UsageError("series (" + std::string(level_name(series.level)) +
                     ") and climatology (" + std::string(level_name(clim.level)) +
                     ") come from different aggregation levels or quantities");
  }
  const int per = series.per_month();
  Series out{series.level, Quantity::Index, {}};
  for (const auto& track : series.tracks) {
    const auto& cc = clim.county(track.county);
    Track t{track.county, track.start, std::vector<MaybeValue>(track.values.size())};
    for (std::size_t j = 0; j < track.values.size(); ++j) {
      if (!track.values[j]) continue;
      const std::size_t i = j / static_cast<std::size_t>(per);
      const YearMonth ym = track.start.plus(static_cast<int>(i));
      const auto& stats = cc.units[calendar_unit(ym, per, j % static_cast<std::size_t>(per))];
      t.values[j] = transform(*track.values[j], stats);
    }
    out.tracks.push_back(std::move(t));
  }
  return out;
}

inline MaybeValue condition_index(double x, const UnitStats& s) {
  if (!(s.max > s.min)) return std::nullopt;
  return std::clamp(100.0 * (x - s.min) / (s.max - s.min), 0.0, 100.0);
}

}  // namespace detail

// 100 (x - min) / (max - min), clamped to [0, 100]; null for a degenerate unit.
inline Series compute_vci(const Series& ndvi, const Climatology& clim) {
  if (ndvi.quantity != Quantity::Ndvi) throw UsageError("compute_vci expects an NDVI series");
  return detail::apply_climatology(ndvi, clim, detail::condition_index);
}

inline Series compute_rci(const Series& rfe, const Climatology& clim) {
  if (rfe.quantity != Quantity::Rainfall) throw UsageError("compute_rci expects a rainfall series");
  return detail::apply_climatology(rfe, clim, detail::condition_index);
}

// (x - mean) / stdev against the calendar-unit climatology; null where stdev = 0.
inline Series compute_spi(const Series& rfe, const Climatology& clim) {
  if (rfe.quantity != Quantity::Rainfall) throw UsageError("compute_spi expects a rainfall series");
  return detail::apply_climatology(rfe, clim, [](double x, const UnitStats& s) -> MaybeValue {
    if (!(s.stdev > 0.0)) return std::nullopt;
    return (x - s.mean) / s.stdev;
  });
}

// ---------------------------------------------------------------------------

enum class IndexKind : int {
  NdviDekad = 0,
  VciDekad,
  Vci1M,
  Vci3M,
  Rfe1M,
  Rfe3M,
  Spi1M,
  Spi3M,
  Rci1M,
  Rci3M,
};

inline constexpr std::size_t kIndexCount = 10;

inline constexpr std::array<IndexKind, kIndexCount> kAllIndices = {
    IndexKind::NdviDekad, IndexKind::VciDekad, IndexKind::Vci1M, IndexKind::Vci3M,
    IndexKind::Rfe1M,     IndexKind::Rfe3M,    IndexKind::Spi1M, IndexKind::Spi3M,
    IndexKind::Rci1M,     IndexKind::Rci3M};

// Column names in index-table CSVs.
inline std::string_view index_name(IndexKind kind) {
  static constexpr std::array<std::string_view, kIndexCount> names = {
      "NDVI_Dekad", "VCI_Dekad", "VCI1M", "VCI3M", "RFE1M",
      "RFE3M",      "SPI1M",     "SPI3M", "RCI1M", "RCI3M"};
  return names[static_cast<std::size_t>(kind)];
}

// Stem used in lagged feature names and model ids ("VCIdekad_lag1").
inline std::string_view feature_stem(IndexKind kind) {
  static constexpr std::array<std::string_view, kIndexCount> stems = {
      "NDVIdekad", "VCIdekad", "VCI1M", "VCI3M", "RFE1M",
      "RFE3M",     "SPI1M",    "SPI3M", "RCI1M", "RCI3M"};
  return stems[static_cast<std::size_t>(kind)];
}

inline bool is_vegetation(IndexKind kind) { return static_cast<int>(kind) <= static_cast<int>(IndexKind::Vci3M); }

inline constexpr IndexKind kTargetIndex = IndexKind::Vci3M;

struct IndexTrack {
  std::string county;
  YearMonth start;
  std::array<std::vector<MaybeValue>, kIndexCount> columns;

  std::size_t n_months() const noexcept { return columns[0].size(); }
  const std::vector<MaybeValue>& operator[](IndexKind kind) const {
    return columns[static_cast<std::size_t>(kind)];
  }
  std::vector<MaybeValue>& operator[](IndexKind kind) { return columns[static_cast<std::size_t>(kind)]; }

  friend bool operator==(const IndexTrack&, const IndexTrack&) = default;
};

struct IndexTable {
  Baseline baseline;
  std::vector<IndexTrack> tracks;
};

namespace detail {

inline std::vector<MaybeValue> last_dekad(const Track& dekad_track) {
  std::vector<MaybeValue> out(dekad_track.values.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dekad_track.values[3 * i + 2];
  return out;
}

}  // namespace detail

inline IndexTable build_index_table(const RawPanel& panel, const Baseline& baseline) {
  const Series ndvi_dekad = ndvi_dekad_series(panel);
  const Series ndvi_1m = aggregate(ndvi_dekad, 1);
  const Series ndvi_3m = aggregate(ndvi_dekad, 3);
  const Series rfe_1m = rfe_monthly_series(panel);
  const Series rfe_3m = aggregate(rfe_1m, 3);

  const Series vci_dekad = compute_vci(ndvi_dekad, compute_climatology(ndvi_dekad, baseline));
  const Series vci_1m = compute_vci(ndvi_1m, compute_climatology(ndvi_1m, baseline));
  const Series vci_3m = compute_vci(ndvi_3m, compute_climatology(ndvi_3m, baseline));
  const Climatology rfe_1m_clim = compute_climatology(rfe_1m, baseline);
  const Climatology rfe_3m_clim = compute_climatology(rfe_3m, baseline);
  const Series spi_1m = compute_spi(rfe_1m, rfe_1m_clim);
  const Series spi_3m = compute_spi(rfe_3m, rfe_3m_clim);
  const Series rci_1m = compute_rci(rfe_1m, rfe_1m_clim);
  const Series rci_3m = compute_rci(rfe_3m, rfe_3m_clim);

  IndexTable table{baseline, {}};
  for (std::size_t c = 0; c < panel.counties.size(); ++c) {
    IndexTrack t;
    t.county = panel.counties[c].county;
    t.start = panel.counties[c].start;
    t[IndexKind::NdviDekad] = detail::last_dekad(ndvi_dekad.tracks[c]);
    t[IndexKind::VciDekad] = detail::last_dekad(vci_dekad.tracks[c]);
    t[IndexKind::Vci1M] = vci_1m.tracks[c].values;
    t[IndexKind::Vci3M] = vci_3m.tracks[c].values;
    t[IndexKind::Rfe1M] = rfe_1m.tracks[c].values;
    t[IndexKind::Rfe3M] = rfe_3m.tracks[c].values;
    t[IndexKind::Spi1M] = spi_1m.tracks[c].values;
    t[IndexKind::Spi3M] = spi_3m.tracks[c].values;
    t[IndexKind::Rci1M] = rci_1m.tracks[c].values;
    t[IndexKind::Rci3M] = rci_3m.tracks[c].values;
    table.tracks.push_back(std::move(t));
  }
  return table;
}

inline void write_index_csv(const IndexTable& table, std::ostream& out) {
  out << "county,year,month";
  for (auto kind : kAllIndices) out << ',' << index_name(kind);
  out << '\n';
  for (const auto& t : table.tracks) {
    for (std::size_t i = 0; i < t.n_months(); ++i) {
      const YearMonth ym = t.start.plus(static_cast<int>(i));
      out << t.county << ',' << ym.year << ',' << ym.month;
      for (const auto& column : t.columns) out << ',' << detail::format_optional(column[i]);
      out << '\n';
    }
  }
}

inline void write_index_csv(const IndexTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write index table '" + path + "'");
  write_index_csv(table, out);
}

// The baseline is not part of the CSV; callers that need it carry it separately.
inline IndexTable parse_index_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw StructuralError("no records");
  const auto header = detail::split_commas(line);
  std::vector<std::string> expected = {"county", "year", "month"};
  for (auto kind : kAllIndices) expected.emplace_back(index_name(kind));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i]) {
      throw ParseError("index table header: expected column '" + expected[i] + "' at position " +
                       std::to_string(i + 1));
    }
  }

  IndexTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != expected.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected.size()) + " fields");
    }
    const std::string county(fields[0]);
    const YearMonth ym{detail::parse_int(fields[1], line_no, "year"),
                       detail::parse_int(fields[2], line_no, "month")};
    if (table.tracks.empty() || table.tracks.back().county != county) {
      for (const auto& t : table.tracks) {
        if (t.county == county) throw StructuralError("county " + county + " rows are not contiguous");
      }
      table.tracks.push_back(IndexTrack{county, ym, {}});
    }
    auto& track = table.tracks.back();
    if (track.start.plus(static_cast<int>(track.n_months())) != ym) {
      throw StructuralError("line " + std::to_string(line_no) + ": non-contiguous month " + to_string(ym) +
                            " for county " + county);
    }
    for (std::size_t k = 0; k < kIndexCount; ++k) {
      track.columns[k].push_back(detail::parse_optional_double(fields[3 + k], line_no, expected[3 + k]));
    }
  }
  if (table.tracks.empty()) throw StructuralError("no records");
  return table;
}

inline IndexTable parse_index_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open index table '" + path + "'");
  return parse_index_csv(static_cast<std::istream&>(in));
}

}  // namespace drought
