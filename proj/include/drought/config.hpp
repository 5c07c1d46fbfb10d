#pragma once

// Pipeline configuration. Files use a small TOML subset: `key = value` lines,
// `[section]` headers (keys become "section.key"), `#` comments, and values
// that are quoted strings, integers, floats, booleans or flat arrays of
// numbers. Every key can also be set from text, which is how command-line
// overrides are applied.

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drought/error.hpp"
#include "drought/indices.hpp"
#include "drought/panel.hpp"
#include "drought/random.hpp"

namespace drought {

namespace toml {

using Entry = std::pair<std::string, std::string>;  // key, value as plain text

namespace detail {

inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(std::string_view v, std::size_t line) {
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      const char e = v[++i];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default:
          throw ParseError("line " + std::to_string(line) + ": unsupported escape \\" + std::string(1, e));
      }
    } else {
      out += v[i];
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Entry> parse(std::istream& in) {
  std::vector<Entry> entries;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = drought::detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(where + "malformed section header");
      section = std::string(drought::detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + "expected key = value");
    const auto key = drought::detail::trim(line.substr(0, eq));
    const auto value = drought::detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(where + "expected key = value");
    std::string text;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') throw ParseError(where + "unterminated string");
      text = detail::unquote(value, line_no);
    } else if (value.front() == '[') {
      if (value.back() != ']') throw ParseError(where + "arrays must close on the same line");
      for (auto item : drought::detail::split_commas(value.substr(1, value.size() - 2))) {
        item = drought::detail::trim(item);
        if (item.empty()) continue;
        if (!text.empty()) text += ',';
        text += item;
      }
    } else {
      text = std::string(value);
    }
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    for (const auto& e : entries) {
      if (e.first == full) throw ParseError(where + "duplicate key '" + full + "'");
    }
    entries.emplace_back(std::move(full), std::move(text));
  }
  return entries;
}

inline std::vector<Entry> parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

}  // namespace toml

// ---------------------------------------------------------------------------

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

inline constexpr std::array<ConfigKey, 22> kConfigKeys = {{
    {"input", "panel CSV; empty means generate the synthetic panel"},
    {"output_dir", "directory for the run bundle"},
    {"baseline", "climatology years as y0..y1; empty means all but the last two years"},
    {"holdout_months", "months per county held out as the test set"},
    {"k", "number of random train/validation partitions"},
    {"threshold", "GAM selection threshold on mean training R2"},
    {"arch", "hidden layer sizes, e.g. 5,3"},
    {"max_steps", "ANN training step budget"},
    {"gradient_threshold", "ANN convergence bound on max |dE/dw|"},
    {"seed", "master seed (required)"},
    {"smooth_all", "smooth every predictor in the GAM stage"},
    {"validate_assumption", "also train ANNs on the models the GAM stage rejected"},
    {"synthetic.n_counties", "synthetic panel: number of counties"},
    {"synthetic.n_years", "synthetic panel: years of data"},
    {"synthetic.start_year", "synthetic panel: first year"},
    {"synthetic.seed", "synthetic panel: generator seed"},
    {"synthetic.seasonal_amplitude", "synthetic panel: rainfall seasonal amplitude"},
    {"synthetic.noise_sd", "synthetic panel: rainfall anomaly sd"},
    {"synthetic.ar_coefficient", "synthetic panel: AR(1) coefficient of rainfall anomalies"},
    {"synthetic.rainfall_to_ndvi_lag", "synthetic panel: months from rainfall to vegetation response"},
    {"synthetic.vegetation_memory", "synthetic panel: soil-moisture persistence"},
    {"synthetic.ndvi_noise_ratio", "synthetic panel: NDVI noise relative to noise_sd"},
}};

struct PipelineConfig {
  std::string input;
  std::string output_dir = "run";
  std::string baseline;
  int holdout_months = 24;
  int k = 10;
  double threshold = 0.70;
  std::vector<std::size_t> arch{5, 3};
  long max_steps = 1'000'000;
  double gradient_threshold = 0.01;
  std::optional<std::uint64_t> seed;
  bool smooth_all = false;
  bool validate_assumption = false;
  SyntheticConfig synthetic;

  void set(std::string_view key, std::string_view text);
  std::string get(std::string_view key) const;

  void validate() const {
    if (!seed) throw ConfigError("seed is required");
    if (holdout_months < 1) throw ConfigError("holdout_months must be >= 1");
    if (k < 2) throw ConfigError("k must be >= 2");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    if (arch.empty()) throw ConfigError("arch needs at least one hidden layer");
    for (auto h : arch) {
      if (h < 1) throw ConfigError("arch layer sizes must be >= 1");
    }
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(gradient_threshold > 0.0)) throw ConfigError("gradient_threshold must be > 0");
    if (!baseline.empty()) parse_baseline(baseline);
    if (input.empty()) synthetic.validate();
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  }

  // Canonical "key = value" text, one line per key in kConfigKeys order. The
  // output directory says where results go, not what they are, so it is left
  // out; runs into different directories share a hash.
  std::string canonical() const {
    std::string out;
    for (const auto& k : kConfigKeys) {
      if (k.name == "output_dir") continue;
      out += k.name;
      out += " = ";
      out += get(k.name);
      out += '\n';
    }
    return out;
  }

  std::string hash() const {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical());
    return s.str();
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("config '" + std::string(key) + "': expected true or false, got '" + std::string(text) + "'");
}

inline std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : split_commas(text)) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number<std::size_t>(key, item));
  }
  return out;
}

}  // namespace detail

inline void PipelineConfig::set(std::string_view key, std::string_view raw) {
  using detail::parse_bool;
  using detail::parse_number;
  const auto text = detail::trim(raw);
  const auto d = [&] { return parse_number<double>(key, text); };
  const auto i = [&] { return parse_number<int>(key, text); };

  if (key == "input") input = text;
  else if (key == "output_dir") output_dir = text;
  else if (key == "baseline") baseline = text;
  else if (key == "holdout_months") holdout_months = i();
  else if (key == "k") k = i();
  else if (key == "threshold") threshold = d();
  else if (key == "arch") arch = detail::parse_sizes(key, text);
  else if (key == "max_steps") max_steps = parse_number<long>(key, text);
  else if (key == "gradient_threshold") gradient_threshold = d();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, text);
  else if (key == "smooth_all") smooth_all = parse_bool(key, text);
  else if (key == "validate_assumption") validate_assumption = parse_bool(key, text);
  else if (key == "synthetic.n_counties") synthetic.n_counties = i();
  else if (key == "synthetic.n_years") synthetic.n_years = i();
  else if (key == "synthetic.start_year") synthetic.start_year = i();
  else if (key == "synthetic.seed") synthetic.seed = parse_number<std::uint64_t>(key, text);
  else if (key == "synthetic.seasonal_amplitude") synthetic.seasonal_amplitude = d();
  else if (key == "synthetic.noise_sd") synthetic.noise_sd = d();
  else if (key == "synthetic.ar_coefficient") synthetic.ar_coefficient = d();
  else if (key == "synthetic.rainfall_to_ndvi_lag") synthetic.rainfall_to_ndvi_lag = i();
  else if (key == "synthetic.vegetation_memory") synthetic.vegetation_memory = d();
  else if (key == "synthetic.ndvi_noise_ratio") synthetic.ndvi_noise_ratio = d();
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline std::string PipelineConfig::get(std::string_view key) const {
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const auto d = [](double v) { return detail::format_double(v); };
  if (key == "input") return input;
  if (key == "output_dir") return output_dir;
  if (key == "baseline") return baseline;
  if (key == "holdout_months") return std::to_string(holdout_months);
  if (key == "k") return std::to_string(k);
  if (key == "threshold") return d(threshold);
  if (key == "arch") {
    std::string out;
    for (auto h : arch) out += (out.empty() ? "" : ",") + std::to_string(h);
    return out;
  }
  if (key == "max_steps") return std::to_string(max_steps);
  if (key == "gradient_threshold") return d(gradient_threshold);
  if (key == "seed") return seed ? std::to_string(*seed) : "";
  if (key == "smooth_all") return b(smooth_all);
  if (key == "validate_assumption") return b(validate_assumption);
  if (key == "synthetic.n_counties") return std::to_string(synthetic.n_counties);
  if (key == "synthetic.n_years") return std::to_string(synthetic.n_years);
  if (key == "synthetic.start_year") return std::to_string(synthetic.start_year);
  if (key == "synthetic.seed") return std::to_string(synthetic.seed);
  if (key == "synthetic.seasonal_amplitude") return d(synthetic.seasonal_amplitude);
  if (key == "synthetic.noise_sd") return d(synthetic.noise_sd);
  if (key == "synthetic.ar_coefficient") return d(synthetic.ar_coefficient);
  if (key == "synthetic.rainfall_to_ndvi_lag") return std::to_string(synthetic.rainfall_to_ndvi_lag);
  if (key == "synthetic.vegetation_memory") return d(synthetic.vegetation_memory);
  if (key == "synthetic.ndvi_noise_ratio") return d(synthetic.ndvi_noise_ratio);
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline PipelineConfig load_config(const std::vector<toml::Entry>& entries) {
  PipelineConfig config;
  for (const auto& [key, value] : entries) config.set(key, value);
  return config;
}

inline PipelineConfig load_config_file(const std::string& path) { return load_config(toml::parse_file(path)); }

}  // namespace drought
