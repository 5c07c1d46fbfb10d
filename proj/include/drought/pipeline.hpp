#pragma once

// End-to-end orchestration: panel -> indices -> features -> split -> model
// space -> GAM screening -> ANN training -> champion -> holdout evaluation,
// with every intermediate artifact persisted to the output directory.

#include <Eigen/Core>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drought/ann.hpp"
#include "drought/config.hpp"
#include "drought/error.hpp"
#include "drought/evaluation.hpp"
#include "drought/features.hpp"
#include "drought/gam.hpp"
#include "drought/indices.hpp"
#include "drought/model_space.hpp"
#include "drought/panel.hpp"
#include "drought/serialize.hpp"

namespace drought {

inline constexpr std::string_view kToolVersion = "1.0.0";

namespace artifact {
inline constexpr const char* panel = "panel.csv";
inline constexpr const char* indices = "indices.csv";
inline constexpr const char* features = "features.csv";
inline constexpr const char* plan = "plan.json";
inline constexpr const char* models = "models.json";
inline constexpr const char* gam = "gam_report.json";
inline constexpr const char* ann = "ann_report.json";
inline constexpr const char* champion = "champion.json";
inline constexpr const char* evaluation = "eval_report.json";
inline constexpr const char* assumption = "assumption_report.json";
inline constexpr const char* manifest = "manifest.json";
}  // namespace artifact

struct RunOptions {
  unsigned jobs = 1;
  std::ostream* log = nullptr;
};

inline AnnStageOptions ann_options(const PipelineConfig& config, unsigned jobs) {
  AnnStageOptions o;
  o.hidden = config.arch;
  o.train.max_steps = config.max_steps;
  o.train.threshold = config.gradient_threshold;
  o.seed = *config.seed;
  o.jobs = jobs;
  return o;
}

// ---------------------------------------------------------------------------
// Assumption validation: ANNs for the models the GAM stage rejected.

struct AssumptionModel {
  std::string id;
  int lag = 1;
  std::size_t n_ok = 0;
  double r2_train = 0.0;       // mean over partitions
  double r2_validation = 0.0;  // mean over partitions
  double r2_test = 0.0;        // best-validation partition's network on the holdout
  std::size_t best_partition = 0;
};

struct AssumptionReport {
  std::string champion_id;
  double champion_r2_test = 0.0;
  std::vector<AssumptionModel> models;

  const AssumptionModel* best() const {
    const AssumptionModel* b = nullptr;
    for (const auto& m : models) {
      if (m.n_ok > 0 && (b == nullptr || m.r2_test > b->r2_test)) b = &m;
    }
    return b;
  }
};

inline AssumptionReport run_assumption_validation(const std::vector<ModelSpec>& not_selected, const FeatureTable& table,
                                                  const SplitPlan& plan, const AnnStageOptions& options,
                                                  const ScoredNetwork& champion) {
  if (plan.test.empty()) throw StageError("assumption validation needs holdout rows");
  AssumptionReport report;
  report.champion_id = champion.model_id;
  report.champion_r2_test = evaluate_model(champion, table, plan.test).metrics.r2;
  if (not_selected.empty()) return report;

  const AnnStageReport ann = run_ann_stage(not_selected, table, plan, options, false);
  std::vector<double> actual;
  for (auto r : plan.test) actual.push_back(table.rows[r].target);
  for (const auto& m : ann.models) {
    AssumptionModel a{m.id, m.spec.lag(), m.n_ok};
    if (m.n_ok > 0) {
      a.r2_train = m.r2_train.mean;
      a.r2_validation = m.r2_validation.mean;
      a.best_partition = m.best_partition;
      const auto& cell = m.cells[m.best_partition];
      a.r2_test = regression_metrics(actual, cell.model.predict(table, plan.test)).r2;
    }
    report.models.push_back(std::move(a));
  }
  return report;
}

inline Json to_json(const AssumptionReport& r) {
  Json models = Json::array();
  for (const auto& m : r.models) {
    Json entry = {{"id", m.id}, {"lag", m.lag}, {"n_ok", m.n_ok}};
    if (m.n_ok > 0) {
      entry["r2_train"] = m.r2_train;
      entry["r2_validation"] = m.r2_validation;
      entry["r2_test"] = m.r2_test;
      entry["best_partition"] = m.best_partition;
    }
    models.push_back(std::move(entry));
  }
  Json out = {{"champion_id", r.champion_id}, {"champion_r2_test", r.champion_r2_test}, {"n_models", r.models.size()}};
  if (const auto* b = r.best()) {
    out["best_not_selected"] = {{"id", b->id}, {"r2_test", b->r2_test}};
  } else {
    out["best_not_selected"] = nullptr;
  }
  out["models"] = models;
  return out;
}

// ---------------------------------------------------------------------------
// Run bundle.

struct StageRecord {
  std::string name;
  std::string status;  // ok, failed, skipped
  std::string error;
};

struct ReportBundle {
  PipelineConfig config;
  std::string config_hash;
  std::vector<StageRecord> stages;
  std::optional<GamStageReport> gam;
  std::optional<AnnStageReport> ann;
  std::optional<Champion> champion;
  std::optional<EvaluationReport> evaluation;
  std::optional<AssumptionReport> assumption;
};

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string compiler_version() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

// Same error category, message prefixed with the stage name.
[[noreturn]] inline void rethrow_in_stage(const std::string& stage, const Error& e) {
  const std::string what = "stage '" + stage + "' failed: " + e.what();
  if (dynamic_cast<const NoSurvivorsError*>(&e)) throw NoSurvivorsError(e.what());
  if (dynamic_cast<const ParseError*>(&e)) throw ParseError(what);
  if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(what);
  if (dynamic_cast<const StructuralError*>(&e)) throw StructuralError(what);
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(what);
  if (dynamic_cast<const ClimatologyError*>(&e)) throw ClimatologyError(what);
  throw StageError(what);
}

}  // namespace detail

inline Json manifest_json(const ReportBundle& bundle, const std::string& started, const std::string& finished) {
  Json config = Json::object();
  for (const auto& k : kConfigKeys) config[std::string(k.name)] = bundle.config.get(k.name);
  Json stages = Json::array();
  for (const auto& s : bundle.stages) {
    Json entry = {{"name", s.name}, {"status", s.status}};
    if (!s.error.empty()) entry["error"] = s.error;
    stages.push_back(std::move(entry));
  }
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream json_version;
  json_version << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  return {{"tool", "drought"},
          {"version", kToolVersion},
          {"config_hash", bundle.config_hash},
          {"config", config},
          {"versions", {{"eigen", eigen.str()}, {"nlohmann_json", json_version.str()}, {"compiler", detail::compiler_version()}}},
          {"stages", stages},
          {"started_at", started},
          {"finished_at", finished}};
}

// Runs every stage, writing artifacts into config.output_dir. On failure the
// manifest records the failing stage and later stages as skipped, then the
// error propagates with the stage name attached.
inline ReportBundle run_pipeline(const PipelineConfig& config, const RunOptions& options = {}) {
  config.validate();
  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto path = [&](const char* name) { return (dir / name).string(); };
  const std::string started = detail::utc_now();
  auto say = [&](const std::string& msg) {
    if (options.log) *options.log << msg << std::endl;
  };

  ReportBundle bundle;
  bundle.config = config;
  bundle.config_hash = config.hash();

  const std::vector<std::string> order = {"ingest", "indices", "features", "split", "enumerate",
                                          "gam",    "ann",     "evaluate", "validate_assumption"};
  auto write_manifest = [&] {
    write_json(manifest_json(bundle, started, detail::utc_now()), path(artifact::manifest));
  };
  auto finish_skipped = [&] {
    for (std::size_t i = bundle.stages.size(); i < order.size(); ++i) bundle.stages.push_back({order[i], "skipped", ""});
  };
  auto stage = [&](const std::string& name, const std::function<void()>& body) {
    say("[" + name + "]");
    try {
      body();
      bundle.stages.push_back({name, "ok", ""});
    } catch (const Error& e) {
      bundle.stages.push_back({name, "failed", e.what()});
      finish_skipped();
      write_manifest();
      detail::rethrow_in_stage(name, e);
    }
  };

  RawPanel panel;
  IndexTable indices;
  FeatureTable features;
  SplitPlan plan;
  std::vector<ModelSpec> models;

  stage("ingest", [&] {
    if (config.input.empty()) {
      panel = generate_synthetic_panel(config.synthetic);
    } else {
      panel = parse_panel_csv(config.input);
    }
    const auto report = validate_panel(panel);
    if (!report.accepted()) throw ValidationError("panel has out-of-range values");
    write_panel_csv(panel, path(artifact::panel));
  });
  stage("indices", [&] {
    const Baseline baseline = config.baseline.empty() ? default_baseline(panel) : parse_baseline(config.baseline);
    indices = build_index_table(panel, baseline);
    write_index_csv(indices, path(artifact::indices));
  });
  stage("features", [&] {
    features = build_feature_table(indices);
    write_feature_csv(features, path(artifact::features));
  });
  stage("split", [&] {
    plan = make_split_plan(features, config.holdout_months, config.k, *config.seed);
    write_json(to_json(plan), path(artifact::plan));
  });
  stage("enumerate", [&] {
    models = enumerate_models(full_catalog());
    write_json(models_to_json(models), path(artifact::models));
  });
  stage("gam", [&] {
    GamStageOptions gam_options;
    gam_options.threshold = config.threshold;
    gam_options.fit.smooth_all = config.smooth_all;
    gam_options.jobs = options.jobs;
    bundle.gam = run_gam_stage(models, features, plan, gam_options);
    write_json(to_json(*bundle.gam), path(artifact::gam));
    const auto selected = bundle.gam->selected();
    say("  " + std::to_string(selected.size()) + " of " + std::to_string(models.size()) + " models selected");
    if (selected.empty()) {
      throw NoSurvivorsError("no model reached the GAM threshold of " + detail::format_double(config.threshold));
    }
  });
  const auto ann_opts = ann_options(config, options.jobs);
  stage("ann", [&] {
    bundle.ann = run_ann_stage(bundle.gam->selected(), features, plan, ann_opts);
    bundle.champion = bundle.ann->champion;
    write_json(to_json(*bundle.ann, ann_opts), path(artifact::ann));
    write_json(to_json(*bundle.champion), path(artifact::champion));
    say("  champion " + bundle.champion->model_id);
  });
  stage("evaluate", [&] {
    if (plan.test.empty()) throw StageError("no holdout rows to evaluate");
    bundle.evaluation = evaluate_model(bundle.champion->model, features, plan.test);
    write_json(to_json(*bundle.evaluation), path(artifact::evaluation));
  });
  if (config.validate_assumption) {
    stage("validate_assumption", [&] {
      bundle.assumption =
          run_assumption_validation(bundle.gam->not_selected(), features, plan, ann_opts, bundle.champion->model);
      write_json(to_json(*bundle.assumption), path(artifact::assumption));
    });
  } else {
    bundle.stages.push_back({"validate_assumption", "skipped", ""});
  }
  write_manifest();
  return bundle;
}

// ---------------------------------------------------------------------------
// Report emission from a bundle directory.

enum class ReportFormat { Json, CsvTables, MarkdownSummary };

inline ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv-tables") return ReportFormat::CsvTables;
  if (text == "markdown-summary") return ReportFormat::MarkdownSummary;
  throw UsageError("unknown report format '" + std::string(text) + "' (json, csv-tables, markdown-summary)");
}

namespace detail {

// Numbers in the CSV tables use the JSON text of the same value, so both
// formats carry identical digits.
inline std::string cell(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline std::string yes_no(const Json& v) { return v.get<bool>() ? "Yes" : "No"; }

inline std::optional<Json> read_optional(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return std::nullopt;
  return read_json(p.string());
}

inline std::string fixed(double v, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

}  // namespace detail

// Writes report.json, or table4_gam.csv and table5_ann.csv, or summary.md into
// out_dir and returns the written paths.
inline std::vector<std::string> emit_report(const std::string& bundle_dir, ReportFormat format, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(bundle_dir);
  const Json gam = read_json((dir / artifact::gam).string());
  const auto ann = detail::read_optional(dir / artifact::ann);
  const auto evaluation = detail::read_optional(dir / artifact::evaluation);
  const auto assumption = detail::read_optional(dir / artifact::assumption);
  const auto manifest = detail::read_optional(dir / artifact::manifest);
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  if (format == ReportFormat::Json) {
    Json out = {{"gam", gam}};
    out["ann"] = ann ? *ann : Json(nullptr);
    out["evaluation"] = evaluation ? *evaluation : Json(nullptr);
    out["assumption_validation"] = assumption ? *assumption : Json(nullptr);
    if (manifest) out["config_hash"] = (*manifest)["config_hash"];
    const auto p = (fs::path(out_dir) / "report.json").string();
    write_json(out, p);
    written.push_back(p);
    return written;
  }

  if (format == ReportFormat::CsvTables) {
    // GAM models that passed the threshold, best training R² first.
    const auto p4 = (fs::path(out_dir) / "table4_gam.csv").string();
    std::ofstream t4(p4, std::ios::binary);
    t4 << "model,r2_train,r2_validation,overfit_index,overfit,lag_time\n";
    for (const auto& m : gam["models"]) {
      if (!m["selected"].get<bool>()) continue;
      t4 << detail::cell(m["id"]) << ',' << detail::cell(m["r2_train"]) << ',' << detail::cell(m["r2_validation"]) << ','
         << detail::cell(m["overfit_index"]) << ',' << detail::yes_no(m["overfit"]) << ',' << detail::cell(m["lag"])
         << '\n';
    }
    written.push_back(p4);
    if (ann) {
      std::vector<const Json*> rows;
      for (const auto& m : (*ann)["models"]) {
        if (m["n_ok"].get<std::size_t>() > 0) rows.push_back(&m);
      }
      std::stable_sort(rows.begin(), rows.end(), [](const Json* a, const Json* b) {
        return (*a)["r2_validation"]["mean"].get<double>() > (*b)["r2_validation"]["mean"].get<double>();
      });
      const auto p5 = (fs::path(out_dir) / "table5_ann.csv").string();
      std::ofstream t5(p5, std::ios::binary);
      t5 << "model,r2_train_min,r2_train_max,r2_train_mean,r2_validation_min,r2_validation_max,r2_validation_mean,"
            "overfit_index,overfit\n";
      for (const Json* m : rows) {
        const auto& tr = (*m)["r2_train"];
        const auto& va = (*m)["r2_validation"];
        t5 << detail::cell((*m)["id"]) << ',' << detail::cell(tr["min"]) << ',' << detail::cell(tr["max"]) << ','
           << detail::cell(tr["mean"]) << ',' << detail::cell(va["min"]) << ',' << detail::cell(va["max"]) << ','
           << detail::cell(va["mean"]) << ',' << detail::cell((*m)["overfit_index"]) << ','
           << detail::yes_no((*m)["overfit"]) << '\n';
      }
      written.push_back(p5);
    }
    return written;
  }

  // Markdown summary.
  const auto p = (fs::path(out_dir) / "summary.md").string();
  std::ofstream md(p, std::ios::binary);
  md << "# Run summary\n\n";
  if (manifest) md << "Config hash: `" << (*manifest)["config_hash"].get<std::string>() << "`\n\n";
  md << "GAM stage: " << gam["n_models"].get<std::size_t>() << " models, " << gam["n_selected"].get<std::size_t>()
     << " selected at threshold " << detail::cell(gam["threshold"])
     << (gam["smooth_all"].get<bool>() ? " (all predictors smoothed)" : "") << ".\n\n";

  constexpr int kBins = 10;
  std::map<int, std::array<int, kBins>> hist;
  std::map<int, std::vector<double>> by_lag;
  std::map<int, int> selected_by_lag;
  for (const auto& m : gam["models"]) {
    if (!m["ok"].get<bool>()) continue;
    const int lag = m["lag"].get<int>();
    const double r2 = m["r2_train"].get<double>();
    const int bin = std::clamp(static_cast<int>(std::floor(r2 * kBins)), 0, kBins - 1);
    hist[lag][static_cast<std::size_t>(bin)]++;
    by_lag[lag].push_back(r2);
    if (m["selected"].get<bool>()) selected_by_lag[lag]++;
  }
  md << "## Training R² distribution by lag\n\n| R² bin |";
  for (const auto& [lag, counts] : hist) md << " lag " << lag << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < hist.size(); ++i) md << "---:|";
  md << '\n';
  for (int b = 0; b < kBins; ++b) {
    md << "| " << detail::fixed(b / 10.0, 1) << "-" << detail::fixed((b + 1) / 10.0, 1) << " |";
    for (const auto& [lag, counts] : hist) md << ' ' << counts[static_cast<std::size_t>(b)] << " |";
    md << '\n';
  }
  md << "\n## Lag summary\n\n| lag | models | selected | mean train R² | max train R² |\n|---:|---:|---:|---:|---:|\n";
  for (const auto& [lag, values] : by_lag) {
    double sum = 0.0, best = -1e300;
    for (double v : values) {
      sum += v;
      best = std::max(best, v);
    }
    md << "| " << lag << " | " << values.size() << " | " << selected_by_lag[lag] << " | "
       << detail::fixed(sum / static_cast<double>(values.size()), 3) << " | " << detail::fixed(best, 3) << " |\n";
  }
  if (ann && ann->contains("champion")) {
    const auto& c = (*ann)["champion"];
    md << "\n## ANN stage\n\nNetworks trained: " << (*ann)["trained_networks"].get<std::size_t>() << ". Champion: `"
       << c["id"].get<std::string>() << "` (partition " << c["partition"].get<std::size_t>()
       << ", mean validation R² " << detail::fixed(c["mean_validation_r2"].get<double>(), 3) << ").\n";
  }
  if (evaluation) {
    const auto& e = *evaluation;
    md << "\n## Holdout evaluation\n\n| metric | value |\n|---|---:|\n";
    for (const auto& [k, v] : e["metrics"].items()) md << "| " << k << " | " << detail::fixed(v.get<double>(), 4) << " |\n";
    md << "| accuracy | " << detail::fixed(e["accuracy"].get<double>(), 4) << " |\n";
    if (!e["auroc_hand_till"].is_null()) {
      md << "| AUROC (Hand-Till) | " << detail::fixed(e["auroc_hand_till"].get<double>(), 4) << " |\n";
    }
    md << "\nConfusion matrix (rows actual phase, columns predicted):\n\n| | 1 | 2 | 3 | 4 | 5 |\n|---|---:|---:|---:|---:|---:|\n";
    int a = 1;
    for (const auto& row : e["confusion_matrix"]) {
      md << "| " << a++ << " |";
      for (const auto& v : row) md << ' ' << v.get<std::size_t>() << " |";
      md << '\n';
    }
  }
  if (assumption && !(*assumption)["best_not_selected"].is_null()) {
    md << "\n## Assumption validation\n\nBest holdout R² among " << (*assumption)["n_models"].get<std::size_t>()
       << " rejected models: " << detail::fixed((*assumption)["best_not_selected"]["r2_test"].get<double>(), 3)
       << " (`" << (*assumption)["best_not_selected"]["id"].get<std::string>() << "`); champion: "
       << detail::fixed((*assumption)["champion_r2_test"].get<double>(), 3) << ".\n";
  }
  written.push_back(p);
  return written;
}

}  // namespace drought
