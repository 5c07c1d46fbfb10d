// Command-line front end: one subcommand per pipeline stage plus `pipeline`
// for the full run.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drought/drought.hpp"

namespace {

using namespace drought;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NoSurvivorsError*>(&e)) return exit_codes::no_survivors;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const StructuralError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ClimatologyError*>(&e) || dynamic_cast<const UsageError*>(&e)) {
    return exit_codes::validation;
  }
  return exit_codes::stage_failure;
}

std::string sibling(const std::string& path, const char* name) {
  return (std::filesystem::path(path).parent_path() / name).string();
}

// Config-file keys exposed as --<key> flags; values are applied after the
// file so flags win.
struct ConfigOverrides {
  std::string file;
  std::map<std::string, std::string> values;

  void add_to(CLI::App* app) {
    app->add_option("--config", file, "TOML config file");
    for (const auto& key : kConfigKeys) {
      const std::string name(key.name);
      app->add_option("--" + name, values[name], std::string(key.help));
    }
  }

  PipelineConfig resolve(const CLI::App* app, PipelineConfig base = {}) const {
    PipelineConfig config = file.empty() ? std::move(base) : load_config_file(file);
    for (const auto& key : kConfigKeys) {
      const std::string name(key.name);
      if (app->count("--" + name) > 0) config.set(name, values.at(name));
    }
    return config;
  }
};

std::vector<std::size_t> parse_arch(const std::string& text) {
  PipelineConfig c;
  c.set("arch", text);
  return c.arch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drought forecasting pipeline: vegetation condition indices, GAM screening and neural networks"};
  app.require_subcommand(1);
  unsigned jobs = 1;
  bool quiet = false;
  app.add_option("--jobs,-j", jobs, "worker threads for model fitting")->check(CLI::PositiveNumber);
  app.add_flag("--quiet,-q", quiet, "suppress progress messages");

  auto log = [&]() -> std::ostream* { return quiet ? nullptr : &std::cerr; };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic panel CSV");
  ConfigOverrides synth_config;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  synth->add_option("--config", synth_config.file, "TOML config file (synthetic.* keys)");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output panel CSV")->required();
  synth->callback([&] {
    PipelineConfig config = synth_config.file.empty() ? PipelineConfig{} : load_config_file(synth_config.file);
    if (synth_seed) config.synthetic.seed = *synth_seed;
    config.synthetic.validate();
    write_panel_csv(generate_synthetic_panel(config.synthetic), synth_out);
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse and validate a panel CSV");
  std::string ingest_input, ingest_report;
  ingest->add_option("--input", ingest_input, "panel CSV")->required();
  ingest->add_option("--report", ingest_report, "validation report JSON");
  ingest->callback([&] {
    const auto report = validate_panel(parse_panel_csv(ingest_input));
    if (!ingest_report.empty()) write_json(to_json(report), ingest_report);
    if (!quiet) {
      std::cerr << report.n_rows << " dekad rows, " << report.span_per_county.size() << " counties, " << report.n_gaps
                << " months with gaps\n";
    }
    if (!report.accepted()) throw ValidationError("panel has out-of-range values");
  });

  // indices
  auto* indices = app.add_subcommand("indices", "compute the drought index table");
  std::string indices_input, indices_baseline, indices_out;
  indices->add_option("--input", indices_input, "panel CSV")->required();
  indices->add_option("--baseline", indices_baseline, "climatology years y0..y1 (default: all but the last two)");
  indices->add_option("--out", indices_out, "index table CSV")->required();
  indices->callback([&] {
    const auto panel = parse_panel_csv(indices_input);
    const Baseline baseline = indices_baseline.empty() ? default_baseline(panel) : parse_baseline(indices_baseline);
    write_index_csv(build_index_table(panel, baseline), indices_out);
  });

  // features
  auto* features = app.add_subcommand("features", "build the lagged feature table");
  std::string features_indices, features_out;
  features->add_option("--indices", features_indices, "index table CSV")->required();
  features->add_option("--out", features_out, "feature table CSV")->required();
  features->callback([&] { write_feature_csv(build_feature_table(parse_index_csv(features_indices)), features_out); });

  // split
  auto* split = app.add_subcommand("split", "make the holdout and train/validation partitions");
  std::string split_features, split_out;
  int split_holdout = 24, split_k = 10;
  std::uint64_t split_seed = 0;
  split->add_option("--features", split_features, "feature table CSV")->required();
  split->add_option("--holdout", split_holdout, "holdout months per county")->capture_default_str();
  split->add_option("--k", split_k, "number of partitions")->capture_default_str();
  split->add_option("--seed", split_seed, "partition seed")->required();
  split->add_option("--out", split_out, "plan JSON")->required();
  split->callback([&] {
    write_json(to_json(make_split_plan(parse_feature_csv(split_features), split_holdout, split_k, split_seed)), split_out);
  });

  // enumerate
  auto* enumerate = app.add_subcommand("enumerate", "list the candidate models");
  std::string enumerate_out;
  enumerate->add_option("--out", enumerate_out, "models JSON")->required();
  enumerate->callback([&] { write_json(models_to_json(enumerate_models(full_catalog())), enumerate_out); });

  // gam
  auto* gam = app.add_subcommand("gam", "GAM screening stage");
  std::string gam_features, gam_models, gam_plan, gam_out;
  bool gam_smooth_all = false;
  double gam_threshold = 0.70;
  gam->add_option("--features", gam_features, "feature table CSV")->required();
  gam->add_option("--models", gam_models, "models JSON")->required();
  gam->add_option("--plan", gam_plan, "plan JSON")->required();
  gam->add_flag("--smooth-all,--smooth_all", gam_smooth_all, "smooth every predictor");
  gam->add_option("--threshold", gam_threshold, "selection threshold on mean training R2")->capture_default_str();
  gam->add_option("--out", gam_out, "GAM report JSON")->required();
  gam->callback([&] {
    const auto table = parse_feature_csv(gam_features);
    const auto plan = split_plan_from_json(read_json(gam_plan));
    check_plan(plan, table);
    GamStageOptions options;
    options.threshold = gam_threshold;
    options.fit.smooth_all = gam_smooth_all;
    options.jobs = jobs;
    const auto report = run_gam_stage(models_from_json(read_json(gam_models)), table, plan, options);
    write_json(to_json(report), gam_out);
    if (report.selected().empty()) throw NoSurvivorsError("no model reached the GAM threshold");
  });

  // ann
  auto* ann = app.add_subcommand("ann", "ANN stage on the GAM-selected models");
  std::string ann_features, ann_models, ann_plan, ann_out, ann_champion, ann_arch = "5,3";
  long ann_max_steps = 1'000'000;
  double ann_gradient_threshold = 0.01;
  std::uint64_t ann_seed = 0;
  ann->add_option("--features", ann_features, "feature table CSV")->required();
  ann->add_option("--models", ann_models, "GAM report JSON (selected models) or models JSON")->required();
  ann->add_option("--plan", ann_plan, "plan JSON")->required();
  ann->add_option("--arch", ann_arch, "hidden layer sizes")->capture_default_str();
  ann->add_option("--max-steps,--max_steps", ann_max_steps, "training step budget")->capture_default_str();
  ann->add_option("--gradient-threshold,--gradient_threshold", ann_gradient_threshold, "convergence bound")->capture_default_str();
  ann->add_option("--seed", ann_seed, "weight initialisation seed")->required();
  ann->add_option("--out", ann_out, "ANN report JSON")->required();
  ann->add_option("--champion-out", ann_champion, "champion JSON (default: champion.json next to --out)");
  ann->callback([&] {
    const auto table = parse_feature_csv(ann_features);
    const auto plan = split_plan_from_json(read_json(ann_plan));
    check_plan(plan, table);
    const Json models_json = read_json(ann_models);
    const bool is_gam_report = !models_json["models"].empty() && models_json["models"][0].contains("selected");
    const auto models = models_from_json(models_json, is_gam_report ? ModelFilter::Selected : ModelFilter::All);
    if (models.empty()) throw NoSurvivorsError("no models to train");
    AnnStageOptions options;
    options.hidden = parse_arch(ann_arch);
    options.train.max_steps = ann_max_steps;
    options.train.threshold = ann_gradient_threshold;
    options.seed = ann_seed;
    options.jobs = jobs;
    const auto report = run_ann_stage(models, table, plan, options);
    write_json(to_json(report, options), ann_out);
    write_json(to_json(*report.champion), ann_champion.empty() ? sibling(ann_out, artifact::champion) : ann_champion);
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score the champion on the holdout");
  std::string eval_champion, eval_features, eval_plan, eval_out;
  evaluate->add_option("--champion", eval_champion, "champion JSON")->required();
  evaluate->add_option("--features", eval_features, "feature table CSV")->required();
  evaluate->add_option("--plan", eval_plan, "plan JSON")->required();
  evaluate->add_option("--out", eval_out, "evaluation report JSON")->required();
  evaluate->callback([&] {
    const auto table = parse_feature_csv(eval_features);
    const auto plan = split_plan_from_json(read_json(eval_plan));
    check_plan(plan, table);
    const auto champion = champion_from_json(read_json(eval_champion));
    write_json(to_json(evaluate_model(champion.model, table, plan.test)), eval_out);
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write a run bundle");
  ConfigOverrides pipeline_config;
  pipeline_config.add_to(pipeline);
  pipeline->callback([&] {
    const auto config = pipeline_config.resolve(pipeline);
    run_pipeline(config, {jobs, log()});
  });

  // validate-assumption
  auto* assumption = app.add_subcommand("validate-assumption", "train ANNs on the models the GAM stage rejected");
  std::string assumption_bundle, assumption_out;
  ConfigOverrides assumption_config;
  assumption->add_option("--bundle", assumption_bundle, "completed run directory")->required();
  assumption->add_option("--out", assumption_out, "report JSON (default: inside the bundle)");
  assumption_config.add_to(assumption);
  assumption->callback([&] {
    namespace fs = std::filesystem;
    const fs::path dir(assumption_bundle);
    // The run's own settings are the base; explicit flags override them.
    PipelineConfig base;
    const Json manifest = read_json((dir / artifact::manifest).string());
    for (const auto& [key, value] : manifest.at("config").items()) base.set(key, value.get<std::string>());
    const auto config = assumption_config.resolve(assumption, base);
    config.validate();
    const auto table = parse_feature_csv((dir / artifact::features).string());
    const auto plan = split_plan_from_json(read_json((dir / artifact::plan).string()));
    check_plan(plan, table);
    const auto rejected = models_from_json(read_json((dir / artifact::gam).string()), ModelFilter::NotSelected);
    const auto champion = champion_from_json(read_json((dir / artifact::champion).string()));
    if (!quiet) std::cerr << "training " << rejected.size() << " rejected models\n";
    const auto report = run_assumption_validation(rejected, table, plan, ann_options(config, jobs), champion.model);
    write_json(to_json(report), assumption_out.empty() ? (dir / artifact::assumption).string() : assumption_out);
  });

  // report
  auto* report = app.add_subcommand("report", "emit tables or summaries from a run bundle");
  std::string report_bundle, report_format = "json", report_out;
  report->add_option("--bundle", report_bundle, "run directory")->required();
  report->add_option("--format", report_format, "json, csv-tables or markdown-summary")->capture_default_str();
  report->add_option("--out", report_out, "output directory (default: the bundle)");
  report->callback([&] {
    const auto written =
        emit_report(report_bundle, parse_report_format(report_format), report_out.empty() ? report_bundle : report_out);
    for (const auto& p : written) std::cout << p << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_codes::ok : exit_codes::validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return exit_codes::ok;
}
