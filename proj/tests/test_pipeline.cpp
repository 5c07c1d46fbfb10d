#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "drought/drought.hpp"

using namespace drought;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const std::string& dir) {
  PipelineConfig config;
  config.seed = 42;
  config.output_dir = dir;
  config.synthetic.n_counties = 2;
  config.synthetic.n_years = 8;
  config.holdout_months = 12;
  config.k = 3;
  config.max_steps = 300;
  config.threshold = 0.5;
  config.validate_assumption = true;
  return config;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("drought_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

class SmallPipeline : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = scratch("pipeline");
    bundle_ = std::make_unique<ReportBundle>(run_pipeline(small_config(dir_.string())));
  }
  static void TearDownTestSuite() {
    bundle_.reset();
    fs::remove_all(dir_);
  }
  static inline fs::path dir_;
  static inline std::unique_ptr<ReportBundle> bundle_;
};

TEST_F(SmallPipeline, WritesEveryArtifact) {
  for (const char* name : {artifact::panel, artifact::indices, artifact::features, artifact::plan, artifact::models,
                           artifact::gam, artifact::ann, artifact::champion, artifact::evaluation, artifact::assumption,
                           artifact::manifest}) {
    EXPECT_TRUE(fs::exists(dir_ / name)) << name;
  }
  const Json manifest = read_json((dir_ / artifact::manifest).string());
  EXPECT_EQ(manifest["config_hash"], bundle_->config.hash());
  for (const auto& s : manifest["stages"]) EXPECT_EQ(s["status"], "ok") << s["name"];
}

TEST_F(SmallPipeline, ReferencesAreConsistent) {
  const Json gam = read_json((dir_ / artifact::gam).string());
  const Json ann = read_json((dir_ / artifact::ann).string());
  std::set<std::string> selected, trained;
  for (const auto& m : gam["models"]) {
    if (m["selected"].get<bool>()) selected.insert(m["id"].get<std::string>());
  }
  for (const auto& m : ann["models"]) trained.insert(m["id"].get<std::string>());
  EXPECT_EQ(selected, trained);
  const auto champion = champion_from_json(read_json((dir_ / artifact::champion).string()));
  EXPECT_TRUE(trained.count(champion.model_id));
  EXPECT_EQ(champion.model_id, bundle_->champion->model_id);
  EXPECT_EQ(champion.model.network, bundle_->champion->model.network);

  const Json eval = read_json((dir_ / artifact::evaluation).string());
  const auto plan = split_plan_from_json(read_json((dir_ / artifact::plan).string()));
  EXPECT_EQ(eval["rows"].get<std::size_t>(), plan.test.size());
  EXPECT_EQ(bundle_->assumption->models.size(), 102u - selected.size());
}

TEST_F(SmallPipeline, CsvTablesCarryJsonDigits) {
  const auto out = dir_ / "tables";
  const auto files = emit_report(dir_.string(), ReportFormat::CsvTables, out.string());
  ASSERT_EQ(files.size(), 2u);
  const Json gam = read_json((dir_ / artifact::gam).string());
  std::istringstream t4(slurp(out / "table4_gam.csv"));
  std::string line;
  std::getline(t4, line);
  EXPECT_EQ(line, "model,r2_train,r2_validation,overfit_index,overfit,lag_time");
  std::size_t rows = 0;
  for (const auto& m : gam["models"]) {
    if (!m["selected"].get<bool>()) continue;
    ASSERT_TRUE(std::getline(t4, line));
    EXPECT_EQ(line.substr(0, line.find(',')), m["id"].get<std::string>());
    EXPECT_NE(line.find(',' + m["r2_train"].dump() + ','), std::string::npos);
    ++rows;
  }
  EXPECT_FALSE(std::getline(t4, line));
  EXPECT_EQ(rows, bundle_->gam->selected().size());

  const auto json_files = emit_report(dir_.string(), ReportFormat::Json, out.string());
  const Json report = read_json(json_files.front());
  EXPECT_EQ(report["gam"], gam);
  const auto md = emit_report(dir_.string(), ReportFormat::MarkdownSummary, out.string());
  EXPECT_NE(slurp(md.front()).find(bundle_->champion->model_id), std::string::npos);
}

TEST(Pipeline, UnknownReportFormat) { EXPECT_THROW(parse_report_format("pdf"), UsageError); }

TEST(Pipeline, NoSurvivorsAtHighThreshold) {
  const auto dir = scratch("nosurvivors");
  auto config = small_config(dir.string());
  config.threshold = 0.99;
  config.validate_assumption = false;
  EXPECT_THROW(run_pipeline(config), NoSurvivorsError);
  const Json manifest = read_json((dir / artifact::manifest).string());
  bool gam_failed = false;
  for (const auto& s : manifest["stages"]) {
    if (s["name"] == "gam") gam_failed = s["status"] == "failed";
    if (s["name"] == "ann") EXPECT_EQ(s["status"], "skipped");
  }
  EXPECT_TRUE(gam_failed);
  fs::remove_all(dir);
}

TEST(Pipeline, MissingSeedRejected) {
  PipelineConfig config;
  EXPECT_THROW(run_pipeline(config), ConfigError);
}

TEST(Pipeline, BadInputIsValidationError) {
  const auto dir = scratch("badinput");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.csv");
    out << "county,year,month,dekad,ndvi,rfe\na,2000,1,1,7.0,3\n";
  }
  auto config = small_config((dir / "run").string());
  config.input = (dir / "bad.csv").string();
  EXPECT_THROW(run_pipeline(config), ValidationError);
  fs::remove_all(dir);
}
