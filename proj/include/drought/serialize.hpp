#pragma once

// JSON forms of the persisted pipeline artifacts. Objects keep insertion
// order so output bytes depend only on content.

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "drought/ann.hpp"
#include "drought/error.hpp"
#include "drought/evaluation.hpp"
#include "drought/features.hpp"
#include "drought/gam.hpp"
#include "drought/metrics.hpp"
#include "drought/model_space.hpp"
#include "drought/panel.hpp"

namespace drought {

using Json = nlohmann::ordered_json;

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

namespace detail {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing JSON field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline Json to_json(const ValidationReport& r) {
  Json spans = Json::array();
  for (const auto& s : r.span_per_county) {
    spans.push_back({{"county", s.county}, {"first", to_string(s.first)}, {"last", to_string(s.last)}});
  }
  Json gaps = Json::array();
  for (const auto& g : r.gaps) gaps.push_back({{"county", g.county}, {"date", to_string(g.date)}});
  Json violations = Json::array();
  for (const auto& v : r.range_violations) {
    violations.push_back(
        {{"county", v.county}, {"date", to_string(v.date)}, {"dekad", v.dekad}, {"field", v.field}, {"value", v.value}});
  }
  return {{"accepted", r.accepted()},
          {"n_rows", r.n_rows},
          {"n_gaps", r.n_gaps},
          {"span_per_county", spans},
          {"gaps", gaps},
          {"range_violations", violations}};
}

inline Json to_json(const MetricSet& m) {
  return {{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"mape", m.mape},
          {"nmse", m.nmse}, {"nmae", m.nmae}, {"r2", m.r2}};
}

inline Json to_json(const SplitPlan& plan) {
  Json parts = Json::array();
  for (const auto& p : plan.partitions) parts.push_back({{"train", p.train}, {"validation", p.validation}});
  return {{"holdout_months", plan.holdout_months},
          {"k", plan.k},
          {"seed", plan.seed},
          {"n_rows", plan.n_rows},
          {"test", plan.test},
          {"dev", plan.dev},
          {"partitions", parts}};
}

inline SplitPlan split_plan_from_json(const Json& j) {
  using detail::field;
  SplitPlan plan;
  plan.holdout_months = field<int>(j, "holdout_months");
  plan.k = field<int>(j, "k");
  plan.seed = field<std::uint64_t>(j, "seed");
  plan.n_rows = field<std::size_t>(j, "n_rows");
  plan.test = field<std::vector<std::size_t>>(j, "test");
  plan.dev = field<std::vector<std::size_t>>(j, "dev");
  for (const auto& p : field<Json>(j, "partitions")) {
    plan.partitions.push_back({field<std::vector<std::size_t>>(p, "train"),
                               field<std::vector<std::size_t>>(p, "validation")});
  }
  if (plan.partitions.size() != static_cast<std::size_t>(plan.k)) throw ParseError("plan partition count differs from k");
  return plan;
}

// Checks that a plan was built for this feature table.
inline void check_plan(const SplitPlan& plan, const FeatureTable& table) {
  if (plan.n_rows != table.size()) {
    throw ValidationError("split plan covers " + std::to_string(plan.n_rows) + " rows but the feature table has " +
                          std::to_string(table.size()));
  }
  auto check = [&](const std::vector<std::size_t>& rows) {
    for (auto r : rows) {
      if (r >= table.size()) throw ValidationError("split plan refers to row " + std::to_string(r) + " out of range");
    }
  };
  check(plan.test);
  check(plan.dev);
  for (const auto& p : plan.partitions) {
    check(p.train);
    check(p.validation);
  }
}

inline Json to_json(const ModelSpec& spec) {
  Json predictors = Json::array();
  for (const auto& p : spec.predictors) {
    predictors.push_back({{"name", p.name()},
                          {"index", index_name(p.index)},
                          {"lag", p.lag},
                          {"category", category_name(p.category())}});
  }
  return {{"id", spec.id()}, {"lag", spec.lag()}, {"predictors", predictors}, {"seasonality", spec.seasonality}};
}

inline Json models_to_json(const std::vector<ModelSpec>& models) {
  Json list = Json::array();
  for (const auto& m : models) list.push_back(to_json(m));
  return {{"count", models.size()}, {"models", list}};
}

enum class ModelFilter { All, Selected, NotSelected };

// Reads model ids from models.json, or from a GAM report when a filter on the
// "selected" flag is requested.
inline std::vector<ModelSpec> models_from_json(const Json& j, ModelFilter filter = ModelFilter::All) {
  std::vector<ModelSpec> out;
  for (const auto& m : detail::field<Json>(j, "models")) {
    if (filter != ModelFilter::All) {
      const bool selected = detail::field<bool>(m, "selected");
      if (selected != (filter == ModelFilter::Selected)) continue;
    }
    out.push_back(parse_model_id(detail::field<std::string>(m, "id")));
  }
  return out;
}

inline Json to_json(const GamStageReport& report) {
  Json models = Json::array();
  std::size_t n_selected = 0;
  for (const auto& m : report.models) {
    n_selected += m.selected ? 1 : 0;
    Json entry = {{"rank", m.rank}, {"id", m.id}, {"lag", m.lag}, {"ok", m.ok}};
    if (!m.ok) entry["error"] = m.error;
    entry["selected"] = m.selected;
    entry["r2_train"] = m.r2_train;
    entry["r2_validation"] = m.r2_validation;
    entry["overfit_index"] = m.overfit_index;
    entry["overfit"] = m.overfit;
    if (m.ok) {
      entry["train"] = to_json(m.train);
      entry["validation"] = to_json(m.validation);
      Json parts = Json::array();
      for (const auto& p : m.partitions) parts.push_back({{"r2_train", p.train.r2}, {"r2_validation", p.validation.r2}});
      entry["partitions"] = parts;
    }
    models.push_back(std::move(entry));
  }
  return {{"threshold", report.threshold},
          {"smooth_all", report.smooth_all},
          {"n_models", report.models.size()},
          {"n_selected", n_selected},
          {"models", models}};
}

inline Json to_json(const RangeSummary& r) { return {{"min", r.min}, {"max", r.max}, {"mean", r.mean}}; }

inline Json to_json(const AnnModelResult& m) {
  Json cells = Json::array();
  for (const auto& c : m.cells) {
    Json cell = {{"partition", c.partition}, {"ok", c.ok}};
    if (!c.ok) {
      cell["error"] = c.error;
    } else {
      cell["status"] = convergence_name(c.status);
      cell["steps"] = c.steps;
      cell["r2_train"] = c.train.r2;
      cell["r2_validation"] = c.validation.r2;
    }
    cells.push_back(std::move(cell));
  }
  Json out = {{"id", m.id}, {"lag", m.spec.lag()}, {"n_ok", m.n_ok}};
  if (m.n_ok > 0) {
    out["r2_train"] = to_json(m.r2_train);
    out["r2_validation"] = to_json(m.r2_validation);
    out["train"] = to_json(m.train);
    out["validation"] = to_json(m.validation);
    out["overfit_index"] = m.overfit_index;
    out["overfit"] = m.overfit;
    out["best_partition"] = m.best_partition;
  }
  out["cells"] = cells;
  return out;
}

inline Json to_json(const AnnStageReport& report, const AnnStageOptions& options) {
  Json models = Json::array();
  for (const auto& m : report.models) models.push_back(to_json(m));
  Json out = {{"hidden", options.hidden},
              {"max_steps", options.train.max_steps},
              {"gradient_threshold", options.train.threshold},
              {"seed", options.seed},
              {"trained_networks", report.trained_networks()},
              {"models", models}};
  if (report.champion) {
    out["champion"] = {{"id", report.champion->model_id},
                       {"partition", report.champion->partition},
                       {"mean_validation_r2", report.champion->mean_validation_r2}};
  }
  return out;
}

// Weights are written per layer as a units x inputs matrix, row-major.
inline Json to_json(const Champion& champion) {
  const auto& net = champion.model.network;
  Json layers = Json::array();
  for (const auto& s : layer_shapes(net.arch)) {
    Json weights = Json::array();
    for (std::size_t u = 0; u < s.out; ++u) {
      const auto first = net.params.begin() + static_cast<std::ptrdiff_t>(s.weight_offset + u * s.in);
      weights.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(s.in)));
    }
    const auto b = net.params.begin() + static_cast<std::ptrdiff_t>(s.bias_offset);
    layers.push_back({{"weights", weights}, {"biases", std::vector<double>(b, b + static_cast<std::ptrdiff_t>(s.out))}});
  }
  Json norm = Json::array();
  for (const auto& c : champion.model.norm.columns) norm.push_back({{"column", c.column}, {"min", c.min}, {"max", c.max}});
  return {{"model_id", champion.model_id},
          {"partition", champion.partition},
          {"mean_validation_r2", champion.mean_validation_r2},
          {"arch", {{"inputs", net.arch.inputs}, {"hidden", net.arch.hidden}, {"outputs", net.arch.outputs}}},
          {"activation", {{"hidden", "logistic"}, {"output", "identity"}}},
          {"init_seed", net.seed},
          {"layers", layers},
          {"norm", norm}};
}

inline Champion champion_from_json(const Json& j) {
  using detail::field;
  Champion c;
  c.model_id = field<std::string>(j, "model_id");
  c.partition = field<std::size_t>(j, "partition");
  c.mean_validation_r2 = field<double>(j, "mean_validation_r2");
  const auto arch = field<Json>(j, "arch");
  NetworkArch a{field<std::size_t>(arch, "inputs"), field<std::vector<std::size_t>>(arch, "hidden"),
                field<std::size_t>(arch, "outputs")};
  a.validate();
  Network net{a, field<std::uint64_t>(j, "init_seed"), std::vector<double>(a.parameter_count())};
  const auto shapes = layer_shapes(a);
  const auto layers = field<Json>(j, "layers");
  if (layers.size() != shapes.size()) throw ParseError("champion layer count does not match its architecture");
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    const auto weights = field<std::vector<std::vector<double>>>(layers[l], "weights");
    const auto biases = field<std::vector<double>>(layers[l], "biases");
    if (weights.size() != s.out || biases.size() != s.out) throw ParseError("champion layer has the wrong shape");
    for (std::size_t u = 0; u < s.out; ++u) {
      if (weights[u].size() != s.in) throw ParseError("champion weight row has the wrong length");
      std::copy(weights[u].begin(), weights[u].end(), net.params.begin() + static_cast<std::ptrdiff_t>(s.weight_offset + u * s.in));
      net.params[s.bias_offset + u] = biases[u];
    }
  }
  NormParams norm;
  for (const auto& col : field<Json>(j, "norm")) {
    norm.columns.push_back({field<std::string>(col, "column"), field<double>(col, "min"), field<double>(col, "max")});
  }
  if (norm.columns.size() != a.inputs + 1) throw ParseError("champion needs one scaling entry per input plus the target");
  c.model = {c.model_id, std::move(net), std::move(norm)};
  return c;
}

inline Json to_json(const EvaluationReport& r) {
  Json counties = Json::array();
  for (const auto& c : r.counties) {
    counties.push_back({{"county", c.county}, {"rows", c.rows}, {"correct", c.correct}, {"accuracy", c.accuracy}});
  }
  Json matrix = Json::array();
  for (const auto& row : r.confusion.counts) matrix.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  Json roc = Json::object();
  for (int c = 1; c <= kPhaseCount; ++c) {
    Json points = Json::array();
    for (const auto& p : r.roc[static_cast<std::size_t>(c - 1)]) points.push_back({p.fpr, p.tpr});
    roc[std::to_string(c)] = points;
  }
  Json months = Json::array();
  for (const auto& m : r.months) {
    months.push_back({{"county", m.county},
                      {"date", to_string(m.date)},
                      {"actual_vci3m", m.actual_vci},
                      {"predicted_vci3m", m.predicted_vci},
                      {"actual_phase", m.actual_phase},
                      {"predicted_phase", m.predicted_phase}});
  }
  Json phases = Json::array();
  for (int c = 1; c <= kPhaseCount; ++c) {
    const auto& band = kPhaseBands[static_cast<std::size_t>(c - 1)];
    phases.push_back({{"phase", c}, {"lower", band.lower}, {"upper", band.upper}, {"label", std::string(band.label)}});
  }
  return {{"model_id", r.model_id},
          {"rows", r.rows},
          {"metrics", to_json(r.metrics)},
          {"accuracy", r.accuracy},
          {"county_accuracy", counties},
          {"phases", phases},
          {"confusion_matrix", matrix},
          {"classes_present", r.classes_present},
          {"auroc_hand_till", r.auroc ? Json(*r.auroc) : Json(nullptr)},
          {"roc", roc},
          {"monthly", months}};
}

}  // namespace drought
