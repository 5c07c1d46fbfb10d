#pragma once

// Fully connected regression networks (logistic hidden units, identity
// output) trained by full-batch backpropagation, and the repeated-partition
// stage that trains one network per (model, partition) cell.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drought/error.hpp"
#include "drought/features.hpp"
#include "drought/metrics.hpp"
#include "drought/model_space.hpp"
#include "drought/parallel.hpp"
#include "drought/random.hpp"

namespace drought {

struct NetworkArch {
  std::size_t inputs = 3;
  std::vector<std::size_t> hidden{5, 3};
  std::size_t outputs = 1;

  void validate() const {
    if (inputs < 1 || outputs < 1) throw ConfigError("network layers need at least one unit");
    for (auto h : hidden) {
      if (h < 1) throw ConfigError("hidden layers need at least one unit");
    }
  }

  // Sizes from input to output.
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s{inputs};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(outputs);
    return s;
  }

  std::size_t parameter_count() const {
    const auto s = sizes();
    std::size_t n = 0;
    for (std::size_t l = 1; l < s.size(); ++l) n += s[l] * s[l - 1] + s[l];
    return n;
  }

  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

// Hidden-layer sizes from the two-layer rule of thumb for N training samples
// and m outputs; advisory only.
struct HiddenNodes {
  long first = 0;
  long second = 0;
};

inline HiddenNodes hidden_nodes_rule(double n_samples, double n_outputs) {
  if (!(n_samples >= 1.0) || !(n_outputs >= 1.0)) throw UsageError("hidden_nodes_rule needs N >= 1 and m >= 1");
  const double first = std::sqrt(n_samples * (n_outputs + 2.0)) + 2.0 * std::sqrt(n_samples / (n_outputs + 2.0));
  const double second = n_outputs * std::sqrt(n_samples / (n_outputs + 2.0));
  // Guard against sqrt rounding a whole number up past an integer.
  auto ceil_tolerant = [](double v) { return static_cast<long>(std::ceil(v - 1e-9)); };
  return {ceil_tolerant(first), ceil_tolerant(second)};
}

// Parameters are stored flat, layer by layer: the weight matrix (rows =
// units of the layer, row-major) followed by the bias vector.
struct Network {
  NetworkArch arch;
  std::uint64_t seed = 0;
  std::vector<double> params;

  std::size_t layer_count() const { return arch.hidden.size() + 1; }

  friend bool operator==(const Network&, const Network&) = default;
};

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

inline std::vector<LayerShape> layer_shapes(const NetworkArch& arch) {
  const auto s = arch.sizes();
  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  for (std::size_t l = 1; l < s.size(); ++l) {
    LayerShape shape{s[l - 1], s[l], offset, offset + s[l] * s[l - 1]};
    offset = shape.bias_offset + s[l];
    shapes.push_back(shape);
  }
  return shapes;
}

inline constexpr double kInitRange = 0.5;

inline Network init_network(const NetworkArch& arch, std::uint64_t seed) {
  arch.validate();
  Network net{arch, seed, std::vector<double>(arch.parameter_count())};
  Rng rng(seed);
  for (auto& p : net.params) p = rng.uniform(-kInitRange, kInitRange);
  return net;
}

inline double logistic(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

// Row-major inputs with a fixed width, plus one target per row.
struct Batch {
  std::size_t width = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::size_t size() const noexcept { return targets.size(); }
  std::span<const double> row(std::size_t i) const { return {inputs.data() + i * width, width}; }
  void push(std::span<const double> x, double y) {
    if (width == 0) width = x.size();
    if (x.size() != width) throw UsageError("batch rows differ in width");
    inputs.insert(inputs.end(), x.begin(), x.end());
    targets.push_back(y);
  }
};

namespace detail {

// Forward pass keeping every layer's activations (activations[0] = input).
inline void forward_trace(const Network& net, const std::vector<LayerShape>& shapes, std::span<const double> input,
                          std::vector<std::vector<double>>& activations) {
  activations.resize(shapes.size() + 1);
  activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    auto& out = activations[l + 1];
    out.resize(s.out);
    const auto& in = activations[l];
    const bool hidden = l + 1 < shapes.size();
    for (std::size_t u = 0; u < s.out; ++u) {
      double z = net.params[s.bias_offset + u];
      const double* w = net.params.data() + s.weight_offset + u * s.in;
      for (std::size_t i = 0; i < s.in; ++i) z += w[i] * in[i];
      out[u] = hidden ? logistic(z) : z;
    }
  }
}

}  // namespace detail

inline double forward(const Network& net, std::span<const double> input) {
  if (input.size() != net.arch.inputs) {
    throw UsageError("network expects " + std::to_string(net.arch.inputs) + " inputs, got " +
                     std::to_string(input.size()));
  }
  if (net.arch.outputs != 1) throw UsageError("forward() returns a single output");
  std::vector<std::vector<double>> activations;
  detail::forward_trace(net, layer_shapes(net.arch), input, activations);
  return activations.back()[0];
}

inline std::vector<double> forward(const Network& net, const Batch& batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(forward(net, batch.row(i)));
  return out;
}

struct GradientResult {
  std::vector<double> gradient;  // same layout as Network::params
  double error = 0.0;            // sum of squared errors / 2
};

// Scratch buffers for repeated gradient evaluations on one architecture.
class GradientWorkspace {
public:
  explicit GradientWorkspace(const NetworkArch& arch) : shapes_(layer_shapes(arch)) {
    const auto sizes = arch.sizes();
    std::size_t total = 0;
    for (auto n : sizes) {
      offsets_.push_back(total);
      total += n;
    }
    activations_.resize(total);
    deltas_.resize(total);
  }

  // Backpropagation of E = sum (y_hat - y)^2 / 2 over the batch; writes dE/dw
  // into `grad` (Network::params layout) and returns E.
  double accumulate(const Network& net, const Batch& batch, std::vector<double>& grad) {
    grad.assign(net.params.size(), 0.0);
    const double* w_all = net.params.data();
    double error = 0.0;
    const std::size_t layers = shapes_.size();
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto x = batch.row(r);
      std::copy(x.begin(), x.end(), activations_.begin());
      for (std::size_t l = 0; l < layers; ++l) {
        const auto& s = shapes_[l];
        const double* in = activations_.data() + offsets_[l];
        double* out = activations_.data() + offsets_[l + 1];
        for (std::size_t u = 0; u < s.out; ++u) {
          double z = w_all[s.bias_offset + u];
          const double* w = w_all + s.weight_offset + u * s.in;
          for (std::size_t i = 0; i < s.in; ++i) z += w[i] * in[i];
          out[u] = l + 1 < layers ? logistic(z) : z;
        }
      }
      const double e = activations_[offsets_[layers]] - batch.targets[r];
      error += 0.5 * e * e;
      deltas_[offsets_[layers]] = e;
      for (std::size_t l = layers; l-- > 0;) {
        const auto& s = shapes_[l];
        const double* in = activations_.data() + offsets_[l];
        const double* delta = deltas_.data() + offsets_[l + 1];
        double* below = deltas_.data() + offsets_[l];
        if (l > 0) std::fill(below, below + s.in, 0.0);
        for (std::size_t u = 0; u < s.out; ++u) {
          const double d = delta[u];
          const double* w = w_all + s.weight_offset + u * s.in;
          double* g = grad.data() + s.weight_offset + u * s.in;
          for (std::size_t i = 0; i < s.in; ++i) {
            g[i] += d * in[i];
            if (l > 0) below[i] += w[i] * d;
          }
          grad[s.bias_offset + u] += d;
        }
        if (l > 0) {
          for (std::size_t i = 0; i < s.in; ++i) below[i] *= in[i] * (1.0 - in[i]);
        }
      }
    }
    return error;
  }

private:
  std::vector<LayerShape> shapes_;
  std::vector<std::size_t> offsets_;  // start of each layer in the flat buffers
  std::vector<double> activations_;
  std::vector<double> deltas_;
};

inline GradientResult gradient(const Network& net, const Batch& batch) {
  if (batch.size() == 0) throw UsageError("gradient needs a non-empty batch");
  if (batch.width != net.arch.inputs) throw UsageError("batch width does not match the network input size");
  if (net.arch.outputs != 1) throw UsageError("gradient supports single-output networks");
  GradientWorkspace workspace(net.arch);
  GradientResult result;
  result.error = workspace.accumulate(net, batch, result.gradient);
  return result;
}

enum class Optimizer { ResilientBackprop, GradientDescent };
enum class Convergence { Converged, MaxStepsReached };

inline std::string_view convergence_name(Convergence c) {
  return c == Convergence::Converged ? "converged" : "max_steps_reached";
}

struct TrainConfig {
  long max_steps = 1'000'000;
  double threshold = 0.01;  // on max |dE/dw|
  Optimizer optimizer = Optimizer::ResilientBackprop;
  double learning_rate = 0.01;  // gradient descent only
  double initial_step = 0.1;
  double step_min = 1e-6;
  double step_max = 50.0;
  double grow = 1.2;
  double shrink = 0.5;

  void validate() const {
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(threshold > 0.0)) throw ConfigError("gradient threshold must be > 0");
    if (optimizer == Optimizer::GradientDescent && !(learning_rate > 0.0)) {
      throw ConfigError("learning rate must be > 0");
    }
  }
};

struct TrainResult {
  Network network;
  Convergence status = Convergence::MaxStepsReached;
  long steps = 0;
  double error = 0.0;  // E at the last evaluated step
};

// Iterates until max |dE/dw| falls below the threshold (converged) or the
// step budget runs out. The resilient variant adapts a per-parameter step
// from gradient signs and skips the update after a sign change (iRprop-).
inline TrainResult train(Network net, const Batch& rows, const TrainConfig& config) {
  config.validate();
  if (rows.size() == 0) throw UsageError("cannot train on an empty batch");
  if (rows.width != net.arch.inputs) throw UsageError("batch width does not match the network input size");
  const std::size_t p = net.params.size();
  std::vector<double> step(p, config.initial_step);
  std::vector<double> previous(p, 0.0);
  std::vector<double> grad;
  GradientWorkspace workspace(net.arch);

  for (long s = 1; s <= config.max_steps; ++s) {
    const double error = workspace.accumulate(net, rows, grad);
    double largest = 0.0;
    for (double v : grad) largest = std::max(largest, std::abs(v));
    if (!std::isfinite(error) || !std::isfinite(largest)) {
      throw TrainingError("training diverged (non-finite error) at step " + std::to_string(s), s);
    }
    if (largest < config.threshold) return {std::move(net), Convergence::Converged, s, error};
    if (s == config.max_steps) return {std::move(net), Convergence::MaxStepsReached, s, error};

    if (config.optimizer == Optimizer::GradientDescent) {
      for (std::size_t i = 0; i < p; ++i) net.params[i] -= config.learning_rate * grad[i];
      continue;
    }
    for (std::size_t i = 0; i < p; ++i) {
      double gi = grad[i];
      const double sign_change = gi * previous[i];
      if (sign_change > 0.0) {
        step[i] = std::min(step[i] * config.grow, config.step_max);
      } else if (sign_change < 0.0) {
        step[i] = std::max(step[i] * config.shrink, config.step_min);
        gi = 0.0;
      }
      if (gi > 0.0) {
        net.params[i] -= step[i];
      } else if (gi < 0.0) {
        net.params[i] += step[i];
      }
      previous[i] = gi;
    }
  }
  return {std::move(net), Convergence::MaxStepsReached, config.max_steps, 0.0};
}

// ---------------------------------------------------------------------------
// Repeated-partition ANN stage.

// Network inputs for a model: its predictors, then the month sine.
inline std::vector<std::string> ann_input_columns(const ModelSpec& spec) {
  std::vector<std::string> cols;
  for (const auto& p : spec.predictors) cols.push_back(p.name());
  cols.emplace_back("month_sine");
  return cols;
}

inline constexpr double kVciMin = 0.0;
inline constexpr double kVciMax = 100.0;

// A trained network together with the scaling it was trained under.
struct ScoredNetwork {
  std::string model_id;
  Network network;
  NormParams norm;  // input columns in network order, then "target"

  double predict(const FeatureRow& row) const {
    std::vector<double> x(network.arch.inputs);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const auto& c = norm.columns[j];
      x[j] = c.normalize(FeatureTable::value(row, FeatureTable::column_id(c.column)));
    }
    const double z = forward(network, x);
    return std::clamp(norm.at("target").denormalize(z), kVciMin, kVciMax);
  }

  std::vector<double> predict(const FeatureTable& table, std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(predict(table.rows[r]));
    return out;
  }
};

struct AnnCell {
  std::size_t partition = 0;
  bool ok = false;
  std::string error;
  Convergence status = Convergence::MaxStepsReached;
  long steps = 0;
  MetricSet train;
  MetricSet validation;
  ScoredNetwork model;
};

struct RangeSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct AnnModelResult {
  ModelSpec spec;
  std::string id;
  std::vector<AnnCell> cells;
  std::size_t n_ok = 0;
  RangeSummary r2_train;
  RangeSummary r2_validation;
  MetricSet train;       // mean over successful cells
  MetricSet validation;  // mean over successful cells
  double overfit_index = 0.0;
  bool overfit = false;
  std::size_t best_partition = 0;  // highest validation R²

  bool eligible() const { return n_ok > 0 && !overfit; }
};

struct Champion {
  std::string model_id;
  std::size_t partition = 0;
  ScoredNetwork model;
  double mean_validation_r2 = 0.0;
};

struct AnnStageReport {
  std::vector<AnnModelResult> models;  // canonical model order
  std::optional<Champion> champion;

  std::size_t trained_networks() const {
    std::size_t n = 0;
    for (const auto& m : models) n += m.n_ok;
    return n;
  }
};

struct AnnStageOptions {
  std::vector<std::size_t> hidden{5, 3};
  TrainConfig train;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

inline std::uint64_t cell_seed(std::uint64_t seed, const std::string& model_id, std::size_t partition) {
  return derive_seed(seed ^ fnv1a64(model_id), partition);
}

inline AnnCell train_cell(const ModelSpec& spec, const FeatureTable& table, const Partition& part, std::size_t index,
                          const AnnStageOptions& options) {
  AnnCell cell;
  cell.partition = index;
  try {
    auto columns = ann_input_columns(spec);
    columns.emplace_back("target");
    NormParams norm = minmax_fit(TrainView(table, part), columns);
    const auto scaled = minmax_apply(norm, table, part.train);
    Batch batch;
    for (const auto& row : scaled) batch.push(std::span<const double>(row.data(), row.size() - 1), row.back());

    NetworkArch arch{columns.size() - 1, options.hidden, 1};
    Network net = init_network(arch, cell_seed(options.seed, spec.id(), index));
    TrainResult trained = train(std::move(net), batch, options.train);
    cell.status = trained.status;
    cell.steps = trained.steps;
    cell.model = {spec.id(), std::move(trained.network), std::move(norm)};

    auto score = [&](std::span<const std::size_t> rows) {
      std::vector<double> actual;
      for (std::size_t r : rows) actual.push_back(table.rows[r].target);
      return regression_metrics(actual, cell.model.predict(table, rows));
    };
    cell.train = score(part.train);
    cell.validation = score(part.validation);
    cell.ok = true;
  } catch (const Error& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

inline void summarize_ann_model(AnnModelResult& m) {
  std::vector<MetricSet> train, valid;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : m.cells) {
    if (!c.ok) continue;
    train.push_back(c.train);
    valid.push_back(c.validation);
    if (c.validation.r2 > best) {
      best = c.validation.r2;
      m.best_partition = c.partition;
    }
  }
  m.n_ok = train.size();
  if (m.n_ok == 0) return;
  auto range = [](const std::vector<MetricSet>& sets) {
    RangeSummary r{sets.front().r2, sets.front().r2, 0.0};
    for (const auto& s : sets) {
      r.min = std::min(r.min, s.r2);
      r.max = std::max(r.max, s.r2);
    }
    r.mean = mean_metrics(sets).r2;
    // Summation rounding can push the mean a hair outside [min, max].
    r.mean = std::clamp(r.mean, r.min, r.max);
    return r;
  };
  m.r2_train = range(train);
  m.r2_validation = range(valid);
  m.train = mean_metrics(train);
  m.validation = mean_metrics(valid);
  const auto assessment = overfit_index(m.r2_train.mean, m.r2_validation.mean);
  m.overfit_index = assessment.index;
  m.overfit = assessment.overfit;
}

// Highest mean validation R² among eligible models; ties go to the lower mean
// validation RMSE, then to the smaller model id.
inline Champion select_champion(const AnnStageReport& report) {
  const AnnModelResult* best = nullptr;
  for (const auto& m : report.models) {
    if (!m.eligible()) continue;
    if (best == nullptr) {
      best = &m;
      continue;
    }
    if (m.r2_validation.mean != best->r2_validation.mean) {
      if (m.r2_validation.mean > best->r2_validation.mean) best = &m;
    } else if (m.validation.rmse != best->validation.rmse) {
      if (m.validation.rmse < best->validation.rmse) best = &m;
    } else if (m.id < best->id) {
      best = &m;
    }
  }
  if (best == nullptr) throw StageError("no non-overfit ANN model with a successful partition");
  for (const auto& c : best->cells) {
    if (c.ok && c.partition == best->best_partition) {
      return {best->id, c.partition, c.model, best->r2_validation.mean};
    }
  }
  throw StageError("champion partition missing from report");
}

inline AnnStageReport run_ann_stage(const std::vector<ModelSpec>& models, const FeatureTable& table,
                                    const SplitPlan& plan, const AnnStageOptions& options,
                                    bool choose_champion = true) {
  if (plan.partitions.size() < 2) throw StageError("ANN stage needs at least 2 partitions");
  AnnStageReport report;
  report.models.resize(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    report.models[m].spec = models[m];
    report.models[m].id = models[m].id();
    report.models[m].cells.resize(plan.partitions.size());
  }
  const std::size_t k = plan.partitions.size();
  parallel_for(models.size() * k, options.jobs, [&](std::size_t cell) {
    const std::size_t m = cell / k;
    const std::size_t p = cell % k;
    report.models[m].cells[p] = train_cell(models[m], table, plan.partitions[p], p, options);
  });
  for (auto& m : report.models) summarize_ann_model(m);
  if (choose_champion && !models.empty()) report.champion = select_champion(report);
  return report;
}

}  // namespace drought
