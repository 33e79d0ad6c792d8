/*
 * Copyright (c) 2026 The georoute Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <cmath>
#include <sstream>

#include "georoute/experiment.hpp"

namespace georoute {

SceneSpec ExperimentConfig::scene() const {
  SceneSpec s;
  s.total_depth = total_depth;
  s.num_tokens = num_tokens;
  s.raw_width = raw_width;
  s.query_width = width;
  s.num_tasks = num_tasks;
  s.planted_layers = planted_layers;
  s.attenuation_tau = attenuation_tau;
  s.noise_sigma = noise_sigma;
  s.distractor_scale = distractor_scale;
  s.seed = seed;
  return s;
}

FusionConfig ExperimentConfig::fusion() const {
  FusionConfig f;
  f.variant = variant;
  f.total_depth = total_depth;
  f.m = m;
  f.k = k;
  f.selection = selection;
  f.single_layer = single_layer;
  f.raw_width = raw_width;
  f.width = width;
  return f;
}

BackboneConfig ExperimentConfig::backbone() const {
  BackboneConfig b;
  b.blocks = backbone_blocks;
  b.width = width;
  b.hidden = backbone_hidden;
  b.num_tasks = num_tasks;
  b.injection_index = injection_index;
  return b;
}

ScheduleSpec ExperimentConfig::schedule() const {
  ScheduleSpec s;
  s.total_steps = steps * epochs;
  s.warmup_fraction = warmup_fraction;
  s.lr_peak = lr_peak;
  s.lr_end = lr_end;
  return s;
}

TrainConfig ExperimentConfig::train() const {
  TrainConfig t;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.seed = seed;
  t.adam.beta1 = beta1;
  t.adam.beta2 = beta2;
  t.adam.eps = adam_eps;
  t.adam.weight_decay = weight_decay;
  t.max_grad_norm = max_grad_norm;
  return t;
}

namespace {

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

template <class Fn>
void rethrow_as(const char* key, Fn&& fn) {
  try {
    fn();
  } catch (const PreconditionError& e) {
    throw ConfigError(key, e.what());
  }
}

constexpr std::uint64_t kSelectionNoiseStream = 3;

std::vector<std::size_t> materialized_layers(const ExperimentConfig& config) {
  auto layers = config.fusion().source_layers();
  // Queries and targets do not depend on which layers are drawn.
  if (layers.empty()) layers.push_back(0);
  return layers;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(total_depth > 0, "total_depth", "must be positive");
  require(num_tokens > 0, "num_tokens", "must be positive");
  require(raw_width >= 3, "raw_width", "must be at least 3");
  require(width > 0, "width", "must be positive");
  require(num_tasks > 0, "num_tasks", "must be positive");
  require(num_tasks <= width, "num_tasks", "must not exceed width");
  require(planted_layers.size() == num_tasks, "planted_layers", "needs exactly num_tasks entries");
  for (std::size_t p : planted_layers) require(p < total_depth, "planted_layers", "entries must be < total_depth");
  require(attenuation_tau > 0.0 && std::isfinite(attenuation_tau), "attenuation_tau", "must be positive");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma", "must be nonnegative");
  require(distractor_scale >= 0.0 && std::isfinite(distractor_scale), "distractor_scale", "must be nonnegative");

  require(m > 0 && m <= total_depth, "m", "must lie in [1, total_depth]");
  require(k > 0 && k <= m, "k", "must lie in [1, m]");
  require(single_layer < total_depth, "single_layer", "must be < total_depth");
  rethrow_as("variant", [&] { fusion().validate(); });

  require(backbone_hidden > 0, "backbone_hidden", "must be positive");
  require(injection_index <= backbone_blocks, "injection_index", "must not exceed backbone_blocks");

  require(steps > 0, "steps", "must be positive");
  require(epochs > 0, "epochs", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_fraction", "must lie in [0, 1)");
  require(lr_peak >= 0.0 && std::isfinite(lr_peak), "lr_peak", "must be nonnegative");
  require(lr_end >= 0.0 && lr_end <= lr_peak, "lr_end", "must lie in [0, lr_peak]");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay", "must be nonnegative");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(adam_eps > 0.0 && std::isfinite(adam_eps), "adam_eps", "must be positive");
  require(max_grad_norm >= 0.0 && std::isfinite(max_grad_norm), "max_grad_norm", "must be nonnegative");
  require(router_noise >= 0.0 && std::isfinite(router_noise), "router_noise", "must be nonnegative");
  require(eval_batches > 0, "eval_batches", "must be positive");
  require(!grid.empty(), "grid", "must name at least one variant");
}

SyntheticBatch training_batch(const ExperimentConfig& config, std::size_t step) {
  BatchRequest request;
  request.num_sequences = config.batch_size;
  request.batch_index = step % config.steps;
  request.layers = materialized_layers(config);
  return generate_batch(config.scene(), request);
}

std::vector<SyntheticBatch> eval_batches(const ExperimentConfig& config, const std::vector<double>& task_mix) {
  std::vector<SyntheticBatch> out;
  BatchRequest request;
  request.num_sequences = config.batch_size;
  request.task_mix = task_mix;
  request.layers = materialized_layers(config);
  for (std::size_t i = 0; i < config.eval_batches; ++i) {
    request.batch_index = kEvalBatchOffset + i;
    out.push_back(generate_batch(config.scene(), request));
  }
  return out;
}

SelectionNoise selection_noise_at(const ExperimentConfig& config, std::size_t step) {
  const ScheduleSpec schedule = config.schedule();
  SelectionNoise noise;
  if (config.router_noise > 0.0 && schedule.lr_peak > 0.0) {
    noise.stddev = config.router_noise * lr_at(step + 1, schedule) / schedule.lr_peak;
  }
  noise.seed = derive_seed(derive_seed(config.seed, kSelectionNoiseStream), step);
  return noise;
}

TrainedExperiment train_experiment(const ExperimentConfig& config) {
  config.validate();
  TrainedExperiment result{init_model(config.fusion(), config.backbone(), config.seed), {}};
  const auto params = result.model.named_parameters();
  auto objective = [&](std::size_t step) {
    SyntheticBatch batch = training_batch(config, step);
    ModelOutput out = model_forward(result.model, batch, selection_noise_at(config, step));
    return mse_loss(out.predictions, batch.targets);
  };
  result.log = train_loop(params, objective, config.train(), config.schedule()).log;
  return result;
}

CellResult run_cell(const AblationCell& cell) {
  TrainedExperiment trained = train_experiment(cell.config);
  const auto batches = eval_batches(cell.config);
  EvalResult eval = evaluate(trained.model, batches);

  CellResult row;
  row.name = cell.name;
  row.metrics = std::move(eval.metrics);
  row.source_layers = trained.model.fusion.source_layers;
  row.loss_log = std::move(trained.log);
  if (!eval.routing_summaries.empty()) {
    row.routing_summary.assign(eval.routing_summaries.front().size(), 0.0);
    for (const auto& s : eval.routing_summaries)
      for (std::size_t i = 0; i < s.size(); ++i) row.routing_summary[i] += s[i];
    for (double& v : row.routing_summary) v /= static_cast<double>(eval.routing_summaries.size());
  }
  return row;
}

AblationResults run_ablation(std::span<const AblationCell> cells) {
  if (cells.empty()) throw PreconditionError("run_ablation: no cells");
  AblationResults results;
  results.num_tasks = cells.front().config.num_tasks;
  for (const auto& cell : cells) {
    if (cell.config.num_tasks != results.num_tasks) {
      throw PreconditionError("run_ablation: cell '" + cell.name + "' has a different task count");
    }
    results.rows.push_back(run_cell(cell));
  }
  return results;
}

double relative_gap(double better, double worse) { return (worse - better) / worse; }

OrderingVerdict ordering_verdict(const AblationResults& results, double min_gap) {
  static constexpr Variant kOrder[] = {Variant::Dynamic, Variant::Mean, Variant::Single, Variant::TwoDOnly};
  OrderingVerdict verdict;
  std::vector<double> aggregate;
  for (Variant v : kOrder) {
    auto it = std::find_if(results.rows.begin(), results.rows.end(),
                           [&](const CellResult& r) { return r.name == to_string(v); });
    if (it == results.rows.end()) {
      verdict.detail = "ordering not applicable: no " + std::string(to_string(v)) + " row";
      return verdict;
    }
    aggregate.push_back(it->metrics.aggregate);
  }
  verdict.applicable = true;
  verdict.holds = true;
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i + 1 < aggregate.size(); ++i) {
    const double gap = relative_gap(aggregate[i], aggregate[i + 1]);
    const bool ok = gap >= min_gap;
    verdict.holds = verdict.holds && ok;
    os << (i ? "; " : "") << to_string(kOrder[i]) << " < " << to_string(kOrder[i + 1]) << " by "
       << 100.0 * gap << "% " << (ok ? "ok" : "FAIL");
  }
  verdict.detail = os.str();
  return verdict;
}

std::vector<AblationCell> variant_grid(const ExperimentConfig& base, std::span<const Variant> variants) {
  std::vector<AblationCell> cells;
  for (Variant v : variants) {
    ExperimentConfig c = base;
    c.variant = v;
    cells.push_back({std::string(to_string(v)), c});
  }
  return cells;
}

}  // namespace georoute
