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
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "georoute/fusion.hpp"
#include "georoute/synthbench.hpp"
#include "georoute/trainer.hpp"

namespace georoute {

/// Everything needed to reproduce one training run. `seed` drives both the
/// synthetic scene and parameter initialization.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  // Scene.
  std::size_t total_depth = 24;
  std::size_t num_tokens = 64;
  std::size_t raw_width = 24;
  std::size_t width = 32;
  std::size_t num_tasks = 4;
  std::vector<std::size_t> planted_layers{13, 16, 19, 22};
  double attenuation_tau = 1.0;
  double noise_sigma = 0.05;
  double distractor_scale = 1.0;

  // Fusion.
  Variant variant = Variant::Dynamic;
  std::size_t m = 12;
  std::size_t k = 2;
  SelectionStrategy selection = SelectionStrategy::LatterHalf;
  std::size_t single_layer = 22;

  // Backbone.
  std::size_t backbone_blocks = 4;
  std::size_t backbone_hidden = 32;
  std::size_t injection_index = 0;

  // Optimization.
  std::size_t steps = 500;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double warmup_fraction = 0.03;
  double lr_peak = 3e-3;
  double lr_end = 0.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 0.0;
  /// Stddev of the top-k selection noise at peak learning rate; it follows
  /// the learning-rate schedule and is therefore zero at the final step.
  double router_noise = 1.0;

  // Evaluation and ablation.
  std::size_t eval_batches = 4;
  std::vector<Variant> grid{Variant::TwoDOnly, Variant::Single, Variant::Mean, Variant::Dynamic};

  SceneSpec scene() const;
  FusionConfig fusion() const;
  BackboneConfig backbone() const;
  ScheduleSpec schedule() const;
  TrainConfig train() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Batch indices at or above this offset are reserved for evaluation.
inline constexpr std::uint64_t kEvalBatchOffset = std::uint64_t{1} << 32;

/// Training batch `step` (all epochs draw from the same stream of indices).
SyntheticBatch training_batch(const ExperimentConfig& config, std::size_t step);
/// Held-out batches, disjoint from every training batch. `task_mix` as in
/// BatchRequest.
std::vector<SyntheticBatch> eval_batches(const ExperimentConfig& config, const std::vector<double>& task_mix = {});

struct TrainedExperiment {
  ToyModel model;
  std::vector<LossLogEntry> log;
};

/// Selection noise used at training step `step`.
SelectionNoise selection_noise_at(const ExperimentConfig& config, std::size_t step);

/// Trains for steps·epochs updates on fresh synthetic batches.
TrainedExperiment train_experiment(const ExperimentConfig& config);

struct AblationCell {
  std::string name;
  ExperimentConfig config;
};

struct CellResult {
  std::string name;
  TaskMetrics metrics;
  std::vector<double> routing_summary;  // mean over eval batches; empty for non-routing variants
  std::vector<std::size_t> source_layers;
  std::vector<LossLogEntry> loss_log;
};

struct AblationResults {
  std::size_t num_tasks = 0;
  std::vector<CellResult> rows;
};

CellResult run_cell(const AblationCell& cell);
AblationResults run_ablation(std::span<const AblationCell> cells);

/// (worse - better) / worse; positive when `better` has the lower error.
double relative_gap(double better, double worse);

/// Checks Dynamic ≤ Mean ≤ Single ≤ TwoDOnly on aggregate MSE with every
/// adjacent gap at least `min_gap` (relative). Not applicable unless all four
/// rows are present.
struct OrderingVerdict {
  bool applicable = false;
  bool holds = false;
  std::string detail;
};
OrderingVerdict ordering_verdict(const AblationResults& results, double min_gap = 0.05);

/// One cell per variant, named after it, sharing every other setting with base.
std::vector<AblationCell> variant_grid(const ExperimentConfig& base, std::span<const Variant> variants);

}  // namespace georoute
