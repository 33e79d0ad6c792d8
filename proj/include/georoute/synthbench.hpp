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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "georoute/fusion.hpp"
#include "georoute/numerics.hpp"

namespace georoute {

// ---------------------------------------------------------------------------
// Synthetic multi-layer encoder.
//
// Every token l carries a task t and a latent target s_l ~ U(-√3, √3). In raw
// layer i the signal channel (feature 0 minus feature 1) holds
//
//     c_{i,l} = a(i, t)·s_l + distractor·(1 - a(i, t))·z_{i,l},
//     a(i, t) = exp(-|i - p(t)| / tau),
//
// with an independent distractor z_{i,l} ~ U(-√3, √3), on top of a fixed
// per-layer background vector, all scaled by a per-layer gain and corrupted by
// Normal(0, sigma) noise. The target is therefore clean only near the planted
// layer p(t). Queries carry one-hot task identity plus noise and nothing
// about s_l.
// ---------------------------------------------------------------------------

struct SceneSpec {
  std::size_t total_depth = 24;
  std::size_t num_tokens = 64;   // L per sequence
  std::size_t raw_width = 24;    // D′
  std::size_t query_width = 32;  // D
  std::size_t num_tasks = 4;
  std::vector<std::size_t> planted_layers{13, 16, 19, 22};
  double attenuation_tau = 1.0;
  double noise_sigma = 0.05;
  double distractor_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// exp(-|layer - p(task)| / tau).
double signal_amplitude(const SceneSpec& spec, std::size_t layer, std::size_t task);
/// Multiplicative gain of raw layer `layer` (depth-dependent scale).
double layer_gain(const SceneSpec& spec, std::size_t layer);

struct SyntheticBatch {
  std::vector<RawLayerFeature> raw_layers;  // each (S·L)×D′
  Array queries;                            // (S·L)×D
  std::vector<std::size_t> task_of_token;
  Array targets;                            // (S·L)×1
  std::size_t seq_len = 0;
  std::size_t num_sequences = 0;
  std::size_t num_tasks = 0;

  std::size_t num_rows() const { return task_of_token.size(); }
};

struct BatchRequest {
  std::size_t num_sequences = 1;
  std::uint64_t batch_index = 0;
  /// Relative task frequencies; empty means uniform.
  std::vector<double> task_mix;
  /// Encoder layers to materialize; empty means all. Any subset yields the
  /// same values for the layers it contains.
  std::vector<std::size_t> layers;
};

SyntheticBatch generate_batch(const SceneSpec& spec, const BatchRequest& request = {});

/// Decodes the signal channel c_{i,l} of token `row` from raw layer values.
double read_signal_channel(const SceneSpec& spec, const RawLayerFeature& layer, std::size_t row);

// ---------------------------------------------------------------------------
// Toy downstream backbone.
// ---------------------------------------------------------------------------

struct BackboneConfig {
  std::size_t blocks = 4;
  std::size_t width = 32;
  std::size_t hidden = 32;
  std::size_t num_tasks = 4;
  /// 0 injects before the first block; b > 0 injects after block b.
  std::size_t injection_index = 0;
};

struct ResidualBlock {
  Mlp mlp;
  Array w_ctx;  // D×D, applied to the per-sequence mean of the hidden stream
};

struct ToyBackbone {
  BackboneConfig config;
  std::vector<ResidualBlock> blocks;
  Array head_w;  // D×T
  Array head_b;  // T

  static ToyBackbone init(const BackboneConfig& config, std::mt19937_64& rng);
  std::vector<NamedArray> named_parameters() const;
};

/// Maps the hidden stream at the injection point to its injected version.
using Injector = std::function<Array(const Array& hidden)>;

/// Runs the residual blocks h ← h + mlp(h) + mean_seq(h)·w_ctx and reads
/// every token through the head of its task. Returns (S·L)×1 predictions.
Array backbone_forward(const ToyBackbone& backbone, const Array& tokens,
                       const std::vector<std::size_t>& task_of_token, std::size_t seq_len,
                       const Injector& inject = {});

struct ToyModel {
  FusionParams fusion;
  ToyBackbone backbone;

  std::vector<NamedArray> named_parameters() const;
};

ToyModel init_model(const FusionConfig& fusion, const BackboneConfig& backbone, std::uint64_t seed);

struct ModelOutput {
  Array predictions;
  std::optional<SparseRoutingPlan> plan;
};

/// Fusion at the backbone's injection point (routing queries are the hidden
/// stream there), then the backbone.
ModelOutput model_forward(const ToyModel& model, const SyntheticBatch& batch, const SelectionNoise& noise = {});

Array mse_loss(const Array& predictions, const Array& targets);

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

struct TaskMetrics {
  std::vector<std::optional<double>> per_task_mse;  // absent for tasks without tokens
  double aggregate = 0.0;                           // mean over present tasks
};

TaskMetrics task_metrics(const Array& predictions, const SyntheticBatch& batch);
TaskMetrics task_metrics(std::span<const Array> predictions, std::span<const SyntheticBatch> batches);

/// Fraction of tokens whose highest-weight bank layer is the candidate
/// nearest to the planted layer of their task.
double layer_preference_recovery(std::span<const SparseRoutingPlan> plans,
                                 std::span<const std::vector<std::size_t>> task_of_token,
                                 const std::vector<std::size_t>& source_layers, const SceneSpec& spec,
                                 Variant variant);

}  // namespace georoute
