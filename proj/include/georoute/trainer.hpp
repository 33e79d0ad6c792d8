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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "georoute/numerics.hpp"
#include "georoute/synthbench.hpp"

namespace georoute {

/// Linear warmup over the first ceil(warmup_fraction·total_steps) steps, then
/// cosine decay from lr_peak to lr_end.
struct ScheduleSpec {
  std::size_t total_steps = 0;
  double warmup_fraction = 0.03;
  double lr_peak = 3e-3;
  double lr_end = 0.0;

  std::size_t warmup_steps() const;
  void validate() const;
};

double lr_at(std::size_t step, const ScheduleSpec& spec);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Biases and normalization parameters are exempt from weight decay.
bool is_decay_exempt(std::string_view name);

struct OptimizerState {
  std::size_t step = 0;
  AdamWHyper hyper;
  std::vector<std::string> names;
  std::vector<bool> decay;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

OptimizerState make_optimizer_state(std::span<const NamedArray> params, const AdamWHyper& hyper);

/// One bias-corrected AdamW update. Decay is applied first as p ← p·(1 - lr·wd).
/// Parameters without a gradient buffer are treated as having zero gradient.
/// Throws NonFiniteError (naming the parameter) before touching anything if a
/// gradient is not finite.
void adamw_step(std::span<const NamedArray> params, OptimizerState& state, double lr);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  AdamWHyper adam;
  /// Global-norm gradient clipping; 0 disables it.
  double max_grad_norm = 0.0;
  /// Parameters for which this returns true are never updated.
  std::function<bool(const std::string&)> frozen;
};

struct LossLogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Non-finite training loss; carries the step index.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  std::vector<LossLogEntry> log;
  OptimizerState optimizer;
};

/// For step s in [0, total_steps): zero grads, loss = objective(s), backward,
/// optional clipping, AdamW at lr_at(s + 1) on the non-frozen parameters.
TrainResult train_loop(std::span<const NamedArray> params, const std::function<Array(std::size_t)>& objective,
                       const TrainConfig& config, const ScheduleSpec& schedule);

struct EvalResult {
  TaskMetrics metrics;
  double loss = 0.0;  // token-weighted mean squared error over all batches
  std::vector<SparseRoutingPlan> plans;
  std::vector<std::vector<double>> routing_summaries;  // one per batch, routing variants only
};

EvalResult evaluate(const ToyModel& model, std::span<const SyntheticBatch> batches);

}  // namespace georoute
