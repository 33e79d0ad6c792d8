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
#include <cmath>

#include "georoute/synthbench.hpp"

namespace georoute {

TaskMetrics task_metrics(std::span<const Array> predictions, std::span<const SyntheticBatch> batches) {
  if (predictions.size() != batches.size()) {
    throw PreconditionError("task_metrics: " + std::to_string(predictions.size()) + " prediction sets for " +
                            std::to_string(batches.size()) + " batches");
  }
  std::size_t num_tasks = 0;
  for (const auto& b : batches) num_tasks = std::max(num_tasks, b.num_tasks);
  std::vector<double> sse(num_tasks, 0.0);
  std::vector<std::size_t> count(num_tasks, 0);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& batch = batches[i];
    auto pred = predictions[i].data();
    auto target = batch.targets.data();
    if (pred.size() != batch.num_rows() || target.size() != batch.num_rows()) {
      throw ShapeError("task_metrics: predictions " + shape_to_string(predictions[i].shape()) + " vs " +
                       std::to_string(batch.num_rows()) + " tokens");
    }
    for (std::size_t r = 0; r < batch.num_rows(); ++r) {
      const double err = pred[r] - target[r];
      sse[batch.task_of_token[r]] += err * err;
      ++count[batch.task_of_token[r]];
    }
  }
  TaskMetrics metrics;
  metrics.per_task_mse.resize(num_tasks);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (count[t] == 0) continue;
    metrics.per_task_mse[t] = sse[t] / static_cast<double>(count[t]);
    total += *metrics.per_task_mse[t];
    ++present;
  }
  metrics.aggregate = present ? total / static_cast<double>(present) : 0.0;
  return metrics;
}

TaskMetrics task_metrics(const Array& predictions, const SyntheticBatch& batch) {
  return task_metrics(std::span<const Array>(&predictions, 1), std::span<const SyntheticBatch>(&batch, 1));
}

double layer_preference_recovery(std::span<const SparseRoutingPlan> plans,
                                 std::span<const std::vector<std::size_t>> task_of_token,
                                 const std::vector<std::size_t>& source_layers, const SceneSpec& spec,
                                 Variant variant) {
  if (!uses_router(variant)) {
    throw PreconditionError("layer_preference_recovery: variant " + std::string(to_string(variant)) +
                            " has no routing plans");
  }
  if (plans.size() != task_of_token.size()) {
    throw PreconditionError("layer_preference_recovery: plans and task lists differ in count");
  }
  if (source_layers.empty()) throw PreconditionError("layer_preference_recovery: empty bank");

  // Bank slot nearest to each task's planted layer (lower slot on ties).
  std::vector<std::size_t> target_slot(spec.num_tasks, 0);
  for (std::size_t t = 0; t < spec.num_tasks; ++t) {
    const double p = static_cast<double>(spec.planted_layers.at(t));
    for (std::size_t i = 1; i < source_layers.size(); ++i) {
      if (std::abs(static_cast<double>(source_layers[i]) - p) <
          std::abs(static_cast<double>(source_layers[target_slot[t]]) - p)) {
        target_slot[t] = i;
      }
    }
  }

  std::size_t hits = 0, total = 0;
  for (std::size_t b = 0; b < plans.size(); ++b) {
    const Array& w = plans[b].weights;
    const std::size_t rows = w.dim(0), m = w.dim(1);
    if (m != source_layers.size() || rows != task_of_token[b].size()) {
      throw ShapeError("layer_preference_recovery: plan " + shape_to_string(w.shape()) + " inconsistent with bank");
    }
    auto wv = w.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (wv[r * m + i] > wv[r * m + best]) best = i;
      hits += best == target_slot[task_of_token[b][r]];
      ++total;
    }
  }
  if (total == 0) throw PreconditionError("layer_preference_recovery: no tokens");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace georoute
