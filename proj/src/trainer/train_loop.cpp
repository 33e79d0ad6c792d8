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

#include "georoute/trainer.hpp"

namespace georoute {

TrainResult train_loop(std::span<const NamedArray> params, const std::function<Array(std::size_t)>& objective,
                       const TrainConfig& config, const ScheduleSpec& schedule) {
  schedule.validate();
  std::vector<NamedArray> trainable;
  for (const auto& p : params) {
    if (!(config.frozen && config.frozen(p.name))) trainable.push_back(p);
  }

  TrainResult result;
  result.optimizer = make_optimizer_state(trainable, config.adam);
  result.log.reserve(schedule.total_steps);
  for (std::size_t step = 0; step < schedule.total_steps; ++step) {
    for (const auto& p : params) Array(p.array).zero_grad();
    Array loss = objective(step);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingError(step, "train_loop: non-finite loss at step " + std::to_string(step));
    }
    backward(loss);

    if (config.max_grad_norm > 0.0) {
      double sq = 0.0;
      for (const auto& p : trainable)
        for (double g : p.array.grad()) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > config.max_grad_norm) {
        const double factor = config.max_grad_norm / norm;
        for (const auto& p : trainable) {
          Array a = p.array;
          if (!a.has_grad()) continue;
          for (double& g : a.mutable_grad()) g *= factor;
        }
      }
    }

    const double lr = lr_at(step + 1, schedule);
    adamw_step(trainable, result.optimizer, lr);
    result.log.push_back({step, lr, value});
  }
  for (const auto& p : params) Array(p.array).zero_grad();
  return result;
}

EvalResult evaluate(const ToyModel& model, std::span<const SyntheticBatch> batches) {
  if (batches.empty()) throw PreconditionError("evaluate: empty evaluation set");
  EvalResult result;
  std::vector<Array> predictions;
  double sse = 0.0;
  std::size_t tokens = 0;
  for (const auto& batch : batches) {
    ModelOutput out = model_forward(model, batch);
    Array pred = out.predictions.detach();
    auto pv = pred.data();
    auto tv = batch.targets.data();
    for (std::size_t r = 0; r < pv.size(); ++r) sse += (pv[r] - tv[r]) * (pv[r] - tv[r]);
    tokens += pv.size();
    predictions.push_back(pred);
    if (out.plan) {
      result.routing_summaries.push_back(routing_summary(*out.plan));
      result.plans.push_back(std::move(*out.plan));
    }
  }
  result.metrics = task_metrics(predictions, batches);
  result.loss = sse / static_cast<double>(tokens);
  return result;
}

}  // namespace georoute
