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
#include <numbers>

#include "georoute/synthbench.hpp"

namespace georoute {

namespace {

constexpr double kBackgroundStd = 2.0;
constexpr std::uint64_t kBackgroundStream = 0x6261636BULL;
const double kUniformHalfWidth = std::sqrt(3.0);

std::vector<double> layer_background(const SceneSpec& spec, std::size_t layer) {
  std::mt19937_64 rng(derive_seed(spec.seed ^ kBackgroundStream, layer));
  std::normal_distribution<double> normal(0.0, kBackgroundStd);
  std::vector<double> background(spec.raw_width, 0.0);
  // Features 0 and 1 form the signal channel; the background stays off them.
  for (std::size_t c = 2; c < spec.raw_width; ++c) background[c] = normal(rng);
  return background;
}

}  // namespace

void SceneSpec::validate() const {
  if (total_depth == 0 || num_tokens == 0 || query_width == 0) {
    throw PreconditionError("scene: total_depth, num_tokens and query_width must be positive");
  }
  if (raw_width < 3) throw PreconditionError("scene: raw_width must be at least 3");
  if (num_tasks == 0) throw PreconditionError("scene: num_tasks must be positive");
  if (num_tasks > query_width) {
    throw PreconditionError("scene: num_tasks (" + std::to_string(num_tasks) + ") exceeds query width (" +
                            std::to_string(query_width) + ")");
  }
  if (planted_layers.size() != num_tasks) {
    throw PreconditionError("scene: planted_layers has " + std::to_string(planted_layers.size()) +
                            " entries for " + std::to_string(num_tasks) + " tasks");
  }
  for (std::size_t p : planted_layers) {
    if (p >= total_depth) {
      throw PreconditionError("scene: planted layer " + std::to_string(p) + " outside [0, " +
                              std::to_string(total_depth) + ")");
    }
  }
  if (!(attenuation_tau > 0.0)) throw PreconditionError("scene: attenuation_tau must be positive");
  if (!(noise_sigma >= 0.0)) throw PreconditionError("scene: noise_sigma must be nonnegative");
  if (!(distractor_scale >= 0.0)) throw PreconditionError("scene: distractor_scale must be nonnegative");
}

double signal_amplitude(const SceneSpec& spec, std::size_t layer, std::size_t task) {
  const double distance = std::abs(static_cast<double>(layer) - static_cast<double>(spec.planted_layers.at(task)));
  return std::exp(-distance / spec.attenuation_tau);
}

double layer_gain(const SceneSpec& spec, std::size_t layer) {
  return 1.0 + static_cast<double>(layer) / static_cast<double>(spec.total_depth);
}

SyntheticBatch generate_batch(const SceneSpec& spec, const BatchRequest& request) {
  spec.validate();
  if (request.num_sequences == 0) throw PreconditionError("generate_batch: num_sequences must be positive");
  if (!request.task_mix.empty() && request.task_mix.size() != spec.num_tasks) {
    throw PreconditionError("generate_batch: task_mix needs one weight per task");
  }
  std::vector<std::size_t> layers = request.layers;
  if (layers.empty()) {
    layers.resize(spec.total_depth);
    for (std::size_t i = 0; i < spec.total_depth; ++i) layers[i] = i;
  }
  for (std::size_t layer : layers) {
    if (layer >= spec.total_depth) throw PreconditionError("generate_batch: layer index out of range");
  }

  const std::size_t rows = request.num_sequences * spec.num_tokens;
  const std::uint64_t batch_seed = derive_seed(spec.seed, request.batch_index);

  SyntheticBatch batch;
  batch.seq_len = spec.num_tokens;
  batch.num_sequences = request.num_sequences;
  batch.num_tasks = spec.num_tasks;
  batch.task_of_token.resize(rows);

  std::vector<double> signal(rows), queries(rows * spec.query_width);
  {
    std::mt19937_64 rng(derive_seed(batch_seed, 0));
    std::uniform_real_distribution<double> uniform(-kUniformHalfWidth, kUniformHalfWidth);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::discrete_distribution<std::size_t> task_dist =
        request.task_mix.empty() ? std::discrete_distribution<std::size_t>(spec.num_tasks, 0.0, 1.0,
                                                                           [](double) { return 1.0; })
                                 : std::discrete_distribution<std::size_t>(request.task_mix.begin(),
                                                                           request.task_mix.end());
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t task = task_dist(rng);
      batch.task_of_token[r] = task;
      signal[r] = uniform(rng);
      for (std::size_t c = 0; c < spec.query_width; ++c) {
        queries[r * spec.query_width + c] = (c == task ? 1.0 : 0.0) + spec.noise_sigma * normal(rng);
      }
    }
  }
  batch.queries = Array::from({rows, spec.query_width}, std::move(queries));
  batch.targets = Array::from({rows, 1}, signal);

  for (std::size_t layer : layers) {
    std::mt19937_64 rng(derive_seed(batch_seed, 1 + layer));
    std::uniform_real_distribution<double> uniform(-kUniformHalfWidth, kUniformHalfWidth);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::vector<double> background = layer_background(spec, layer);
    const double gain = layer_gain(spec, layer);
    std::vector<double> values(rows * spec.raw_width);
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = signal_amplitude(spec, layer, batch.task_of_token[r]);
      const double distractor = uniform(rng);
      const double channel = a * signal[r] + spec.distractor_scale * (1.0 - a) * distractor;
      double* row = values.data() + r * spec.raw_width;
      for (std::size_t c = 0; c < spec.raw_width; ++c) row[c] = background[c];
      row[0] += channel;
      row[1] -= channel;
      for (std::size_t c = 0; c < spec.raw_width; ++c) row[c] = gain * (row[c] + spec.noise_sigma * normal(rng));
    }
    batch.raw_layers.push_back({layer, Array::from({rows, spec.raw_width}, std::move(values))});
  }
  return batch;
}

double read_signal_channel(const SceneSpec& spec, const RawLayerFeature& layer, std::size_t row) {
  const std::size_t width = layer.values.dim(1);
  auto v = layer.values.data();
  return (v[row * width] - v[row * width + 1]) / (2.0 * layer_gain(spec, layer.layer_index));
}

}  // namespace georoute
