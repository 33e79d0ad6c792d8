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
#include "georoute/synthbench.hpp"

namespace georoute {

namespace {
constexpr std::uint64_t kFusionStream = 1;
constexpr std::uint64_t kBackboneStream = 2;
}  // namespace

std::vector<NamedArray> ToyModel::named_parameters() const {
  auto out = fusion.named_parameters();
  auto bb = backbone.named_parameters();
  out.insert(out.end(), bb.begin(), bb.end());
  return out;
}

ToyModel init_model(const FusionConfig& fusion, const BackboneConfig& backbone, std::uint64_t seed) {
  if (fusion.width != backbone.width) {
    throw PreconditionError("init_model: fusion width " + std::to_string(fusion.width) + " != backbone width " +
                            std::to_string(backbone.width));
  }
  // Separate streams keep the backbone initialization identical across fusion variants.
  std::mt19937_64 fusion_rng(derive_seed(seed, kFusionStream));
  std::mt19937_64 backbone_rng(derive_seed(seed, kBackboneStream));
  return {init_fusion_params(fusion, fusion_rng), ToyBackbone::init(backbone, backbone_rng)};
}

ModelOutput model_forward(const ToyModel& model, const SyntheticBatch& batch, const SelectionNoise& noise) {
  ModelOutput out;
  Injector inject;
  if (model.fusion.config.variant != Variant::TwoDOnly) {
    inject = [&](const Array& hidden) {
      FuseResult fused = fuse(hidden, batch.raw_layers, model.fusion, noise);
      out.plan = std::move(fused.plan);
      return fused.q_hat;
    };
  }
  out.predictions = backbone_forward(model.backbone, batch.queries, batch.task_of_token, batch.seq_len, inject);
  return out;
}

Array mse_loss(const Array& predictions, const Array& targets) {
  Array diff = sub(predictions, targets);
  return mean(mul(diff, diff));
}

}  // namespace georoute
