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
constexpr double kInitStd = 0.02;
}

ToyBackbone ToyBackbone::init(const BackboneConfig& config, std::mt19937_64& rng) {
  if (config.width == 0 || config.num_tasks == 0) throw PreconditionError("backbone: width and num_tasks must be positive");
  if (config.injection_index > config.blocks) {
    throw PreconditionError("backbone: injection_index " + std::to_string(config.injection_index) +
                            " outside [0, " + std::to_string(config.blocks) + "]");
  }
  ToyBackbone bb;
  bb.config = config;
  for (std::size_t b = 0; b < config.blocks; ++b) {
    ResidualBlock block;
    block.mlp = Mlp::init(config.width, config.hidden, config.width, rng);
    block.w_ctx = Array::normal({config.width, config.width}, kInitStd, rng, true);
    bb.blocks.push_back(std::move(block));
  }
  bb.head_w = Array::normal({config.width, config.num_tasks}, kInitStd, rng, true);
  bb.head_b = Array::zeros({config.num_tasks}, true);
  return bb;
}

std::vector<NamedArray> ToyBackbone::named_parameters() const {
  std::vector<NamedArray> out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string prefix = "backbone.block" + std::to_string(b);
    out.push_back({prefix + ".w1", blocks[b].mlp.w1});
    out.push_back({prefix + ".b1", blocks[b].mlp.b1});
    out.push_back({prefix + ".w2", blocks[b].mlp.w2});
    out.push_back({prefix + ".b2", blocks[b].mlp.b2});
    out.push_back({prefix + ".w_ctx", blocks[b].w_ctx});
  }
  out.push_back({"backbone.head_w", head_w});
  out.push_back({"backbone.head_b", head_b});
  return out;
}

Array backbone_forward(const ToyBackbone& backbone, const Array& tokens,
                       const std::vector<std::size_t>& task_of_token, std::size_t seq_len,
                       const Injector& inject) {
  const std::size_t injection_index = backbone.config.injection_index;
  if (injection_index > backbone.blocks.size()) {
    throw PreconditionError("backbone_forward: injection_index " + std::to_string(injection_index) +
                            " outside [0, " + std::to_string(backbone.blocks.size()) + "]");
  }
  if (tokens.rank() != 2 || tokens.dim(1) != backbone.config.width) {
    throw ShapeError("backbone_forward: tokens " + shape_to_string(tokens.shape()) + " do not match width " +
                     std::to_string(backbone.config.width));
  }
  for (std::size_t t : task_of_token) {
    if (t >= backbone.config.num_tasks) throw PreconditionError("backbone_forward: task id out of range");
  }

  Array h = tokens;
  for (std::size_t b = 0; b <= backbone.blocks.size(); ++b) {
    if (b == injection_index && inject) h = inject(h);
    if (b == backbone.blocks.size()) break;
    const auto& block = backbone.blocks[b];
    h = add(add(h, block.mlp.forward(h)), matmul(segment_mean_rows(h, seq_len), block.w_ctx));
  }
  return gather_columns(add_bias(matmul(h, backbone.head_w), backbone.head_b), task_of_token);
}

}  // namespace georoute
