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
#include "georoute/fusion.hpp"

namespace georoute {

namespace {

constexpr double kInitStd = 0.02;

void append_mlp(std::vector<NamedArray>& out, const std::string& prefix, const Mlp& mlp) {
  out.push_back({prefix + ".w1", mlp.w1});
  out.push_back({prefix + ".b1", mlp.b1});
  out.push_back({prefix + ".w2", mlp.w2});
  out.push_back({prefix + ".b2", mlp.b2});
}

}  // namespace

Mlp Mlp::init(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  Mlp mlp;
  mlp.w1 = Array::normal({in, hidden}, kInitStd, rng, true);
  mlp.b1 = Array::zeros({hidden}, true);
  mlp.w2 = Array::normal({hidden, out}, kInitStd, rng, true);
  mlp.b2 = Array::zeros({out}, true);
  return mlp;
}

Array Mlp::forward(const Array& x) const {
  return add_bias(matmul(gelu(add_bias(matmul(x, w1), b1)), w2), b2);
}

FusionParams init_fusion_params(const FusionConfig& config, std::mt19937_64& rng) {
  config.validate();
  FusionParams p;
  p.config = config;
  p.source_layers = config.source_layers();
  const std::size_t d = config.width;
  if (!uses_bank(config.variant)) return p;

  for (std::size_t i = 0; i < p.source_layers.size(); ++i) {
    p.norms.push_back({Array::full({config.raw_width}, 1.0, true), Array::zeros({config.raw_width}, true)});
  }
  const std::size_t projector_count = config.variant == Variant::SplitProj ? p.source_layers.size() : 1;
  for (std::size_t i = 0; i < projector_count; ++i) {
    p.projectors.push_back(Mlp::init(config.raw_width, config.projector_hidden(), d, rng));
  }
  if (uses_router(config.variant)) {
    p.router = Mlp::init(d, config.router_hidden(), p.source_layers.size(), rng);
  }
  switch (injection_of(config.variant)) {
    case Injection::Residual:
      p.w_out = Array::zeros({d, d}, true);
      break;
    case Injection::FiLM:
      p.w_scale = Array::zeros({d, d}, true);
      p.w_shift = Array::zeros({d, d}, true);
      break;
    case Injection::Gated2D:
      p.w_out = Array::zeros({d, d}, true);
      p.w_gate = Array::normal({d, d}, kInitStd, rng, true);
      break;
    case Injection::Gated2D3D:
      p.w_out = Array::zeros({d, d}, true);
      p.w_gate = Array::normal({2 * d, d}, kInitStd, rng, true);
      break;
  }
  return p;
}

std::vector<NamedArray> FusionParams::named_parameters() const {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    out.push_back({"fusion.norm" + std::to_string(i) + ".gamma", norms[i].gamma});
    out.push_back({"fusion.norm" + std::to_string(i) + ".beta", norms[i].beta});
  }
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    append_mlp(out, "fusion.proj" + std::to_string(i), projectors[i]);
  }
  if (router) append_mlp(out, "fusion.router", *router);
  if (w_out.defined()) out.push_back({"fusion.w_out", w_out});
  if (w_scale.defined()) out.push_back({"fusion.w_scale", w_scale});
  if (w_shift.defined()) out.push_back({"fusion.w_shift", w_shift});
  if (w_gate.defined()) out.push_back({"fusion.w_gate", w_gate});
  return out;
}

}  // namespace georoute
