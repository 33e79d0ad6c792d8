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

std::vector<RawLayerFeature> gather_sources(std::span<const RawLayerFeature> raw,
                                            const std::vector<std::size_t>& source_layers) {
  std::vector<RawLayerFeature> picked;
  picked.reserve(source_layers.size());
  for (std::size_t layer : source_layers) {
    auto it = std::find_if(raw.begin(), raw.end(), [layer](const RawLayerFeature& r) { return r.layer_index == layer; });
    if (it == raw.end()) {
      throw PreconditionError("raw features do not contain encoder layer " + std::to_string(layer));
    }
    picked.push_back(*it);
  }
  return picked;
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void require_param(const Array& a, const char* name, const char* op) {
  if (!a.defined()) throw PreconditionError(std::string(op) + ": parameter " + name + " is not allocated for this variant");
}

Array project(const RawLayerFeature& raw, std::size_t slot, const FusionParams& params) {
  const auto& norm = params.norms[slot];
  const auto& projector = params.projectors.size() == 1 ? params.projectors[0] : params.projectors[slot];
  return projector.forward(layer_norm(raw.values, norm.gamma, norm.beta, params.norm_eps));
}

}  // namespace

FeatureBank build_bank(std::span<const RawLayerFeature> raw, const FusionParams& params) {
  const std::size_t m = params.m();
  if (m == 0 || params.norms.size() != m || params.projectors.empty()) {
    throw PreconditionError("build_bank: variant " + std::string(to_string(params.config.variant)) +
                            " has no feature bank");
  }
  if (raw.size() != m) {
    throw PreconditionError("build_bank: expected " + std::to_string(m) + " raw layers, got " +
                            std::to_string(raw.size()));
  }
  std::vector<Array> slices;
  slices.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (raw[i].layer_index != params.source_layers[i]) {
      throw PreconditionError("build_bank: raw layer " + std::to_string(i) + " has index " +
                              std::to_string(raw[i].layer_index) + ", expected " +
                              std::to_string(params.source_layers[i]));
    }
    if (raw[i].values.rank() != 2) {
      throw ShapeError("build_bank: raw feature must be L′×D′, got " + shape_to_string(raw[i].values.shape()));
    }
    require_same_shape(raw[0].values, raw[i].values, "build_bank");
    if (raw[i].values.dim(1) != params.config.raw_width) {
      throw ShapeError("build_bank: raw width " + std::to_string(raw[i].values.dim(1)) + " != configured " +
                       std::to_string(params.config.raw_width));
    }
    slices.push_back(project(raw[i], i, params));
  }
  return {stack_layers(slices), params.source_layers};
}

SparseRoutingPlan route(const Array& q, const FusionParams& params, const SelectionNoise& noise) {
  if (!params.router) {
    throw PreconditionError("route: variant " + std::string(to_string(params.config.variant)) + " has no router");
  }
  SparseRoutingPlan plan;
  plan.logits = params.router->forward(q);
  if (plan.logits.dim(1) != params.m()) {
    throw ShapeError("route: router emits " + std::to_string(plan.logits.dim(1)) + " logits for " +
                     std::to_string(params.m()) + " bank layers");
  }
  if (noise.stddev > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, noise.stddev);
    std::vector<double> scores(plan.logits.data().begin(), plan.logits.data().end());
    for (double& v : scores) v += normal(rng);
    plan.selected = topk_rows(Array::from(plan.logits.shape(), std::move(scores)), params.config.k);
  } else {
    plan.selected = topk_rows(plan.logits, params.config.k);
  }
  plan.weights = masked_softmax_rows(plan.logits, plan.selected);
  return plan;
}

Array aggregate(const FeatureBank& bank, const SparseRoutingPlan& plan) {
  return weighted_layer_sum(bank.entries, plan.weights);
}

Array aggregate_mean(const FeatureBank& bank) { return mean_over_layers(bank.entries); }

Array select_single(std::span<const RawLayerFeature> raw, const FusionParams& params) {
  if (params.m() != 1 || params.norms.size() != 1) {
    throw PreconditionError("select_single: parameters must describe a one-layer bank");
  }
  auto picked = gather_sources(raw, params.source_layers);
  return project(picked[0], 0, params);
}

Array inject_residual(const Array& q, const Array& f_hat, const FusionParams& params) {
  require_same_shape(q, f_hat, "inject_residual");
  require_param(params.w_out, "w_out", "inject_residual");
  return add(q, matmul(f_hat, params.w_out));
}

Array inject_film(const Array& q, const Array& f_hat, const FusionParams& params) {
  require_same_shape(q, f_hat, "inject_film");
  require_param(params.w_scale, "w_scale", "inject_film");
  require_param(params.w_shift, "w_shift", "inject_film");
  Array modulation = add_scalar(matmul(f_hat, params.w_scale), 1.0);
  return add(mul(q, modulation), matmul(f_hat, params.w_shift));
}

Array inject_gated2d(const Array& q, const Array& f_hat, const FusionParams& params) {
  require_same_shape(q, f_hat, "inject_gated2d");
  require_param(params.w_gate, "w_gate", "inject_gated2d");
  require_param(params.w_out, "w_out", "inject_gated2d");
  Array gate = sigmoid(matmul(q, params.w_gate));
  return add(q, matmul(mul(gate, f_hat), params.w_out));
}

Array inject_gated2d3d(const Array& q, const Array& f_hat, const FusionParams& params) {
  require_same_shape(q, f_hat, "inject_gated2d3d");
  require_param(params.w_gate, "w_gate", "inject_gated2d3d");
  require_param(params.w_out, "w_out", "inject_gated2d3d");
  if (params.w_gate.dim(0) != 2 * q.dim(1)) {
    throw ShapeError("inject_gated2d3d: w_gate input width " + std::to_string(params.w_gate.dim(0)) +
                     " != 2·D = " + std::to_string(2 * q.dim(1)));
  }
  Array gate = sigmoid(matmul(concat_cols(q, f_hat), params.w_gate));
  return add(q, matmul(mul(gate, f_hat), params.w_out));
}

FuseResult fuse(const Array& q, std::span<const RawLayerFeature> raw, const FusionParams& params,
                const SelectionNoise& noise) {
  const Variant variant = params.config.variant;
  if (variant == Variant::TwoDOnly) return {q, std::nullopt};
  if (variant == Variant::Single) return {inject_residual(q, select_single(raw, params), params), std::nullopt};

  auto sources = gather_sources(raw, params.source_layers);
  FeatureBank bank = build_bank(sources, params);
  if (variant == Variant::Mean) return {inject_residual(q, aggregate_mean(bank), params), std::nullopt};

  SparseRoutingPlan plan = route(q, params, noise);
  Array f_hat = aggregate(bank, plan);
  Array q_hat;
  switch (injection_of(variant)) {
    case Injection::Residual: q_hat = inject_residual(q, f_hat, params); break;
    case Injection::FiLM: q_hat = inject_film(q, f_hat, params); break;
    case Injection::Gated2D: q_hat = inject_gated2d(q, f_hat, params); break;
    case Injection::Gated2D3D: q_hat = inject_gated2d3d(q, f_hat, params); break;
  }
  return {q_hat, std::move(plan)};
}

std::vector<double> routing_summary(const SparseRoutingPlan& plan) {
  const Array& w = plan.weights;
  const std::size_t l = w.dim(0), m = w.dim(1);
  std::vector<double> summary(m, 0.0);
  auto wv = w.data();
  for (std::size_t t = 0; t < l; ++t)
    for (std::size_t i = 0; i < m; ++i) summary[i] += wv[t * m + i];
  for (double& s : summary) s /= static_cast<double>(l);
  return summary;
}

}  // namespace georoute
