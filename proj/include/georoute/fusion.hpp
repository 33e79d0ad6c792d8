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

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "georoute/numerics.hpp"

namespace georoute {

/// Fusion strategy. Dynamic, SplitProj, FiLM, Gated2D and Gated2D3D all route
/// through the sparse top-k router; they differ in projection or injection.
enum class Variant { Dynamic, Single, Mean, TwoDOnly, SplitProj, FiLM, Gated2D, Gated2D3D };

enum class SelectionStrategy { LatterHalf, FormerHalf, Uniform };

enum class Injection { Residual, FiLM, Gated2D, Gated2D3D };

std::string_view to_string(Variant v);
std::string_view to_string(SelectionStrategy s);
Variant parse_variant(std::string_view name);
SelectionStrategy parse_selection(std::string_view name);

bool uses_router(Variant v);
bool uses_bank(Variant v);
Injection injection_of(Variant v);

/// Encoder layers feeding the bank: LatterHalf → last m, FormerHalf → first m,
/// Uniform → floor(i·depth/m) for i in [0, m).
std::vector<std::size_t> select_layers(std::size_t total_depth, std::size_t m, SelectionStrategy strategy);

struct FusionConfig {
  Variant variant = Variant::Dynamic;
  std::size_t total_depth = 24;
  std::size_t m = 12;
  std::size_t k = 2;
  SelectionStrategy selection = SelectionStrategy::LatterHalf;
  std::size_t single_layer = 22;
  std::size_t raw_width = 24;  // D′
  std::size_t width = 32;      // D

  /// Bank source layers implied by the variant ({single_layer} for Single,
  /// empty for TwoDOnly, select_layers(...) otherwise).
  std::vector<std::size_t> source_layers() const;
  std::size_t projector_hidden() const { return width; }
  std::size_t router_hidden() const { return std::max<std::size_t>(16, width / 2); }
  /// Throws PreconditionError describing the first inconsistency.
  void validate() const;
};

/// Two-layer perceptron x ↦ gelu(x·w1 + b1)·w2 + b2 (tokens along rows).
struct Mlp {
  Array w1, b1, w2, b2;

  static Mlp init(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng);
  Array forward(const Array& x) const;
  std::size_t in_width() const { return w1.dim(0); }
  std::size_t out_width() const { return w2.dim(1); }
};

struct LayerNormParams {
  Array gamma, beta;
};

/// Learnable state of the fusion module. Linear maps act on token rows from
/// the right, so w_out holds the transpose of the column-convention W_out.
struct FusionParams {
  FusionConfig config;
  std::vector<std::size_t> source_layers;
  std::vector<LayerNormParams> norms;  // one per bank layer
  std::vector<Mlp> projectors;         // 1 shared, or M for SplitProj
  std::optional<Mlp> router;           // routing variants only
  Array w_out;                         // D×D (residual and gated injections)
  Array w_scale, w_shift;              // D×D (FiLM)
  Array w_gate;                        // D×D (Gated2D) or 2D×D (Gated2D3D)
  double norm_eps = 1e-5;

  std::size_t m() const { return source_layers.size(); }
  std::vector<NamedArray> named_parameters() const;
};

/// Normal(0, 0.02) weights, zero biases, unit gammas, and zero w_out / w_scale
/// / w_shift so that every injection starts as the identity on q.
FusionParams init_fusion_params(const FusionConfig& config, std::mt19937_64& rng);

struct RawLayerFeature {
  std::size_t layer_index = 0;
  Array values;  // L′×D′
};

struct FeatureBank {
  Array entries;  // L×M×D
  std::vector<std::size_t> source_layers;
};

struct SparseRoutingPlan {
  Array logits;                                 // L×M
  std::vector<std::vector<std::size_t>> selected;
  Array weights;                                // L×M, exact zeros off-support
};

/// Training-time exploration for the top-k selection: Gaussian noise of the
/// given stddev is added to a copy of the logits before choosing the support.
/// The weights are still the softmax of the clean logits over that support.
/// stddev = 0 selects on the clean logits.
struct SelectionNoise {
  double stddev = 0.0;
  std::uint64_t seed = 0;
};

FeatureBank build_bank(std::span<const RawLayerFeature> raw, const FusionParams& params);
SparseRoutingPlan route(const Array& q, const FusionParams& params, const SelectionNoise& noise = {});
Array aggregate(const FeatureBank& bank, const SparseRoutingPlan& plan);
Array aggregate_mean(const FeatureBank& bank);
/// Normalize and project the configured single layer, picked out of `raw`.
Array select_single(std::span<const RawLayerFeature> raw, const FusionParams& params);

Array inject_residual(const Array& q, const Array& f_hat, const FusionParams& params);
Array inject_film(const Array& q, const Array& f_hat, const FusionParams& params);
Array inject_gated2d(const Array& q, const Array& f_hat, const FusionParams& params);
Array inject_gated2d3d(const Array& q, const Array& f_hat, const FusionParams& params);

struct FuseResult {
  Array q_hat;
  std::optional<SparseRoutingPlan> plan;
};

/// Full pipeline dispatched on params.config.variant. `raw` may hold any
/// superset of the bank's source layers; the rest are ignored.
FuseResult fuse(const Array& q, std::span<const RawLayerFeature> raw, const FusionParams& params,
                const SelectionNoise& noise = {});

/// Mean of each weight column over tokens.
std::vector<double> routing_summary(const SparseRoutingPlan& plan);

}  // namespace georoute
