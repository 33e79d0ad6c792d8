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
#include <array>
#include <utility>

#include "georoute/fusion.hpp"

namespace georoute {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 8> kVariantNames{{
    {Variant::Dynamic, "Dynamic"},
    {Variant::Single, "Single"},
    {Variant::Mean, "Mean"},
    {Variant::TwoDOnly, "TwoDOnly"},
    {Variant::SplitProj, "SplitProj"},
    {Variant::FiLM, "FiLM"},
    {Variant::Gated2D, "Gated2D"},
    {Variant::Gated2D3D, "Gated2D3D"},
}};

constexpr std::array<std::pair<SelectionStrategy, std::string_view>, 3> kSelectionNames{{
    {SelectionStrategy::LatterHalf, "LatterHalf"},
    {SelectionStrategy::FormerHalf, "FormerHalf"},
    {SelectionStrategy::Uniform, "Uniform"},
}};

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& [value, name] : kVariantNames)
    if (value == v) return name;
  return "?";
}

std::string_view to_string(SelectionStrategy s) {
  for (const auto& [value, name] : kSelectionNames)
    if (value == s) return name;
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [value, n] : kVariantNames)
    if (n == name) return value;
  throw PreconditionError("unknown variant '" + std::string(name) + "'");
}

SelectionStrategy parse_selection(std::string_view name) {
  for (const auto& [value, n] : kSelectionNames)
    if (n == name) return value;
  throw PreconditionError("unknown selection strategy '" + std::string(name) + "'");
}

bool uses_router(Variant v) {
  return v == Variant::Dynamic || v == Variant::SplitProj || v == Variant::FiLM || v == Variant::Gated2D ||
         v == Variant::Gated2D3D;
}

bool uses_bank(Variant v) { return v != Variant::TwoDOnly; }

Injection injection_of(Variant v) {
  switch (v) {
    case Variant::FiLM: return Injection::FiLM;
    case Variant::Gated2D: return Injection::Gated2D;
    case Variant::Gated2D3D: return Injection::Gated2D3D;
    default: return Injection::Residual;
  }
}

std::vector<std::size_t> select_layers(std::size_t total_depth, std::size_t m, SelectionStrategy strategy) {
  if (m == 0 || m > total_depth) {
    throw PreconditionError("select_layers: need 1 <= m <= total_depth, got m=" + std::to_string(m) +
                            ", total_depth=" + std::to_string(total_depth));
  }
  std::vector<std::size_t> layers(m);
  for (std::size_t i = 0; i < m; ++i) {
    switch (strategy) {
      case SelectionStrategy::LatterHalf: layers[i] = total_depth - m + i; break;
      case SelectionStrategy::FormerHalf: layers[i] = i; break;
      case SelectionStrategy::Uniform: layers[i] = i * total_depth / m; break;
    }
  }
  return layers;
}

std::vector<std::size_t> FusionConfig::source_layers() const {
  switch (variant) {
    case Variant::TwoDOnly: return {};
    case Variant::Single: return {single_layer};
    default: return select_layers(total_depth, m, selection);
  }
}

void FusionConfig::validate() const {
  if (raw_width == 0 || width == 0) throw PreconditionError("fusion widths must be positive");
  if (total_depth == 0) throw PreconditionError("total_depth must be positive");
  if (m == 0) throw PreconditionError("m must be positive");
  if (m > total_depth) {
    throw PreconditionError("m (" + std::to_string(m) + ") exceeds total_depth (" + std::to_string(total_depth) + ")");
  }
  if (k == 0) throw PreconditionError("k must be positive");
  if (k > m) throw PreconditionError("k (" + std::to_string(k) + ") exceeds m (" + std::to_string(m) + ")");
  if (variant == Variant::Single && single_layer >= total_depth) {
    throw PreconditionError("single_layer " + std::to_string(single_layer) + " outside [0, " +
                            std::to_string(total_depth) + ")");
  }
}

}  // namespace georoute
