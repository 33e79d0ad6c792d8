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
#include <random>

#include "georoute/cli.hpp"
#include "georoute/fusion.hpp"

namespace georoute {

namespace {

constexpr double kStep = 1e-4;
constexpr double kTolerance = 1e-4;

class SuiteBuilder {
 public:
  explicit SuiteBuilder(std::uint64_t seed) : rng_(seed) {}

  Array param(Shape shape, double stddev = 1.0) { return Array::normal(std::move(shape), stddev, rng_, true); }
  Array constant(Shape shape, double stddev = 1.0) { return Array::normal(std::move(shape), stddev, rng_, false); }
  Array positive(Shape shape) {
    Array a = param(std::move(shape));
    for (double& v : a.mutable_data()) v = 0.5 + std::abs(v);
    return a;
  }

  /// Contracts `out` with a fixed random tensor so every output element
  /// carries a distinct weight.
  std::function<Array()> probe(std::function<Array()> op) {
    Array out = op();
    Array weights = Array::normal(out.shape(), 1.0, rng_);
    return [op = std::move(op), weights] { return sum(mul(op(), weights)); };
  }

  void check(const std::string& name, std::function<Array()> op, std::vector<NamedArray> params) {
    reports_.push_back(finite_diff_check(name, probe(std::move(op)), params, kStep, kTolerance));
  }

  std::mt19937_64& rng() { return rng_; }
  std::vector<GradCheckReport> take() { return std::move(reports_); }

 private:
  std::mt19937_64 rng_;
  std::vector<GradCheckReport> reports_;
};

void kernel_checks(SuiteBuilder& s) {
  {
    Array a = s.param({3, 4}), b = s.param({4, 5});
    s.check("matmul", [=] { return matmul(a, b); }, {{"a", a}, {"b", b}});
  }
  {
    Array x = s.param({4, 3}), bias = s.param({3});
    s.check("add_bias", [=] { return add_bias(x, bias); }, {{"x", x}, {"bias", bias}});
  }
  {
    Array a = s.param({3, 4}), b = s.param({3, 4});
    s.check("add", [=] { return add(a, b); }, {{"a", a}, {"b", b}});
    s.check("sub", [=] { return sub(a, b); }, {{"a", a}, {"b", b}});
    s.check("mul", [=] { return mul(a, b); }, {{"a", a}, {"b", b}});
  }
  {
    Array a = s.param({3, 4}), row = s.param({1, 4}), vec = s.param({4});
    s.check("add_broadcast", [=] { return add(a, row); }, {{"a", a}, {"row", row}});
    s.check("mul_broadcast", [=] { return mul(a, vec); }, {{"a", a}, {"vec", vec}});
  }
  {
    Array x = s.param({3, 4});
    s.check("scale", [=] { return scale(x, -1.7); }, {{"x", x}});
    s.check("add_scalar", [=] { return add_scalar(x, 0.3); }, {{"x", x}});
    s.check("sigmoid", [=] { return sigmoid(x); }, {{"x", x}});
    s.check("gelu", [=] { return gelu(x); }, {{"x", x}});
    s.check("row_mean", [=] { return row_mean(x); }, {{"x", x}});
    s.check("row_var", [=] { return row_var(x); }, {{"x", x}});
    s.check("sum", [=] { return sum(x); }, {{"x", x}});
    s.check("mean", [=] { return mean(x); }, {{"x", x}});
  }
  {
    Array a = s.param({3, 2}), b = s.param({3, 4});
    s.check("concat_cols", [=] { return concat_cols(a, b); }, {{"a", a}, {"b", b}});
  }
  {
    Array x = s.param({4, 6}), gamma = s.param({6}), beta = s.param({6});
    s.check("layer_norm", [=] { return layer_norm(x, gamma, beta); }, {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  }
  {
    Array logits = s.param({4, 5});
    const std::vector<std::vector<std::size_t>> selected{{0, 2}, {1, 3, 4}, {2}, {0, 1, 2, 3, 4}};
    s.check("masked_softmax_rows", [=] { return masked_softmax_rows(logits, selected); }, {{"logits", logits}});
  }
  {
    Array a = s.param({3, 4}), b = s.param({3, 4}), c = s.param({3, 4});
    s.check("stack_layers", [=] { return stack_layers({a, b, c}); }, {{"a", a}, {"b", b}, {"c", c}});
    Array stacked = s.param({3, 4, 2});
    s.check("layer_slice", [=] { return layer_slice(stacked, 2); }, {{"stacked", stacked}});
    s.check("mean_over_layers", [=] { return mean_over_layers(stacked); }, {{"stacked", stacked}});
    Array weights = s.param({3, 4});
    s.check("weighted_layer_sum", [=] { return weighted_layer_sum(stacked, weights); },
            {{"stacked", stacked}, {"weights", weights}});
  }
  {
    Array x = s.param({6, 3});
    s.check("segment_mean_rows", [=] { return segment_mean_rows(x, 3); }, {{"x", x}});
    const std::vector<std::size_t> column{0, 2, 1, 1, 0, 2};
    s.check("gather_columns", [=] { return gather_columns(x, column); }, {{"x", x}});
  }
}

/// Full router → top-k → masked softmax → bank → aggregation → injection path
/// with every fusion parameter perturbed away from its (partly zero) init.
void pipeline_check(SuiteBuilder& s, Variant variant) {
  FusionConfig config;
  config.variant = variant;
  config.total_depth = 8;
  config.m = 4;
  config.k = 2;
  config.raw_width = 5;
  config.width = 6;
  config.single_layer = 5;
  constexpr std::size_t kTokens = 5;

  // Redraw until no top-k decision sits within the enforced tie margin.
  for (int attempt = 0;; ++attempt) {
    FusionParams params = init_fusion_params(config, s.rng());
    auto named = params.named_parameters();
    for (auto& p : named) {
      for (double& v : p.array.mutable_data()) v = std::normal_distribution<double>(0.0, 0.5)(s.rng());
    }
    Array q = s.param({kTokens, config.width});
    std::vector<RawLayerFeature> raw;
    for (std::size_t layer : params.source_layers) raw.push_back({layer, s.constant({kTokens, config.raw_width})});
    named.push_back({"q", q});

    const std::string name = "fuse_" + std::string(to_string(variant));
    try {
      s.check(name, [=] { return fuse(q, raw, params).q_hat; }, named);
      return;
    } catch (const PreconditionError&) {
      if (attempt >= 32) throw;
    }
  }
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed) {
  SuiteBuilder s(seed);
  kernel_checks(s);
  for (Variant v : {Variant::Dynamic, Variant::Mean, Variant::Single, Variant::SplitProj, Variant::FiLM,
                    Variant::Gated2D, Variant::Gated2D3D}) {
    pipeline_check(s, v);
  }
  return s.take();
}

}  // namespace georoute
