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

bool is_decay_exempt(std::string_view name) {
  const auto dot = name.rfind('.');
  const std::string_view leaf = dot == std::string_view::npos ? name : name.substr(dot + 1);
  return leaf == "gamma" || leaf == "beta" || leaf == "b1" || leaf == "b2" || leaf == "head_b" || leaf == "bias";
}

OptimizerState make_optimizer_state(std::span<const NamedArray> params, const AdamWHyper& hyper) {
  OptimizerState state;
  state.hyper = hyper;
  for (const auto& p : params) {
    state.names.push_back(p.name);
    state.decay.push_back(!is_decay_exempt(p.name));
    state.first_moment.emplace_back(p.array.size(), 0.0);
    state.second_moment.emplace_back(p.array.size(), 0.0);
  }
  return state;
}

void adamw_step(std::span<const NamedArray> params, OptimizerState& state, double lr) {
  if (params.size() != state.names.size()) {
    throw PreconditionError("adamw_step: optimizer tracks " + std::to_string(state.names.size()) +
                            " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Array& a = params[i].array;
    if (params[i].name != state.names[i] || a.size() != state.first_moment[i].size()) {
      throw PreconditionError("adamw_step: parameter '" + params[i].name + "' does not match optimizer state");
    }
    for (double g : a.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("adamw_step: non-finite gradient in '" + params[i].name + "'");
    }
  }

  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array a = params[i].array;
    auto values = a.mutable_data();
    auto grad = a.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const double shrink = state.decay[i] ? 1.0 - lr * h.weight_decay : 1.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g;
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] *= shrink;
      values[j] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

}  // namespace georoute
