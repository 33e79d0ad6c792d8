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
#include <algorithm>
#include <cmath>

#include "georoute/numerics.hpp"

namespace georoute {

namespace {

double evaluate(const std::function<Array()>& loss_fn) {
  Array loss = loss_fn();
  if (loss.size() != 1) {
    throw ShapeError("finite_diff_check: loss must be scalar, got " + shape_to_string(loss.shape()));
  }
  return loss.item();
}

}  // namespace

GradCheckReport finite_diff_check(const std::string& op_name, const std::function<Array()>& loss_fn,
                                  std::span<const NamedArray> params, double h, double tol) {
  if (!(h > 0.0)) throw PreconditionError("finite_diff_check: step h must be positive");

  GradCheckReport report;
  report.op_name = op_name;

  for (const auto& p : params) {
    Array a = p.array;
    if (!a.requires_grad()) {
      throw PreconditionError("finite_diff_check: parameter '" + p.name + "' does not require grad");
    }
    a.zero_grad();
  }

  double base_value = 0.0;
  {
    TopKMarginProbe probe;
    Array loss = loss_fn();
    if (loss.size() != 1) {
      throw ShapeError("finite_diff_check: loss must be scalar, got " + shape_to_string(loss.shape()));
    }
    base_value = loss.item();
    if (probe.min_margin() < 10.0 * h) {
      throw PreconditionError("finite_diff_check: top-k margin " + std::to_string(probe.min_margin()) +
                              " is within 10·h of a tie");
    }
    backward(loss);
  }
  if (evaluate(loss_fn) != base_value) {
    throw PreconditionError("finite_diff_check: loss function '" + op_name + "' is not deterministic");
  }

  for (const auto& p : params) {
    Array a = p.array;
    std::vector<double> analytic(a.size(), 0.0);
    if (a.has_grad()) std::copy(a.grad().begin(), a.grad().end(), analytic.begin());
    auto values = a.mutable_data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate(loss_fn);
      values[i] = saved - h;
      const double minus = evaluate(loss_fn);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    report.per_parameter_errors[p.name] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace georoute
