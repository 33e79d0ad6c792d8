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
#include <cstdio>

#include "json.hpp"

#include "georoute/artifacts.hpp"

namespace georoute {

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_layers(std::size_t m, const std::vector<std::size_t>& source_layers) {
  if (source_layers.size() != m) {
    throw ShapeError("routing dump: plan has " + std::to_string(m) + " columns but " +
                     std::to_string(source_layers.size()) + " source layers were given");
  }
}

}  // namespace

std::string routing_csv(const SparseRoutingPlan& plan, const std::vector<std::size_t>& source_layers) {
  const std::size_t rows = plan.weights.dim(0), m = plan.weights.dim(1);
  check_layers(m, source_layers);
  std::string out = "token_index,layer_index_global,weight\n";
  auto w = plan.weights.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < m; ++i) {
      const double v = w[r * m + i];
      if (v == 0.0) continue;
      out += std::to_string(r) + ',' + std::to_string(source_layers[i]) + ',' + format_real(v) + '\n';
    }
  }
  return out;
}

std::string routing_summary_json(const std::vector<double>& summary, const std::vector<std::size_t>& source_layers) {
  check_layers(summary.size(), source_layers);
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < summary.size(); ++i) {
    if (summary[i] != 0.0) doc[std::to_string(source_layers[i])] = summary[i] * 100.0;
  }
  return doc.dump(2) + "\n";
}

void write_routing_dump(const SparseRoutingPlan& plan, const std::vector<std::size_t>& source_layers,
                        const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  write_text_file(csv_path, routing_csv(plan, source_layers));
  write_text_file(json_path, routing_summary_json(routing_summary(plan), source_layers));
}

std::string results_table_csv(const AblationResults& results) {
  std::string out = "variant";
  for (std::size_t t = 0; t < results.num_tasks; ++t) out += ",task" + std::to_string(t) + "_mse";
  out += ",aggregate_mse\n";
  for (const auto& row : results.rows) {
    if (row.metrics.per_task_mse.size() != results.num_tasks) {
      throw ShapeError("results table: row '" + row.name + "' has " +
                       std::to_string(row.metrics.per_task_mse.size()) + " task columns, expected " +
                       std::to_string(results.num_tasks));
    }
    out += row.name;
    for (const auto& v : row.metrics.per_task_mse) {
      out += ',';
      if (v) out += format_real(*v);
    }
    out += ',' + format_real(row.metrics.aggregate) + '\n';
  }
  return out;
}

void write_results_table(const AblationResults& results, const std::filesystem::path& path) {
  write_text_file(path, results_table_csv(results));
}

std::string loss_csv(std::span<const LossLogEntry> log) {
  std::string out = "step,lr,loss\n";
  for (const auto& e : log) out += std::to_string(e.step) + ',' + format_real(e.lr) + ',' + format_real(e.loss) + '\n';
  return out;
}

void write_loss_csv(std::span<const LossLogEntry> log, const std::filesystem::path& path) {
  write_text_file(path, loss_csv(log));
}

}  // namespace georoute
