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

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "georoute/experiment.hpp"

namespace georoute {

// ---------------------------------------------------------------------------
// Experiment configs (JSON, flat object keyed by ExperimentConfig field name).
// ---------------------------------------------------------------------------

/// Missing keys take their defaults. Unknown keys, type mismatches and failed
/// validation throw ConfigError naming the key.
ExperimentConfig load_config(std::string_view document);
ExperimentConfig load_config_file(const std::filesystem::path& path);
/// Every key, in declaration order, two-space indented.
std::string serialize_config(const ExperimentConfig& config);

/// Surfaces an I/O failure together with the path involved.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(what + ": " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Checkpoints.
//
//   "GALN" | u32 version | entries... | u64 FNV-1a of all preceding bytes
//   entry: u32 name length | name | u32 rank | u64 dims[rank] | f64 payload
//
// All integers and reals little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// Names must be unique and nonempty.
std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedArray> arrays);
std::vector<NamedArray> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

/// Copies loaded values into `params` (matched by name and shape). Every
/// parameter must be present exactly once; extra entries are rejected.
void restore_parameters(std::span<const NamedArray> params, std::span<const NamedArray> loaded);

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

/// token_index,layer_index_global,weight for each nonzero weight.
std::string routing_csv(const SparseRoutingPlan& plan, const std::vector<std::size_t>& source_layers);
/// {"<global layer>": percent, ...} for layers with nonzero mean weight.
std::string routing_summary_json(const std::vector<double>& summary, const std::vector<std::size_t>& source_layers);
void write_routing_dump(const SparseRoutingPlan& plan, const std::vector<std::size_t>& source_layers,
                        const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

/// variant,task0_mse,...,aggregate_mse. Tasks without tokens are left empty.
std::string results_table_csv(const AblationResults& results);
void write_results_table(const AblationResults& results, const std::filesystem::path& path);

/// step,lr,loss.
std::string loss_csv(std::span<const LossLogEntry> log);
void write_loss_csv(std::span<const LossLogEntry> log, const std::filesystem::path& path);

/// Writes `contents` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace georoute
