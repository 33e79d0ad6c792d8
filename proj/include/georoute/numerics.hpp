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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace georoute {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Operand shapes do not conform for the requested kernel.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity reached a kernel input.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A documented precondition (k range, tie margin, determinism, ...) was violated.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles with reverse-mode differentiation.
///
/// An Array is a cheap handle: copies share the same node. Kernels never
/// modify their inputs; they produce a new node that remembers how to push
/// gradients back to its inputs. Leaves flagged with requires_grad
/// accumulate gradients across backward passes until zero_grad().
class Array {
 public:
  Array() = default;

  static Array from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Array zeros(Shape shape, bool requires_grad = false);
  static Array full(Shape shape, double value, bool requires_grad = false);
  static Array scalar(double value);
  static Array normal(Shape shape, double stddev, std::mt19937_64& rng,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  /// Writable view of the values. Only for leaves (parameters, inputs) that
  /// are not part of a live graph, e.g. optimizer updates or perturbations.
  std::span<double> mutable_data();
  double item() const;
  double operator()(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Fresh leaf holding a copy of the values, detached from any graph.
  Array detach() const;

  bool same_node(const Array& other) const { return node_ == other.node_; }

  // Internal: used by kernels.
  explicit Array(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// SplitMix64-style combination of a base seed with a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Parameter or checkpoint entry.
struct NamedArray {
  std::string name;
  Array array;
};

// ---------------------------------------------------------------------------
// Kernels. Matrices are rank-2 with tokens along rows. "Token-axis broadcast"
// means a rank-1 operand of length m (or a 1×m matrix) applied to every row.
// ---------------------------------------------------------------------------

Array matmul(const Array& a, const Array& b);
Array add_bias(const Array& x, const Array& bias);
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array scale(const Array& x, double factor);
Array add_scalar(const Array& x, double value);
Array concat_cols(const Array& a, const Array& b);
Array sigmoid(const Array& x);
Array gelu(const Array& x);
Array row_mean(const Array& x);
Array row_var(const Array& x);
Array sum(const Array& x);
Array mean(const Array& x);

/// Per-row normalization to zero mean / unit variance followed by the affine
/// map gamma ⊙ x̂ + beta. Variance is the population variance; eps > 0.
Array layer_norm(const Array& x, const Array& gamma, const Array& beta, double eps = 1e-5);

/// Row-wise softmax restricted to `selected[row]`; every other entry is
/// exactly 0.0. Rows are max-subtracted before exponentiation.
Array masked_softmax_rows(const Array& logits,
                          const std::vector<std::vector<std::size_t>>& selected);

/// Indices of the k largest entries, ascending. Ties go to the lower index.
std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k);
std::vector<std::vector<std::size_t>> topk_rows(const Array& scores, std::size_t k);

/// Stack M arrays of shape L×D into an L×M×D array.
Array stack_layers(const std::vector<Array>& layers);
/// Slice i of an L×M×D array as an L×D matrix.
Array layer_slice(const Array& stacked, std::size_t index);
/// out[l, :] = Σ_i weights[l, i] · stacked[l, i, :]
Array weighted_layer_sum(const Array& stacked, const Array& weights);
/// out[l, :] = (1/M) Σ_i stacked[l, i, :]
Array mean_over_layers(const Array& stacked);

/// Rows are grouped in consecutive segments of `segment_len`; every row is
/// replaced by the mean of its segment.
Array segment_mean_rows(const Array& x, std::size_t segment_len);
/// out[r] = x[r, column[r]], shape rows×1.
Array gather_columns(const Array& x, const std::vector<std::size_t>& column);

/// Reverse-mode pass from a scalar. Gradients accumulate on requires_grad
/// leaves; intermediate buffers are released afterwards.
void backward(const Array& loss);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  std::string op_name;
  double max_rel_error = 0.0;
  std::map<std::string, double> per_parameter_errors;
  bool passed = false;
};

/// Records the smallest gap between the k-th and (k+1)-th score of every
/// top-k selection performed on this thread while the probe is alive.
class TopKMarginProbe {
 public:
  TopKMarginProbe();
  ~TopKMarginProbe();
  TopKMarginProbe(const TopKMarginProbe&) = delete;
  TopKMarginProbe& operator=(const TopKMarginProbe&) = delete;

  double min_margin() const { return min_margin_; }
  void record(double margin);

 private:
  double min_margin_;
  TopKMarginProbe* previous_;
};

/// Central-difference check of every element of every parameter against the
/// analytic gradient of `loss_fn`. Parameter grads are overwritten.
///
/// Throws PreconditionError if loss_fn is not deterministic or if any top-k
/// selection inside it sits closer than 10·h to a tie.
GradCheckReport finite_diff_check(const std::string& op_name,
                                  const std::function<Array()>& loss_fn,
                                  std::span<const NamedArray> params, double h = 1e-4,
                                  double tol = 1e-4);

}  // namespace georoute
