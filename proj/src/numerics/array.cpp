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
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "georoute/numerics.hpp"

namespace georoute {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "×";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_node(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw std::logic_error("operation on an undefined Array");
}

}  // namespace

Array Array::from(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("array extents must be positive, got " + shape_to_string(shape));
  }
  if (element_count(shape) != data.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->needs_grad = requires_grad;
  return Array(std::move(node));
}

Array Array::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Array Array::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = element_count(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Array Array::scalar(double value) { return from({1}, {value}); }

Array Array::normal(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(element_count(shape));
  for (double& v : values) v = dist(rng);
  return from(std::move(shape), std::move(values), requires_grad);
}

const Shape& Array::shape() const {
  require_node(node_);
  return node_->shape;
}

std::size_t Array::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Array::size() const {
  require_node(node_);
  return node_->value.size();
}

std::span<const double> Array::data() const {
  require_node(node_);
  return node_->value;
}

std::span<double> Array::mutable_data() {
  require_node(node_);
  return node_->value;
}

double Array::item() const {
  if (size() != 1) throw ShapeError("item() needs a single-element array, got " + shape_to_string(shape()));
  return node_->value[0];
}

double Array::operator()(std::size_t i, std::size_t j) const {
  const Shape& s = shape();
  if (s.size() != 2) throw ShapeError("2-index access on " + shape_to_string(s));
  return node_->value[i * s[1] + j];
}

bool Array::requires_grad() const {
  require_node(node_);
  return node_->requires_grad;
}

void Array::set_requires_grad(bool flag) {
  require_node(node_);
  node_->requires_grad = flag;
  node_->needs_grad = flag || static_cast<bool>(node_->backward);
}

bool Array::has_grad() const {
  require_node(node_);
  return !node_->grad.empty();
}

std::span<const double> Array::grad() const {
  require_node(node_);
  return node_->grad;
}

std::span<double> Array::mutable_grad() {
  require_node(node_);
  return node_->ensure_grad();
}

void Array::zero_grad() {
  require_node(node_);
  node_->grad.clear();
}

Array Array::detach() const {
  require_node(node_);
  return from(node_->shape, node_->value, false);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void backward(const Array& loss) {
  const auto& root = loss.node();
  require_node(root);
  if (root->value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_to_string(root->shape));
  }
  if (!root->needs_grad) return;

  // Iterative post-order DFS: graphs from long training steps can be deep.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->needs_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Each pass accumulates into fresh leaf buffers that are added to the
  // previous gradients once at the end, so repeated passes sum exactly.
  std::vector<std::pair<detail::Node*, std::vector<double>>> previous;
  for (detail::Node* node : order) {
    if (!node->backward && !node->grad.empty()) previous.emplace_back(node, std::exchange(node->grad, {}));
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  for (detail::Node* node : order) {
    if (node->backward) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
  for (auto& [node, grad] : previous) {
    if (node->grad.empty()) {
      node->grad = std::move(grad);
    } else {
      for (std::size_t i = 0; i < grad.size(); ++i) node->grad[i] += grad[i];
    }
  }
}

}  // namespace georoute
