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
#include <limits>
#include <numbers>
#include <numeric>

#include "georoute/numerics.hpp"

namespace georoute {

namespace {

using detail::Node;

void check_finite(const Array& a, const char* op) {
  for (double v : a.data()) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(op) + ": non-finite input in array of shape " +
                           shape_to_string(a.shape()));
    }
  }
}

void require_rank(const Array& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(a.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Array& a, const Array& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                   shape_to_string(b.shape()));
}

Array make_result(Shape shape, std::vector<double> value, std::vector<Array> inputs,
                  std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [](const Array& a) { return a.node()->needs_grad; });
  if (needs) {
    node->needs_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return Array(std::move(node));
}

// Grad buffer of input i if it participates in differentiation, else null.
std::vector<double>* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.needs_grad ? &in.ensure_grad() : nullptr;
}

const std::vector<double>& input_value(const Node& self, std::size_t i) { return self.inputs[i]->value; }

// Width of a token-axis broadcast operand (rank-1 length m or 1×m), or 0.
std::size_t row_vector_width(const Array& b) {
  if (b.rank() == 1) return b.dim(0);
  if (b.rank() == 2 && b.dim(0) == 1) return b.dim(1);
  return 0;
}

template <typename Forward, typename Backward>
Array unary(const Array& x, const char* op, Forward f, Backward df) {
  check_finite(x, op);
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xv = input_value(self, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

enum class Binary { Add, Sub, Mul };

Array binary(const Array& a, const Array& b, Binary kind, const char* op) {
  check_finite(a, op);
  check_finite(b, op);
  const bool same = a.shape() == b.shape();
  std::size_t width = 0;
  if (!same) {
    width = row_vector_width(b);
    if (a.rank() != 2 || width == 0 || width != a.dim(1)) mismatch(op, a, b);
  }
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    double bi = same ? bv[i] : bv[i % width];
    switch (kind) {
      case Binary::Add: out[i] = av[i] + bi; break;
      case Binary::Sub: out[i] = av[i] - bi; break;
      case Binary::Mul: out[i] = av[i] * bi; break;
    }
  }
  return make_result(a.shape(), std::move(out), {a, b}, [kind, same, width](Node& self) {
    const auto& av = input_value(self, 0);
    const auto& bv = input_value(self, 1);
    auto* ga = input_grad(self, 0);
    auto* gb = input_grad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i];
      const std::size_t j = same ? i : i % width;
      switch (kind) {
        case Binary::Add:
          if (ga) (*ga)[i] += g;
          if (gb) (*gb)[j] += g;
          break;
        case Binary::Sub:
          if (ga) (*ga)[i] += g;
          if (gb) (*gb)[j] -= g;
          break;
        case Binary::Mul:
          if (ga) (*ga)[i] += g * bv[j];
          if (gb) (*gb)[j] += g * av[i];
          break;
      }
    }
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

thread_local TopKMarginProbe* active_probe = nullptr;

}  // namespace

Array matmul(const Array& a, const Array& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  check_finite(a, "matmul");
  check_finite(b, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& av = input_value(self, 0);
    const auto& bv = input_value(self, 1);
    const auto& g = self.grad;
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = bv.data() + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = av[i * k + p];
          double* gbrow = gb->data() + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

Array add_bias(const Array& x, const Array& bias) {
  require_rank(x, 2, "add_bias");
  if (row_vector_width(bias) != x.dim(1)) mismatch("add_bias", x, bias);
  return binary(x, bias, Binary::Add, "add_bias");
}

Array add(const Array& a, const Array& b) { return binary(a, b, Binary::Add, "add"); }
Array sub(const Array& a, const Array& b) { return binary(a, b, Binary::Sub, "sub"); }
Array mul(const Array& a, const Array& b) { return binary(a, b, Binary::Mul, "mul"); }

Array scale(const Array& x, double factor) {
  return unary(x, "scale", [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Array add_scalar(const Array& x, double value) {
  return unary(x, "add_scalar", [value](double v) { return v + value; },
               [](double, double) { return 1.0; });
}

Array concat_cols(const Array& a, const Array& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) mismatch("concat_cols", a, b);
  check_finite(a, "concat_cols");
  check_finite(b, "concat_cols");
  const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> out(n * (p + q));
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.begin() + i * p, p, out.begin() + i * (p + q));
    std::copy_n(bv.begin() + i * q, q, out.begin() + i * (p + q) + p);
  }
  return make_result({n, p + q}, std::move(out), {a, b}, [n, p, q](Node& self) {
    auto* ga = input_grad(self, 0);
    auto* gb = input_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * (p + q);
      if (ga)
        for (std::size_t j = 0; j < p; ++j) (*ga)[i * p + j] += g[j];
      if (gb)
        for (std::size_t j = 0; j < q; ++j) (*gb)[i * q + j] += g[p + j];
    }
  });
}

Array sigmoid(const Array& x) {
  return unary(
      x, "sigmoid",
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Array gelu(const Array& x) {
  return unary(x, "gelu", [](double v) { return v * normal_cdf(v); },
               [](double v, double) { return normal_cdf(v) + v * normal_pdf(v); });
}

Array row_mean(const Array& x) {
  require_rank(x, 2, "row_mean");
  check_finite(x, "row_mean");
  const std::size_t n = x.dim(0), m = x.dim(1);
  auto xv = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::accumulate(xv.begin() + i * m, xv.begin() + (i + 1) * m, 0.0) / static_cast<double>(m);
  }
  return make_result({n, 1}, std::move(out), {x}, [n, m](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i] / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) (*gx)[i * m + j] += g;
    }
  });
}

Array row_var(const Array& x) {
  require_rank(x, 2, "row_var");
  check_finite(x, "row_var");
  const std::size_t n = x.dim(0), m = x.dim(1);
  auto xv = x.data();
  std::vector<double> out(n), means(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * m;
    const double mu = std::accumulate(row, row + m, 0.0) / static_cast<double>(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += (row[j] - mu) * (row[j] - mu);
    means[i] = mu;
    out[i] = acc / static_cast<double>(m);
  }
  return make_result({n, 1}, std::move(out), {x}, [n, m, means = std::move(means)](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xv = input_value(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = 2.0 * self.grad[i] / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) (*gx)[i * m + j] += g * (xv[i * m + j] - means[i]);
    }
  });
}

Array sum(const Array& x) {
  check_finite(x, "sum");
  auto xv = x.data();
  double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_result({1}, {total}, {x}, [](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (double& g : *gx) g += self.grad[0];
  });
}

Array mean(const Array& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Array layer_norm(const Array& x, const Array& gamma, const Array& beta, double eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (row_vector_width(gamma) != d) mismatch("layer_norm", x, gamma);
  if (row_vector_width(beta) != d) mismatch("layer_norm", x, beta);
  if (!(eps > 0.0)) {
    throw PreconditionError("layer_norm: eps must be positive (got " + std::to_string(eps) +
                            "); zero-variance rows would divide by zero");
  }
  check_finite(x, "layer_norm");
  check_finite(gamma, "layer_norm");
  check_finite(beta, "layer_norm");
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  std::vector<double> xhat(n * d), rstd(n), out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    const double mu = std::accumulate(row, row + d, 0.0) / static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * rstd[i];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }
  return make_result(
      {n, d}, std::move(out), {x, gamma, beta},
      [n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& gv = input_value(self, 1);
        auto* gx = input_grad(self, 0);
        auto* gg = input_grad(self, 1);
        auto* gb = input_grad(self, 2);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* g = self.grad.data() + i * d;
          const double* xh = xhat.data() + i * d;
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dy = g[j] * gv[j];
            sum_dy += dy;
            sum_dy_xh += dy * xh[j];
            if (gg) (*gg)[j] += g[j] * xh[j];
            if (gb) (*gb)[j] += g[j];
          }
          if (gx) {
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = g[j] * gv[j];
              (*gx)[i * d + j] += rstd[i] * (dy - inv_d * sum_dy - xh[j] * inv_d * sum_dy_xh);
            }
          }
        }
      });
}

std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k) {
  const std::size_t m = row.size();
  if (k == 0 || k > m) {
    throw PreconditionError("topk_indices: need 1 <= k <= M, got k=" + std::to_string(k) +
                            ", M=" + std::to_string(m));
  }
  for (double v : row) {
    if (!std::isfinite(v)) throw NonFiniteError("topk_indices: non-finite score");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable on index: equal scores keep ascending index order.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  if (active_probe && k < m) active_probe->record(row[order[k - 1]] - row[order[k]]);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<std::vector<std::size_t>> topk_rows(const Array& scores, std::size_t k) {
  require_rank(scores, 2, "topk_rows");
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  std::vector<std::vector<std::size_t>> result;
  result.reserve(n);
  auto sv = scores.data();
  for (std::size_t i = 0; i < n; ++i) result.push_back(topk_indices(sv.subspan(i * m, m), k));
  return result;
}

Array masked_softmax_rows(const Array& logits, const std::vector<std::vector<std::size_t>>& selected) {
  require_rank(logits, 2, "masked_softmax_rows");
  check_finite(logits, "masked_softmax_rows");
  const std::size_t n = logits.dim(0), m = logits.dim(1);
  if (selected.size() != n) {
    throw ShapeError("masked_softmax_rows: " + std::to_string(selected.size()) +
                     " selection sets for logits of shape " + shape_to_string(logits.shape()));
  }
  auto lv = logits.data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sel = selected[i];
    if (sel.empty()) {
      throw PreconditionError("masked_softmax_rows: empty selection for row " + std::to_string(i));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j : sel) {
      if (j >= m) {
        throw PreconditionError("masked_softmax_rows: index " + std::to_string(j) +
                                " outside [0, " + std::to_string(m) + ")");
      }
      mx = std::max(mx, lv[i * m + j]);
    }
    double z = 0.0;
    for (std::size_t j : sel) z += std::exp(lv[i * m + j] - mx);
    for (std::size_t j : sel) out[i * m + j] = std::exp(lv[i * m + j] - mx) / z;
  }
  return make_result({n, m}, std::move(out), {logits}, [n, m, selected](Node& self) {
    auto* gl = input_grad(self, 0);
    if (!gl) return;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j : selected[i]) dot += self.grad[i * m + j] * self.value[i * m + j];
      for (std::size_t j : selected[i]) {
        (*gl)[i * m + j] += self.value[i * m + j] * (self.grad[i * m + j] - dot);
      }
    }
  });
}

Array stack_layers(const std::vector<Array>& layers) {
  if (layers.empty()) throw ShapeError("stack_layers: no layers");
  for (const auto& layer : layers) {
    require_rank(layer, 2, "stack_layers");
    if (layer.shape() != layers.front().shape()) mismatch("stack_layers", layers.front(), layer);
    check_finite(layer, "stack_layers");
  }
  const std::size_t l = layers.front().dim(0), d = layers.front().dim(1), m = layers.size();
  std::vector<double> out(l * m * d);
  for (std::size_t i = 0; i < m; ++i) {
    auto v = layers[i].data();
    for (std::size_t t = 0; t < l; ++t) std::copy_n(v.begin() + t * d, d, out.begin() + (t * m + i) * d);
  }
  return make_result({l, m, d}, std::move(out), layers, [l, m, d](Node& self) {
    for (std::size_t i = 0; i < m; ++i) {
      auto* g = input_grad(self, i);
      if (!g) continue;
      for (std::size_t t = 0; t < l; ++t)
        for (std::size_t c = 0; c < d; ++c) (*g)[t * d + c] += self.grad[(t * m + i) * d + c];
    }
  });
}

Array layer_slice(const Array& stacked, std::size_t index) {
  require_rank(stacked, 3, "layer_slice");
  const std::size_t l = stacked.dim(0), m = stacked.dim(1), d = stacked.dim(2);
  if (index >= m) throw ShapeError("layer_slice: index " + std::to_string(index) + " out of range");
  auto v = stacked.data();
  std::vector<double> out(l * d);
  for (std::size_t t = 0; t < l; ++t) std::copy_n(v.begin() + (t * m + index) * d, d, out.begin() + t * d);
  return make_result({l, d}, std::move(out), {stacked}, [l, m, d, index](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t c = 0; c < d; ++c) (*g)[(t * m + index) * d + c] += self.grad[t * d + c];
  });
}

Array weighted_layer_sum(const Array& stacked, const Array& weights) {
  require_rank(stacked, 3, "weighted_layer_sum");
  require_rank(weights, 2, "weighted_layer_sum");
  const std::size_t l = stacked.dim(0), m = stacked.dim(1), d = stacked.dim(2);
  if (weights.dim(0) != l || weights.dim(1) != m) mismatch("weighted_layer_sum", stacked, weights);
  check_finite(stacked, "weighted_layer_sum");
  check_finite(weights, "weighted_layer_sum");
  auto sv = stacked.data();
  auto wv = weights.data();
  std::vector<double> out(l * d, 0.0);
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      const double w = wv[t * m + i];
      if (w == 0.0) continue;
      const double* src = sv.data() + (t * m + i) * d;
      for (std::size_t c = 0; c < d; ++c) out[t * d + c] += w * src[c];
    }
  }
  return make_result({l, d}, std::move(out), {stacked, weights}, [l, m, d](Node& self) {
    const auto& sv = input_value(self, 0);
    const auto& wv = input_value(self, 1);
    auto* gs = input_grad(self, 0);
    auto* gw = input_grad(self, 1);
    for (std::size_t t = 0; t < l; ++t) {
      const double* g = self.grad.data() + t * d;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t base = (t * m + i) * d;
        if (gs) {
          const double w = wv[t * m + i];
          for (std::size_t c = 0; c < d; ++c) (*gs)[base + c] += w * g[c];
        }
        if (gw) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) acc += g[c] * sv[base + c];
          (*gw)[t * m + i] += acc;
        }
      }
    }
  });
}

Array mean_over_layers(const Array& stacked) {
  require_rank(stacked, 3, "mean_over_layers");
  check_finite(stacked, "mean_over_layers");
  const std::size_t l = stacked.dim(0), m = stacked.dim(1), d = stacked.dim(2);
  const double w = 1.0 / static_cast<double>(m);
  auto sv = stacked.data();
  std::vector<double> out(l * d, 0.0);
  for (std::size_t t = 0; t < l; ++t)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < d; ++c) out[t * d + c] += w * sv[(t * m + i) * d + c];
  return make_result({l, d}, std::move(out), {stacked}, [l, m, d, w](Node& self) {
    auto* gs = input_grad(self, 0);
    if (!gs) return;
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < d; ++c) (*gs)[(t * m + i) * d + c] += w * self.grad[t * d + c];
  });
}

Array segment_mean_rows(const Array& x, std::size_t segment_len) {
  require_rank(x, 2, "segment_mean_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (segment_len == 0 || n % segment_len != 0) {
    throw ShapeError("segment_mean_rows: " + std::to_string(n) + " rows not divisible into segments of " +
                     std::to_string(segment_len));
  }
  check_finite(x, "segment_mean_rows");
  const std::size_t segments = n / segment_len;
  const double w = 1.0 / static_cast<double>(segment_len);
  auto xv = x.data();
  std::vector<double> means(segments * d, 0.0), out(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) means[(r / segment_len) * d + c] += w * xv[r * d + c];
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(means.begin() + (r / segment_len) * d, d, out.begin() + r * d);
  return make_result({n, d}, std::move(out), {x}, [n, d, segment_len, segments, w](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    std::vector<double> seg_grad(segments * d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) seg_grad[(r / segment_len) * d + c] += self.grad[r * d + c];
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) (*gx)[r * d + c] += w * seg_grad[(r / segment_len) * d + c];
  });
}

Array gather_columns(const Array& x, const std::vector<std::size_t>& column) {
  require_rank(x, 2, "gather_columns");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (column.size() != n) {
    throw ShapeError("gather_columns: " + std::to_string(column.size()) + " indices for " +
                     shape_to_string(x.shape()));
  }
  check_finite(x, "gather_columns");
  auto xv = x.data();
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (column[r] >= m) throw ShapeError("gather_columns: column index out of range");
    out[r] = xv[r * m + column[r]];
  }
  return make_result({n, 1}, std::move(out), {x}, [m, column](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < column.size(); ++r) (*gx)[r * m + column[r]] += self.grad[r];
  });
}

TopKMarginProbe::TopKMarginProbe()
    : min_margin_(std::numeric_limits<double>::infinity()), previous_(active_probe) {
  active_probe = this;
}

TopKMarginProbe::~TopKMarginProbe() { active_probe = previous_; }

void TopKMarginProbe::record(double margin) {
  min_margin_ = std::min(min_margin_, margin);
  if (previous_) previous_->record(margin);
}

}  // namespace georoute
