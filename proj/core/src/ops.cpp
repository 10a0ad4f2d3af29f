// Copyright 2026 The simt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simt/errors.hpp"

namespace simt::ops {

namespace {

using detail::Node;

// Wraps a freshly computed value into a graph node. The tape is recorded only
// when grad mode is on and at least one input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const Tensor* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor* in : inputs) node->parents.push_back(in->node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

bool wants_grad(const Node& parent) { return parent.requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

// C[m,n] += A[m,k] * B[k,n]. Each output sums over k in ascending order, so a
// row's result does not depend on how many other rows are in the call, and
// trailing zero terms leave sums bit-identical.
void gemm_nn(const double* __restrict__ a, const double* __restrict__ b, double* __restrict__ c, std::size_t m,
             std::size_t k, std::size_t n) {
  // Four rank-1 updates per pass; each c[i][j] still accumulates p in order.
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict__ c_row = c + i * n;
    const double* a_row = a + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double a0 = a_row[p], a1 = a_row[p + 1], a2 = a_row[p + 2], a3 = a_row[p + 3];
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j) {
        double v = c_row[j];
        v += a0 * b0[j];
        v += a1 * b1[j];
        v += a2 * b2[j];
        v += a3 * b3[j];
        c_row[j] = v;
      }
    }
    for (; p < k; ++p) {
      const double a_ip = a_row[p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T, via a transposed copy of B.
void gemm_nt(const double* __restrict__ a, const double* __restrict__ b, double* __restrict__ c, std::size_t m,
             std::size_t k, std::size_t n) {
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, k, n);
}

// C[k,n] += A[m,k]^T * B[m,n]
void gemm_tn(const double* __restrict__ a, const double* __restrict__ b, double* __restrict__ c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    const double* b_row = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = a_row[p];
      double* __restrict__ c_row = c + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int resolved = axis < 0 ? axis + r : axis;
  if (resolved < 0 || resolved >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(resolved);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), "add", {&a, &b}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (!wants_grad(*parent)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) parent->grad[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), "mul", {&a, &b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (wants_grad(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (wants_grad(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), "scale", {&x}, [factor](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = bias.size();
  if (bias.rank() != 1 || x.shape().back() != n) {
    throw DimensionError("add_bias: input " + shape_string(x.shape()) + " and bias " +
                         shape_string(bias.shape()) + " disagree");
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return make_result(x.shape(), std::move(out), "add_bias", {&x, &bias}, [n](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (wants_grad(px)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (wants_grad(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i % n] += self.grad[i];
    }
  });
}

Tensor add_mask(const Tensor& x, const Tensor& mask) {
  require_same_shape(x, mask, "add_mask");
  std::vector<double> out(x.size());
  auto xv = x.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + mv[i];
  return make_result(x.shape(), std::move(out), "add_mask", {&x}, [](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), "relu", {&x}, [](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px.value[i] > 0.0) px.grad[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b, Transpose transpose_b) {
  const bool tb = transpose_b == Transpose::kYes;
  auto mismatch = [&] {
    return DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                          shape_string(b.shape()) + (tb ? " (transposed)" : ""));
  };
  if (a.rank() < 2 || b.rank() < 2) throw mismatch();
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t bk = tb ? b.dim(b.rank() - 1) : b.dim(b.rank() - 2);
  const std::size_t n = tb ? b.dim(b.rank() - 2) : b.dim(b.rank() - 1);
  if (bk != k) throw mismatch();

  const bool shared_b = b.rank() == 2;
  if (!shared_b) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      throw mismatch();
    }
  }
  const std::size_t batch = a.size() / (m * k);
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);

  std::vector<double> out(batch * m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  if (shared_b) {
    // Leading dims fold into rows against a single right operand.
    if (tb) {
      gemm_nt(av, bv, out.data(), batch * m, k, n);
    } else {
      gemm_nn(av, bv, out.data(), batch * m, k, n);
    }
  } else {
    for (std::size_t s = 0; s < batch; ++s) {
      if (tb) {
        gemm_nt(av + s * m * k, bv + s * n * k, out.data() + s * m * n, m, k, n);
      } else {
        gemm_nn(av + s * m * k, bv + s * k * n, out.data() + s * m * n, m, k, n);
      }
    }
  }

  return make_result(
      std::move(out_shape), std::move(out), "matmul", {&a, &b},
      [m, k, n, batch, shared_b, tb](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double* g = self.grad.data();
        const std::size_t rows = shared_b ? batch * m : m;
        const std::size_t reps = shared_b ? 1 : batch;
        for (std::size_t s = 0; s < reps; ++s) {
          const double* gs = g + s * rows * n;
          const double* as = pa.value.data() + s * rows * k;
          const std::size_t b_off = shared_b ? 0 : s * k * n;
          const double* bs = pb.value.data() + b_off;
          if (wants_grad(pa)) {
            double* ga = pa.grad.data() + s * rows * k;
            if (tb) {
              gemm_nn(gs, bs, ga, rows, n, k);  // dA = dC * B, B is [n, k]
            } else {
              gemm_nt(gs, bs, ga, rows, n, k);  // dA = dC * B^T, B is [k, n]
            }
          }
          if (wants_grad(pb)) {
            double* gb = pb.grad.data() + b_off;
            if (tb) {
              gemm_tn(gs, as, gb, rows, n, k);  // dB = dC^T * A
            } else {
              gemm_tn(as, gs, gb, rows, k, n);  // dB = A^T * dC
            }
          }
        }
      });
}

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  const std::size_t extent = x.dim(ax);
  std::size_t inner = 1;
  for (std::size_t d = ax + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const std::size_t outer = x.size() / (extent * inner);

  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * extent * inner + in;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < extent; ++e) peak = std::max(peak, xv[base + e * inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = std::exp(xv[base + e * inner] - peak);
        out[base + e * inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < extent; ++e) out[base + e * inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {&x},
                     [outer, extent, inner](Node& self) {
                       Node& px = *self.parents[0];
                       const auto& y = self.value;
                       const auto& gy = self.grad;
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t in = 0; in < inner; ++in) {
                           const std::size_t base = o * extent * inner + in;
                           double dot = 0.0;
                           for (std::size_t e = 0; e < extent; ++e) {
                             dot += gy[base + e * inner] * y[base + e * inner];
                           }
                           for (std::size_t e = 0; e < extent; ++e) {
                             const std::size_t i = base + e * inner;
                             px.grad[i] += y[i] * (gy[i] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.shape().back();
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: input " + shape_string(x.shape()) + " vs gain " +
                         shape_string(gain.shape()) + " / bias " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.size() / n;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mean) * rstd[r];
      xhat[r * n + j] = h;
      out[r * n + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), "layer_norm", {&x, &gain, &bias},
      [n, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * n;
          const double* h = xhat.data() + r * n;
          if (wants_grad(pg) || wants_grad(pb)) {
            for (std::size_t j = 0; j < n; ++j) {
              if (wants_grad(pg)) pg.grad[j] += gy[j] * h[j];
              if (wants_grad(pb)) pb.grad[j] += gy[j];
            }
          }
          if (!wants_grad(px)) continue;
          double sum_d = 0.0;
          double sum_dh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            dxhat[j] = gy[j] * pg.value[j];
            sum_d += dxhat[j];
            sum_dh += dxhat[j] * h[j];
          }
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            px.grad[r * n + j] += rstd[r] * (dxhat[j] - inv_n * sum_d - h[j] * inv_n * sum_dh);
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& leading) {
  if (table.rank() != 2) {
    throw DimensionError("embedding: table must be rank 2, got " + shape_string(table.shape()));
  }
  if (shape_size(leading) != ids.size()) {
    throw DimensionError("embedding: " + std::to_string(ids.size()) + " ids for leading shape " +
                         shape_string(leading));
  }
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw InputError("embedding: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, out.begin() + i * d);
  }
  Shape shape = leading;
  shape.push_back(d);
  std::vector<int> saved(ids.begin(), ids.end());
  return make_result(std::move(shape), std::move(out), "embedding", {&table},
                     [d, saved = std::move(saved)](Node& self) {
                       Node& pt = *self.parents[0];
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         double* dst = pt.grad.data() + static_cast<std::size_t>(saved[i]) * d;
                         const double* src = self.grad.data() + i * d;
                         for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&x}, [](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
  });
}

Tensor swap_axes12(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("swap_axes12 needs rank 4, got " + shape_string(x.shape()));
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2), d = x.dim(3);
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t l = 0; l < c; ++l)
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(((i * b + j) * c + l) * d), d,
                    out.begin() + static_cast<std::ptrdiff_t>(((i * c + l) * b + j) * d));
  return make_result({a, c, b, d}, std::move(out), "swap_axes12", {&x},
                     [a, b, c, d](Node& self) {
                       Node& px = *self.parents[0];
                       for (std::size_t i = 0; i < a; ++i)
                         for (std::size_t j = 0; j < b; ++j)
                           for (std::size_t l = 0; l < c; ++l) {
                             const double* src = self.grad.data() + ((i * c + l) * b + j) * d;
                             double* dst = px.grad.data() + ((i * b + j) * c + l) * d;
                             for (std::size_t e = 0; e < d; ++e) dst[e] += src[e];
                           }
                     });
}

Tensor slice_axis1(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 3 || begin >= end || end > x.dim(1)) {
    throw DimensionError("slice_axis1: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of " + shape_string(x.shape()));
  }
  const std::size_t a = x.dim(0), b = x.dim(1), d = x.dim(2);
  const std::size_t len = end - begin;
  std::vector<double> out(a * len * d);
  auto xv = x.values();
  for (std::size_t i = 0; i < a; ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((i * b + begin) * d), len * d,
                out.begin() + static_cast<std::ptrdiff_t>(i * len * d));
  return make_result({a, len, d}, std::move(out), "slice_axis1", {&x},
                     [a, b, d, begin, len](Node& self) {
                       Node& px = *self.parents[0];
                       for (std::size_t i = 0; i < a; ++i) {
                         const double* src = self.grad.data() + i * len * d;
                         double* dst = px.grad.data() + (i * b + begin) * d;
                         for (std::size_t e = 0; e < len * d; ++e) dst[e] += src[e];
                       }
                     });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_result(x.shape(), std::move(out), "dropout", {&x},
                     [mask = std::move(mask)](Node& self) {
                       Node& px = *self.parents[0];
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         px.grad[i] += self.grad[i] * mask[i];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result({1}, {total}, "sum", {&x}, [](Node& self) {
    Node& px = *self.parents[0];
    const double g = self.grad[0];
    for (auto& v : px.grad) v += g;
  });
}

Tensor cross_entropy_label_smoothed(const Tensor& logits, std::span<const int> targets,
                                    double epsilon, int ignore_id) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw UsageError("label smoothing must lie in [0, 1)");
  const std::size_t vocab = logits.shape().back();
  const std::size_t rows = logits.size() / vocab;
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(logits.shape()));
  }
  std::size_t counted = 0;
  for (int t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw InputError("cross_entropy: target id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    ++counted;
  }

  auto lv = logits.values();
  std::vector<double> probs(logits.size(), 0.0);
  double total = 0.0;
  const double smooth = epsilon / static_cast<double>(vocab);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const double* row = lv.data() + r * vocab;
    double peak = row[0];
    for (std::size_t v = 1; v < vocab; ++v) peak = std::max(peak, row[v]);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - peak);
    const double log_z = peak + std::log(z);
    double sum_logp = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      const double logp = row[v] - log_z;
      sum_logp += logp;
      probs[r * vocab + v] = std::exp(logp);
    }
    const double logp_target = row[static_cast<std::size_t>(targets[r])] - log_z;
    total += -(1.0 - epsilon) * logp_target - smooth * sum_logp;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  std::vector<int> saved(targets.begin(), targets.end());
  return make_result(
      {1}, {total / denom}, "cross_entropy", {&logits},
      [vocab, rows, epsilon, smooth, denom, ignore_id, saved = std::move(saved),
       probs = std::move(probs)](Node& self) {
        Node& pl = *self.parents[0];
        const double g = self.grad[0] / denom;
        for (std::size_t r = 0; r < rows; ++r) {
          if (saved[r] == ignore_id) continue;
          for (std::size_t v = 0; v < vocab; ++v) {
            double q = smooth;
            if (static_cast<int>(v) == saved[r]) q += 1.0 - epsilon;
            pl.grad[r * vocab + v] += g * (probs[r * vocab + v] - q);
          }
        }
      });
}

}  // namespace simt::ops
