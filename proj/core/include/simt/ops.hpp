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

#pragma once

#include <cstdint>
#include <span>

#include "simt/rng.hpp"
#include "simt/tensor.hpp"

// Differentiable operations over Tensor. Only what the transformer needs:
// broadcasting is limited to a 2-D right operand in matmul and a 1-D bias.
namespace simt::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// x + mask where mask is a constant of the same shape (typically 0 / -inf).
/// No gradient flows into the mask.
Tensor add_mask(const Tensor& x, const Tensor& mask);

Tensor relu(const Tensor& x);

enum class Transpose { kNo, kYes };

/// a[..., m, k] x b[k, n] or a[..., m, k] x b[..., k, n] with matching leading
/// extents. With transpose_b the right operand is read as [..., n, k].
Tensor matmul(const Tensor& a, const Tensor& b, Transpose transpose_b = Transpose::kNo);

/// Max-subtracted softmax along `axis` (negative counts from the end).
Tensor softmax(const Tensor& x, int axis = -1);

/// Normalizes over the last axis, then applies gain and bias of that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Row gather from table[V, d]; the result has shape leading + [d].
Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& leading);

Tensor reshape(const Tensor& x, Shape shape);

/// [a, b, c, d] -> [a, c, b, d]; used to split and merge attention heads.
Tensor swap_axes12(const Tensor& x);

/// Rows [begin, end) along axis 1 of a rank-3 tensor.
Tensor slice_axis1(const Tensor& x, std::size_t begin, std::size_t end);

/// Inverted dropout. Identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

Tensor sum(const Tensor& x);

/// Mean over positions whose target != ignore_id of the label-smoothed
/// negative log-likelihood: -(1-eps) log p[y] - (eps/V) sum_v log p[v].
/// logits is [N, V] (or any shape whose last extent is V) with one target per row.
Tensor cross_entropy_label_smoothed(const Tensor& logits, std::span<const int> targets,
                                    double epsilon, int ignore_id = -1);

}  // namespace simt::ops
