// Copyright 2026 The Parallax Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <vector>

#include "parallax/core/tape.hpp"
#include "parallax/core/tensor.hpp"

// Differentiable primitives. Every function records its backward rule on the
// current tape when one of its inputs is tracked, and is a plain computation
// otherwise.
namespace parallax {

/// Batched matrix product over the last two axes. Leading (batch) axes
/// broadcast; a rank-2 right operand is applied to every row block of `a`.
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

// Elementwise with NumPy-style broadcasting.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar factor);
template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar value);
template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& x);

// Reductions. sum/mean return a rank-0 tensor.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> mean_lastdim(const Tensor<Scalar>& x);

// Layout. A single -1 in `shape` is inferred.
template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape);
template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const std::vector<int>& axes);
template <typename Scalar>
Tensor<Scalar> transpose_last2(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis);
template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& x, int axis, Index begin, Index end);

/// Softmax over the last axis, max-subtracted. Throws NumericError on
/// non-finite input.
template <typename Scalar>
Tensor<Scalar> softmax_lastdim(const Tensor<Scalar>& x);

/// Mean negative log-likelihood of `labels` under softmax(logits), logits [B,C].
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels);

/// (x - mean) / sqrt(var + eps) * gain + bias over the last axis, with
/// population variance. `gain` and `bias` may be undefined tensors, which
/// skips that part of the affine map.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, const Tensor<Scalar>& bias,
                          Scalar eps = Scalar(1e-5));

enum class Activation { gelu, relu, leaky_relu, tanh, identity };

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind, Scalar alpha = Scalar(0.2));

template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) { return activation(x, Activation::gelu); }
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) { return activation(x, Activation::relu); }
template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar alpha = Scalar(0.2)) {
    return activation(x, Activation::leaky_relu, alpha);
}
template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x) { return activation(x, Activation::tanh); }

Index conv_output_size(Index input, Index kernel, Index stride, Index pad);

/// 2-D cross-correlation with zero padding: x [B,C,H,W], w [O,C,k,k].
/// `bias` ([O]) may be undefined.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias, Index stride,
                      Index pad);

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, Index stride, Index pad) {
    return conv2d(x, w, Tensor<Scalar>(), stride, pad);
}

/// y = x · weight + bias over the last axis; weight [in,out], bias [out] or undefined.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
    Tensor<Scalar> y = matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mul(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& x, Scalar s) { return scale(x, s); }
template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& x) { return scale(x, s); }

// Losses used by the GAN objective.
template <typename Scalar>
Tensor<Scalar> l1_loss(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mean(abs(sub(a, b))); }

// Least-squares loss against a constant target.
template <typename Scalar>
Tensor<Scalar> mse_to_constant(const Tensor<Scalar>& x, Scalar target) { return mean(square(add_scalar(x, -target))); }

}  // namespace parallax
