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

// Finite-difference workloads shared by the unit and acceptance suites.

#include <cstdint>
#include <utility>
#include <vector>

#include "parallax/core/gradcheck.hpp"
#include "parallax/core/ops.hpp"
#include "test_util.hpp"

namespace parallax::testing {

// Random input kept at least 0.1 away from the kinks of abs/relu/leaky_relu.
template <typename S>
Tensor<S> kink_free_input(std::uint64_t seed) {
    Tensor<S> x = random_tensor<S>({4, 6}, seed);
    x.data() = x.data().unaryExpr([](S v) { return v < 0 ? v - S(0.1) : v + S(0.1); });
    return x;
}

// Every differentiable primitive, as a scalar function of one input, in both precisions.
template <typename S>
std::vector<std::pair<const char*, ScalarFunction<S>>> primitive_cases(std::uint64_t seed) {
    using T = Tensor<S>;
    const T w = random_tensor<S>({6, 5}, seed + 100, 0.5);
    const T weights = random_tensor<S>({5, 6}, seed + 200, 0.5);
    const T other = random_tensor<S>({4, 6}, seed + 300);
    const T gain = random_tensor<S>({6}, seed + 400);
    const T bias = random_tensor<S>({6}, seed + 500);
    const T kernel = random_tensor<S>({2, 2, 3, 3}, seed + 600, 0.5);
    const T kbias = random_tensor<S>({2}, seed + 700);
    const std::vector<int> labels{0, 3, 4, 1};
    auto probe = [](const T& y, std::uint64_t s) { return sum(mul(y, random_tensor<S>(y.shape(), s, 0.1))); };
    return {
        {"matmul", [=](const T& x) { return probe(matmul(x, w), seed); }},
        {"batched matmul", [=](const T& x) { return probe(matmul(reshape(x, {2, 2, 6}), transpose_last2(reshape(x, {2, 2, 6}))), seed); }},
        {"add", [=](const T& x) { return probe(add(x, other), seed); }},
        {"add broadcast", [=](const T& x) { return probe(add(x, bias), seed); }},
        {"sub", [=](const T& x) { return probe(sub(other, x), seed); }},
        {"mul", [=](const T& x) { return probe(mul(x, x), seed); }},
        {"mul general broadcast", [=](const T& x) { return probe(mul(reshape(x, {4, 1, 6}), reshape(other, {1, 4, 6})), seed); }},
        {"scale/add_scalar", [=](const T& x) { return probe(add_scalar(scale(x, S(1.7)), S(0.3)), seed); }},
        {"square", [=](const T& x) { return probe(square(x), seed); }},
        {"abs", [=](const T& x) { return probe(abs(x), seed); }},
        {"mean", [=](const T& x) { return mean(square(x)); }},
        {"mean_lastdim", [=](const T& x) { return probe(mean_lastdim(square(x)), seed); }},
        {"permute", [=](const T& x) { return probe(permute(reshape(x, {2, 2, 3, 2}), {2, 0, 3, 1}), seed); }},
        {"concat/slice", [=](const T& x) { return probe(concat<S>({slice(x, 1, 1, 4), square(x)}, 1), seed); }},
        {"softmax", [=](const T& x) { return probe(softmax_lastdim(x), seed); }},
        {"cross_entropy", [=](const T& x) { return cross_entropy(matmul(x, w), labels); }},
        {"layer_norm", [=](const T& x) { return probe(layer_norm(x, gain, bias, S(1e-5)), seed); }},
        {"gelu", [=](const T& x) { return probe(gelu(x), seed); }},
        {"relu", [=](const T& x) { return probe(relu(x), seed); }},
        {"leaky_relu", [=](const T& x) { return probe(leaky_relu(x, S(0.2)), seed); }},
        {"tanh", [=](const T& x) { return probe(tanh(x), seed); }},
        {"conv2d", [=](const T& x) { return probe(conv2d(reshape(x, {1, 2, 3, 4}), kernel, kbias, 1, 1), seed); }},
        {"conv2d strided", [=](const T& x) { return probe(conv2d(reshape(x, {1, 2, 4, 3}), kernel, kbias, 2, 1), seed); }},
        {"weights", [=](const T& x) { return probe(matmul(weights, transpose_last2(x)), seed); }},
    };
}

}  // namespace parallax::testing
