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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "parallax/core/tape.hpp"
#include "parallax/core/tensor.hpp"

namespace parallax {

template <typename Scalar>
using ScalarFunction = std::function<Tensor<Scalar>(const Tensor<Scalar>&)>;

/// Compares tape gradients of a scalar-valued `f` against central differences
/// in every coordinate of every tensor in `wrt`. Tensors are perturbed in
/// place and restored. Returns max |analytic - numeric| / max(1, |numeric|).
template <typename Scalar>
Scalar check_gradients(const std::function<Tensor<Scalar>()>& f, std::vector<Tensor<Scalar>> wrt, Scalar h) {
    std::vector<bool> restore_flag;
    for (auto& t : wrt) {
        restore_flag.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.zero_grad();
    }
    {
        Tape<Scalar> tape;
        Tensor<Scalar> y = f();
        tape.backward(y);
    }
    std::vector<Vector<Scalar>> analytic;
    for (auto& t : wrt) analytic.push_back(t.has_grad() ? t.grad() : Vector<Scalar>::Zero(t.numel()));

    Scalar worst = 0;
    NoGradScope<Scalar> no_grad;
    for (std::size_t p = 0; p < wrt.size(); ++p) {
        auto& values = wrt[p].data();
        for (Index i = 0; i < values.size(); ++i) {
            const Scalar saved = values(i);
            values(i) = saved + h;
            const Scalar plus = f().item();
            values(i) = saved - h;
            const Scalar minus = f().item();
            values(i) = saved;
            const Scalar numeric = (plus - minus) / (Scalar(2) * h);
            const Scalar err = std::abs(analytic[p](i) - numeric) / std::max(Scalar(1), std::abs(numeric));
            if (!std::isfinite(err)) return std::numeric_limits<Scalar>::infinity();
            worst = std::max(worst, err);
        }
    }
    for (std::size_t p = 0; p < wrt.size(); ++p) {
        wrt[p].set_requires_grad(restore_flag[p]);
    }
    return worst;
}

template <typename Scalar>
Scalar finite_difference_check(const ScalarFunction<Scalar>& f, const Tensor<Scalar>& x, Scalar h) {
    Tensor<Scalar> leaf = x.detach();
    return check_gradients<Scalar>([&] { return f(leaf); }, {leaf}, h);
}

}  // namespace parallax
