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

#include <string>
#include <vector>

#include "parallax/core/random.hpp"
#include "parallax/core/tensor.hpp"

namespace parallax {

template <typename Scalar>
struct NamedTensor {
    std::string name;
    Tensor<Scalar> tensor;
};

/// Ordered registry of a model's learnable tensors. Layers keep handles that
/// share storage with the entries here, so optimizers and checkpoints work on
/// the store alone.
template <typename Scalar>
class ParamStore {
public:
    Tensor<Scalar> add(const std::string& name, Tensor<Scalar> tensor) {
        for (const auto& e : entries_) {
            if (e.name == name) throw UsageError("duplicate parameter name: " + name);
        }
        tensor.set_requires_grad(true);
        entries_.push_back({name, tensor});
        return tensor;
    }

    Tensor<Scalar> zeros(const std::string& name, Shape shape) { return add(name, Tensor<Scalar>::zeros(std::move(shape))); }
    Tensor<Scalar> ones(const std::string& name, Shape shape) { return add(name, Tensor<Scalar>::ones(std::move(shape))); }

    Tensor<Scalar> truncated_normal(const std::string& name, Shape shape, Rng& rng, double stddev) {
        const Index n = parallax::numel(shape);
        Vector<Scalar> v(n);
        for (Index i = 0; i < n; ++i) v(i) = static_cast<Scalar>(rng.truncated_normal(stddev));
        return add(name, Tensor<Scalar>::from_data(std::move(shape), std::move(v)));
    }

    const std::vector<NamedTensor<Scalar>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const Tensor<Scalar>& at(const std::string& name) const {
        for (const auto& e : entries_) {
            if (e.name == name) return e.tensor;
        }
        throw UsageError("unknown parameter: " + name);
    }

    Index scalar_count() const {
        Index n = 0;
        for (const auto& e : entries_) n += e.tensor.numel();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    std::vector<Tensor<Scalar>> tensors() const {
        std::vector<Tensor<Scalar>> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.tensor);
        return out;
    }

    // Sets every parameter to zero (test hook for identity-path checks).
    void fill_zero() {
        for (auto& e : entries_) e.tensor.data().setZero();
    }

private:
    std::vector<NamedTensor<Scalar>> entries_;
};

}  // namespace parallax
