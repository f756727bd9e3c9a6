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

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "parallax/core/errors.hpp"

namespace parallax {

using Index = std::int64_t;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Storage shared by all handles to one tensor. `grad` is meaningful only when
// `has_grad` is set, and only leaves with `requires_grad` ever get one.
template <typename Scalar>
struct TensorImpl {
    Shape shape;
    Vector<Scalar> data;
    Vector<Scalar> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::uint64_t tape_id = 0;  // 0: produced outside any tape
    Index tape_node = -1;
};

/// Handle to a dense row-major tensor. Copies share storage (like a
/// reference-counted array); use detach() for an independent copy.
template <typename Scalar>
class Tensor {
public:
    using value_type = Scalar;
    using Impl = TensorImpl<Scalar>;
    using VectorType = Vector<Scalar>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    static Tensor from_data(Shape shape, VectorType data) {
        if (parallax::numel(shape) != data.size()) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + to_string(shape));
        }
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->data = std::move(data);
        return Tensor(std::move(impl));
    }

    static Tensor from_values(Shape shape, std::initializer_list<Scalar> values) {
        VectorType data(static_cast<Index>(values.size()));
        Index i = 0;
        for (Scalar v : values) data(i++) = v;
        return from_data(std::move(shape), std::move(data));
    }

    static Tensor from_values(Shape shape, std::span<const Scalar> values) {
        VectorType data = Eigen::Map<const VectorType>(values.data(), static_cast<Index>(values.size()));
        return from_data(std::move(shape), std::move(data));
    }

    static Tensor full(Shape shape, Scalar value) {
        const Index n = parallax::numel(shape);
        return from_data(std::move(shape), VectorType::Constant(n, value));
    }

    static Tensor zeros(Shape shape) { return full(std::move(shape), Scalar(0)); }
    static Tensor ones(Shape shape) { return full(std::move(shape), Scalar(1)); }
    static Tensor scalar(Scalar value) { return full({}, value); }

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const { return impl_->shape; }
    Index rank() const { return static_cast<Index>(impl_->shape.size()); }
    Index numel() const { return impl_->data.size(); }

    // Negative axes count from the end.
    Index size(Index axis) const {
        const Index r = rank();
        if (axis < 0) axis += r;
        if (axis < 0 || axis >= r) {
            throw DimensionError("axis out of range for shape " + to_string(shape()));
        }
        return impl_->shape[static_cast<std::size_t>(axis)];
    }

    const VectorType& data() const { return impl_->data; }
    VectorType& data() { return impl_->data; }
    std::span<const Scalar> span() const { return {impl_->data.data(), static_cast<std::size_t>(numel())}; }

    Scalar item() const {
        if (numel() != 1) throw UsageError("item() requires a single-element tensor, got " + to_string(shape()));
        return impl_->data(0);
    }

    bool requires_grad() const { return impl_->requires_grad; }

    // Turning gradients off releases any existing grad buffer.
    Tensor& set_requires_grad(bool on) {
        if (on && impl_->tape_id != 0) throw UsageError("only leaf tensors can require grad");
        impl_->requires_grad = on;
        if (!on) {
            impl_->has_grad = false;
            impl_->grad.resize(0);
        }
        return *this;
    }

    bool has_grad() const { return impl_->has_grad; }

    const VectorType& grad() const {
        if (!impl_->has_grad) throw UsageError("tensor has no gradient");
        return impl_->grad;
    }

    VectorType& grad() {
        if (!impl_->has_grad) throw UsageError("tensor has no gradient");
        return impl_->grad;
    }

    // Allocates a zero gradient buffer when absent.
    VectorType& ensure_grad() {
        if (!impl_->requires_grad) throw UsageError("tensor does not require grad");
        if (!impl_->has_grad) {
            impl_->grad = VectorType::Zero(numel());
            impl_->has_grad = true;
        }
        return impl_->grad;
    }

    void zero_grad() {
        if (impl_->has_grad) impl_->grad.setZero();
    }

    bool is_leaf() const { return impl_->tape_id == 0; }
    bool on_tape() const { return impl_->tape_id != 0; }

    Tensor detach() const { return from_data(impl_->shape, impl_->data); }

    template <typename To>
    Tensor<To> cast() const {
        return Tensor<To>::from_data(impl_->shape, impl_->data.template cast<To>());
    }

    Impl& impl() const { return *impl_; }
    const std::shared_ptr<Impl>& impl_ptr() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

}  // namespace parallax
