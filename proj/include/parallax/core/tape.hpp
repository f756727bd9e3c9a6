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

#include <atomic>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "parallax/core/tensor.hpp"

namespace parallax {

template <typename Scalar>
class Tape;

// View handed to a backward rule: the adjoint of the output and accumulation
// targets for each input (null when that input needs no gradient).
template <typename Scalar>
class BackwardContext {
public:
    BackwardContext(const Vector<Scalar>& out_grad, std::vector<Vector<Scalar>*> in_grads,
                    const std::vector<std::shared_ptr<TensorImpl<Scalar>>>& inputs,
                    const TensorImpl<Scalar>& output)
        : out_grad_(out_grad), in_grads_(std::move(in_grads)), inputs_(inputs), output_(output) {}

    const Vector<Scalar>& out_grad() const { return out_grad_; }
    Vector<Scalar>* in_grad(std::size_t i) const { return in_grads_[i]; }
    const TensorImpl<Scalar>& input(std::size_t i) const { return *inputs_[i]; }
    const TensorImpl<Scalar>& output() const { return output_; }

private:
    const Vector<Scalar>& out_grad_;
    std::vector<Vector<Scalar>*> in_grads_;
    const std::vector<std::shared_ptr<TensorImpl<Scalar>>>& inputs_;
    const TensorImpl<Scalar>& output_;
};

/// Ordered record of differentiable operations. Constructing a Tape makes it
/// the current tape of the calling thread for its scalar type; destruction
/// restores the previous one. Records are appended in execution order, so the
/// list is topologically sorted by construction.
template <typename Scalar>
class Tape {
public:
    using BackwardFn = std::function<void(BackwardContext<Scalar>&)>;

    Tape() : id_(next_id()), previous_(current_) { current_ = this; }
    ~Tape() { current_ = previous_; }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return current_; }

    // Replaces the thread's current tape, returning the old one.
    static Tape* exchange_current(Tape* tape) {
        Tape* old = current_;
        current_ = tape;
        return old;
    }

    std::uint64_t id() const { return id_; }
    std::size_t size() const { return records_.size(); }

    bool tracks(const Tensor<Scalar>& t) const {
        return t.requires_grad() || t.impl().tape_id == id_;
    }

    void record(Tensor<Scalar>& output, const std::vector<Tensor<Scalar>>& inputs, BackwardFn fn) {
        Record rec;
        rec.inputs.reserve(inputs.size());
        for (const auto& in : inputs) rec.inputs.push_back(in.impl_ptr());
        rec.output = output.impl_ptr();
        rec.backward = std::move(fn);
        output.impl().tape_id = id_;
        output.impl().tape_node = static_cast<Index>(records_.size());
        records_.push_back(std::move(rec));
    }

    /// Seeds d(root)=1 and walks the records from root back to the start,
    /// accumulating into leaf grad buffers. Leaf grads are added to, never
    /// overwritten.
    void backward(const Tensor<Scalar>& root) {
        if (root.numel() != 1 || root.rank() != 0) {
            throw UsageError("backward requires a scalar root, got shape " + to_string(root.shape()));
        }
        if (root.impl().tape_id != id_) throw UsageError("backward root is not on this tape");

        const auto root_node = static_cast<std::size_t>(root.impl().tape_node);
        adjoints_.assign(root_node + 1, Vector<Scalar>());
        adjoints_[root_node] = Vector<Scalar>::Ones(1);

        for (std::size_t n = root_node + 1; n-- > 0;) {
            if (adjoints_[n].size() == 0) continue;  // not reachable from root
            Record& rec = records_[n];
            std::vector<Vector<Scalar>*> in_grads(rec.inputs.size(), nullptr);
            for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
                if (!rec.inputs[i]) continue;
                TensorImpl<Scalar>& in = *rec.inputs[i];
                if (in.tape_id == id_) {
                    auto& adj = adjoints_[static_cast<std::size_t>(in.tape_node)];
                    if (adj.size() == 0) adj = Vector<Scalar>::Zero(in.data.size());
                    in_grads[i] = &adj;
                } else if (in.requires_grad) {
                    if (!in.has_grad) {
                        in.grad = Vector<Scalar>::Zero(in.data.size());
                        in.has_grad = true;
                    }
                    in_grads[i] = &in.grad;
                }
            }
            BackwardContext<Scalar> ctx(adjoints_[n], std::move(in_grads), rec.inputs, *rec.output);
            rec.backward(ctx);
            adjoints_[n] = Vector<Scalar>();
        }
        adjoints_.clear();
    }

    void clear() {
        records_.clear();
        adjoints_.clear();
    }

private:
    struct Record {
        std::vector<std::shared_ptr<TensorImpl<Scalar>>> inputs;
        std::shared_ptr<TensorImpl<Scalar>> output;
        BackwardFn backward;
    };

    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    inline static thread_local Tape* current_ = nullptr;

    std::uint64_t id_;
    Tape* previous_;
    std::vector<Record> records_;
    std::vector<Vector<Scalar>> adjoints_;
};

// Suspends recording for its lifetime (inference, finite differences).
template <typename Scalar>
class NoGradScope {
public:
    NoGradScope() : saved_(Tape<Scalar>::exchange_current(nullptr)) {}
    ~NoGradScope() { Tape<Scalar>::exchange_current(saved_); }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape<Scalar>* saved_;
};

// Records `fn` on the current tape when any input is tracked by it; otherwise
// the output stays a plain constant.
template <typename Scalar>
void record(Tensor<Scalar>& output, const std::vector<Tensor<Scalar>>& inputs,
            typename Tape<Scalar>::BackwardFn fn) {
    Tape<Scalar>* tape = Tape<Scalar>::current();
    if (tape == nullptr) return;
    for (const auto& in : inputs) {
        if (in.defined() && tape->tracks(in)) {
            tape->record(output, inputs, std::move(fn));
            return;
        }
    }
}

template <typename Scalar>
void backward(const Tensor<Scalar>& root) {
    Tape<Scalar>* tape = Tape<Scalar>::current();
    if (tape == nullptr) throw UsageError("backward called with no active tape");
    tape->backward(root);
}

}  // namespace parallax
