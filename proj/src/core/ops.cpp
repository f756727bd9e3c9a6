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

#include "parallax/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace parallax {

Index numel(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Index conv_output_size(Index input, Index kernel, Index stride, Index pad) {
    if (stride <= 0 || kernel <= 0) throw DimensionError("conv kernel and stride must be positive");
    const Index span = input + 2 * pad - kernel;
    if (span < 0) return 0;
    return span / stride + 1;
}

namespace {

template <typename Scalar>
using Map = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMap = Eigen::Map<const RowMatrix<Scalar>>;

template <typename Scalar>
Tensor<Scalar> empty_like_shape(Shape shape) {
    const Index n = numel(shape);
    return Tensor<Scalar>::from_data(std::move(shape), Vector<Scalar>(n));
}

std::vector<Index> strides_of(const Shape& shape) {
    std::vector<Index> strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
    return strides;
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Offsets of each output element into the two operands under broadcasting.
struct BroadcastPlan {
    Shape out_shape;
    std::vector<Index> a_offset;
    std::vector<Index> b_offset;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    auto padded = [rank](const Shape& s) {
        Shape p(rank - s.size(), 1);
        p.insert(p.end(), s.begin(), s.end());
        return p;
    };
    const Shape pa = padded(a), pb = padded(b);
    BroadcastPlan plan;
    plan.out_shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
            throw DimensionError("cannot broadcast shapes " + to_string(a) + " and " + to_string(b));
        }
        plan.out_shape[i] = std::max(pa[i], pb[i]);
    }
    auto sa = strides_of(pa), sb = strides_of(pb);
    for (std::size_t i = 0; i < rank; ++i) {
        if (pa[i] == 1) sa[i] = 0;
        if (pb[i] == 1) sb[i] = 0;
    }
    const Index n = numel(plan.out_shape);
    plan.a_offset.resize(static_cast<std::size_t>(n));
    plan.b_offset.resize(static_cast<std::size_t>(n));
    std::vector<Index> idx(rank, 0);
    Index oa = 0, ob = 0;
    for (Index k = 0; k < n; ++k) {
        plan.a_offset[static_cast<std::size_t>(k)] = oa;
        plan.b_offset[static_cast<std::size_t>(k)] = ob;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < plan.out_shape[d]) break;
            oa -= sa[d] * idx[d];
            ob -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    return plan;
}

enum class BinaryKind { add, sub, mul };

template <typename Scalar>
Tensor<Scalar> binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, BinaryKind kind) {
    const Scalar b_sign = kind == BinaryKind::sub ? Scalar(-1) : Scalar(1);

    // Equal shapes, or `b` broadcast along the leading axes of `a`.
    if (a.shape() == b.shape() || is_suffix(b.shape(), a.shape())) {
        const Index inner = b.numel();
        const Index outer = a.numel() / inner;
        Tensor<Scalar> out = empty_like_shape<Scalar>(a.shape());
        ConstMap<Scalar> A(a.data().data(), outer, inner);
        Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> B(b.data().data(), inner);
        Map<Scalar> Y(out.data().data(), outer, inner);
        switch (kind) {
            case BinaryKind::add: Y = A.rowwise() + B; break;
            case BinaryKind::sub: Y = A.rowwise() - B; break;
            case BinaryKind::mul: Y = A.array().rowwise() * B.array(); break;
        }
        record<Scalar>(out, {a, b}, [outer, inner, kind, b_sign](BackwardContext<Scalar>& ctx) {
            ConstMap<Scalar> G(ctx.out_grad().data(), outer, inner);
            if (auto* ga = ctx.in_grad(0)) {
                Map<Scalar> GA(ga->data(), outer, inner);
                if (kind == BinaryKind::mul) {
                    Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> B(ctx.input(1).data.data(), inner);
                    GA.array() += G.array().rowwise() * B.array();
                } else {
                    GA += G;
                }
            }
            if (auto* gb = ctx.in_grad(1)) {
                Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> GB(gb->data(), inner);
                if (kind == BinaryKind::mul) {
                    ConstMap<Scalar> A(ctx.input(0).data.data(), outer, inner);
                    GB += (G.array() * A.array()).matrix().colwise().sum();
                } else {
                    GB += b_sign * G.colwise().sum();
                }
            }
        });
        return out;
    }

    auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape()));
    Tensor<Scalar> out = empty_like_shape<Scalar>(plan->out_shape);
    const Index n = out.numel();
    const Scalar* pa = a.data().data();
    const Scalar* pb = b.data().data();
    Scalar* py = out.data().data();
    for (Index k = 0; k < n; ++k) {
        const Scalar x = pa[plan->a_offset[k]], y = pb[plan->b_offset[k]];
        py[k] = kind == BinaryKind::add ? x + y : kind == BinaryKind::sub ? x - y : x * y;
    }
    record<Scalar>(out, {a, b}, [plan, kind, b_sign](BackwardContext<Scalar>& ctx) {
        const Scalar* g = ctx.out_grad().data();
        const Index n = ctx.out_grad().size();
        const Scalar* pa = ctx.input(0).data.data();
        const Scalar* pb = ctx.input(1).data.data();
        if (auto* ga = ctx.in_grad(0)) {
            for (Index k = 0; k < n; ++k) {
                (*ga)(plan->a_offset[k]) += kind == BinaryKind::mul ? g[k] * pb[plan->b_offset[k]] : g[k];
            }
        }
        if (auto* gb = ctx.in_grad(1)) {
            for (Index k = 0; k < n; ++k) {
                (*gb)(plan->b_offset[k]) += kind == BinaryKind::mul ? g[k] * pa[plan->a_offset[k]] : b_sign * g[k];
            }
        }
    });
    return out;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!is_suffix(b.shape(), a.shape()) && is_suffix(a.shape(), b.shape())) return binary(b, a, BinaryKind::add);
    return binary(a, b, BinaryKind::add);
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    return binary(a, b, BinaryKind::sub);
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!is_suffix(b.shape(), a.shape()) && is_suffix(a.shape(), b.shape())) return binary(b, a, BinaryKind::mul);
    return binary(a, b, BinaryKind::mul);
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar factor) {
    Tensor<Scalar> out = Tensor<Scalar>::from_data(x.shape(), x.data() * factor);
    record<Scalar>(out, {x}, [factor](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) *g += ctx.out_grad() * factor;
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar value) {
    Tensor<Scalar> out = Tensor<Scalar>::from_data(x.shape(), (x.data().array() + value).matrix());
    record<Scalar>(out, {x}, [](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) *g += ctx.out_grad();
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x) {
    Tensor<Scalar> out = Tensor<Scalar>::from_data(x.shape(), x.data().array().square().matrix());
    record<Scalar>(out, {x}, [](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            g->array() += Scalar(2) * ctx.input(0).data.array() * ctx.out_grad().array();
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& x) {
    Tensor<Scalar> out = Tensor<Scalar>::from_data(x.shape(), x.data().array().abs().matrix());
    record<Scalar>(out, {x}, [](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            const auto& xs = ctx.input(0).data;
            g->array() += ctx.out_grad().array() *
                          xs.array().unaryExpr([](Scalar v) { return Scalar((v > 0) - (v < 0)); });
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
    Tensor<Scalar> out = Tensor<Scalar>::scalar(x.data().sum());
    record<Scalar>(out, {x}, [](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) g->array() += ctx.out_grad()(0);
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
    const Scalar inv = Scalar(1) / static_cast<Scalar>(x.numel());
    Tensor<Scalar> out = Tensor<Scalar>::scalar(x.data().sum() * inv);
    record<Scalar>(out, {x}, [inv](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) g->array() += ctx.out_grad()(0) * inv;
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> mean_lastdim(const Tensor<Scalar>& x) {
    if (x.rank() < 1) throw DimensionError("mean_lastdim needs rank >= 1");
    const Index inner = x.size(-1);
    const Index outer = x.numel() / inner;
    Shape shape(x.shape().begin(), x.shape().end() - 1);
    Tensor<Scalar> out = empty_like_shape<Scalar>(shape);
    ConstMap<Scalar> X(x.data().data(), outer, inner);
    out.data() = X.rowwise().mean();
    record<Scalar>(out, {x}, [outer, inner](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            Map<Scalar> G(g->data(), outer, inner);
            G.colwise() += ctx.out_grad() / static_cast<Scalar>(inner);
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
    Index known = 1;
    int infer = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw DimensionError("reshape allows a single -1");
            infer = static_cast<int>(i);
        } else {
            known *= shape[i];
        }
    }
    if (infer >= 0 && known > 0 && x.numel() % known == 0) shape[static_cast<std::size_t>(infer)] = x.numel() / known;
    if (numel(shape) != x.numel()) {
        throw DimensionError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
    }
    Tensor<Scalar> out = Tensor<Scalar>::from_data(std::move(shape), x.data());
    record<Scalar>(out, {x}, [](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) *g += ctx.out_grad();
    });
    return out;
}

namespace {

// Calls fn(out_index, in_offset) over a permuted traversal, innermost axis fastest.
template <typename Fn>
void for_each_permuted(const Shape& out_shape, const std::vector<Index>& in_strides, Fn&& fn) {
    const std::size_t rank = out_shape.size();
    const Index n = numel(out_shape);
    if (rank == 0) {
        if (n == 1) fn(Index(0), Index(0));
        return;
    }
    const Index inner = out_shape[rank - 1];
    const Index inner_stride = in_strides[rank - 1];
    std::vector<Index> idx(rank, 0);
    Index base = 0;
    for (Index k = 0; k < n; k += inner) {
        for (Index j = 0; j < inner; ++j) fn(k + j, base + j * inner_stride);
        for (std::size_t d = rank - 1; d-- > 0;) {
            ++idx[d];
            base += in_strides[d];
            if (idx[d] < out_shape[d]) break;
            base -= in_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const std::vector<int>& axes) {
    const auto rank = static_cast<std::size_t>(x.rank());
    if (axes.size() != rank) throw DimensionError("permute axes do not match rank of " + to_string(x.shape()));
    std::vector<bool> seen(rank, false);
    for (int a : axes) {
        if (a < 0 || static_cast<std::size_t>(a) >= rank || seen[static_cast<std::size_t>(a)]) {
            throw DimensionError("permute axes are not a permutation");
        }
        seen[static_cast<std::size_t>(a)] = true;
    }
    const auto strides = strides_of(x.shape());
    Shape out_shape(rank);
    std::vector<Index> in_strides(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = x.shape()[static_cast<std::size_t>(axes[i])];
        in_strides[i] = strides[static_cast<std::size_t>(axes[i])];
    }
    Tensor<Scalar> out = empty_like_shape<Scalar>(out_shape);
    const Scalar* src = x.data().data();
    Scalar* dst = out.data().data();
    for_each_permuted(out_shape, in_strides, [&](Index o, Index i) { dst[o] = src[i]; });
    record<Scalar>(out, {x}, [out_shape, in_strides](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            const Scalar* go = ctx.out_grad().data();
            Scalar* gi = g->data();
            for_each_permuted(out_shape, in_strides, [&](Index o, Index i) { gi[i] += go[o]; });
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> transpose_last2(const Tensor<Scalar>& x) {
    const auto rank = static_cast<int>(x.rank());
    if (rank < 2) throw DimensionError("transpose_last2 needs rank >= 2");
    std::vector<int> axes(static_cast<std::size_t>(rank));
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[static_cast<std::size_t>(rank - 1)], axes[static_cast<std::size_t>(rank - 2)]);
    return permute(x, axes);
}

template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    const Shape& first = parts.front().shape();
    const int rank = static_cast<int>(first.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw DimensionError("concat axis out of range for " + to_string(first));
    const auto ax = static_cast<std::size_t>(axis);
    Shape out_shape = first;
    out_shape[ax] = 0;
    std::vector<Index> lengths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == first[i];
        if (!ok) throw DimensionError("concat shape mismatch: " + to_string(first) + " vs " + to_string(s));
        lengths.push_back(s[ax]);
        out_shape[ax] += s[ax];
    }
    Index outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= first[i];
    for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= first[i];
    const Index total = out_shape[ax];

    Tensor<Scalar> out = empty_like_shape<Scalar>(out_shape);
    Index offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Index block = lengths[p] * inner;
        ConstMap<Scalar> src(parts[p].data().data(), outer, block);
        Eigen::Map<RowMatrix<Scalar>, 0, Eigen::OuterStride<>> dst(out.data().data() + offset * inner, outer, block,
                                                                  Eigen::OuterStride<>(total * inner));
        dst = src;
        offset += lengths[p];
    }
    record<Scalar>(out, parts, [lengths, outer, inner, total](BackwardContext<Scalar>& ctx) {
        Index offset = 0;
        for (std::size_t p = 0; p < lengths.size(); ++p) {
            const Index block = lengths[p] * inner;
            if (auto* g = ctx.in_grad(p)) {
                Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>> src(
                    ctx.out_grad().data() + offset * inner, outer, block, Eigen::OuterStride<>(total * inner));
                Map<Scalar>(g->data(), outer, block) += src;
            }
            offset += lengths[p];
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& x, int axis, Index begin, Index end) {
    const int rank = static_cast<int>(x.rank());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw DimensionError("slice axis out of range for " + to_string(x.shape()));
    const auto ax = static_cast<std::size_t>(axis);
    const Index len = x.shape()[ax];
    if (begin < 0 || end > len || begin >= end) {
        throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                             to_string(x.shape()));
    }
    Index outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= x.shape()[i];
    for (std::size_t i = ax + 1; i < x.shape().size(); ++i) inner *= x.shape()[i];
    Shape out_shape = x.shape();
    out_shape[ax] = end - begin;
    const Index block = (end - begin) * inner;
    Tensor<Scalar> out = empty_like_shape<Scalar>(out_shape);
    Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>> src(x.data().data() + begin * inner, outer, block,
                                                                    Eigen::OuterStride<>(len * inner));
    Map<Scalar>(out.data().data(), outer, block) = src;
    record<Scalar>(out, {x}, [outer, inner, block, begin, len](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            Eigen::Map<RowMatrix<Scalar>, 0, Eigen::OuterStride<>> dst(g->data() + begin * inner, outer, block,
                                                                      Eigen::OuterStride<>(len * inner));
            dst += ConstMap<Scalar>(ctx.out_grad().data(), outer, block);
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw DimensionError("matmul needs rank >= 2 operands, got " + to_string(a.shape()) + " and " +
                             to_string(b.shape()));
    }
    const Index m = a.size(-2), k = a.size(-1);
    const Index k2 = b.size(-2), n = b.size(-1);
    if (k != k2) {
        throw DimensionError("matmul inner dimensions differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }

    if (b.rank() == 2) {
        const Index rows = a.numel() / k;
        Shape out_shape = a.shape();
        out_shape.back() = n;
        Tensor<Scalar> out = empty_like_shape<Scalar>(out_shape);
        Map<Scalar>(out.data().data(), rows, n).noalias() =
            ConstMap<Scalar>(a.data().data(), rows, k) * ConstMap<Scalar>(b.data().data(), k, n);
        record<Scalar>(out, {a, b}, [rows, k, n](BackwardContext<Scalar>& ctx) {
            ConstMap<Scalar> G(ctx.out_grad().data(), rows, n);
            if (auto* ga = ctx.in_grad(0)) {
                Map<Scalar>(ga->data(), rows, k).noalias() += G * ConstMap<Scalar>(ctx.input(1).data.data(), k, n).transpose();
            }
            if (auto* gb = ctx.in_grad(1)) {
                Map<Scalar>(gb->data(), k, n).noalias() += ConstMap<Scalar>(ctx.input(0).data.data(), rows, k).transpose() * G;
            }
        });
        return out;
    }

    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    BroadcastPlan batch;
    try {
        batch = plan_broadcast(a_batch, b_batch);
    } catch (const DimensionError&) {
        throw DimensionError("matmul batch dimensions do not broadcast: " + to_string(a.shape()) + " x " +
                             to_string(b.shape()));
    }
    Shape out_shape = batch.out_shape;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor<Scalar> out = empty_like_shape<Scalar>(out_shape);
    const auto count = static_cast<Index>(batch.a_offset.size());
    for (Index i = 0; i < count; ++i) {
        Map<Scalar>(out.data().data() + i * m * n, m, n).noalias() =
            ConstMap<Scalar>(a.data().data() + batch.a_offset[i] * m * k, m, k) *
            ConstMap<Scalar>(b.data().data() + batch.b_offset[i] * k * n, k, n);
    }
    auto plan = std::make_shared<BroadcastPlan>(std::move(batch));
    record<Scalar>(out, {a, b}, [plan, m, k, n](BackwardContext<Scalar>& ctx) {
        const auto count = static_cast<Index>(plan->a_offset.size());
        auto* ga = ctx.in_grad(0);
        auto* gb = ctx.in_grad(1);
        for (Index i = 0; i < count; ++i) {
            ConstMap<Scalar> G(ctx.out_grad().data() + i * m * n, m, n);
            const Index ao = plan->a_offset[i] * m * k, bo = plan->b_offset[i] * k * n;
            if (ga) Map<Scalar>(ga->data() + ao, m, k).noalias() += G * ConstMap<Scalar>(ctx.input(1).data.data() + bo, k, n).transpose();
            if (gb) Map<Scalar>(gb->data() + bo, k, n).noalias() += ConstMap<Scalar>(ctx.input(0).data.data() + ao, m, k).transpose() * G;
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_lastdim(const Tensor<Scalar>& x) {
    if (x.rank() < 1 || x.size(-1) < 1) throw DimensionError("softmax needs a nonempty last axis");
    if (!x.data().allFinite()) throw NumericError("softmax input contains non-finite values");
    const Index inner = x.size(-1);
    const Index outer = x.numel() / inner;
    Tensor<Scalar> out = empty_like_shape<Scalar>(x.shape());
    ConstMap<Scalar> X(x.data().data(), outer, inner);
    Map<Scalar> Y(out.data().data(), outer, inner);
    Y = (X.colwise() - X.rowwise().maxCoeff()).array().exp().matrix();
    Y.array().colwise() /= Y.rowwise().sum().array();
    record<Scalar>(out, {x}, [outer, inner](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            ConstMap<Scalar> Y(ctx.output().data.data(), outer, inner);
            ConstMap<Scalar> G(ctx.out_grad().data(), outer, inner);
            const Vector<Scalar> dot = (G.array() * Y.array()).rowwise().sum();
            Map<Scalar>(g->data(), outer, inner).array() += Y.array() * (G.colwise() - dot).array();
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw DimensionError("cross_entropy expects logits [B,C], got " + to_string(logits.shape()));
    const Index batch = logits.size(0), classes = logits.size(1);
    if (static_cast<Index>(labels.size()) != batch) throw DimensionError("cross_entropy label count mismatch");
    for (int l : labels) {
        if (l < 0 || l >= classes) throw UsageError("label " + std::to_string(l) + " out of range");
    }
    ConstMap<Scalar> X(logits.data().data(), batch, classes);
    RowMatrix<Scalar> probs = (X.colwise() - X.rowwise().maxCoeff()).array().exp().matrix();
    const Vector<Scalar> z = probs.rowwise().sum();
    probs.array().colwise() /= z.array();
    Scalar loss = 0;
    const Vector<Scalar> maxes = X.rowwise().maxCoeff();
    for (Index i = 0; i < batch; ++i) {
        loss += std::log(z(i)) + maxes(i) - X(i, labels[static_cast<std::size_t>(i)]);
    }
    loss /= static_cast<Scalar>(batch);
    Tensor<Scalar> out = Tensor<Scalar>::scalar(loss);
    std::vector<int> label_copy(labels.begin(), labels.end());
    record<Scalar>(out, {logits}, [probs = std::move(probs), label_copy, batch, classes](BackwardContext<Scalar>& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            const Scalar s = ctx.out_grad()(0) / static_cast<Scalar>(batch);
            Map<Scalar> G(g->data(), batch, classes);
            G += probs * s;
            for (Index i = 0; i < batch; ++i) G(i, label_copy[static_cast<std::size_t>(i)]) -= s;
        }
    });
    return out;
}

template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, const Tensor<Scalar>& bias,
                          Scalar eps) {
    if (x.rank() < 1) throw DimensionError("layer_norm needs rank >= 1");
    if (!(eps > 0)) throw UsageError("layer_norm eps must be positive");
    const Index d = x.size(-1);
    const Index rows = x.numel() / d;
    if ((gain.defined() && gain.numel() != d) || (bias.defined() && bias.numel() != d)) {
        throw DimensionError("layer_norm gain/bias must have length " + std::to_string(d));
    }
    ConstMap<Scalar> X(x.data().data(), rows, d);
    const Vector<Scalar> mu = X.rowwise().mean();
    RowMatrix<Scalar> xhat = X.colwise() - mu;
    const Vector<Scalar> var = xhat.array().square().rowwise().mean();
    const Vector<Scalar> rstd = (var.array() + eps).rsqrt();
    xhat.array().colwise() *= rstd.array();

    Tensor<Scalar> out = empty_like_shape<Scalar>(x.shape());
    Map<Scalar> Y(out.data().data(), rows, d);
    Y = xhat;
    if (gain.defined()) {
        Y.array().rowwise() *= Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(gain.data().data(), d);
    }
    if (bias.defined()) {
        Y.rowwise() += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(bias.data().data(), d);
    }
    const bool has_gain = gain.defined();
    record<Scalar>(out, {x, gain, bias},
                   [xhat = std::move(xhat), rstd, rows, d, has_gain](BackwardContext<Scalar>& ctx) {
                       ConstMap<Scalar> G(ctx.out_grad().data(), rows, d);
                       if (auto* gg = ctx.in_grad(1)) {
                           *gg += (G.array() * xhat.array()).colwise().sum().matrix().transpose();
                       }
                       if (auto* gb = ctx.in_grad(2)) *gb += G.colwise().sum().transpose();
                       if (auto* gx = ctx.in_grad(0)) {
                           RowMatrix<Scalar> dxhat = G;
                           if (has_gain) {
                               dxhat.array().rowwise() *= Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(
                                   ctx.input(1).data.data(), d);
                           }
                           const Vector<Scalar> m1 = dxhat.rowwise().mean();
                           const Vector<Scalar> m2 = (dxhat.array() * xhat.array()).rowwise().mean();
                           Map<Scalar> GX(gx->data(), rows, d);
                           GX.array() += ((dxhat.colwise() - m1).array() - xhat.array().colwise() * m2.array())
                                             .colwise() *
                                         rstd.array();
                       }
                   });
    return out;
}

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind, Scalar alpha) {
    if (kind == Activation::leaky_relu && !(alpha > 0 && alpha < 1)) {
        throw UsageError("leaky_relu slope must lie in (0,1)");
    }
    const auto& xs = x.data().array();
    Vector<Scalar> y;
    const Scalar c = std::sqrt(Scalar(2) / Scalar(M_PI));
    const Scalar k = Scalar(0.044715);
    switch (kind) {
        case Activation::gelu:
            y = (Scalar(0.5) * xs * (Scalar(1) + (c * (xs + k * xs.cube())).tanh())).matrix();
            break;
        case Activation::relu: y = xs.max(Scalar(0)).matrix(); break;
        case Activation::leaky_relu: y = (xs > 0).select(xs, alpha * xs).matrix(); break;
        case Activation::tanh: y = xs.tanh().matrix(); break;
        case Activation::identity: y = x.data(); break;
    }
    Tensor<Scalar> out = Tensor<Scalar>::from_data(x.shape(), std::move(y));
    record<Scalar>(out, {x}, [kind, alpha, c, k](BackwardContext<Scalar>& ctx) {
        auto* g = ctx.in_grad(0);
        if (!g) return;
        const auto& xs = ctx.input(0).data.array();
        const auto& go = ctx.out_grad().array();
        switch (kind) {
            case Activation::gelu: {
                const auto t = (c * (xs + k * xs.cube())).tanh().eval();
                g->array() += go * (Scalar(0.5) * (Scalar(1) + t) +
                                    Scalar(0.5) * xs * (Scalar(1) - t.square()) * c * (Scalar(1) + Scalar(3) * k * xs.square()));
                break;
            }
            case Activation::relu: g->array() += (xs > 0).select(go, Scalar(0)); break;
            case Activation::leaky_relu: g->array() += (xs > 0).select(go, alpha * go); break;
            case Activation::tanh: g->array() += go * (Scalar(1) - ctx.output().data.array().square()); break;
            case Activation::identity: g->array() += go; break;
        }
    });
    return out;
}

namespace {

// Unfolds one image [C,H,W] into columns [C*k*k, Ho*Wo].
template <typename Scalar>
void im2col(const Scalar* img, Index C, Index H, Index W, Index k, Index stride, Index pad, Index Ho, Index Wo,
            Scalar* cols) {
    for (Index c = 0; c < C; ++c) {
        for (Index ky = 0; ky < k; ++ky) {
            for (Index kx = 0; kx < k; ++kx) {
                Scalar* row = cols + ((c * k + ky) * k + kx) * Ho * Wo;
                for (Index oy = 0; oy < Ho; ++oy) {
                    const Index iy = oy * stride - pad + ky;
                    for (Index ox = 0; ox < Wo; ++ox) {
                        const Index ix = ox * stride - pad + kx;
                        row[oy * Wo + ox] = (iy >= 0 && iy < H && ix >= 0 && ix < W) ? img[(c * H + iy) * W + ix] : Scalar(0);
                    }
                }
            }
        }
    }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index C, Index H, Index W, Index k, Index stride, Index pad, Index Ho, Index Wo,
            Scalar* img) {
    for (Index c = 0; c < C; ++c) {
        for (Index ky = 0; ky < k; ++ky) {
            for (Index kx = 0; kx < k; ++kx) {
                const Scalar* row = cols + ((c * k + ky) * k + kx) * Ho * Wo;
                for (Index oy = 0; oy < Ho; ++oy) {
                    const Index iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (Index ox = 0; ox < Wo; ++ox) {
                        const Index ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) img[(c * H + iy) * W + ix] += row[oy * Wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias, Index stride,
                      Index pad) {
    if (x.rank() != 4 || w.rank() != 4) {
        throw DimensionError("conv2d expects x [B,C,H,W] and w [O,C,k,k], got " + to_string(x.shape()) + " and " +
                             to_string(w.shape()));
    }
    const Index B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    const Index O = w.size(0), k = w.size(2);
    if (w.size(1) != C || w.size(3) != k) {
        throw DimensionError("conv2d weight " + to_string(w.shape()) + " does not match input " + to_string(x.shape()));
    }
    if (bias.defined() && bias.numel() != O) throw DimensionError("conv2d bias must have length " + std::to_string(O));
    if (pad < 0) throw DimensionError("conv2d padding must be nonnegative");
    const Index Ho = conv_output_size(H, k, stride, pad);
    const Index Wo = conv_output_size(W, k, stride, pad);
    if (Ho < 1 || Wo < 1) {
        throw DimensionError("conv2d output size is nonpositive for input " + to_string(x.shape()) + " kernel " +
                             std::to_string(k) + " stride " + std::to_string(stride) + " pad " + std::to_string(pad));
    }
    const Index K = C * k * k, P = Ho * Wo;
    Tensor<Scalar> out = empty_like_shape<Scalar>({B, O, Ho, Wo});
    RowMatrix<Scalar> cols(K, P);
    ConstMap<Scalar> Wm(w.data().data(), O, K);
    for (Index b = 0; b < B; ++b) {
        im2col(x.data().data() + b * C * H * W, C, H, W, k, stride, pad, Ho, Wo, cols.data());
        Map<Scalar> Y(out.data().data() + b * O * P, O, P);
        Y.noalias() = Wm * cols;
        if (bias.defined()) Y.colwise() += bias.data();
    }
    record<Scalar>(out, {x, w, bias}, [B, C, H, W, O, k, stride, pad, Ho, Wo, K, P](BackwardContext<Scalar>& ctx) {
        auto* gx = ctx.in_grad(0);
        auto* gw = ctx.in_grad(1);
        auto* gbias = ctx.in_grad(2);
        ConstMap<Scalar> Wm(ctx.input(1).data.data(), O, K);
        RowMatrix<Scalar> cols(K, P);
        RowMatrix<Scalar> dcols(K, P);
        for (Index b = 0; b < B; ++b) {
            ConstMap<Scalar> G(ctx.out_grad().data() + b * O * P, O, P);
            if (gbias) *gbias += G.rowwise().sum();
            if (gw) {
                im2col(ctx.input(0).data.data() + b * C * H * W, C, H, W, k, stride, pad, Ho, Wo, cols.data());
                Map<Scalar>(gw->data(), O, K).noalias() += G * cols.transpose();
            }
            if (gx) {
                dcols.noalias() = Wm.transpose() * G;
                col2im(dcols.data(), C, H, W, k, stride, pad, Ho, Wo, gx->data() + b * C * H * W);
            }
        }
    });
    return out;
}

#define PARALLAX_INSTANTIATE_OPS(S)                                                                       \
    template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                                        \
    template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                           \
    template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                           \
    template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                           \
    template Tensor<S> scale(const Tensor<S>&, S);                                                        \
    template Tensor<S> add_scalar(const Tensor<S>&, S);                                                   \
    template Tensor<S> square(const Tensor<S>&);                                                          \
    template Tensor<S> abs(const Tensor<S>&);                                                             \
    template Tensor<S> sum(const Tensor<S>&);                                                             \
    template Tensor<S> mean(const Tensor<S>&);                                                            \
    template Tensor<S> mean_lastdim(const Tensor<S>&);                                                    \
    template Tensor<S> reshape(const Tensor<S>&, Shape);                                                  \
    template Tensor<S> permute(const Tensor<S>&, const std::vector<int>&);                                \
    template Tensor<S> transpose_last2(const Tensor<S>&);                                                 \
    template Tensor<S> concat(const std::vector<Tensor<S>>&, int);                                        \
    template Tensor<S> slice(const Tensor<S>&, int, Index, Index);                                        \
    template Tensor<S> softmax_lastdim(const Tensor<S>&);                                                 \
    template Tensor<S> cross_entropy(const Tensor<S>&, std::span<const int>);                             \
    template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);               \
    template Tensor<S> activation(const Tensor<S>&, Activation, S);                                       \
    template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index, Index);

PARALLAX_INSTANTIATE_OPS(float)
PARALLAX_INSTANTIATE_OPS(double)

}  // namespace parallax
