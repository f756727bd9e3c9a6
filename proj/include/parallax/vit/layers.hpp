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

#include "parallax/core/ops.hpp"
#include "parallax/core/parameters.hpp"
#include "parallax/core/random.hpp"
#include "parallax/vit/recipe.hpp"

namespace parallax::vit {

inline constexpr double kInitStddev = 0.02;
inline constexpr double kNormEps = 1e-5;

template <typename Scalar>
struct LinearParams {
    Tensor<Scalar> weight;  // [in, out]
    Tensor<Scalar> bias;    // [out] or undefined
};

template <typename Scalar>
LinearParams<Scalar> make_linear(ParamStore<Scalar>& store, const std::string& name, int in, int out, Rng& rng,
                                 bool with_bias = true) {
    LinearParams<Scalar> p;
    p.weight = store.truncated_normal(name + ".weight", {in, out}, rng, kInitStddev);
    if (with_bias) p.bias = store.zeros(name + ".bias", {out});
    return p;
}

template <typename Scalar>
Tensor<Scalar> apply(const LinearParams<Scalar>& p, const Tensor<Scalar>& x) {
    return linear(x, p.weight, p.bias);
}

template <typename Scalar>
struct NormParams {
    Tensor<Scalar> gain;
    Tensor<Scalar> bias;
};

template <typename Scalar>
NormParams<Scalar> make_norm(ParamStore<Scalar>& store, const std::string& name, int dim) {
    return {store.ones(name + ".gain", {dim}), store.zeros(name + ".bias", {dim})};
}

template <typename Scalar>
Tensor<Scalar> apply(const NormParams<Scalar>& p, const Tensor<Scalar>& x) {
    return layer_norm(x, p.gain, p.bias, Scalar(kNormEps));
}

template <typename Scalar>
struct AttentionParams {
    LinearParams<Scalar> query, key, value, output;
    Tensor<Scalar> query_gain;  // [heads, head_dim]; defined only with qk-norm
    Tensor<Scalar> key_gain;
};

// Observations from inside attention, filled when a trace is passed.
struct AttentionTrace {
    double max_abs_logit = 0.0;      // pre-softmax, after 1/sqrt(d_h) scaling
    double max_row_sum_error = 0.0;  // max |sum(weights) - 1| over queries
};

/// Multi-head self-attention over tokens [B,N,D]. With `qk_norm`, each head's
/// query and key vectors are layer-normalized (gain, no bias) before the
/// scaled dot product.
template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& tokens, const AttentionParams<Scalar>& params, int heads, bool qk_norm,
                         AttentionTrace* trace = nullptr);

template <typename Scalar>
struct MlpParams {
    LinearParams<Scalar> in;   // D -> mlp_size
    LinearParams<Scalar> out;  // mlp_size -> D
};

template <typename Scalar>
Tensor<Scalar> mlp(const Tensor<Scalar>& x, const MlpParams<Scalar>& p) {
    return apply(p.out, gelu(apply(p.in, x)));
}

template <typename Scalar>
struct BlockParams {
    BlockVariant variant = BlockVariant::serial;
    int heads = 1;
    NormParams<Scalar> norm1;         // pre-norm; shared by both branches in parallel variants
    AttentionParams<Scalar> attn;
    NormParams<Scalar> norm2;         // serial only
    MlpParams<Scalar> mlp;
    NormParams<Scalar> mlp_out_norm;  // parallel_stabilized only
};

template <typename Scalar>
BlockParams<Scalar> make_block(ParamStore<Scalar>& store, const std::string& prefix, const Recipe& recipe,
                               BlockVariant variant, Rng& rng);

struct BlockHooks {
    bool identity_stabilizer = false;  // replace the MLP-output norm by identity
    AttentionTrace* trace = nullptr;
};

/// serial:              x += Attn(LN1(x)); x += MLP(LN2(x))
/// parallel_raw:        y = LN1(x); x + MLP(y) + Attn(y)
/// parallel_stabilized: y = LN1(x); x + LN(MLP(y)) + Attn(y)
template <typename Scalar>
Tensor<Scalar> block_forward(const Tensor<Scalar>& x, const BlockParams<Scalar>& params, const BlockHooks& hooks = {});

template <typename Scalar>
struct PatchEmbedParams {
    int patch_size = 16;
    LinearParams<Scalar> proj;  // [3*p*p, D]
    Tensor<Scalar> pos;         // [N, D]
};

template <typename Scalar>
PatchEmbedParams<Scalar> make_patch_embed(ParamStore<Scalar>& store, const std::string& prefix, int image_size,
                                          int patch_size, int hidden_dim, Rng& rng);

// [B,C,H,W] -> [B, N, C*p*p], patches in row-major grid order, each flattened (c, y, x).
template <typename Scalar>
Tensor<Scalar> image_to_patches(const Tensor<Scalar>& image, int patch_size);

// Inverse of image_to_patches for a square grid.
template <typename Scalar>
Tensor<Scalar> patches_to_image(const Tensor<Scalar>& patches, int channels, int patch_size);

/// Flattens p x p x 3 patches, projects them to D and adds the positional table.
template <typename Scalar>
Tensor<Scalar> patch_embed(const Tensor<Scalar>& image, const PatchEmbedParams<Scalar>& params);

}  // namespace parallax::vit
