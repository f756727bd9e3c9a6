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

#include "parallax/vit/layers.hpp"

#include <cmath>

namespace parallax::vit {

template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& tokens, const AttentionParams<Scalar>& params, int heads, bool qk_norm,
                         AttentionTrace* trace) {
    if (tokens.rank() != 3) throw DimensionError("attention expects tokens [B,N,D], got " + to_string(tokens.shape()));
    const Index B = tokens.size(0), N = tokens.size(1), D = tokens.size(2);
    if (heads < 1 || D % heads != 0) {
        throw DimensionError("attention width " + std::to_string(D) + " is not divisible by " + std::to_string(heads) +
                             " heads");
    }
    const Index dh = D / heads;

    auto split = [&](const Tensor<Scalar>& t, const Tensor<Scalar>& gain) {
        Tensor<Scalar> h = reshape(t, {B, N, heads, dh});
        if (qk_norm) h = mul(layer_norm(h, Tensor<Scalar>(), Tensor<Scalar>(), Scalar(kNormEps)), gain);
        return h;
    };
    const Tensor<Scalar> q = permute(split(apply(params.query, tokens), params.query_gain), {0, 2, 1, 3});
    const Tensor<Scalar> kt = permute(split(apply(params.key, tokens), params.key_gain), {0, 2, 3, 1});
    const Tensor<Scalar> v = permute(reshape(apply(params.value, tokens), {B, N, heads, dh}), {0, 2, 1, 3});

    const Tensor<Scalar> logits = scale(matmul(q, kt), Scalar(1) / std::sqrt(static_cast<Scalar>(dh)));
    const Tensor<Scalar> weights = softmax_lastdim(logits);
    if (trace != nullptr) {
        trace->max_abs_logit = std::max(trace->max_abs_logit, static_cast<double>(logits.data().cwiseAbs().maxCoeff()));
        const Eigen::Map<const RowMatrix<Scalar>> w(weights.data().data(), weights.numel() / N, N);
        const double err = (w.rowwise().sum().array() - Scalar(1)).abs().maxCoeff();
        trace->max_row_sum_error = std::max(trace->max_row_sum_error, err);
    }
    const Tensor<Scalar> context = reshape(permute(matmul(weights, v), {0, 2, 1, 3}), {B, N, D});
    return apply(params.output, context);
}

template <typename Scalar>
BlockParams<Scalar> make_block(ParamStore<Scalar>& store, const std::string& prefix, const Recipe& recipe,
                               BlockVariant variant, Rng& rng) {
    const int D = recipe.hidden_dim, M = recipe.mlp_size;
    BlockParams<Scalar> p;
    p.variant = variant;
    p.heads = recipe.heads;
    p.norm1 = make_norm(store, prefix + ".norm1", D);
    const bool qkv_bias = uses_qkv_bias(variant);
    p.attn.query = make_linear(store, prefix + ".attn.query", D, D, rng, qkv_bias);
    p.attn.key = make_linear(store, prefix + ".attn.key", D, D, rng, qkv_bias);
    p.attn.value = make_linear(store, prefix + ".attn.value", D, D, rng, qkv_bias);
    p.attn.output = make_linear(store, prefix + ".attn.output", D, D, rng);
    if (uses_qk_norm(variant)) {
        p.attn.query_gain = store.ones(prefix + ".attn.query_norm.gain", {recipe.heads, recipe.head_dim()});
        p.attn.key_gain = store.ones(prefix + ".attn.key_norm.gain", {recipe.heads, recipe.head_dim()});
    }
    if (variant == BlockVariant::serial) p.norm2 = make_norm(store, prefix + ".norm2", D);
    p.mlp.in = make_linear(store, prefix + ".mlp.in", D, M, rng);
    p.mlp.out = make_linear(store, prefix + ".mlp.out", M, D, rng);
    if (variant == BlockVariant::parallel_stabilized) p.mlp_out_norm = make_norm(store, prefix + ".mlp_out_norm", D);
    return p;
}

template <typename Scalar>
Tensor<Scalar> block_forward(const Tensor<Scalar>& x, const BlockParams<Scalar>& params, const BlockHooks& hooks) {
    if (x.rank() != 3 || x.size(2) != params.norm1.gain.numel()) {
        throw DimensionError("block input " + to_string(x.shape()) + " does not match width " +
                             std::to_string(params.norm1.gain.numel()));
    }
    const bool qk_norm = uses_qk_norm(params.variant);
    if (params.variant == BlockVariant::serial) {
        const Tensor<Scalar> h = add(x, attention(apply(params.norm1, x), params.attn, params.heads, qk_norm, hooks.trace));
        return add(h, mlp(apply(params.norm2, h), params.mlp));
    }
    const Tensor<Scalar> y = apply(params.norm1, x);
    Tensor<Scalar> m = mlp(y, params.mlp);
    if (params.variant == BlockVariant::parallel_stabilized && !hooks.identity_stabilizer) {
        m = apply(params.mlp_out_norm, m);
    }
    return add(add(x, m), attention(y, params.attn, params.heads, qk_norm, hooks.trace));
}

template <typename Scalar>
PatchEmbedParams<Scalar> make_patch_embed(ParamStore<Scalar>& store, const std::string& prefix, int image_size,
                                          int patch_size, int hidden_dim, Rng& rng) {
    if (patch_size < 1 || image_size % patch_size != 0) {
        throw DimensionError("image size " + std::to_string(image_size) + " is not divisible by patch size " +
                             std::to_string(patch_size));
    }
    const int grid = image_size / patch_size;
    PatchEmbedParams<Scalar> p;
    p.patch_size = patch_size;
    p.proj = make_linear(store, prefix + ".proj", 3 * patch_size * patch_size, hidden_dim, rng);
    p.pos = store.truncated_normal(prefix + ".pos", {grid * grid, hidden_dim}, rng, kInitStddev);
    return p;
}

template <typename Scalar>
Tensor<Scalar> image_to_patches(const Tensor<Scalar>& image, int patch_size) {
    if (image.rank() != 4) throw DimensionError("expected image [B,C,H,W], got " + to_string(image.shape()));
    const Index B = image.size(0), C = image.size(1), H = image.size(2), W = image.size(3);
    const Index p = patch_size;
    if (p < 1 || H % p != 0 || W % p != 0) {
        throw DimensionError("image " + to_string(image.shape()) + " is not divisible into " + std::to_string(p) + "x" +
                             std::to_string(p) + " patches");
    }
    const Index gh = H / p, gw = W / p;
    const Tensor<Scalar> grid = permute(reshape(image, {B, C, gh, p, gw, p}), {0, 2, 4, 1, 3, 5});
    return reshape(grid, {B, gh * gw, C * p * p});
}

template <typename Scalar>
Tensor<Scalar> patches_to_image(const Tensor<Scalar>& patches, int channels, int patch_size) {
    if (patches.rank() != 3) throw DimensionError("expected patches [B,N,C*p*p], got " + to_string(patches.shape()));
    const Index B = patches.size(0), N = patches.size(1), p = patch_size, C = channels;
    const auto g = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(N))));
    if (g * g != N || patches.size(2) != C * p * p) {
        throw DimensionError("patches " + to_string(patches.shape()) + " do not form a square grid of " +
                             std::to_string(C) + "x" + std::to_string(p) + "x" + std::to_string(p) + " patches");
    }
    const Tensor<Scalar> grid = permute(reshape(patches, {B, g, g, C, p, p}), {0, 3, 1, 4, 2, 5});
    return reshape(grid, {B, C, g * p, g * p});
}

template <typename Scalar>
Tensor<Scalar> patch_embed(const Tensor<Scalar>& image, const PatchEmbedParams<Scalar>& params) {
    const Tensor<Scalar> patches = image_to_patches(image, params.patch_size);
    if (patches.size(1) != params.pos.size(0)) {
        throw DimensionError("image " + to_string(image.shape()) + " yields " + std::to_string(patches.size(1)) +
                             " patches but the positional table has " + std::to_string(params.pos.size(0)));
    }
    return add(apply(params.proj, patches), params.pos);
}

#define PARALLAX_INSTANTIATE_LAYERS(S)                                                                         \
    template Tensor<S> attention(const Tensor<S>&, const AttentionParams<S>&, int, bool, AttentionTrace*);     \
    template BlockParams<S> make_block(ParamStore<S>&, const std::string&, const Recipe&, BlockVariant, Rng&); \
    template Tensor<S> block_forward(const Tensor<S>&, const BlockParams<S>&, const BlockHooks&);              \
    template PatchEmbedParams<S> make_patch_embed(ParamStore<S>&, const std::string&, int, int, int, Rng&);    \
    template Tensor<S> image_to_patches(const Tensor<S>&, int);                                                \
    template Tensor<S> patches_to_image(const Tensor<S>&, int, int);                                           \
    template Tensor<S> patch_embed(const Tensor<S>&, const PatchEmbedParams<S>&);

PARALLAX_INSTANTIATE_LAYERS(float)
PARALLAX_INSTANTIATE_LAYERS(double)

}  // namespace parallax::vit
