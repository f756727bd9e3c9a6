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

#include "parallax/gan/vitunet.hpp"

#include <cmath>

#include "parallax/core/errors.hpp"
#include "parallax/core/ops.hpp"

namespace parallax::gan {

void ViTUnetConfig::validate() const {
    backbone.validate();
    if (blocks_per_stage <= 0 && backbone.layers % 6 != 0) {
        throw DimensionError("ViTUnet backbone depth " + std::to_string(backbone.layers) + " is not divisible by 6");
    }
    if (stage_depth() <= 0) throw DimensionError("ViTUnet stage depth must be positive");
    if (patch_size <= 0 || image_size % patch_size != 0) {
        throw DimensionError("image size " + std::to_string(image_size) + " is not divisible by patch size " +
                             std::to_string(patch_size));
    }
    if (grid() % 2 != 0) throw DimensionError("ViTUnet token grid " + std::to_string(grid()) + " must be even");
    if (cnn_tail_blocks < 0 || tail_channels <= 0) throw UsageError("invalid CNN tail configuration");
}

template <typename Scalar>
Tensor<Scalar> token_downsample(const Tensor<Scalar>& tokens, int grid, const Tensor<Scalar>& weight) {
    if (tokens.rank() != 3 || tokens.size(1) != Index{grid} * grid) {
        throw DimensionError("token_downsample expects [B," + std::to_string(grid * grid) + ",D], got " +
                             to_string(tokens.shape()));
    }
    if (grid % 2 != 0) throw DimensionError("token_downsample needs an even grid, got " + std::to_string(grid));
    const Index batch = tokens.size(0), dim = tokens.size(2), half = grid / 2;
    Tensor<Scalar> cells = reshape(tokens, {batch, half, 2, half, 2, dim});
    cells = permute(cells, {0, 1, 3, 2, 4, 5});
    return matmul(reshape(cells, {batch, half * half, 4 * dim}), weight);
}

template <typename Scalar>
Tensor<Scalar> token_upsample(const Tensor<Scalar>& tokens, int grid, const Tensor<Scalar>& weight) {
    if (tokens.rank() != 3 || tokens.size(1) != Index{grid} * grid) {
        throw DimensionError("token_upsample expects [B," + std::to_string(grid * grid) + ",D], got " +
                             to_string(tokens.shape()));
    }
    const Index batch = tokens.size(0);
    const Tensor<Scalar> wide = matmul(tokens, weight);
    if (wide.size(2) % 4 != 0) throw DimensionError("token_upsample projection width must be 4D");
    const Index dim = wide.size(2) / 4;
    Tensor<Scalar> cells = reshape(wide, {batch, grid, grid, 2, 2, dim});
    cells = permute(cells, {0, 1, 3, 2, 4, 5});
    return reshape(cells, {batch, Index{4} * grid * grid, dim});
}

template <typename Scalar>
Tensor<Scalar> skip_fuse(const Tensor<Scalar>& decoder, const Tensor<Scalar>& encoder, const Tensor<Scalar>& weight) {
    if (decoder.shape() != encoder.shape()) {
        throw DimensionError("skip_fuse shapes differ: " + to_string(decoder.shape()) + " vs " +
                             to_string(encoder.shape()));
    }
    return matmul(concat<Scalar>({decoder, encoder}, -1), weight);
}

template <typename Scalar>
ViTUnet<Scalar>::ViTUnet(const ViTUnetConfig& config, std::uint64_t seed, const std::string& prefix)
    : config_(config), stage_recipe_(config.backbone) {
    config_.validate();
    stage_recipe_.image_size = config_.image_size;
    stage_recipe_.patch_size = config_.patch_size;
    const int dim = config_.hidden_dim(), p = config_.patch_size;
    Rng rng(seed);

    embed_ = vit::make_patch_embed(params_, prefix + "embed", config_.image_size, p, dim, rng);
    const auto make_stage = [&](const std::string& name) {
        std::vector<vit::BlockParams<Scalar>> stage;
        for (int i = 0; i < config_.stage_depth(); ++i) {
            stage.push_back(vit::make_block(params_, prefix + name + "." + std::to_string(i), stage_recipe_,
                                            config_.variant, rng));
        }
        return stage;
    };
    encoder1_ = make_stage("encoder1");
    down_ = params_.truncated_normal(prefix + "downsample.weight", {4 * dim, dim}, rng, vit::kInitStddev);
    encoder2_ = make_stage("encoder2");
    up_ = params_.truncated_normal(prefix + "upsample.weight", {dim, 4 * dim}, rng, vit::kInitStddev);
    fuse_ = params_.truncated_normal(prefix + "fuse.weight", {2 * dim, dim}, rng, vit::kInitStddev);
    decoder1_ = make_stage("decoder1");
    head_ = vit::make_linear(params_, prefix + "to_pixels", dim, 3 * p * p, rng);

    const int c = config_.tail_channels;
    const double he = std::sqrt(2.0 / (3.0 * 9.0));
    for (int i = 0; i < config_.cnn_tail_blocks; ++i) {
        const std::string name = prefix + "tail." + std::to_string(i);
        TailBlock<Scalar> block;
        Vector<Scalar> w1(Index{c} * 3 * 9);
        for (Index k = 0; k < w1.size(); ++k) w1(k) = static_cast<Scalar>(rng.truncated_normal(he));
        block.conv1_weight = params_.add(name + ".conv1.weight", Tensor<Scalar>::from_data({c, 3, 3, 3}, std::move(w1)));
        block.conv1_bias = params_.zeros(name + ".conv1.bias", {c});
        block.conv2_weight = params_.truncated_normal(name + ".conv2.weight", {3, c, 3, 3}, rng, vit::kInitStddev);
        block.conv2_bias = params_.zeros(name + ".conv2.bias", {3});
        tail_.push_back(std::move(block));
    }
}

template <typename Scalar>
Tensor<Scalar> ViTUnet<Scalar>::forward_tokens_image(const Tensor<Scalar>& image) const {
    if (image.rank() != 4 || image.size(1) != 3 || image.size(2) != config_.image_size ||
        image.size(3) != config_.image_size) {
        throw DimensionError("ViTUnet expects [B,3," + std::to_string(config_.image_size) + "," +
                             std::to_string(config_.image_size) + "], got " + to_string(image.shape()));
    }
    const int g = config_.grid();
    Tensor<Scalar> x = vit::patch_embed(image, embed_);
    for (const auto& block : encoder1_) x = vit::block_forward(x, block);
    const Tensor<Scalar> skip = x;
    x = token_downsample(x, g, down_);
    for (const auto& block : encoder2_) x = vit::block_forward(x, block);
    x = token_upsample(x, g / 2, up_);
    x = skip_fuse(x, skip, fuse_);
    for (const auto& block : decoder1_) x = vit::block_forward(x, block);
    return vit::patches_to_image(vit::apply(head_, x), 3, config_.patch_size);
}

template <typename Scalar>
Tensor<Scalar> ViTUnet<Scalar>::forward(const Tensor<Scalar>& image) const {
    Tensor<Scalar> x = forward_tokens_image(image);
    for (const auto& block : tail_) {
        const Tensor<Scalar> h = relu(conv2d(x, block.conv1_weight, block.conv1_bias, 1, 1));
        x = add(x, conv2d(h, block.conv2_weight, block.conv2_bias, 1, 1));
    }
    return config_.output_tanh ? tanh(x) : x;
}

#define PARALLAX_INSTANTIATE_VITUNET(S)                                                         \
    template Tensor<S> token_downsample(const Tensor<S>&, int, const Tensor<S>&);               \
    template Tensor<S> token_upsample(const Tensor<S>&, int, const Tensor<S>&);                 \
    template Tensor<S> skip_fuse(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);         \
    template class ViTUnet<S>;

PARALLAX_INSTANTIATE_VITUNET(float)
PARALLAX_INSTANTIATE_VITUNET(double)

}  // namespace parallax::gan
