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

#include <cstdint>
#include <vector>

#include "parallax/core/parameters.hpp"
#include "parallax/vit/layers.hpp"
#include "parallax/vit/recipe.hpp"

namespace parallax::gan {

struct ViTUnetConfig {
    vit::Recipe backbone = vit::named_recipe("Ti/16");
    vit::BlockVariant variant = vit::BlockVariant::parallel_stabilized;
    int patch_size = 4;
    int image_size = 32;
    int blocks_per_stage = 0;  // 0 means backbone.layers / 6
    int cnn_tail_blocks = 3;
    int tail_channels = 16;
    bool output_tanh = true;  // false is a test hook

    int stage_depth() const { return blocks_per_stage > 0 ? blocks_per_stage : backbone.layers / 6; }
    int grid() const { return image_size / patch_size; }
    int hidden_dim() const { return backbone.hidden_dim; }
    void validate() const;
};

/// Merges each 2x2 cell of a g x g token grid (order (0,0),(0,1),(1,0),(1,1))
/// into one 4D vector and projects it with `weight` [4D, D].
template <typename Scalar>
Tensor<Scalar> token_downsample(const Tensor<Scalar>& tokens, int grid, const Tensor<Scalar>& weight);

/// Projects each token of a g x g grid with `weight` [D, 4D] and splits it into a 2x2 cell.
template <typename Scalar>
Tensor<Scalar> token_upsample(const Tensor<Scalar>& tokens, int grid, const Tensor<Scalar>& weight);

/// concat(decoder, encoder) along features, projected by `weight` [2D, D].
template <typename Scalar>
Tensor<Scalar> skip_fuse(const Tensor<Scalar>& decoder, const Tensor<Scalar>& encoder, const Tensor<Scalar>& weight);

template <typename Scalar>
struct TailBlock {
    Tensor<Scalar> conv1_weight, conv1_bias;  // [C,3,3,3], [C]
    Tensor<Scalar> conv2_weight, conv2_bias;  // [3,C,3,3], [3]
};

template <typename Scalar>
class ViTUnet {
   public:
    ViTUnet(const ViTUnetConfig& config, std::uint64_t seed, const std::string& prefix = "");
    ViTUnet(ViTUnet&&) noexcept = default;
    ViTUnet& operator=(ViTUnet&&) noexcept = default;
    ViTUnet(const ViTUnet&) = delete;
    ViTUnet& operator=(const ViTUnet&) = delete;

    // [B,3,H,W] -> [B,3,H,W]
    Tensor<Scalar> forward(const Tensor<Scalar>& image) const;
    // Same pipeline up to the reshaped token projection (before the CNN tail).
    Tensor<Scalar> forward_tokens_image(const Tensor<Scalar>& image) const;

    const ViTUnetConfig& config() const { return config_; }
    ParamStore<Scalar>& params() { return params_; }
    const ParamStore<Scalar>& params() const { return params_; }
    int transformer_block_count() const {
        return static_cast<int>(encoder1_.size() + encoder2_.size() + decoder1_.size());
    }
    const std::vector<vit::BlockParams<Scalar>>& encoder1() const { return encoder1_; }
    const std::vector<vit::BlockParams<Scalar>>& encoder2() const { return encoder2_; }
    const std::vector<vit::BlockParams<Scalar>>& decoder1() const { return decoder1_; }

    Tensor<Scalar> downsample_weight() const { return down_; }
    Tensor<Scalar> upsample_weight() const { return up_; }
    Tensor<Scalar> fuse_weight() const { return fuse_; }
    const vit::LinearParams<Scalar>& output_projection() const { return head_; }
    const std::vector<TailBlock<Scalar>>& tail() const { return tail_; }

   private:
    ViTUnetConfig config_;
    vit::Recipe stage_recipe_;
    ParamStore<Scalar> params_;
    vit::PatchEmbedParams<Scalar> embed_;
    std::vector<vit::BlockParams<Scalar>> encoder1_, encoder2_, decoder1_;
    Tensor<Scalar> down_, up_, fuse_;
    vit::LinearParams<Scalar> head_;
    std::vector<TailBlock<Scalar>> tail_;
};

}  // namespace parallax::gan
