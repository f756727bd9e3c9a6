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

namespace parallax::vit {

/// Patch embedding, a learnable class token, `layers` residual blocks, a final
/// LayerNorm and a linear head read off the class token.
template <typename Scalar>
class VitClassifier {
public:
    VitClassifier(const Recipe& recipe, BlockVariant variant, std::uint64_t seed);

    VitClassifier(VitClassifier&&) noexcept = default;
    VitClassifier& operator=(VitClassifier&&) noexcept = default;
    VitClassifier(const VitClassifier&) = delete;
    VitClassifier& operator=(const VitClassifier&) = delete;

    // images [B,3,H,W] -> logits [B, num_classes]
    Tensor<Scalar> forward(const Tensor<Scalar>& images, AttentionTrace* trace = nullptr) const;

    const Recipe& recipe() const { return recipe_; }
    BlockVariant variant() const { return variant_; }
    ParamStore<Scalar>& params() { return params_; }
    const ParamStore<Scalar>& params() const { return params_; }
    const std::vector<BlockParams<Scalar>>& blocks() const { return blocks_; }

private:
    Recipe recipe_;
    BlockVariant variant_;
    ParamStore<Scalar> params_;
    PatchEmbedParams<Scalar> embed_;
    Tensor<Scalar> class_token_;  // [1, D]
    std::vector<BlockParams<Scalar>> blocks_;
    NormParams<Scalar> final_norm_;
    LinearParams<Scalar> head_;
};

template <typename Scalar = float>
VitClassifier<Scalar> build_classifier(const Recipe& recipe, BlockVariant variant, std::uint64_t seed) {
    return VitClassifier<Scalar>(recipe, variant, seed);
}

}  // namespace parallax::vit
