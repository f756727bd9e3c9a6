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

#include "parallax/vit/classifier.hpp"

namespace parallax::vit {

template <typename Scalar>
VitClassifier<Scalar>::VitClassifier(const Recipe& recipe, BlockVariant variant, std::uint64_t seed)
    : recipe_(recipe), variant_(variant) {
    recipe_.validate();
    Rng rng(seed);
    const int D = recipe_.hidden_dim;
    embed_ = make_patch_embed(params_, "embed", recipe_.image_size, recipe_.patch_size, D, rng);
    class_token_ = params_.truncated_normal("class_token", {1, D}, rng, kInitStddev);
    blocks_.reserve(static_cast<std::size_t>(recipe_.layers));
    for (int i = 0; i < recipe_.layers; ++i) {
        blocks_.push_back(make_block(params_, "blocks." + std::to_string(i), recipe_, variant_, rng));
    }
    final_norm_ = make_norm(params_, "final_norm", D);
    head_ = make_linear(params_, "head", D, recipe_.num_classes, rng);
}

template <typename Scalar>
Tensor<Scalar> VitClassifier<Scalar>::forward(const Tensor<Scalar>& images, AttentionTrace* trace) const {
    const Tensor<Scalar> tokens = patch_embed(images, embed_);
    const Index B = tokens.size(0), D = tokens.size(2);
    const Tensor<Scalar> cls = add(Tensor<Scalar>::zeros({B, 1, D}), class_token_);
    Tensor<Scalar> x = concat<Scalar>({cls, tokens}, 1);
    BlockHooks hooks;
    hooks.trace = trace;
    for (const auto& block : blocks_) x = block_forward(x, block, hooks);
    x = apply(final_norm_, reshape(slice(x, 1, 0, 1), {B, D}));
    return apply(head_, x);
}

template class VitClassifier<float>;
template class VitClassifier<double>;

}  // namespace parallax::vit
