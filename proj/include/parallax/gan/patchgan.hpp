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
#include <string>
#include <utility>
#include <vector>

#include "parallax/core/parameters.hpp"

namespace parallax::gan {

struct ConvLayerSpec {
    int kernel = 4;
    int stride = 2;
};

/// 1 + sum over layers of (k-1) times the product of the preceding strides.
int receptive_field(const std::vector<ConvLayerSpec>& layers);

struct PatchGanConfig {
    int base_channels = 64;
    int strided_layers = 3;  // C64 plus (strided_layers - 1) normalized stride-2 convs

    // Kernel/stride of every conv in order, including the final 1-channel conv.
    std::vector<ConvLayerSpec> layers() const;
    void validate() const;
};

template <typename Scalar>
struct PatchGanLayer {
    Tensor<Scalar> weight;  // [out, in, 4, 4]
    Tensor<Scalar> bias;    // [out]
    int stride = 2;
    bool normalize = false;
    bool activate = true;
};

/// Convolutional patch discriminator: C64-LReLU, then normalized stride-2
/// layers doubling the width, one normalized stride-1 layer and a final
/// 1-channel stride-1 conv. Kernel 4 and padding 1 throughout.
template <typename Scalar>
class PatchGan {
   public:
    PatchGan(const PatchGanConfig& config, std::uint64_t seed, const std::string& prefix = "");
    PatchGan(PatchGan&&) noexcept = default;
    PatchGan& operator=(PatchGan&&) noexcept = default;
    PatchGan(const PatchGan&) = delete;
    PatchGan& operator=(const PatchGan&) = delete;

    // [B,3,H,W] -> [B,1,h,w]
    Tensor<Scalar> forward(const Tensor<Scalar>& image) const;

    const PatchGanConfig& config() const { return config_; }
    ParamStore<Scalar>& params() { return params_; }
    const ParamStore<Scalar>& params() const { return params_; }
    const std::vector<PatchGanLayer<Scalar>>& layers() const { return layers_; }

   private:
    PatchGanConfig config_;
    ParamStore<Scalar> params_;
    std::vector<PatchGanLayer<Scalar>> layers_;
};

// Instance normalization without affine parameters over [B,C,H,W].
template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps = Scalar(1e-5));

}  // namespace parallax::gan
