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

#include "parallax/core/tensor.hpp"

namespace parallax::metrics {

inline constexpr Index kFeatureDim = 64;

/// Untrained convolutional feature stack used in place of an inception network.
/// Three 4x4 stride-2 convolutions (3->16->32->64) with leaky ReLU, then a
/// global average pool. Weights are He-normal from `seed`; biases are zero.
class FeatureExtractor {
   public:
    explicit FeatureExtractor(std::uint64_t seed);

    // images [B,3,H,W] with H,W >= 16 -> features [B,64]
    Eigen::MatrixXd extract(const Tensor<float>& images) const;

    std::uint64_t seed() const { return seed_; }

   private:
    std::uint64_t seed_;
    Tensor<float> w1_, w2_, w3_;
};

Eigen::MatrixXd default_feature_extractor(const Tensor<float>& images, std::uint64_t seed);

}  // namespace parallax::metrics
