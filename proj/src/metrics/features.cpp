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

#include "parallax/metrics/features.hpp"

#include <cmath>

#include "parallax/core/errors.hpp"
#include "parallax/core/ops.hpp"
#include "parallax/core/random.hpp"
#include "parallax/core/tape.hpp"

namespace parallax::metrics {

namespace {

Tensor<float> he_normal(Rng& rng, Index out, Index in, Index k) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * k * k));
    Vector<float> v(out * in * k * k);
    for (Index i = 0; i < v.size(); ++i) v(i) = static_cast<float>(rng.normal() * stddev);
    return Tensor<float>::from_data({out, in, k, k}, std::move(v));
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::uint64_t seed) : seed_(seed) {
    Rng rng(derive_seed(seed, 0xfea7));
    w1_ = he_normal(rng, 16, 3, 4);
    w2_ = he_normal(rng, 32, 16, 4);
    w3_ = he_normal(rng, kFeatureDim, 32, 4);
}

Eigen::MatrixXd FeatureExtractor::extract(const Tensor<float>& images) const {
    if (images.rank() != 4 || images.size(1) != 3) {
        throw DimensionError("feature extractor expects [B,3,H,W], got " + to_string(images.shape()));
    }
    if (images.size(2) < 16 || images.size(3) < 16) {
        throw UsageError("feature extractor needs H,W >= 16, got " + to_string(images.shape()));
    }
    NoGradScope<float> no_grad;
    Tensor<float> x = leaky_relu(conv2d(images, w1_, 2, 1));
    x = leaky_relu(conv2d(x, w2_, 2, 1));
    x = leaky_relu(conv2d(x, w3_, 2, 1));
    const Index batch = x.size(0), spatial = x.size(2) * x.size(3);
    const Tensor<float> pooled = mean_lastdim(reshape(x, {batch, kFeatureDim, spatial}));
    Eigen::MatrixXd features(batch, kFeatureDim);
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < kFeatureDim; ++c) features(b, c) = pooled.data()(b * kFeatureDim + c);
    return features;
}

Eigen::MatrixXd default_feature_extractor(const Tensor<float>& images, std::uint64_t seed) {
    return FeatureExtractor(seed).extract(images);
}

}  // namespace parallax::metrics
