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

#include "parallax/gan/patchgan.hpp"

#include <algorithm>

#include "parallax/core/errors.hpp"
#include "parallax/core/ops.hpp"
#include "parallax/core/random.hpp"

namespace parallax::gan {

namespace {

constexpr double kConvInitStddev = 0.02;
constexpr int kKernel = 4;

}  // namespace

int receptive_field(const std::vector<ConvLayerSpec>& layers) {
    if (layers.empty()) throw UsageError("receptive_field needs at least one layer");
    int field = 1, jump = 1;
    for (const auto& layer : layers) {
        if (layer.kernel <= 0 || layer.stride <= 0) throw UsageError("kernel and stride must be positive");
        field += (layer.kernel - 1) * jump;
        jump *= layer.stride;
    }
    return field;
}

std::vector<ConvLayerSpec> PatchGanConfig::layers() const {
    std::vector<ConvLayerSpec> out(static_cast<std::size_t>(strided_layers), ConvLayerSpec{kKernel, 2});
    out.push_back({kKernel, 1});
    out.push_back({kKernel, 1});
    return out;
}

void PatchGanConfig::validate() const {
    if (base_channels <= 0) throw UsageError("discriminator base_channels must be positive");
    if (strided_layers <= 0) throw UsageError("discriminator strided_layers must be positive");
}

template <typename Scalar>
PatchGan<Scalar>::PatchGan(const PatchGanConfig& config, std::uint64_t seed, const std::string& prefix)
    : config_(config) {
    config_.validate();
    Rng rng(seed);
    const auto specs = config_.layers();
    int in = 3;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const bool last = i + 1 == specs.size();
        const int out = last ? 1 : config_.base_channels * (1 << std::min<std::size_t>(i, 3));
        const std::string name = prefix + "conv" + std::to_string(i);
        Vector<Scalar> w(Index{out} * in * kKernel * kKernel);
        for (Index k = 0; k < w.size(); ++k) w(k) = static_cast<Scalar>(rng.normal() * kConvInitStddev);
        PatchGanLayer<Scalar> layer;
        layer.weight = params_.add(name + ".weight", Tensor<Scalar>::from_data({out, in, kKernel, kKernel}, std::move(w)));
        layer.bias = params_.zeros(name + ".bias", {out});
        layer.stride = specs[i].stride;
        layer.normalize = i > 0 && !last;
        layer.activate = !last;
        layers_.push_back(std::move(layer));
        in = out;
    }
}

template <typename Scalar>
Tensor<Scalar> PatchGan<Scalar>::forward(const Tensor<Scalar>& image) const {
    if (image.rank() != 4 || image.size(1) != 3) {
        throw DimensionError("PatchGan expects [B,3,H,W], got " + to_string(image.shape()));
    }
    Tensor<Scalar> x = image;
    for (const auto& layer : layers_) {
        x = conv2d(x, layer.weight, layer.bias, layer.stride, 1);
        if (layer.normalize) x = instance_norm(x);
        if (layer.activate) x = leaky_relu(x, Scalar(0.2));
    }
    return x;
}

template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps) {
    if (x.rank() != 4) throw DimensionError("instance_norm expects [B,C,H,W], got " + to_string(x.shape()));
    const Tensor<Scalar> flat = reshape(x, {x.size(0), x.size(1), x.size(2) * x.size(3)});
    return reshape(layer_norm(flat, Tensor<Scalar>(), Tensor<Scalar>(), eps), x.shape());
}

template class PatchGan<float>;
template class PatchGan<double>;
template Tensor<float> instance_norm(const Tensor<float>&, float);
template Tensor<double> instance_norm(const Tensor<double>&, double);

}  // namespace parallax::gan
