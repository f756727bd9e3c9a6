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

#include "parallax/data/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "parallax/core/errors.hpp"

namespace parallax::data {

Index Dataset::size() const {
    const Index per = image_numel();
    return per == 0 ? 0 : static_cast<Index>(pixels.size()) / per;
}

void Dataset::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0) throw DimensionError("dataset has a nonpositive image dimension");
    if (static_cast<Index>(pixels.size()) % image_numel() != 0) {
        throw DimensionError("dataset pixel buffer is not a whole number of images");
    }
    if (labeled() && static_cast<Index>(labels.size()) != size()) {
        throw DimensionError("dataset has " + std::to_string(labels.size()) + " labels for " + std::to_string(size()) +
                             " images");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) throw UsageError("label " + std::to_string(label) + " out of range");
    }
    for (float p : pixels) {
        if (!(p >= -1.0f && p <= 1.0f)) throw UsageError("dataset pixel outside [-1,1]");
    }
}

Tensor<float> Dataset::batch(std::span<const Index> indices, const std::vector<bool>& flips) const {
    const Index count = static_cast<Index>(indices.size());
    const Index per = image_numel();
    Vector<float> out(count * per);
    for (Index i = 0; i < count; ++i) {
        const Index row = indices[static_cast<std::size_t>(i)];
        if (row < 0 || row >= size()) throw UsageError("dataset index " + std::to_string(row) + " out of range");
        const float* src = pixels.data() + row * per;
        float* dst = out.data() + i * per;
        const bool flip = !flips.empty() && flips[static_cast<std::size_t>(i)];
        if (!flip) {
            std::copy(src, src + per, dst);
            continue;
        }
        for (Index c = 0; c < channels; ++c)
            for (Index y = 0; y < height; ++y)
                for (Index x = 0; x < width; ++x)
                    dst[(c * height + y) * width + x] = src[(c * height + y) * width + (width - 1 - x)];
    }
    return Tensor<float>::from_data({count, channels, height, width}, std::move(out));
}

std::vector<int> Dataset::batch_labels(std::span<const Index> indices) const {
    if (!labeled()) throw UsageError("dataset has no labels");
    std::vector<int> out;
    out.reserve(indices.size());
    for (Index row : indices) out.push_back(labels.at(static_cast<std::size_t>(row)));
    return out;
}

Tensor<float> Dataset::all_images() const {
    std::vector<Index> rows(static_cast<std::size_t>(size()));
    std::iota(rows.begin(), rows.end(), Index{0});
    return batch(rows);
}

Dataset Dataset::subset(Index count) const {
    if (count < 0 || count > size()) throw UsageError("subset size " + std::to_string(count) + " out of range");
    Dataset out = *this;
    out.pixels.resize(static_cast<std::size_t>(count * image_numel()));
    if (labeled()) out.labels.resize(static_cast<std::size_t>(count));
    return out;
}

}  // namespace parallax::data
