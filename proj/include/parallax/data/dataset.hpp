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

#include <span>
#include <string>
#include <vector>

#include "parallax/core/tensor.hpp"

namespace parallax::data {

/// Images [n,3,H,W] in [-1,1] with optional integer labels.
struct Dataset {
    Index channels = 3;
    Index height = 0;
    Index width = 0;
    std::vector<float> pixels;
    std::vector<int> labels;  // empty for unlabeled domains
    int num_classes = 0;
    std::string split;

    Index size() const;
    Index image_numel() const { return channels * height * width; }
    bool labeled() const { return !labels.empty(); }

    // Throws DimensionError/UsageError when a field is inconsistent.
    void validate() const;

    // Gathers rows into [indices.size(),C,H,W]. flips[i] mirrors row i horizontally.
    Tensor<float> batch(std::span<const Index> indices, const std::vector<bool>& flips = {}) const;
    std::vector<int> batch_labels(std::span<const Index> indices) const;

    Tensor<float> all_images() const;
    Dataset subset(Index count) const;
};

}  // namespace parallax::data
