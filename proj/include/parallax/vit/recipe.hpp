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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parallax/core/tensor.hpp"

namespace parallax::vit {

using parallax::to_string;

enum class BlockVariant { serial, parallel_raw, parallel_stabilized };

std::string to_string(BlockVariant variant);
BlockVariant parse_variant(std::string_view text);

// Parallel variants always normalize queries and keys; serial never does.
inline bool uses_qk_norm(BlockVariant v) { return v != BlockVariant::serial; }
inline bool uses_qkv_bias(BlockVariant v) { return v == BlockVariant::serial; }

/// One row of the architecture table plus the input geometry it is
/// instantiated at. Patch size is independent of the recipe name, so a "/16"
/// recipe can run on 32x32 inputs with 4x4 patches.
struct Recipe {
    std::string name;
    int layers = 12;
    int hidden_dim = 192;
    int mlp_size = 768;
    int heads = 3;
    int patch_size = 16;
    int image_size = 224;
    int num_classes = 1000;

    int head_dim() const { return hidden_dim / heads; }
    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }

    // Throws DimensionError when a divisibility invariant is violated.
    void validate() const;
};

// "Ti/16", "S/16", "B/16", "L/16", "H/16", "22B/16" at 224/16 with 1000 classes.
Recipe named_recipe(std::string_view name);
std::vector<std::string> recipe_names();

// Reference parameter counts for a named recipe; empty where none is known.
struct ReferenceCount {
    std::optional<double> serial;
    std::optional<double> parallel;
};
ReferenceCount reference_param_count(std::string_view name);

/// Closed-form learnable-scalar count; equals the instantiated model's count.
std::int64_t count_params(const Recipe& recipe, BlockVariant variant);
std::int64_t count_params(Recipe recipe, BlockVariant variant, int image_size, int patch_size);

}  // namespace parallax::vit
