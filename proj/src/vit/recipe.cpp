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

#include "parallax/vit/recipe.hpp"

#include <array>

#include "parallax/core/errors.hpp"

namespace parallax::vit {

std::string to_string(BlockVariant variant) {
    switch (variant) {
        case BlockVariant::serial: return "serial";
        case BlockVariant::parallel_raw: return "parallel_raw";
        case BlockVariant::parallel_stabilized: return "parallel_stabilized";
    }
    return "unknown";
}

BlockVariant parse_variant(std::string_view text) {
    if (text == "serial") return BlockVariant::serial;
    if (text == "parallel_raw") return BlockVariant::parallel_raw;
    if (text == "parallel_stabilized") return BlockVariant::parallel_stabilized;
    throw UsageError("unknown block variant '" + std::string(text) +
                     "' (expected serial, parallel_raw or parallel_stabilized)");
}

void Recipe::validate() const {
    if (layers < 1 || hidden_dim < 1 || mlp_size < 1 || heads < 1 || patch_size < 1 || image_size < 1 ||
        num_classes < 1) {
        throw DimensionError("recipe " + name + " has a nonpositive field");
    }
    if (hidden_dim % heads != 0) {
        throw DimensionError("recipe " + name + ": hidden_dim " + std::to_string(hidden_dim) +
                             " is not divisible by heads " + std::to_string(heads));
    }
    if (image_size % patch_size != 0) {
        throw DimensionError("recipe " + name + ": image_size " + std::to_string(image_size) +
                             " is not divisible by patch_size " + std::to_string(patch_size));
    }
}

namespace {

struct TableRow {
    const char* name;
    int layers, hidden, mlp, heads;
    double serial_millions, parallel_millions;  // negative: not reported
};

constexpr std::array<TableRow, 6> kTable{{
    {"Ti/16", 12, 192, 768, 3, 5.8, 5.6},
    {"S/16", 12, 384, 1536, 6, 22.2, 22.1},
    {"B/16", 12, 768, 3072, 12, 86.0, 87.9},
    {"L/16", 24, 1024, 4096, 16, 307.0, 307.0},
    {"H/16", 32, 1280, 5120, 16, 632.0, -1},
    {"22B/16", 48, 6144, 24576, 48, -1, 21743.0},
}};

const TableRow& find_row(std::string_view name) {
    for (const auto& row : kTable) {
        if (name == row.name) return row;
    }
    throw UsageError("unknown recipe '" + std::string(name) + "'");
}

}  // namespace

Recipe named_recipe(std::string_view name) {
    const TableRow& row = find_row(name);
    Recipe r;
    r.name = row.name;
    r.layers = row.layers;
    r.hidden_dim = row.hidden;
    r.mlp_size = row.mlp;
    r.heads = row.heads;
    r.validate();
    if (r.mlp_size != 4 * r.hidden_dim) throw DimensionError("table recipe with mlp_size != 4*hidden_dim");
    return r;
}

std::vector<std::string> recipe_names() {
    std::vector<std::string> names;
    for (const auto& row : kTable) names.emplace_back(row.name);
    return names;
}

ReferenceCount reference_param_count(std::string_view name) {
    const TableRow& row = find_row(name);
    ReferenceCount ref;
    if (row.serial_millions > 0) ref.serial = row.serial_millions * 1e6;
    if (row.parallel_millions > 0) ref.parallel = row.parallel_millions * 1e6;
    return ref;
}

std::int64_t count_params(const Recipe& recipe, BlockVariant variant) {
    recipe.validate();
    const std::int64_t D = recipe.hidden_dim, M = recipe.mlp_size, p = recipe.patch_size;
    const std::int64_t N = recipe.num_patches(), C = recipe.num_classes;

    const std::int64_t embed = 3 * p * p * D + D;  // patch projection + bias
    const std::int64_t tables = N * D + D;         // positional table + class token

    const std::int64_t norm = 2 * D;
    const std::int64_t mlp = D * M + M + M * D + D;
    const std::int64_t qkv = 3 * D * D + (uses_qkv_bias(variant) ? 3 * D : 0);
    const std::int64_t out_proj = D * D + D;
    const std::int64_t qk_gains = uses_qk_norm(variant) ? 2 * D : 0;

    std::int64_t block = qkv + out_proj + qk_gains + mlp + norm;
    if (variant == BlockVariant::serial) block += norm;  // second pre-norm
    if (variant == BlockVariant::parallel_stabilized) block += norm;  // MLP-output norm

    const std::int64_t head = 2 * D + D * C + C;  // final norm + linear head
    return embed + tables + recipe.layers * block + head;
}

std::int64_t count_params(Recipe recipe, BlockVariant variant, int image_size, int patch_size) {
    recipe.image_size = image_size;
    recipe.patch_size = patch_size;
    return count_params(recipe, variant);
}

}  // namespace parallax::vit
