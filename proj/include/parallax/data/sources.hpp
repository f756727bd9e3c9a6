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
#include <filesystem>
#include <utility>

#include "parallax/data/dataset.hpp"

namespace parallax::data {

enum class CifarVariant { cifar10, cifar100 };

/// Reads the CIFAR binary layout: per record a label byte (two for CIFAR-100,
/// coarse then fine) followed by 3072 channel-planar pixel bytes.
Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant);
Dataset load_cifar_bytes(std::span<const unsigned char> bytes, CifarVariant variant);

/// A file is read as is. A directory contributes data_batch_1..5.bin (train) or
/// test_batch.bin for CIFAR-10, and train.bin or test.bin for CIFAR-100.
Dataset load_cifar_split(const std::filesystem::path& path, CifarVariant variant, bool train);

// Appends the rows of `tail` to `head`; geometry and class counts must agree.
void append_rows(Dataset& head, const Dataset& tail);

inline float byte_to_unit(unsigned char b) { return static_cast<float>(b) / 127.5f - 1.0f; }

/// Seeded uniform noise in [-1,1] scaled by 3 and clamped back, with 10 random labels.
Dataset gen_provocation_set(Index n, std::uint64_t seed);

/// Two unpaired 32x32 domains: a red-dominant square (A) or a green-dominant
/// square (B) at random position and size on a gray background.
std::pair<Dataset, Dataset> gen_toy_domains(Index n, std::uint64_t seed);

}  // namespace parallax::data
