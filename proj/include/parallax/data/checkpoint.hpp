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
#include <span>
#include <string>
#include <vector>

#include "parallax/core/parameters.hpp"

namespace parallax::data {

inline constexpr char kCheckpointMagic[4] = {'V', 'T', 'U', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

/// Named table of float32 tensors. Integer state (RNG words, counters, text)
/// is stored bit-cast into float32 slots.
class Checkpoint {
   public:
    void add_tensor(const std::string& name, const Tensor<float>& t);
    void add_values(const std::string& name, std::vector<std::uint32_t> dims, std::vector<float> values);
    void add_words(const std::string& name, std::span<const std::uint32_t> words);
    void add_u64(const std::string& name, std::uint64_t value);
    void add_text(const std::string& name, const std::string& text);
    void add_params(const std::string& prefix, const ParamStore<float>& params);

    bool contains(const std::string& name) const;
    const CheckpointEntry& at(const std::string& name) const;
    std::vector<std::uint32_t> words(const std::string& name) const;
    std::uint64_t u64(const std::string& name) const;
    std::string text(const std::string& name) const;

    // Copies a stored tensor into `target`; shapes must match exactly.
    void load_tensor(const std::string& name, Tensor<float>& target) const;
    void load_params(const std::string& prefix, ParamStore<float>& params) const;

    const std::vector<CheckpointEntry>& entries() const { return entries_; }

   private:
    std::vector<CheckpointEntry> entries_;
};

std::vector<unsigned char> checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(std::span<const unsigned char> bytes);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace parallax::data
