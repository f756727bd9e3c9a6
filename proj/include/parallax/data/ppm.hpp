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

#include <filesystem>
#include <string>

#include "parallax/data/dataset.hpp"

namespace parallax::data {

// [-1,1] -> [0,255] via round((x+1)*127.5), clamped.
unsigned char unit_to_byte(float x);

/// Binary PPM (P6, maxval 255). `chw` points at one [3,H,W] image in [-1,1].
void write_ppm(const std::filesystem::path& path, const float* chw, Index height, Index width);

/// Reads one P6 image into [3,H,W] floats in [-1,1].
std::vector<float> read_ppm(const std::filesystem::path& path, Index& height, Index& width);

// Writes image i of `images` [B,3,H,W] as dir/{prefix}_{i}.ppm.
void write_ppm_batch(const std::filesystem::path& dir, const std::string& prefix, const Tensor<float>& images);

/// Every *.ppm in `dir`, sorted by filename; all must share one size.
Dataset load_ppm_dir(const std::filesystem::path& dir);

void write_dataset_ppm(const std::filesystem::path& dir, const Dataset& d);

}  // namespace parallax::data
