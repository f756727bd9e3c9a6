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

#include "parallax/data/sources.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <vector>

#include "parallax/core/errors.hpp"
#include "parallax/core/random.hpp"

namespace parallax::data {

namespace {

constexpr Index kCifarSide = 32;
constexpr Index kCifarPixels = 3 * kCifarSide * kCifarSide;

Dataset empty_rgb(Index n, Index side) {
    Dataset d;
    d.height = side;
    d.width = side;
    d.pixels.assign(static_cast<std::size_t>(n * 3 * side * side), 0.0f);
    return d;
}

Dataset square_domain(Index n, std::uint64_t seed, int dominant) {
    constexpr Index side = 32;
    Dataset d = empty_rgb(n, side);
    d.split = dominant == 0 ? "domain_a" : "domain_b";
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
        float* img = d.pixels.data() + i * 3 * side * side;
        const Index size = 8 + static_cast<Index>(rng.below(13));
        const Index top = static_cast<Index>(rng.below(static_cast<std::uint64_t>(side - size + 1)));
        const Index left = static_cast<Index>(rng.below(static_cast<std::uint64_t>(side - size + 1)));
        float color[3];
        for (int c = 0; c < 3; ++c) color[c] = static_cast<float>(rng.uniform(-0.9, -0.3));
        color[dominant] = static_cast<float>(rng.uniform(0.5, 1.0));
        for (Index c = 0; c < 3; ++c) {
            for (Index y = 0; y < side; ++y) {
                for (Index x = 0; x < side; ++x) {
                    const bool inside = y >= top && y < top + size && x >= left && x < left + size;
                    const float base = inside ? color[c] : 0.0f;
                    const float noise = static_cast<float>(rng.uniform(-0.05, 0.05));
                    img[(c * side + y) * side + x] = std::clamp(base + noise, -1.0f, 1.0f);
                }
            }
        }
    }
    return d;
}

}  // namespace

Dataset load_cifar_bytes(std::span<const unsigned char> bytes, CifarVariant variant) {
    const Index label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
    const Index record = label_bytes + kCifarPixels;
    const Index length = static_cast<Index>(bytes.size());
    if (length == 0 || length % record != 0) {
        throw FormatError("CIFAR file length " + std::to_string(length) + " is not a positive multiple of the record size " +
                          std::to_string(record));
    }
    const Index n = length / record;
    Dataset d = empty_rgb(n, kCifarSide);
    d.num_classes = variant == CifarVariant::cifar10 ? 10 : 100;
    d.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const unsigned char* rec = bytes.data() + i * record;
        const int label = rec[label_bytes - 1];
        if (label >= d.num_classes) {
            throw FormatError("CIFAR record " + std::to_string(i) + " has label " + std::to_string(label));
        }
        d.labels[static_cast<std::size_t>(i)] = label;
        std::transform(rec + label_bytes, rec + record, d.pixels.begin() + i * kCifarPixels, byte_to_unit);
    }
    return d;
}

Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        Dataset d = load_cifar_bytes(bytes, variant);
        d.split = path.stem().string();
        return d;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void append_rows(Dataset& head, const Dataset& tail) {
    if (head.size() == 0 && head.pixels.empty()) {
        head = tail;
        return;
    }
    if (head.channels != tail.channels || head.height != tail.height || head.width != tail.width) {
        throw DimensionError("append_rows: image geometry differs");
    }
    if (head.labeled() != tail.labeled() || head.num_classes != tail.num_classes) {
        throw UsageError("append_rows: label layout differs");
    }
    head.pixels.insert(head.pixels.end(), tail.pixels.begin(), tail.pixels.end());
    head.labels.insert(head.labels.end(), tail.labels.begin(), tail.labels.end());
}

Dataset load_cifar_split(const std::filesystem::path& path, CifarVariant variant, bool train) {
    if (!std::filesystem::is_directory(path)) {
        Dataset d = load_cifar_binary(path, variant);
        d.split = train ? "train" : "test";
        return d;
    }
    std::vector<std::string> files;
    if (variant == CifarVariant::cifar100) {
        files.push_back(train ? "train.bin" : "test.bin");
    } else if (train) {
        for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
    } else {
        files.push_back("test_batch.bin");
    }
    Dataset out;
    for (const auto& name : files) append_rows(out, load_cifar_binary(path / name, variant));
    out.split = train ? "train" : "test";
    return out;
}

Dataset gen_provocation_set(Index n, std::uint64_t seed) {
    if (n < 64) throw UsageError("provocation set needs n >= 64, got " + std::to_string(n));
    Dataset d = empty_rgb(n, 32);
    d.split = "provocation";
    d.num_classes = 10;
    Rng rng(derive_seed(seed, 0x970c));
    for (float& p : d.pixels) p = std::clamp(static_cast<float>(3.0 * rng.uniform(-1.0, 1.0)), -1.0f, 1.0f);
    d.labels.resize(static_cast<std::size_t>(n));
    for (int& label : d.labels) label = static_cast<int>(rng.below(10));
    return d;
}

std::pair<Dataset, Dataset> gen_toy_domains(Index n, std::uint64_t seed) {
    if (n < 16) throw UsageError("toy domains need n >= 16, got " + std::to_string(n));
    return {square_domain(n, derive_seed(seed, 0xa), 0), square_domain(n, derive_seed(seed, 0xb), 1)};
}

}  // namespace parallax::data
