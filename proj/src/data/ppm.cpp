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

#include "parallax/data/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "parallax/core/errors.hpp"

namespace parallax::data {

namespace fs = std::filesystem;

unsigned char unit_to_byte(float x) {
    const float v = std::round((x + 1.0f) * 127.5f);
    return static_cast<unsigned char>(std::clamp(v, 0.0f, 255.0f));
}

void write_ppm(const fs::path& path, const float* chw, Index height, Index width) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P6\n" << width << ' ' << height << "\n255\n";
    const Index plane = height * width;
    std::vector<unsigned char> row(static_cast<std::size_t>(3 * plane));
    for (Index i = 0; i < plane; ++i)
        for (Index c = 0; c < 3; ++c) row[static_cast<std::size_t>(3 * i + c)] = unit_to_byte(chw[c * plane + i]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

namespace {

Index read_header_int(std::istream& in, const fs::path& path) {
    in >> std::ws;
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        in >> std::ws;
    }
    Index v = 0;
    if (!(in >> v) || v <= 0) throw FormatError(path.string() + ": bad PPM header");
    return v;
}

}  // namespace

std::vector<float> read_ppm(const fs::path& path, Index& height, Index& width) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
    width = read_header_int(in, path);
    height = read_header_int(in, path);
    if (read_header_int(in, path) != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
    in.get();
    const Index plane = height * width;
    std::vector<unsigned char> raw(static_cast<std::size_t>(3 * plane));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw FormatError(path.string() + ": truncated pixels");
    std::vector<float> chw(raw.size());
    for (Index i = 0; i < plane; ++i)
        for (Index c = 0; c < 3; ++c)
            chw[static_cast<std::size_t>(c * plane + i)] = static_cast<float>(raw[static_cast<std::size_t>(3 * i + c)]) / 127.5f - 1.0f;
    return chw;
}

void write_ppm_batch(const fs::path& dir, const std::string& prefix, const Tensor<float>& images) {
    if (images.rank() != 4 || images.size(1) != 3) throw DimensionError("write_ppm_batch expects [B,3,H,W]");
    fs::create_directories(dir);
    const Index per = images.numel() / images.size(0);
    for (Index b = 0; b < images.size(0); ++b) {
        write_ppm(dir / (prefix + "_" + std::to_string(b) + ".ppm"), images.data().data() + b * per, images.size(2),
                  images.size(3));
    }
}

Dataset load_ppm_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError("no .ppm files in " + dir.string());
    Dataset d;
    d.split = dir.filename().string();
    for (const auto& f : files) {
        Index h = 0, w = 0;
        const std::vector<float> chw = read_ppm(f, h, w);
        if (d.height == 0) {
            d.height = h;
            d.width = w;
        } else if (h != d.height || w != d.width) {
            throw FormatError(f.string() + ": size differs from the first image in the directory");
        }
        d.pixels.insert(d.pixels.end(), chw.begin(), chw.end());
    }
    return d;
}

void write_dataset_ppm(const fs::path& dir, const Dataset& d) {
    fs::create_directories(dir);
    for (Index i = 0; i < d.size(); ++i) {
        std::string name = std::to_string(i);
        name.insert(0, 6 - std::min<std::size_t>(6, name.size()), '0');
        if (d.labeled()) name += "_label" + std::to_string(d.labels[static_cast<std::size_t>(i)]);
        write_ppm(dir / (name + ".ppm"), d.pixels.data() + i * d.image_numel(), d.height, d.width);
    }
}

}  // namespace parallax::data
