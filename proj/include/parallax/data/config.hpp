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
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "parallax/gan/cyclegan.hpp"
#include "parallax/stability/probe.hpp"
#include "parallax/stability/trainer.hpp"

namespace parallax::data {

/// Scalar or array value from the configuration subset of TOML: integers,
/// floats, booleans, double-quoted strings and flat arrays of numbers.
struct ConfigValue {
    std::variant<std::int64_t, double, bool, std::string, std::vector<double>> value;
    int line = 0;
};

using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Errors carry `origin:line`.
ConfigTable parse_toml_subset(const std::string& text, const std::string& origin = "<config>");

struct ModelSection {
    std::string recipe = "Ti/16";
    vit::BlockVariant variant = vit::BlockVariant::parallel_stabilized;
    int patch_size = 4;
    int image_size = 32;
    int num_classes = 10;
    std::uint64_t seed = 0;

    vit::Recipe resolved_recipe() const;
};

struct DataSection {
    std::string source = "synthetic";  // synthetic | cifar10 | cifar100
    std::string train_path;
    std::string test_path;
    std::int64_t train_samples = 2048;  // 0 keeps every record
    std::int64_t test_samples = 512;
    std::uint64_t seed = 0;
};

struct GanSection {
    gan::CycleGanConfig cyclegan;
    std::string domain_a;  // PPM directories; empty selects the toy domains
    std::string domain_b;
    std::int64_t toy_samples = 256;
    std::int64_t sample_every = 0;  // write PPM samples every N steps (0 = only at the end)
};

struct RunConfig {
    ModelSection model;
    stability::TrainConfig train;
    DataSection data;
    GanSection gan;
    stability::ProbeConfig probe;

    // Copies the [model] backbone into the GAN generator config.
    void sync_generator();
    void validate() const;
};

/// Unknown sections or keys, wrong value types and failed validation throw
/// UsageError naming the line.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

nlohmann::ordered_json config_json(const RunConfig& config);

/// Train and test splits named by the [data] section, truncated to the sample counts.
std::pair<Dataset, Dataset> load_classification_data(const DataSection& data);

/// PPM directories when both are set, otherwise the seeded toy domains.
std::pair<Dataset, Dataset> load_gan_domains(const GanSection& gan);

}  // namespace parallax::data
