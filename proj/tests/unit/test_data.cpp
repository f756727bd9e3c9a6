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


#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "parallax/core/errors.hpp"
#include "parallax/data/checkpoint.hpp"
#include "parallax/data/config.hpp"
#include "parallax/data/metrics_writer.hpp"
#include "parallax/data/ppm.hpp"
#include "parallax/data/sources.hpp"
#include "test_util.hpp"

using namespace parallax;
using namespace parallax::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("parallax_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<unsigned char> cifar_record(std::vector<unsigned char> labels, unsigned char pixel) {
    std::vector<unsigned char> rec = std::move(labels);
    rec.insert(rec.end(), 3072, pixel);
    return rec;
}

}  // namespace

TEST_CASE("CIFAR binary examples") {
    const Dataset d = load_cifar_bytes(cifar_record({7}, 255), CifarVariant::cifar10);
    REQUIRE(d.size() == 1);
    CHECK(d.labels[0] == 7);
    CHECK(d.num_classes == 10);
    for (float p : d.pixels) CHECK(p == 1.0f);
    for (float p : load_cifar_bytes(cifar_record({3}, 0), CifarVariant::cifar10).pixels) CHECK(p == -1.0f);

    auto two = cifar_record({4, 93}, 10);
    const auto second = cifar_record({1, 5}, 20);
    two.insert(two.end(), second.begin(), second.end());
    const Dataset c100 = load_cifar_bytes(two, CifarVariant::cifar100);
    CHECK(c100.size() == 2);
    CHECK(c100.labels == std::vector<int>{93, 5});

    auto truncated = cifar_record({1}, 1);
    truncated.pop_back();
    CHECK_THROWS_AS(load_cifar_bytes(truncated, CifarVariant::cifar10), FormatError);
    try {
        load_cifar_bytes(truncated, CifarVariant::cifar10);
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("3073") != std::string::npos);
        CHECK(std::string(e.what()).find("3072") != std::string::npos);
    }
}

TEST_CASE("CIFAR layout is channel-planar and the byte mapping is invertible") {
    std::vector<unsigned char> rec{2};
    for (int i = 0; i < 3072; ++i) rec.push_back(static_cast<unsigned char>((i * 7) % 256));
    const fs::path file = scratch_dir("cifar") / "data_batch_1.bin";
    std::ofstream(file, std::ios::binary).write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    const Dataset a = load_cifar_binary(file, CifarVariant::cifar10);
    const Dataset b = load_cifar_binary(file, CifarVariant::cifar10);
    CHECK(a.pixels == b.pixels);
    for (int i = 0; i < 3072; ++i) CHECK(unit_to_byte(a.pixels[static_cast<std::size_t>(i)]) == rec[static_cast<std::size_t>(i + 1)]);
    for (int v = 0; v < 256; ++v) CHECK(unit_to_byte(byte_to_unit(static_cast<unsigned char>(v))) == v);
    // Red plane first: pixel (0,1) of the green plane is byte 1 + 1024 + 1.
    CHECK(a.batch(std::vector<Index>{0}).data()(1024 + 1) == byte_to_unit(rec[1026]));
}

TEST_CASE("provocation set is seeded, clamped and shaped") {
    const Dataset a = gen_provocation_set(64, 3), b = gen_provocation_set(64, 3);
    CHECK(a.pixels == b.pixels);
    CHECK(a.labels == b.labels);
    CHECK(a.all_images().shape() == Shape{64, 3, 32, 32});
    CHECK(a.labels.size() == 64);
    CHECK_NOTHROW(a.validate());
    Index saturated = 0;
    for (float p : a.pixels) saturated += p == 1.0f || p == -1.0f;
    CHECK(saturated > static_cast<Index>(a.pixels.size()) / 2);
    CHECK(gen_provocation_set(64, 4).pixels != a.pixels);
    CHECK_THROWS_AS(gen_provocation_set(63, 0), UsageError);
}

TEST_CASE("toy domains are seeded and color-dominant") {
    const auto [a, b] = gen_toy_domains(32, 5);
    const auto [a2, b2] = gen_toy_domains(32, 5);
    CHECK(a.pixels == a2.pixels);
    CHECK(b.pixels == b2.pixels);
    CHECK(a.all_images().shape() == Shape{32, 3, 32, 32});
    CHECK_FALSE(a.labeled());
    const auto channel_mean = [](const Dataset& d, Index c) {
        double s = 0;
        for (Index i = 0; i < d.size(); ++i)
            for (Index k = 0; k < 1024; ++k) s += d.pixels[static_cast<std::size_t>(i * 3072 + c * 1024 + k)];
        return s / static_cast<double>(d.size() * 1024);
    };
    CHECK(channel_mean(a, 0) > channel_mean(a, 1));
    CHECK(channel_mean(b, 1) > channel_mean(b, 0));
    CHECK_NOTHROW(a.validate());
    CHECK_THROWS_AS(gen_toy_domains(15, 0), UsageError);
}

TEST_CASE("dataset batches flip horizontally") {
    Dataset d;
    d.height = 1;
    d.width = 3;
    d.pixels = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f, 0.9f};
    const std::vector<Index> rows{0};
    const Tensor<float> flipped = d.batch(rows, {true});
    CHECK(flipped.data()(0) == 0.3f);
    CHECK(flipped.data()(2) == 0.1f);
    CHECK(flipped.data()(3) == 0.6f);
    CHECK(d.batch(rows).data()(0) == 0.1f);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ParamStore<float> params;
    params.add("w", parallax::testing::random_tensor<float>({3, 4}, 1));
    params.add("b", Tensor<float>::from_values({2}, {std::nanf(""), -0.0f}));
    Checkpoint ckpt;
    ckpt.add_params("model.", params);
    ckpt.add_u64("rng", 0xdeadbeefcafef00dULL);
    ckpt.add_text("config", "lr = 1e-4\n");
    const std::uint32_t words[3] = {0u, 0x7fc00001u, 0xffffffffu};
    ckpt.add_words("words", words);

    const fs::path file = scratch_dir("ckpt") / "model.vtub";
    checkpoint_save(ckpt, file);
    const Checkpoint back = checkpoint_load(file);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(ckpt));
    CHECK(back.u64("rng") == 0xdeadbeefcafef00dULL);
    CHECK(back.text("config") == "lr = 1e-4\n");
    CHECK(back.words("words") == std::vector<std::uint32_t>(words, words + 3));

    ParamStore<float> other;
    other.add("w", Tensor<float>::zeros({3, 4}));
    other.add("b", Tensor<float>::zeros({2}));
    back.load_params("model.", other);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& x = params.entries()[i].tensor;
        const auto& y = other.entries()[i].tensor;
        for (Index k = 0; k < x.numel(); ++k) {
            CHECK(std::bit_cast<std::uint32_t>(x.data()(k)) == std::bit_cast<std::uint32_t>(y.data()(k)));
        }
    }

    ParamStore<float> wrong;
    wrong.add("w", Tensor<float>::zeros({4, 3}));
    CHECK_THROWS_AS(back.load_params("model.", wrong), FormatError);
}

TEST_CASE("checkpoint layout and corruption errors") {
    Checkpoint ckpt;
    ckpt.add_values("ab", {2}, {1.0f, 2.0f});
    const auto bytes = checkpoint_bytes(ckpt);
    const std::vector<unsigned char> expected{'V', 'T', 'U', 'B', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 'a', 'b', 1, 2, 0, 0, 0,
                                              0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40};
    CHECK(bytes == expected);

    auto corrupt = bytes;
    corrupt[0] = 'X';
    try {
        checkpoint_from_bytes(corrupt);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(checkpoint_from_bytes(version), FormatError);
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        CHECK_THROWS_AS(checkpoint_from_bytes(std::span(bytes.data(), cut)), FormatError);
    }
}

TEST_CASE("config defaults, overrides and errors") {
    const RunConfig empty = parse_config_text("[train]\n");
    CHECK(empty.train.lr == 1e-4);
    CHECK(empty.train.clip_threshold == 10.0);
    CHECK(empty.train.milestones == std::vector<double>{0.3, 0.6, 0.9});
    CHECK(empty.train.lr_decay_factor == 0.1);
    CHECK(empty.train.weight_decay == 0.05);
    CHECK(empty.train.batch_size == 128);
    CHECK(empty.gan.cyclegan.weights.cycle == 10.0);
    CHECK(empty.gan.cyclegan.weights.identity == 5.0);
    CHECK(empty.gan.cyclegan.pool_capacity == 50);
    CHECK(empty.gan.cyclegan.beta1 == 0.5);

    const RunConfig c = parse_config_text(R"(
# comment line
[model]
recipe = "S/16"
variant = "parallel_stabilized"  # trailing comment
patch_size = 8

[train]
lr = 3e-4
clip = "none"
milestones = [0.5, 0.75]
epochs = 4
augment_flips = false

[gan]
lambda_cycle = 2.5
)");
    CHECK(c.model.variant == vit::BlockVariant::parallel_stabilized);
    CHECK(c.model.resolved_recipe().hidden_dim == 384);
    CHECK(c.model.patch_size == 8);
    CHECK(c.train.lr == 3e-4);
    CHECK_FALSE(c.train.clip_threshold.has_value());
    CHECK(c.train.milestones == std::vector<double>{0.5, 0.75});
    CHECK(c.train.epochs == 4);
    CHECK_FALSE(c.train.augment_flips);
    CHECK(c.gan.cyclegan.weights.cycle == 2.5);
    CHECK(c.gan.cyclegan.generator.backbone.hidden_dim == 384);
    CHECK(c.gan.cyclegan.generator.patch_size == 8);

    const auto message = [](const std::string& text) {
        try {
            parse_config_text(text, "cfg");
        } catch (const UsageError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("[train]\nlr = -1\n").find("lr") != std::string::npos);
    CHECK(message("[train]\n\nlearning_rate = 1\n") == "cfg:3: unknown key 'learning_rate' in [train]");
    CHECK(message("[model]\nvariant = \"fancy\"\n").find("cfg:2:") == 0);
    CHECK(message("[train]\nepochs = 1.5\n").find("cfg:2:") == 0);
    CHECK(message("[nope]\nx = 1\n").find("unknown section") != std::string::npos);
    CHECK(message("[train]\nlr 1\n").find("cfg:2:") == 0);
    CHECK(message("[train]\nmilestones = [0.6, 0.3]\n").find("milestones") != std::string::npos);
    CHECK(message("lr = 1\n").find("outside") != std::string::npos);
}

TEST_CASE("resolved config echo is stable JSON") {
    const RunConfig c = parse_config_text("[train]\nclip = \"none\"\n");
    const auto j = config_json(c);
    CHECK(j["record"] == "config");
    CHECK(j["train"]["clip"] == "none");
    CHECK(config_json(c).dump() == j.dump());
}

TEST_CASE("metrics writer emits one flushed JSON object per line") {
    std::ostringstream out;
    MetricsWriter writer(out);
    nlohmann::ordered_json a;
    a["step"] = 1;
    a["loss"] = 0.5;
    writer.emit(a);
    nlohmann::ordered_json b;
    b["epoch"] = 1;
    b["split"] = "train";
    writer.emit(b);
    CHECK(out.str() == "{\"step\":1,\"loss\":0.5}\n{\"epoch\":1,\"split\":\"train\"}\n");
}

TEST_CASE("PPM round trip and directory loading") {
    CHECK(unit_to_byte(-1.0f) == 0);
    CHECK(unit_to_byte(1.0f) == 255);
    CHECK(unit_to_byte(0.0f) == 128);
    CHECK(unit_to_byte(5.0f) == 255);

    const auto [a, b] = gen_toy_domains(16, 2);
    const fs::path dir = scratch_dir("ppm");
    write_dataset_ppm(dir, a.subset(3));
    const Dataset back = load_ppm_dir(dir);
    REQUIRE(back.size() == 3);
    CHECK(back.height == 32);
    for (std::size_t i = 0; i < back.pixels.size(); ++i) CHECK(unit_to_byte(back.pixels[i]) == unit_to_byte(a.pixels[i]));

    write_ppm_batch(dir / "batch", "7_ab", a.subset(2).all_images());
    CHECK(fs::exists(dir / "batch" / "7_ab_1.ppm"));
    CHECK_THROWS_AS(load_ppm_dir(scratch_dir("empty")), FormatError);
}

TEST_CASE("shipped configuration files parse") {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(fs::path(PARALLAX_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() == ".toml") files.push_back(entry.path());
    }
    CHECK(files.size() >= 4);
    for (const auto& file : files) {
        CAPTURE(file.string());
        CHECK_NOTHROW(parse_config(file));
    }
    const RunConfig probe = parse_config(fs::path(PARALLAX_SOURCE_DIR) / "configs" / "probe.toml");
    CHECK(probe.probe.lr == 1e-3);
    CHECK(probe.probe.seeds == 3);
    CHECK(probe.probe.logit_cap == 4000.0);
}
