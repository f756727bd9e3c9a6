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

#include <cmath>

#include "doctest.h"
#include "parallax/core/gradcheck.hpp"
#include "parallax/vit/classifier.hpp"
#include "test_util.hpp"

using namespace parallax;
using namespace parallax::vit;
using parallax::testing::bit_equal;
using parallax::testing::random_tensor;

namespace {

Recipe tiny_recipe(int dim = 8, int heads = 2, int mlp = 16, int image = 8, int patch = 4, int layers = 2) {
    Recipe r;
    r.name = "test";
    r.layers = layers;
    r.hidden_dim = dim;
    r.mlp_size = mlp;
    r.heads = heads;
    r.image_size = image;
    r.patch_size = patch;
    r.num_classes = 3;
    return r;
}

constexpr BlockVariant kVariants[] = {BlockVariant::serial, BlockVariant::parallel_raw,
                                      BlockVariant::parallel_stabilized};

}  // namespace

TEST_CASE("named recipes map onto the architecture table") {
    const Recipe ti = named_recipe("Ti/16");
    CHECK(ti.layers == 12);
    CHECK(ti.hidden_dim == 192);
    CHECK(ti.heads == 3);
    CHECK(ti.mlp_size == 768);
    for (const auto& name : recipe_names()) {
        const Recipe r = named_recipe(name);
        CHECK(r.mlp_size == 4 * r.hidden_dim);
        CHECK(r.hidden_dim % r.heads == 0);
    }
    CHECK(named_recipe("L/16").layers == 24);
    CHECK_THROWS_AS(named_recipe("XL/16"), UsageError);
    CHECK(parse_variant("parallel_stabilized") == BlockVariant::parallel_stabilized);
    CHECK_THROWS_AS(parse_variant("parallel"), UsageError);

    Recipe bad = tiny_recipe(9, 2);
    CHECK_THROWS_AS(bad.validate(), DimensionError);
    Recipe bad_image = tiny_recipe();
    bad_image.image_size = 10;
    CHECK_THROWS_AS(bad_image.validate(), DimensionError);
}

TEST_CASE("patch embedding token counts and zero image") {
    Recipe r = tiny_recipe(8, 2, 16, 32, 16);
    CHECK(r.num_patches() == 4);
    r.image_size = 224;
    CHECK(r.num_patches() == 196);

    ParamStore<float> store;
    Rng rng(1);
    const auto embed = make_patch_embed(store, "e", 32, 16, 8, rng);
    const Tensor<float> tokens = patch_embed(Tensor<float>::zeros({2, 3, 32, 32}), embed);
    CHECK(tokens.shape() == Shape{2, 4, 8});
    for (Index b = 0; b < 2; ++b) CHECK(tokens.data().segment(b * 32, 32) == embed.pos.data());

    const auto big = make_patch_embed(store, "big", 224, 16, 8, rng);
    CHECK(patch_embed(Tensor<float>::zeros({1, 3, 224, 224}), big).size(1) == 196);

    CHECK_THROWS_AS(image_to_patches(Tensor<float>::zeros({1, 3, 30, 30}), 16), DimensionError);
    CHECK_THROWS_AS(make_patch_embed(store, "odd", 30, 16, 8, rng), DimensionError);
}

TEST_CASE("patches round-trip and follow row-major grid order") {
    const Tensor<double> img = random_tensor<double>({2, 3, 8, 8}, 5);
    const Tensor<double> patches = image_to_patches(img, 4);
    CHECK(patches.shape() == Shape{2, 4, 48});
    // Patch 1 is the top-right 4x4 block; its first element is channel 0, row 0, column 4.
    CHECK(patches.data()(1 * 48) == img.data()(4));
    CHECK(bit_equal(patches_to_image(patches, 3, 4), img));
}

TEST_CASE("qk-norm bounds attention logits by sqrt(head_dim)") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ParamStore<float> store;
        Rng rng(seed);
        const Recipe r = tiny_recipe(16, 4, 32);
        const BlockParams<float> block = make_block(store, "b", r, BlockVariant::parallel_raw, rng);
        const Tensor<float> x = random_tensor<float>({2, 5, 16}, 100 + seed, 1e6);
        AttentionTrace trace;
        attention(x, block.attn, 4, true, &trace);
        CHECK(trace.max_abs_logit <= std::sqrt(4.0) + 1e-4);
        CHECK(trace.max_row_sum_error <= 1e-6);
    }
}

TEST_CASE("attention zero output projection and single token") {
    ParamStore<double> store;
    Rng rng(3);
    const Recipe r = tiny_recipe();
    BlockParams<double> block = make_block(store, "b", r, BlockVariant::serial, rng);
    const Tensor<double> x = random_tensor<double>({2, 4, 8}, 9);

    AttentionParams<double> zeroed = block.attn;
    zeroed.output.weight = Tensor<double>::zeros({8, 8});
    const Tensor<double> y = attention(x, zeroed, 2, false);
    CHECK(y.data().cwiseAbs().maxCoeff() == 0.0);

    // One token: softmax weight is exactly 1, output is out_proj(v).
    const Tensor<double> one = slice(x, 1, 0, 1);
    const Tensor<double> single = attention(one, block.attn, 2, false);
    const Tensor<double> expect = apply(block.attn.output, apply(block.attn.value, one));
    CHECK((single.data() - expect.data()).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(attention(x, block.attn, 3, false), DimensionError);
}

TEST_CASE("variants carry the right parameters") {
    const Recipe r = tiny_recipe();
    for (BlockVariant v : kVariants) {
        ParamStore<float> store;
        Rng rng(0);
        const auto block = make_block(store, "b", r, v, rng);
        CHECK(block.attn.query_gain.defined() == uses_qk_norm(v));
        CHECK(block.attn.key_gain.defined() == uses_qk_norm(v));
        CHECK(block.attn.query.bias.defined() == (v == BlockVariant::serial));
        CHECK(block.norm2.gain.defined() == (v == BlockVariant::serial));
        CHECK(block.mlp_out_norm.gain.defined() == (v == BlockVariant::parallel_stabilized));
    }
}

TEST_CASE("zero-weight blocks are exact identities") {
    const Recipe r = tiny_recipe();
    for (BlockVariant v : kVariants) {
        ParamStore<float> store;
        Rng rng(1);
        const auto block = make_block(store, "b", r, v, rng);
        for (const auto& e : store.entries()) {
            if (e.name.find(".gain") == std::string::npos) Tensor<float>(e.tensor).data().setZero();
        }
        const Tensor<float> x = random_tensor<float>({2, 4, 8}, 77, 3.0);
        CHECK(bit_equal(block_forward(x, block), x));
    }
}

TEST_CASE("zero-weight blocks have identity Jacobian (finite differences)") {
    const Recipe r = tiny_recipe(4, 2, 8);
    for (BlockVariant v : kVariants) {
        ParamStore<double> store;
        Rng rng(2);
        const auto block = make_block(store, "b", r, v, rng);
        for (const auto& e : store.entries()) {
            if (e.name.find(".gain") == std::string::npos) Tensor<double>(e.tensor).data().setZero();
        }
        const Tensor<double> x = random_tensor<double>({1, 3, 4}, 8);
        const Index n = x.numel();
        const double h = 1e-6;
        NoGradScope<double> off;
        for (Index j = 0; j < n; ++j) {
            Tensor<double> xp = x.detach(), xm = x.detach();
            xp.data()(j) += h;
            xm.data()(j) -= h;
            const Vector<double> col = (block_forward(xp, block).data() - block_forward(xm, block).data()) / (2 * h);
            for (Index i = 0; i < n; ++i) CHECK(col(i) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("parallel variants agree when the stabilizer norm is bypassed") {
    const Recipe r = tiny_recipe();
    ParamStore<float> store;
    Rng rng(4);
    const auto stabilized = make_block(store, "b", r, BlockVariant::parallel_stabilized, rng);
    BlockParams<float> raw = stabilized;
    raw.variant = BlockVariant::parallel_raw;
    const Tensor<float> x = random_tensor<float>({2, 4, 8}, 5);
    BlockHooks hook;
    hook.identity_stabilizer = true;
    CHECK(bit_equal(block_forward(x, stabilized, hook), block_forward(x, raw)));
    CHECK_FALSE(bit_equal(block_forward(x, stabilized), block_forward(x, raw)));
}

TEST_CASE("block variants pass gradient checks") {
    const Recipe r = tiny_recipe(8, 2, 12);
    for (BlockVariant v : kVariants) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            CAPTURE(to_string(v));
            CAPTURE(seed);
            {
                ParamStore<double> store;
                Rng rng(seed);
                const auto block = make_block(store, "b", r, v, rng);
                // Larger weights than the init scale so every branch matters.
                for (const auto& e : store.entries()) {
                    Tensor<double> t = e.tensor;
                    t.data() += random_tensor<double>(t.shape(), seed * 31 + t.numel(), 0.3).data();
                }
                Tensor<double> x = random_tensor<double>({2, 3, 8}, seed + 50);
                const Tensor<double> probe = random_tensor<double>({2, 3, 8}, seed + 60);
                auto params = store.tensors();
                params.push_back(x);
                const double err = check_gradients<double>(
                    [&] { return sum(mul(block_forward(x, block), probe)); }, params, 1e-6);
                CHECK(err < 1e-6);
            }
            {
                ParamStore<float> store;
                Rng rng(seed);
                const auto block = make_block(store, "b", r, v, rng);
                for (const auto& e : store.entries()) {
                    Tensor<float> t = e.tensor;
                    t.data() += random_tensor<float>(t.shape(), seed * 31 + t.numel(), 0.3).data();
                }
                const Tensor<float> x = random_tensor<float>({2, 3, 8}, seed + 50);
                const Tensor<float> probe = random_tensor<float>({2, 3, 8}, seed + 60, 0.1);
                const float err = finite_difference_check<float>(
                    [&](const Tensor<float>& t) { return sum(mul(block_forward(t, block), probe)); }, x, 3e-3f);
                CHECK(err < 1e-4f);
            }
        }
    }
}

TEST_CASE("classifier construction, shapes and determinism") {
    Recipe ti = named_recipe("Ti/16");
    ti.image_size = 32;
    ti.patch_size = 4;
    ti.num_classes = 10;
    const auto model = build_classifier<float>(ti, BlockVariant::parallel_stabilized, 7);
    CHECK(model.blocks().size() == 12);
    CHECK(model.blocks()[0].norm1.gain.numel() == 192);
    CHECK(model.blocks()[0].heads == 3);

    const Tensor<float> logits = model.forward(random_tensor<float>({2, 3, 32, 32}, 1));
    CHECK(logits.shape() == Shape{2, 10});

    const auto again = build_classifier<float>(ti, BlockVariant::parallel_stabilized, 7);
    REQUIRE(model.params().size() == again.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        CHECK(bit_equal(model.params().entries()[i].tensor, again.params().entries()[i].tensor));
    }
    const auto other = build_classifier<float>(ti, BlockVariant::parallel_stabilized, 8);
    CHECK_FALSE(bit_equal(model.params().entries()[0].tensor, other.params().entries()[0].tensor));
}

TEST_CASE("classifier forward and backward are bit-deterministic") {
    const Recipe r = tiny_recipe(8, 2, 16, 8, 4, 2);
    auto run = [&] {
        auto model = build_classifier<float>(r, BlockVariant::parallel_raw, 3);
        const Tensor<float> images = random_tensor<float>({2, 3, 8, 8}, 4);
        const std::vector<int> labels{1, 2};
        Tape<float> tape;
        const Tensor<float> logits = model.forward(images);
        tape.backward(cross_entropy(logits, labels));
        std::vector<Vector<float>> grads;
        for (const auto& e : model.params().entries()) grads.push_back(e.tensor.grad());
        return std::pair{logits.detach(), grads};
    };
    const auto [l1, g1] = run();
    const auto [l2, g2] = run();
    CHECK(bit_equal(l1, l2));
    CHECK(g1 == g2);
}

TEST_CASE("closed-form count equals instantiated scalars on small configs") {
    for (BlockVariant v : kVariants) {
        for (int layers : {1, 3}) {
            const Recipe r = tiny_recipe(12, 3, 20, 16, 4, layers);
            const auto model = build_classifier<float>(r, v, 0);
            CHECK(count_params(r, v) == model.params().scalar_count());
        }
    }
}

TEST_CASE("closed-form count equals instantiated scalars for table recipes at 224/16" * doctest::timeout(300)) {
    for (const char* name : {"Ti/16", "S/16", "B/16", "L/16"}) {
        for (BlockVariant v : kVariants) {
            const Recipe r = named_recipe(name);
            const auto model = build_classifier<float>(r, v, 0);
            CAPTURE(name);
            CHECK(count_params(r, v) == model.params().scalar_count());
        }
    }
}

TEST_CASE("parameter counts against the reference counts") {
    auto within = [](double got, double ref) { return std::abs(got - ref) / ref <= 0.02; };
    for (const char* name : {"Ti/16", "S/16", "B/16", "L/16"}) {
        const Recipe r = named_recipe(name);
        const auto ref = reference_param_count(name);
        CAPTURE(name);
        CHECK(within(double(count_params(r, BlockVariant::serial)), *ref.serial));
        CHECK(within(double(count_params(r, BlockVariant::parallel_raw)), *ref.parallel));
    }
    const Recipe ti = named_recipe("Ti/16");
    CHECK(count_params(ti, BlockVariant::parallel_raw) < count_params(ti, BlockVariant::serial));
    CHECK(count_params(ti, BlockVariant::parallel_stabilized) < count_params(ti, BlockVariant::serial));
    CHECK(within(double(count_params(named_recipe("22B/16"), BlockVariant::parallel_raw)), 21743e6));
    CHECK(count_params(named_recipe("S/16"), BlockVariant::serial, 32, 4) !=
          count_params(named_recipe("S/16"), BlockVariant::serial));
}
