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
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "parallax/core/ops.hpp"
#include "parallax/core/tape.hpp"
#include "parallax/data/metrics_writer.hpp"
#include "parallax/data/sources.hpp"
#include "parallax/stability/trainer.hpp"
#include "test_util.hpp"

using namespace parallax;
using namespace parallax::stability;

namespace {

ParamStore<double> single_param(double value, double grad) {
    ParamStore<double> store;
    Tensor<double> p = store.add("p", Tensor<double>::from_values({1}, {value}));
    p.ensure_grad()(0) = grad;
    return store;
}

// Scalar AdamW written out from the textbook update, used as an oracle.
struct ReferenceAdamW {
    double m = 0, v = 0;
    int t = 0;
    double step(double p, double g, double lr, double wd) {
        p -= lr * wd * p;
        ++t;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1 - std::pow(0.9, t)), vhat = v / (1 - std::pow(0.999, t));
        return p - lr * mhat / (std::sqrt(vhat) + 1e-8);
    }
};

vit::Recipe tiny_recipe() {
    vit::Recipe r;
    r.name = "test";
    r.layers = 2;
    r.hidden_dim = 16;
    r.mlp_size = 32;
    r.heads = 2;
    r.patch_size = 8;
    r.image_size = 32;
    r.num_classes = 10;
    return r;
}

TrainConfig small_config() {
    TrainConfig c;
    c.lr = 1e-3;
    c.epochs = 2;
    c.batch_size = 16;
    c.seed = 11;
    return c;
}

std::string run_stream(const data::Dataset& train, const data::Dataset& test, const TrainConfig& config,
                       std::uint64_t model_seed) {
    vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_stabilized, model_seed);
    TrainState state = TrainState::fresh(model.params());
    std::ostringstream out;
    data::MetricsWriter writer(out);
    TrainObserver observer;
    observer.on_step = [&](const StepStats& s) { writer.emit(step_record(s)); };
    observer.on_epoch = [&](const EpochAccuracy& a) { writer.emit(epoch_record(a)); };
    train_classifier(model, train, &test, config, state, observer);
    return out.str();
}

}  // namespace

TEST_CASE("adamw_step examples") {
    {
        ParamStore<double> store;
        Tensor<double> p = store.add("p", Tensor<double>::from_values({3}, {1, -2, 3}));
        p.ensure_grad();
        auto state = OptimizerState<double>::for_params(store);
        adamw_step(store, state, 0.1, 0.0);
        CHECK(state.step == 1);
        CHECK(p.data()(0) == 1.0);
        CHECK(p.data()(1) == -2.0);
        CHECK(p.data()(2) == 3.0);
    }
    {
        ParamStore<double> store = single_param(1.0, 1.0);
        auto state = OptimizerState<double>::for_params(store);
        adamw_step(store, state, 0.1, 0.0);
        ReferenceAdamW ref;
        CHECK(store.at("p").data()(0) == doctest::Approx(ref.step(1.0, 1.0, 0.1, 0.0)).epsilon(1e-14));
        CHECK(store.at("p").data()(0) == doctest::Approx(0.9).epsilon(1e-6));
    }
    {
        ParamStore<double> store = single_param(2.5, 0.0);
        auto state = OptimizerState<double>::for_params(store);
        adamw_step(store, state, 0.1, 0.1);
        CHECK(store.at("p").data()(0) == 2.5 * (1.0 - 0.1 * 0.1));
    }
}

TEST_CASE("adamw_step follows the reference update over many steps") {
    ParamStore<double> store = single_param(0.7, 0.0);
    auto state = OptimizerState<double>::for_params(store);
    ReferenceAdamW ref;
    double expected = 0.7;
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const double g = rng.normal();
        Tensor<double> p = store.at("p");
        p.grad()(0) = g;
        adamw_step(store, state, 0.01, 0.05);
        expected = ref.step(expected, g, 0.01, 0.05);
        CHECK(p.data()(0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("adamw_step is deterministic and decay is decoupled") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ParamStore<float> a, b;
        a.add("w", parallax::testing::random_tensor<float>({4, 5}, seed));
        b.add("w", parallax::testing::random_tensor<float>({4, 5}, seed));
        Tensor<float> wa = a.at("w"), wb = b.at("w");
        wa.ensure_grad() = parallax::testing::random_tensor<float>({20}, seed + 50).data();
        wb.ensure_grad() = wa.grad();
        auto sa = OptimizerState<float>::for_params(a), sb = OptimizerState<float>::for_params(b);
        adamw_step(a, sa, 1e-2, 0.1);
        adamw_step(b, sb, 1e-2, 0.1);
        CHECK(parallax::testing::bit_equal(wa, wb));

        ParamStore<float> z;
        Tensor<float> wz = z.add("w", parallax::testing::random_tensor<float>({4, 5}, seed));
        const Vector<float> before = wz.data();
        wz.ensure_grad();
        auto sz = OptimizerState<float>::for_params(z);
        adamw_step(z, sz, 0.3, 0.2);
        for (Index i = 0; i < 20; ++i) CHECK(wz.data()(i) == before(i) * static_cast<float>(1.0 - 0.3 * 0.2));
    }
}

TEST_CASE("adamw_step refuses non-finite gradients") {
    ParamStore<float> store;
    Tensor<float> p = store.add("p", Tensor<float>::from_values({2}, {1, 2}));
    p.ensure_grad()(1) = std::numeric_limits<float>::infinity();
    auto state = OptimizerState<float>::for_params(store);
    try {
        adamw_step(store, state, 0.1, 0.1);
        FAIL("expected an explosion error");
    } catch (const ExplosionError& e) {
        CHECK(!e.stats().finite());
        CHECK(detect_explosion(e.stats()));
    }
    CHECK(p.data()(0) == 1.0f);
    CHECK(state.step == 0);
}

TEST_CASE("clip_global_norm examples") {
    Vector<double> small = Vector<double>::Zero(2);
    small << 3, 4;
    CHECK(clip_global_norm<double>({&small}, 10.0) == 1.0);
    CHECK(small(0) == 3.0);

    Vector<double> big(2);
    big << 30, 40;
    CHECK(clip_global_norm<double>({&big}, 10.0) == doctest::Approx(0.2));
    CHECK(big(0) == doctest::Approx(6.0));
    CHECK(big(1) == doctest::Approx(8.0));

    Vector<double> zero = Vector<double>::Zero(4);
    CHECK(clip_global_norm<double>({&zero}, 10.0) == 1.0);
    CHECK_THROWS_AS(clip_global_norm<double>({&zero}, 0.0), UsageError);
}

TEST_CASE("clipping bounds adversarially scaled gradients and is idempotent") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const double magnitude = std::pow(10.0, rng.uniform(-3.0, 9.0));
        std::vector<Vector<float>> grads;
        for (int k = 0; k < 1 + static_cast<int>(rng.below(5)); ++k) {
            Vector<float> g(1 + static_cast<Index>(rng.below(300)));
            for (Index i = 0; i < g.size(); ++i) g(i) = static_cast<float>(rng.normal() * magnitude);
            grads.push_back(std::move(g));
        }
        std::vector<Vector<float>*> ptrs;
        for (auto& g : grads) ptrs.push_back(&g);
        clip_global_norm(ptrs, 10.0);
        double sq = 0;
        for (const auto& g : grads) sq += g.cast<double>().squaredNorm();
        CHECK(std::sqrt(sq) <= 10.0 + 1e-6);

        const std::vector<Vector<float>> once = grads;
        CHECK(clip_global_norm(ptrs, 10.0) == 1.0);
        for (std::size_t k = 0; k < grads.size(); ++k) CHECK((grads[k].array() == once[k].array()).all());
    }
}

TEST_CASE("multistep_lr examples and schedule shape") {
    CHECK(multistep_lr(0.1, 0, 200) == 0.1);
    CHECK(multistep_lr(0.1, 59, 200) == 0.1);
    CHECK(multistep_lr(0.1, 60, 200) == doctest::Approx(0.01));
    CHECK(multistep_lr(0.1, 180, 200) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(multistep_lr(0.1, 200, 200), UsageError);

    std::vector<std::int64_t> changes;
    for (std::int64_t e = 1; e < 200; ++e) {
        const double now = multistep_lr(1.0, e, 200), before = multistep_lr(1.0, e - 1, 200);
        CHECK(now <= before);
        if (now != before) changes.push_back(e);
    }
    CHECK(changes == std::vector<std::int64_t>{60, 120, 180});
    CHECK(milestone_epoch(0.29, 100) == 29);
}

TEST_CASE("record_step_stats and detect_explosion examples") {
    ParamStore<float> store;
    Tensor<float> p = store.add("p", Tensor<float>::zeros({2}));
    p.ensure_grad() << 3, 4;
    const StepStats s = record_step_stats(store, Tensor<float>::zeros({2, 3}), 1.5, 0.1, 7);
    CHECK(s.grad_l2 == doctest::Approx(5.0));
    CHECK(s.grad_max == 4.0);
    CHECK(s.max_abs_logit == 0.0);
    CHECK(s.step == 7);
    CHECK_FALSE(detect_explosion(s));

    const Tensor<float> nan_logits =
        Tensor<float>::from_values({1, 2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
    const StepStats n = record_step_stats(store, nan_logits, 1.0, 0.1, 0);
    CHECK_FALSE(n.finite());
    CHECK(detect_explosion(n));

    StepStats big;
    big.max_abs_logit = 4001;
    CHECK(detect_explosion(big));
    big.max_abs_logit = 4000;
    CHECK_FALSE(detect_explosion(big));
    StepStats inf;
    inf.grad_max = std::numeric_limits<double>::infinity();
    CHECK(detect_explosion(inf));
    StepStats grad;
    grad.grad_max = 1e4 + 1;
    CHECK(detect_explosion(grad));
}

TEST_CASE("zero-weight classifier has zero logits") {
    vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_raw, 1);
    model.params().fill_zero();
    ParamStore<float>& params = model.params();
    Tape<float> tape;
    const Tensor<float> logits = model.forward(parallax::testing::random_tensor<float>({2, 3, 32, 32}, 2));
    tape.backward(sum(logits));
    CHECK(record_step_stats(params, logits, 0.0, 0.0, 0).max_abs_logit == 0.0);
}

TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
    const data::Dataset train = data::gen_provocation_set(64, 1).subset(8);
    vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_stabilized, 3);
    std::vector<Vector<float>> before;
    for (const auto& e : model.params().entries()) before.push_back(e.tensor.data());

    TrainConfig c;
    c.lr = 0;
    c.weight_decay = 0;
    c.epochs = 3;
    c.batch_size = 8;
    c.augment_flips = false;
    TrainState state = TrainState::fresh(model.params());
    const TrainResult r = train_classifier(model, train, nullptr, c, state);
    REQUIRE(r.steps.size() == 3);
    for (const auto& s : r.steps) CHECK(s.loss == doctest::Approx(r.steps[0].loss).epsilon(1e-6));
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK((model.params().entries()[i].tensor.data().array() == before[i].array()).all());
    }
}

TEST_CASE("same seed gives byte-identical metric streams") {
    const data::Dataset train = data::gen_provocation_set(64, 2);
    const data::Dataset test = data::gen_provocation_set(64, 3);
    const std::string a = run_stream(train, test, small_config(), 4);
    const std::string b = run_stream(train, test, small_config(), 4);
    CHECK(!a.empty());
    CHECK(a == b);
    TrainConfig other = small_config();
    other.seed = 12;
    CHECK(run_stream(train, test, other, 4) != a);
}

TEST_CASE("metric records carry exactly the documented keys") {
    StepStats s;
    s.step = 3;
    const auto j = step_record(s);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"step", "epoch", "loss", "max_abs_logit", "grad_max", "grad_l2", "lr"});
    const auto e = epoch_record({2, "test", 0.5});
    CHECK(e.dump() == R"({"epoch":2,"split":"test","accuracy":0.5})");
}

TEST_CASE("post-clip gradient norm never exceeds the threshold during training") {
    const data::Dataset train = data::gen_provocation_set(64, 5);
    vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_raw, 6);
    TrainConfig c = small_config();
    c.clip_threshold = 0.05;
    TrainState state = TrainState::fresh(model.params());
    const TrainResult r = train_classifier(model, train, nullptr, c, state);
    REQUIRE(r.steps.size() == 8);
    int clipped = 0;
    for (const auto& s : r.steps) {
        CHECK(s.grad_l2_clipped <= 0.05 + 1e-6);
        clipped += s.grad_l2 > 0.05;
    }
    CHECK(clipped > 0);
}

TEST_CASE("three consecutive flagged steps halt training with the offending stats") {
    const data::Dataset train = data::gen_provocation_set(64, 5);
    vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_raw, 6);
    TrainConfig c = small_config();
    c.logit_cap = 0.0;
    TrainState state = TrainState::fresh(model.params());
    const TrainResult r = train_classifier(model, train, nullptr, c, state);
    CHECK(r.exploded);
    REQUIRE(r.explosion.has_value());
    CHECK(r.explosion->step == 2);
    CHECK(r.steps.size() == 3);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted stream") {
    const data::Dataset train = data::gen_provocation_set(64, 7);
    const data::Dataset test = data::gen_provocation_set(64, 8);
    TrainConfig c = small_config();
    c.epochs = 3;
    const std::string straight = run_stream(train, test, c, 9);

    std::ostringstream out;
    data::MetricsWriter writer(out);
    TrainObserver observer;
    observer.on_step = [&](const StepStats& s) { writer.emit(step_record(s)); };
    observer.on_epoch = [&](const EpochAccuracy& a) { writer.emit(epoch_record(a)); };

    std::vector<unsigned char> bytes;
    {
        vit::VitClassifier<float> model(tiny_recipe(), vit::BlockVariant::parallel_stabilized, 9);
        TrainState state = TrainState::fresh(model.params());
        train_classifier(model, train, &test, c, state, observer, 1);
        data::Checkpoint ckpt;
        ckpt.add_params("model.", model.params());
        save_train_state(ckpt, state);
        bytes = data::checkpoint_bytes(ckpt);
    }
    vit::VitClassifier<float> resumed(tiny_recipe(), vit::BlockVariant::parallel_stabilized, 12345);
    const data::Checkpoint loaded = data::checkpoint_from_bytes(bytes);
    loaded.load_params("model.", resumed.params());
    TrainState state = load_train_state(loaded, resumed.params());
    CHECK(state.epoch == 1);
    train_classifier(resumed, train, &test, c, state, observer);
    CHECK(out.str() == straight);
}
