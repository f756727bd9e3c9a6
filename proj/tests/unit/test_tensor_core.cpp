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
#include <vector>

#include "doctest.h"
#include "parallax/core/gradcheck.hpp"
#include "parallax/core/ops.hpp"
#include "test_util.hpp"
#include "gradient_cases.hpp"

using namespace parallax;
using parallax::testing::bit_equal;
using parallax::testing::kink_free_input;
using parallax::testing::primitive_cases;
using parallax::testing::random_tensor;

using TF = Tensor<float>;
using TD = Tensor<double>;

TEST_CASE("matmul matches identity, naive oracle and zero cases") {
    const TF a = TF::from_values({2, 2}, {1, 2, 3, 4});
    const TF eye = TF::from_values({2, 2}, {1, 0, 0, 1});
    CHECK(bit_equal(matmul(a, eye), a));

    const TF b = TF::from_values({2, 1}, {5, 6});
    const TF c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    const auto oracle = parallax::testing::naive_matmul(a.data().data(), b.data().data(), 2, 2, 1);
    CHECK(c.data()(0) == oracle(0));
    CHECK(c.data()(1) == oracle(1));
    CHECK(c.data()(0) == 17.0f);
    CHECK(c.data()(1) == 39.0f);

    const TF z = matmul(TF::zeros({2, 3}), random_tensor<float>({3, 4}, 7));
    CHECK(z.shape() == Shape{2, 4});
    CHECK(z.data().cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("batched matmul broadcasts batch axes") {
    const TD a = random_tensor<double>({2, 3, 4, 5}, 1);
    const TD b = random_tensor<double>({3, 5, 2}, 2);
    const TD c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 3, 4, 2});
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 3; ++j) {
            const auto ref = parallax::testing::naive_matmul(a.data().data() + (i * 3 + j) * 20,
                                                             b.data().data() + j * 10, 4, 5, 2);
            for (Index e = 0; e < 8; ++e) CHECK(c.data()((i * 3 + j) * 8 + e) == doctest::Approx(ref(e)).epsilon(1e-12));
        }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    try {
        matmul(TF::zeros({2, 3}), TF::zeros({4, 5}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("softmax examples and row sums") {
    const TF s = softmax_lastdim(TF::from_values({2}, {0, 0}));
    CHECK(s.data()(0) == doctest::Approx(0.5));
    CHECK(s.data()(1) == doctest::Approx(0.5));

    const TD t = softmax_lastdim(TD::from_values({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
    CHECK(t.data()(0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(t.data()(1) == doctest::Approx(2.0 / 6).epsilon(1e-12));
    CHECK(t.data()(2) == doctest::Approx(3.0 / 6).epsilon(1e-12));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TF x = random_tensor<float>({7, 9}, seed, 5.0);
        const TF y = softmax_lastdim(x);
        CHECK(y.data().minCoeff() >= 0.0f);
        for (Index r = 0; r < 7; ++r) CHECK(std::abs(y.data().segment(r * 9, 9).sum() - 1.0f) <= 1e-6f);
        const TF shifted = softmax_lastdim(add_scalar(x, 3.25f));
        CHECK((shifted.data() - y.data()).cwiseAbs().maxCoeff() <= 1e-6f);
    }

    // Max subtraction keeps huge logits finite.
    const TF big = softmax_lastdim(TF::from_values({2}, {1e30f, 0.0f}));
    CHECK(big.data()(0) == 1.0f);

    CHECK_THROWS_AS(softmax_lastdim(TF::from_values({2}, {std::numeric_limits<float>::quiet_NaN(), 0})),
                    NumericError);
}

TEST_CASE("layer_norm examples") {
    const TD y = layer_norm(TD::from_values({2}, {1, -1}), TD::ones({2}), TD::zeros({2}), 1e-5);
    CHECK(y.data()(0) == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
    CHECK(y.data()(1) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));

    const TF c = layer_norm(TF::from_values({3}, {5, 5, 5}), TF::ones({3}), TF::zeros({3}), 1e-5f);
    CHECK(c.data().cwiseAbs().maxCoeff() == 0.0f);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TF x = random_tensor<float>({6, 32}, seed, 3.0);
        const TF n = layer_norm(x, TF::ones({32}), TF::zeros({32}), 1e-5f);
        for (Index r = 0; r < 6; ++r) {
            const auto row = n.data().segment(r * 32, 32).template cast<double>();
            const double m = row.mean();
            const double v = (row.array() - m).square().mean();
            CHECK(std::abs(m) < 1e-5);
            CHECK(std::abs(v - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("activation values") {
    CHECK(gelu(TF::scalar(0)).item() == 0.0f);
    CHECK(tanh(TF::scalar(0)).item() == 0.0f);
    CHECK(leaky_relu(TF::scalar(-1), 0.2f).item() == doctest::Approx(-0.2));
    CHECK(relu(TF::scalar(-1)).item() == 0.0f);
    // 0.5*3*(1+tanh(sqrt(2/pi)*(3+0.044715*27))) evaluated at 30 digits.
    CHECK(gelu(TD::scalar(3)).item() == doctest::Approx(2.99636260791822698).epsilon(1e-14));
    CHECK(gelu(TF::scalar(3)).item() == doctest::Approx(2.9964).epsilon(1e-4));
    CHECK_THROWS_AS(leaky_relu(TF::scalar(-1), 1.5f), UsageError);
}

TEST_CASE("conv2d examples") {
    const TF x = random_tensor<float>({2, 3, 5, 5}, 3);
    TF w = TF::zeros({3, 3, 1, 1});
    for (Index c = 0; c < 3; ++c) w.data()(c * 3 + c) = 1;
    CHECK(bit_equal(conv2d(x, w, 1, 0), x));

    const TF ones = conv2d(TF::ones({1, 1, 5, 5}), TF::ones({1, 1, 3, 3}), 1, 0);
    CHECK(ones.shape() == Shape{1, 1, 3, 3});
    CHECK(ones.data().minCoeff() == 9.0f);
    CHECK(ones.data().maxCoeff() == 9.0f);

    CHECK(conv_output_size(32, 4, 2, 1) == 16);
    CHECK(conv2d(TF::zeros({1, 1, 32, 32}), TF::zeros({1, 1, 4, 4}), 2, 1).size(2) == 16);
    CHECK_THROWS_AS(conv2d(TF::zeros({1, 1, 2, 2}), TF::zeros({1, 1, 4, 4}), 1, 0), DimensionError);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TD xi = random_tensor<double>({2, 3, 7, 6}, 10 + seed);
        const TD wi = random_tensor<double>({4, 3, 3, 3}, 20 + seed);
        const TD got = conv2d(xi, wi, 2, 1);
        const TD ref = parallax::testing::naive_conv2d(xi, wi, 2, 1);
        REQUIRE(got.shape() == ref.shape());
        CHECK((got.data() - ref.data()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("backward examples") {
    TF w = TF::from_values({3}, {0.5f, -1, 2}).set_requires_grad(true);
    const TF x = TF::from_values({3}, {4, 5, 6});
    {
        Tape<float> tape;
        backward(sum(mul(w, x)));
    }
    CHECK(w.grad() == x.data());

    TD v = TD::from_values({2}, {1, 2});
    v.set_requires_grad(true);
    {
        Tape<double> tape;
        const TD root = sum(square(v));
        tape.backward(root);
        CHECK(v.grad()(0) == 2.0);
        CHECK(v.grad()(1) == 4.0);
        tape.backward(root);  // accumulates
        CHECK(v.grad()(0) == 4.0);
        CHECK(v.grad()(1) == 8.0);
        v.zero_grad();
        tape.backward(root);
        CHECK(v.grad()(1) == 4.0);
    }

    {
        Tape<double> tape;
        const TD y = square(v);
        CHECK_THROWS_AS(tape.backward(y), UsageError);
    }
    CHECK_THROWS_AS(backward(TD::scalar(1)), UsageError);
}

TEST_CASE("fan-out gradients are summed and constants get no grad") {
    TD a = TD::from_values({2}, {1.5, -2}).set_requires_grad(true);
    const TD c = TD::from_values({2}, {3, 4});
    {
        Tape<double> tape;
        const TD y = add(mul(a, a), mul(a, c));  // d/da = 2a + c
        tape.backward(sum(y));
    }
    CHECK(a.grad()(0) == doctest::Approx(2 * 1.5 + 3));
    CHECK(a.grad()(1) == doctest::Approx(-4 + 4));
    CHECK_FALSE(c.has_grad());
    CHECK_THROWS_AS(TD(c).ensure_grad(), UsageError);
}

TEST_CASE("finite-difference checker examples") {
    const TD x = random_tensor<double>({5}, 9);
    CHECK(finite_difference_check<double>([](const TD& t) { return sum(t); }, x, 1e-4) < 1e-10);

    const TD xl = random_tensor<double>({3, 6}, 11);
    const double ln_err = finite_difference_check<double>(
        [](const TD& t) { return sum(square(layer_norm(t, TD(), TD(), 1e-5))); }, xl, 1e-5);
    CHECK(ln_err < 1e-6);

    const TF W = random_tensor<float>({4, 3}, 12, 0.5);
    const std::vector<int> labels{2};
    const TF xin = random_tensor<float>({1, 4}, 13);
    const float ce_err = finite_difference_check<float>(
        [&](const TF& t) { return cross_entropy(matmul(t, W), labels); }, xin, 1e-2f);
    CHECK(ce_err < 1e-4f);
}


TEST_CASE("every primitive passes finite differences in 64-bit") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const TD x = kink_free_input<double>(seed);
        for (const auto& [name, f] : primitive_cases<double>(seed)) {
            const std::string case_name = name;
            CAPTURE(case_name);
            CAPTURE(seed);
            CHECK(finite_difference_check<double>(f, x, 1e-6) < 1e-6);
        }
    }
}

TEST_CASE("every primitive passes finite differences in 32-bit") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const TF x = kink_free_input<float>(seed);
        for (const auto& [name, f] : primitive_cases<float>(seed)) {
            const std::string case_name = name;
            CAPTURE(case_name);
            CAPTURE(seed);
            CHECK(finite_difference_check<float>(f, x, 1e-2f) < 1e-4f);
        }
    }
}

TEST_CASE("tape replay is bit-deterministic") {
    auto run = [] {
        TF w = random_tensor<float>({6, 5}, 42).set_requires_grad(true);
        const TF x = random_tensor<float>({3, 6}, 43);
        Tape<float> tape;
        const TF y = softmax_lastdim(layer_norm(gelu(matmul(x, w)), TF(), TF(), 1e-5f));
        tape.backward(sum(square(y)));
        return std::pair{y.detach(), w.grad()};
    };
    const auto [y1, g1] = run();
    const auto [y2, g2] = run();
    CHECK(bit_equal(y1, y2));
    CHECK(g1 == g2);
}

TEST_CASE("outside a tape nothing is recorded") {
    TF w = TF::ones({2}).set_requires_grad(true);
    const TF y = sum(w);
    CHECK_FALSE(y.on_tape());
    CHECK_THROWS_AS(backward(y), UsageError);
    {
        Tape<float> tape;
        NoGradScope<float> off;
        CHECK_FALSE(sum(w).on_tape());
    }
}
