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

#include "parallax/gan/cyclegan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallax/core/ops.hpp"
#include "parallax/core/tape.hpp"

namespace parallax::gan {

namespace {

constexpr std::uint64_t kBatchStream = 0xba7c;

Tensor<float> run_no_grad(const ImageFn<float>& f, const Tensor<float>& x) {
    NoGradScope<float> no_grad;
    return f(x);
}

template <typename Model>
ImageFn<float> as_fn(const Model& m) {
    return [&m](const Tensor<float>& x) { return m.forward(x); };
}

}  // namespace

void GanLossWeights::validate() const {
    if (!(cycle >= 0) || !(identity >= 0)) throw UsageError("GAN loss weights must be >= 0");
}

bool LossBreakdown::finite() const {
    for (double v : {adversarial_ab, adversarial_ba, cycle, identity, generator_total, discriminator_a, discriminator_b}) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template <typename Scalar>
GeneratorObjective<Scalar> generator_objective(const ImageFn<Scalar>& g_ab, const ImageFn<Scalar>& g_ba,
                                               const ImageFn<Scalar>& d_a, const ImageFn<Scalar>& d_b,
                                               const Tensor<Scalar>& real_a, const Tensor<Scalar>& real_b,
                                               const GanLossWeights& weights) {
    weights.validate();
    GeneratorObjective<Scalar> out;
    out.fake_b = g_ab(real_a);
    out.fake_a = g_ba(real_b);
    out.adversarial_ab = mse_to_constant(d_b(out.fake_b), Scalar(1));
    out.adversarial_ba = mse_to_constant(d_a(out.fake_a), Scalar(1));
    const Tensor<Scalar> cycle = add(l1_loss(g_ba(out.fake_b), real_a), l1_loss(g_ab(out.fake_a), real_b));
    out.cycle = scale(cycle, static_cast<Scalar>(weights.cycle));
    if (weights.identity > 0) {
        const Tensor<Scalar> identity = add(l1_loss(g_ab(real_b), real_b), l1_loss(g_ba(real_a), real_a));
        out.identity = scale(identity, static_cast<Scalar>(weights.identity));
    } else {
        out.identity = Tensor<Scalar>::scalar(Scalar(0));
    }
    out.total = add(add(out.adversarial_ab, out.adversarial_ba), add(out.cycle, out.identity));
    return out;
}

template <typename Scalar>
Tensor<Scalar> discriminator_objective(const ImageFn<Scalar>& d, const Tensor<Scalar>& real, const Tensor<Scalar>& fake) {
    return scale(add(mse_to_constant(d(real), Scalar(1)), mse_to_constant(d(fake), Scalar(0))), Scalar(0.5));
}

template <typename Scalar>
ImagePool<Scalar>::ImagePool(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity < 0) throw UsageError("image pool capacity must be >= 0");
}

template <typename Scalar>
Tensor<Scalar> ImagePool<Scalar>::query(const Tensor<Scalar>& fresh) {
    if (fresh.rank() < 1) throw DimensionError("image pool expects a batch");
    Tensor<Scalar> out = fresh.detach();
    if (capacity_ == 0) return out;
    const Index batch = fresh.size(0), per = fresh.numel() / std::max<Index>(batch, 1);
    for (Index b = 0; b < batch; ++b) {
        auto slot = out.data().segment(b * per, per);
        if (static_cast<int>(images_.size()) < capacity_) {
            images_.push_back(slot);
        } else if (rng_.bernoulli(0.5)) {
            const auto j = static_cast<std::size_t>(rng_.below(static_cast<std::uint64_t>(capacity_)));
            Vector<Scalar> old = images_[j];
            images_[j] = slot;
            slot = old;
        }
    }
    return out;
}

void CycleGanConfig::validate() const {
    generator.validate();
    discriminator.validate();
    weights.validate();
    if (!(lr > 0)) throw UsageError("gan.lr must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw UsageError("gan betas must lie in [0,1)");
    if (pool_capacity < 0) throw UsageError("gan.pool_capacity must be >= 0");
    if (batch_size <= 0) throw UsageError("gan.batch_size must be positive");
    if (steps < 0) throw UsageError("gan.steps must be >= 0");
}

CycleGan::CycleGan(const CycleGanConfig& config)
    : config_(config),
      g_ab_(config.generator, derive_seed(config.seed, 1), "g_ab."),
      g_ba_(config.generator, derive_seed(config.seed, 2), "g_ba."),
      d_a_(config.discriminator, derive_seed(config.seed, 3), "d_a."),
      d_b_(config.discriminator, derive_seed(config.seed, 4), "d_b."),
      pool_a_(config.pool_capacity, derive_seed(config.seed, 5)),
      pool_b_(config.pool_capacity, derive_seed(config.seed, 6)) {
    config_.validate();
    opt_g_ab_ = stability::OptimizerState<float>::for_params(g_ab_.params(), config.beta1, config.beta2);
    opt_g_ba_ = stability::OptimizerState<float>::for_params(g_ba_.params(), config.beta1, config.beta2);
    opt_d_a_ = stability::OptimizerState<float>::for_params(d_a_.params(), config.beta1, config.beta2);
    opt_d_b_ = stability::OptimizerState<float>::for_params(d_b_.params(), config.beta1, config.beta2);
}

LossBreakdown CycleGan::step(const Tensor<float>& real_a, const Tensor<float>& real_b) {
    LossBreakdown losses;
    for (auto* store : {&g_ab_.params(), &g_ba_.params(), &d_a_.params(), &d_b_.params()}) store->zero_grad();

    Tensor<float> fake_a, fake_b;
    {
        Tape<float> tape;
        GeneratorObjective<float> g;
        try {
            g = generator_objective<float>(as_fn(g_ab_), as_fn(g_ba_), as_fn(d_a_), as_fn(d_b_), real_a, real_b,
                                           config_.weights);
        } catch (const NumericError& e) {
            losses.adversarial_ab = losses.adversarial_ba = losses.cycle = losses.identity = losses.generator_total =
                std::numeric_limits<double>::quiet_NaN();
            throw GanExplosionError(std::string("generator forward: ") + e.what(), losses);
        }
        losses.adversarial_ab = g.adversarial_ab.item();
        losses.adversarial_ba = g.adversarial_ba.item();
        losses.cycle = g.cycle.item();
        losses.identity = g.identity.item();
        losses.generator_total = g.total.item();
        if (!std::isfinite(losses.generator_total)) throw GanExplosionError("non-finite generator loss", losses);
        tape.backward(g.total);
        fake_a = g.fake_a.detach();
        fake_b = g.fake_b.detach();
    }
    try {
        stability::adamw_step(g_ab_.params(), opt_g_ab_, config_.lr, 0.0);
        stability::adamw_step(g_ba_.params(), opt_g_ba_, config_.lr, 0.0);
    } catch (const stability::ExplosionError& e) {
        throw GanExplosionError(std::string("generator update: ") + e.what(), losses);
    }

    d_a_.params().zero_grad();
    d_b_.params().zero_grad();
    {
        Tape<float> tape;
        const Tensor<float> loss_a = discriminator_objective<float>(as_fn(d_a_), real_a, pool_a_.query(fake_a));
        const Tensor<float> loss_b = discriminator_objective<float>(as_fn(d_b_), real_b, pool_b_.query(fake_b));
        losses.discriminator_a = loss_a.item();
        losses.discriminator_b = loss_b.item();
        if (!losses.finite()) throw GanExplosionError("non-finite discriminator loss", losses);
        tape.backward(add(loss_a, loss_b));
    }
    try {
        stability::adamw_step(d_a_.params(), opt_d_a_, config_.lr, 0.0);
        stability::adamw_step(d_b_.params(), opt_d_b_, config_.lr, 0.0);
    } catch (const stability::ExplosionError& e) {
        throw GanExplosionError(std::string("discriminator update: ") + e.what(), losses);
    }
    steps_ += 1;
    return losses;
}

Tensor<float> translate(const ViTUnet<float>& g, const data::Dataset& source, std::int64_t batch_size) {
    std::vector<Tensor<float>> parts;
    std::vector<Index> rows;
    for (Index begin = 0; begin < source.size(); begin += batch_size) {
        const Index end = std::min<Index>(source.size(), begin + batch_size);
        rows.resize(static_cast<std::size_t>(end - begin));
        std::iota(rows.begin(), rows.end(), begin);
        parts.push_back(run_no_grad(as_fn(g), source.batch(rows)));
    }
    if (parts.empty()) throw UsageError("translate: empty dataset");
    return concat(parts, 0);
}

double cycle_l1(const CycleGan& gan, const data::Dataset& a, const data::Dataset& b, std::int64_t batch_size) {
    NoGradScope<float> no_grad;
    const auto reconstruction = [&](const ViTUnet<float>& there, const ViTUnet<float>& back, const data::Dataset& d) {
        double total = 0;
        std::vector<Index> rows;
        for (Index begin = 0; begin < d.size(); begin += batch_size) {
            const Index end = std::min<Index>(d.size(), begin + batch_size);
            rows.resize(static_cast<std::size_t>(end - begin));
            std::iota(rows.begin(), rows.end(), begin);
            const Tensor<float> x = d.batch(rows);
            total += static_cast<double>(sum(abs(sub(back.forward(there.forward(x)), x))).item());
        }
        return total / static_cast<double>(d.size() * d.image_numel());
    };
    return reconstruction(gan.g_ab(), gan.g_ba(), a) + reconstruction(gan.g_ba(), gan.g_ab(), b);
}

void train_cyclegan(CycleGan& gan, const data::Dataset& a, const data::Dataset& b, const GanObserver& observer) {
    const CycleGanConfig& config = gan.config();
    if (a.size() == 0 || b.size() == 0) throw UsageError("train_cyclegan needs two nonempty domains");
    for (std::int64_t step = gan.steps_done(); step < config.steps; ++step) {
        Rng rng(derive_seed(config.seed, kBatchStream, static_cast<std::uint64_t>(step)));
        std::vector<Index> rows_a, rows_b;
        for (std::int64_t i = 0; i < config.batch_size; ++i) {
            rows_a.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(a.size()))));
            rows_b.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(b.size()))));
        }
        const LossBreakdown losses = gan.step(a.batch(rows_a), b.batch(rows_b));
        if (observer.on_step) observer.on_step(step, losses);
    }
}

nlohmann::ordered_json gan_step_record(std::int64_t step, const LossBreakdown& l) {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["adversarial_ab"] = l.adversarial_ab;
    j["adversarial_ba"] = l.adversarial_ba;
    j["cycle"] = l.cycle;
    j["identity"] = l.identity;
    j["generator_total"] = l.generator_total;
    j["discriminator_a"] = l.discriminator_a;
    j["discriminator_b"] = l.discriminator_b;
    return j;
}

#define PARALLAX_INSTANTIATE_CYCLEGAN(S)                                                                          \
    template GeneratorObjective<S> generator_objective(const ImageFn<S>&, const ImageFn<S>&, const ImageFn<S>&, \
                                                       const ImageFn<S>&, const Tensor<S>&, const Tensor<S>&,   \
                                                       const GanLossWeights&);                                  \
    template Tensor<S> discriminator_objective(const ImageFn<S>&, const Tensor<S>&, const Tensor<S>&);          \
    template class ImagePool<S>;

PARALLAX_INSTANTIATE_CYCLEGAN(float)
PARALLAX_INSTANTIATE_CYCLEGAN(double)

}  // namespace parallax::gan
