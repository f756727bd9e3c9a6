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
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "parallax/core/errors.hpp"
#include "parallax/core/random.hpp"
#include "parallax/data/dataset.hpp"
#include "parallax/gan/patchgan.hpp"
#include "parallax/gan/vitunet.hpp"
#include "parallax/stability/optimizer.hpp"

namespace parallax::gan {

template <typename Scalar>
using ImageFn = std::function<Tensor<Scalar>(const Tensor<Scalar>&)>;

struct GanLossWeights {
    double cycle = 10.0;
    double identity = 5.0;
    void validate() const;
};

struct LossBreakdown {
    double adversarial_ab = 0;  // generator loss against D_b
    double adversarial_ba = 0;  // generator loss against D_a
    double cycle = 0;           // weighted
    double identity = 0;        // weighted
    double generator_total = 0;
    double discriminator_a = 0;
    double discriminator_b = 0;

    bool finite() const;
};

class GanExplosionError : public NumericError {
   public:
    GanExplosionError(const std::string& what, LossBreakdown losses) : NumericError(what), losses_(losses) {}
    const LossBreakdown& losses() const { return losses_; }

   private:
    LossBreakdown losses_;
};

template <typename Scalar>
struct GeneratorObjective {
    Tensor<Scalar> adversarial_ab, adversarial_ba, cycle, identity, total;
    Tensor<Scalar> fake_a, fake_b;
};

/// Least-squares adversarial terms (target 1) plus weighted cycle and identity L1.
template <typename Scalar>
GeneratorObjective<Scalar> generator_objective(const ImageFn<Scalar>& g_ab, const ImageFn<Scalar>& g_ba,
                                               const ImageFn<Scalar>& d_a, const ImageFn<Scalar>& d_b,
                                               const Tensor<Scalar>& real_a, const Tensor<Scalar>& real_b,
                                               const GanLossWeights& weights);

/// 0.5 * (mean (D(real)-1)^2 + mean D(fake)^2)
template <typename Scalar>
Tensor<Scalar> discriminator_objective(const ImageFn<Scalar>& d, const Tensor<Scalar>& real, const Tensor<Scalar>& fake);

/// Buffer of past fakes. Below capacity a fresh image is stored and returned;
/// when full, a fair coin either returns the fresh image or swaps it for a
/// uniformly chosen stored one.
template <typename Scalar>
class ImagePool {
   public:
    ImagePool(int capacity, std::uint64_t seed);

    // Per-image query over a batch [B,...]; the result is detached.
    Tensor<Scalar> query(const Tensor<Scalar>& fresh);

    int capacity() const { return capacity_; }
    std::size_t size() const { return images_.size(); }

   private:
    int capacity_;
    Rng rng_;
    std::vector<Vector<Scalar>> images_;
};

struct CycleGanConfig {
    ViTUnetConfig generator;
    PatchGanConfig discriminator;
    GanLossWeights weights;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int pool_capacity = 50;
    std::int64_t batch_size = 1;
    std::int64_t steps = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

class CycleGan {
   public:
    explicit CycleGan(const CycleGanConfig& config);

    /// Generator update on both directions, then both discriminator updates
    /// on pool-sampled fakes. Throws GanExplosionError on a non-finite loss.
    LossBreakdown step(const Tensor<float>& real_a, const Tensor<float>& real_b);

    const CycleGanConfig& config() const { return config_; }
    ViTUnet<float>& g_ab() { return g_ab_; }
    ViTUnet<float>& g_ba() { return g_ba_; }
    PatchGan<float>& d_a() { return d_a_; }
    PatchGan<float>& d_b() { return d_b_; }
    const ViTUnet<float>& g_ab() const { return g_ab_; }
    const ViTUnet<float>& g_ba() const { return g_ba_; }
    std::int64_t steps_done() const { return steps_; }

   private:
    CycleGanConfig config_;
    ViTUnet<float> g_ab_, g_ba_;
    PatchGan<float> d_a_, d_b_;
    stability::OptimizerState<float> opt_g_ab_, opt_g_ba_, opt_d_a_, opt_d_b_;
    ImagePool<float> pool_a_, pool_b_;
    std::int64_t steps_ = 0;
};

inline LossBreakdown cyclegan_step(CycleGan& gan, const Tensor<float>& real_a, const Tensor<float>& real_b) {
    return gan.step(real_a, real_b);
}

/// Unweighted L1(G_ba(G_ab(a)), a) + L1(G_ab(G_ba(b)), b), evaluated in batches without a tape.
double cycle_l1(const CycleGan& gan, const data::Dataset& a, const data::Dataset& b, std::int64_t batch_size = 16);

/// Translates every image of `source` with `g` without a tape.
Tensor<float> translate(const ViTUnet<float>& g, const data::Dataset& source, std::int64_t batch_size = 16);

struct GanObserver {
    std::function<void(std::int64_t step, const LossBreakdown&)> on_step;
};

/// config.steps generator/discriminator rounds on seeded random unpaired batches.
void train_cyclegan(CycleGan& gan, const data::Dataset& a, const data::Dataset& b, const GanObserver& observer = {});

nlohmann::ordered_json gan_step_record(std::int64_t step, const LossBreakdown& losses);

}  // namespace parallax::gan
