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

#include "parallax/stability/optimizer.hpp"

#include <cmath>
#include <limits>

namespace parallax::stability {

template <typename Scalar>
OptimizerState<Scalar> OptimizerState<Scalar>::for_params(const ParamStore<Scalar>& params, double beta1,
                                                          double beta2, double eps) {
    OptimizerState state;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    for (const auto& e : params.entries()) {
        state.first_moment.push_back(Vector<Scalar>::Zero(e.tensor.numel()));
        state.second_moment.push_back(Vector<Scalar>::Zero(e.tensor.numel()));
    }
    return state;
}

template <typename Scalar>
void adamw_step(ParamStore<Scalar>& params, OptimizerState<Scalar>& state, double lr, double weight_decay) {
    const auto& entries = params.entries();
    if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size()) {
        throw DimensionError("optimizer state has " + std::to_string(state.first_moment.size()) + " slots for " +
                             std::to_string(entries.size()) + " parameters");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = entries[i].tensor;
        if (state.first_moment[i].size() != t.numel() || state.second_moment[i].size() != t.numel()) {
            throw DimensionError("optimizer moment shape mismatch for " + entries[i].name);
        }
        if (t.has_grad() && !t.grad().allFinite()) {
            const GradNorms norms = grad_norms(params);
            StepStats stats;
            stats.step = state.step;
            stats.lr = lr;
            stats.grad_max = norms.max_abs;
            stats.grad_l2 = norms.l2;
            if (std::isfinite(stats.grad_max)) stats.grad_max = std::numeric_limits<double>::infinity();
            throw ExplosionError("non-finite gradient in " + entries[i].name, stats);
        }
    }

    state.step += 1;
    const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const Scalar decay = static_cast<Scalar>(1.0 - lr * weight_decay);
    const Scalar b1 = static_cast<Scalar>(state.beta1), b2 = static_cast<Scalar>(state.beta2);
    const Scalar step_size = static_cast<Scalar>(lr / correction1);
    const Scalar root_correction2 = static_cast<Scalar>(std::sqrt(correction2));
    const Scalar eps = static_cast<Scalar>(state.eps);

    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor<Scalar> p = entries[i].tensor;
        auto w = p.data().array();
        auto m = state.first_moment[i].array();
        auto v = state.second_moment[i].array();
        if (weight_decay != 0.0) w *= decay;
        if (p.has_grad()) {
            const auto g = p.grad().array();
            m = b1 * m + (Scalar(1) - b1) * g;
            v = b2 * v + (Scalar(1) - b2) * g.square();
        } else {
            m *= b1;
            v *= b2;
        }
        w -= step_size * m / (v.sqrt() / root_correction2 + eps);
    }
}

template <typename Scalar>
double clip_global_norm(std::vector<Vector<Scalar>*> grads, double threshold) {
    if (!(threshold > 0)) throw UsageError("clip threshold must be positive");
    const auto norm = [&] {
        double sq = 0;
        for (const auto* g : grads) sq += g->template cast<double>().squaredNorm();
        return std::sqrt(sq);
    };
    double g = norm();
    if (!(g > threshold)) return 1.0;
    double factor = 1.0;
    double shrink = threshold / g;
    // Rounding after scaling can leave the norm a hair above the threshold.
    for (int attempt = 0; attempt < 8 && g > threshold; ++attempt) {
        for (auto* grad : grads) *grad *= static_cast<Scalar>(shrink);
        factor *= shrink;
        g = norm();
        shrink = (threshold / g) * (1.0 - 4.0 * std::numeric_limits<Scalar>::epsilon());
    }
    return factor;
}

template <typename Scalar>
double clip_global_norm(ParamStore<Scalar>& params, double threshold) {
    std::vector<Vector<Scalar>*> grads;
    for (const auto& e : params.entries()) {
        Tensor<Scalar> t = e.tensor;
        if (t.has_grad()) grads.push_back(&t.grad());
    }
    return clip_global_norm(std::move(grads), threshold);
}

std::int64_t milestone_epoch(double fraction, std::int64_t total_epochs) {
    // The small offset keeps products such as 0.29*100 from flooring one epoch low.
    return static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(total_epochs) + 1e-9));
}

double multistep_lr(double base_lr, std::int64_t epoch, std::int64_t total_epochs, const std::vector<double>& milestones,
                    double factor) {
    if (total_epochs <= 0 || epoch < 0 || epoch >= total_epochs) {
        throw UsageError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
    }
    double lr = base_lr;
    for (double m : milestones) {
        if (epoch >= milestone_epoch(m, total_epochs)) lr *= factor;
    }
    return lr;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void adamw_step(ParamStore<float>&, OptimizerState<float>&, double, double);
template void adamw_step(ParamStore<double>&, OptimizerState<double>&, double, double);
template double clip_global_norm(std::vector<Vector<float>*>, double);
template double clip_global_norm(std::vector<Vector<double>*>, double);
template double clip_global_norm(ParamStore<float>&, double);
template double clip_global_norm(ParamStore<double>&, double);

}  // namespace parallax::stability
