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

#include "parallax/stability/monitor.hpp"

#include <cmath>

namespace parallax::stability {

bool StepStats::finite() const {
    return std::isfinite(loss) && std::isfinite(max_abs_logit) && std::isfinite(grad_max) && std::isfinite(grad_l2) &&
           std::isfinite(lr);
}

template <typename Scalar>
GradNorms grad_norms(const ParamStore<Scalar>& params) {
    GradNorms out;
    double sq = 0;
    bool nan = false;
    for (const auto& e : params.entries()) {
        if (!e.tensor.has_grad()) continue;
        for (Index i = 0; i < e.tensor.numel(); ++i) {
            const double g = static_cast<double>(e.tensor.grad()(i));
            if (std::isnan(g)) nan = true;
            out.max_abs = std::max(out.max_abs, std::abs(g));
            sq += g * g;
        }
    }
    out.l2 = std::sqrt(sq);
    if (nan) out.max_abs = out.l2 = std::nan("");
    return out;
}

template <typename Scalar>
StepStats record_step_stats(const ParamStore<Scalar>& params, const Tensor<Scalar>& logits, double loss, double lr,
                            std::int64_t step, std::int64_t epoch) {
    StepStats s;
    s.step = step;
    s.epoch = epoch;
    s.loss = loss;
    s.lr = lr;
    for (Index i = 0; i < logits.numel(); ++i) {
        const double v = static_cast<double>(logits.data()(i));
        if (std::isnan(v)) {
            s.max_abs_logit = v;
            break;
        }
        s.max_abs_logit = std::max(s.max_abs_logit, std::abs(v));
    }
    const GradNorms norms = grad_norms(params);
    s.grad_max = norms.max_abs;
    s.grad_l2 = norms.l2;
    s.grad_l2_clipped = norms.l2;
    return s;
}

bool detect_explosion(const StepStats& stats, double logit_cap, double grad_cap) {
    return !stats.finite() || stats.max_abs_logit > logit_cap || stats.grad_max > grad_cap;
}

template GradNorms grad_norms(const ParamStore<float>&);
template GradNorms grad_norms(const ParamStore<double>&);
template StepStats record_step_stats(const ParamStore<float>&, const Tensor<float>&, double, double, std::int64_t,
                                     std::int64_t);
template StepStats record_step_stats(const ParamStore<double>&, const Tensor<double>&, double, double, std::int64_t,
                                     std::int64_t);

}  // namespace parallax::stability
