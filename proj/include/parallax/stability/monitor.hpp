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
#include <string>

#include "parallax/core/errors.hpp"
#include "parallax/core/parameters.hpp"

namespace parallax::stability {

struct StepStats {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    double loss = 0;
    double max_abs_logit = 0;
    double grad_max = 0;  // max |g| over all parameters
    double grad_l2 = 0;   // global L2 norm before clipping
    double lr = 0;
    double grad_l2_clipped = 0;  // after clipping; not part of the emitted record

    bool finite() const;
};

inline constexpr double kLogitCap = 4000.0;
inline constexpr double kGradCap = 1e4;

/// Thrown when training can no longer proceed; carries the offending step.
class ExplosionError : public NumericError {
   public:
    ExplosionError(const std::string& what, StepStats stats) : NumericError(what), stats_(stats) {}
    const StepStats& stats() const { return stats_; }

   private:
    StepStats stats_;
};

struct GradNorms {
    double max_abs = 0;
    double l2 = 0;
};

// NaN anywhere propagates into both fields.
template <typename Scalar>
GradNorms grad_norms(const ParamStore<Scalar>& params);

/// Call after backward and before the optimizer step.
template <typename Scalar>
StepStats record_step_stats(const ParamStore<Scalar>& params, const Tensor<Scalar>& logits, double loss, double lr,
                            std::int64_t step, std::int64_t epoch = 0);

bool detect_explosion(const StepStats& stats, double logit_cap = kLogitCap, double grad_cap = kGradCap);

}  // namespace parallax::stability
