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
#include <optional>
#include <vector>

#include "parallax/core/parameters.hpp"
#include "parallax/stability/monitor.hpp"

namespace parallax::stability {

template <typename Scalar>
struct OptimizerState {
    std::vector<Vector<Scalar>> first_moment;
    std::vector<Vector<Scalar>> second_moment;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Zero moments shaped like `params`.
    static OptimizerState for_params(const ParamStore<Scalar>& params, double beta1 = 0.9, double beta2 = 0.999,
                                     double eps = 1e-8);
};

/// AdamW with decoupled weight decay. Gradients are read from the parameter
/// tensors; a parameter without a gradient buffer counts as zero gradient.
/// Throws ExplosionError (parameters untouched) if any gradient is non-finite.
template <typename Scalar>
void adamw_step(ParamStore<Scalar>& params, OptimizerState<Scalar>& state, double lr, double weight_decay);

/// Scales all gradients by threshold/g when the global L2 norm g exceeds the
/// threshold, and returns the factor applied (1 when untouched). The result
/// never exceeds the threshold as computed, so a second call is a no-op.
template <typename Scalar>
double clip_global_norm(std::vector<Vector<Scalar>*> grads, double threshold);

template <typename Scalar>
double clip_global_norm(ParamStore<Scalar>& params, double threshold);

/// base_lr * factor^k where k counts milestones with floor(fraction*total) <= epoch.
double multistep_lr(double base_lr, std::int64_t epoch, std::int64_t total_epochs,
                    const std::vector<double>& milestones = {0.3, 0.6, 0.9}, double factor = 0.1);

std::int64_t milestone_epoch(double fraction, std::int64_t total_epochs);

}  // namespace parallax::stability
