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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "parallax/stability/trainer.hpp"

namespace parallax::stability {

/// Raw-versus-stabilized comparison on the provocation set.
struct ProbeConfig {
    std::string recipe = "Ti/16";
    int patch_size = 8;
    int image_size = 32;
    std::int64_t dataset_size = 2048;
    std::uint64_t dataset_seed = 0;
    int seeds = 3;
    std::uint64_t base_seed = 0;
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::int64_t batch_size = 8;
    std::int64_t max_steps = 2000;
    double logit_cap = kLogitCap;
    double grad_cap = kGradCap;

    void validate() const;
};

struct ProbeRun {
    std::optional<std::int64_t> trigger_step;  // first step flagged by detect_explosion
    std::int64_t steps_run = 0;
    double peak_logit = 0;
    double peak_grad = 0;
};

struct ProbeSeedResult {
    std::uint64_t seed = 0;
    ProbeRun raw;
    ProbeRun stabilized;  // run at most up to the raw trigger step
    bool raw_earlier = false;
};

struct ProbeVerdict {
    std::vector<ProbeSeedResult> seeds;
    int raw_earlier_count = 0;
    bool pass = false;  // raw strictly earlier in a majority of seeds
};

using ProbeStepFn = std::function<void(vit::BlockVariant, std::uint64_t seed, const StepStats&)>;

ProbeRun probe_run(const ProbeConfig& config, vit::BlockVariant variant, std::uint64_t seed, std::int64_t max_steps,
                   const ProbeStepFn& on_step = {});

ProbeVerdict probe_stability(const ProbeConfig& config, const ProbeStepFn& on_step = {});

nlohmann::ordered_json verdict_record(const ProbeVerdict& verdict);

}  // namespace parallax::stability
