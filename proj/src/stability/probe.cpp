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

#include "parallax/stability/probe.hpp"

#include <cmath>

#include "parallax/core/errors.hpp"
#include "parallax/data/sources.hpp"

namespace parallax::stability {

void ProbeConfig::validate() const {
    vit::Recipe r = vit::named_recipe(recipe);
    r.patch_size = patch_size;
    r.image_size = image_size;
    r.validate();
    if (image_size != 32) throw UsageError("probe.image_size must be 32 (the provocation set is 32x32)");
    if (dataset_size < 64) throw UsageError("probe.dataset_size must be >= 64");
    if (seeds < 1) throw UsageError("probe.seeds must be >= 1");
    if (!(lr > 0)) throw UsageError("probe.lr must be > 0");
    if (weight_decay < 0) throw UsageError("probe.weight_decay must be >= 0");
    if (batch_size < 1) throw UsageError("probe.batch_size must be >= 1");
    if (max_steps < 1) throw UsageError("probe.max_steps must be >= 1");
    if (!(logit_cap > 0) || !(grad_cap > 0)) throw UsageError("probe caps must be > 0");
}

ProbeRun probe_run(const ProbeConfig& config, vit::BlockVariant variant, std::uint64_t seed, std::int64_t max_steps,
                   const ProbeStepFn& on_step) {
    const data::Dataset dataset = data::gen_provocation_set(config.dataset_size, config.dataset_seed);
    vit::Recipe recipe = vit::named_recipe(config.recipe);
    recipe.patch_size = config.patch_size;
    recipe.image_size = config.image_size;
    recipe.num_classes = dataset.num_classes;
    vit::VitClassifier<float> model(recipe, variant, seed);

    TrainConfig train;
    train.lr = config.lr;
    train.weight_decay = config.weight_decay;
    train.clip_threshold.reset();
    train.batch_size = config.batch_size;
    train.epochs = (max_steps * config.batch_size) / config.dataset_size + 1;
    train.milestones.clear();
    train.seed = seed;
    train.augment_flips = false;
    train.logit_cap = config.logit_cap;
    train.grad_cap = config.grad_cap;
    train.explosion_patience = 1;
    train.max_steps = max_steps;
    train.eval_initial = false;

    ProbeRun run;
    TrainState state = TrainState::fresh(model.params());
    TrainObserver observer;
    observer.on_step = [&](const StepStats& s) {
        run.peak_logit = std::fmax(run.peak_logit, s.max_abs_logit);
        run.peak_grad = std::fmax(run.peak_grad, s.grad_max);
        if (on_step) on_step(variant, seed, s);
    };
    if (max_steps > 0) {
        const TrainResult result = train_classifier(model, dataset, nullptr, train, state, observer);
        if (result.exploded) run.trigger_step = result.explosion->step;
    }
    run.steps_run = state.step;
    return run;
}

ProbeVerdict probe_stability(const ProbeConfig& config, const ProbeStepFn& on_step) {
    ProbeVerdict verdict;
    for (int i = 0; i < config.seeds; ++i) {
        ProbeSeedResult r;
        r.seed = config.base_seed + static_cast<std::uint64_t>(i);
        r.raw = probe_run(config, vit::BlockVariant::parallel_raw, r.seed, config.max_steps, on_step);
        if (r.raw.trigger_step) {
            // The ordering is settled once the stabilized run reaches the raw trigger step.
            r.stabilized = probe_run(config, vit::BlockVariant::parallel_stabilized, r.seed, *r.raw.trigger_step + 1, on_step);
            r.raw_earlier = !r.stabilized.trigger_step || *r.stabilized.trigger_step > *r.raw.trigger_step;
        }
        verdict.raw_earlier_count += r.raw_earlier;
        verdict.seeds.push_back(r);
    }
    verdict.pass = 2 * verdict.raw_earlier_count > config.seeds;
    return verdict;
}

nlohmann::ordered_json verdict_record(const ProbeVerdict& verdict) {
    const auto run_json = [](const ProbeRun& run) {
        nlohmann::ordered_json j;
        j["trigger_step"] = run.trigger_step ? nlohmann::ordered_json(*run.trigger_step) : nlohmann::ordered_json();
        j["steps_run"] = run.steps_run;
        j["peak_logit"] = run.peak_logit;
        j["peak_grad"] = run.peak_grad;
        return j;
    };
    nlohmann::ordered_json j;
    j["record"] = "verdict";
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (const auto& s : verdict.seeds) {
        nlohmann::ordered_json e;
        e["seed"] = s.seed;
        e["parallel_raw"] = run_json(s.raw);
        e["parallel_stabilized"] = run_json(s.stabilized);
        e["raw_earlier"] = s.raw_earlier;
        seeds.push_back(e);
    }
    j["seeds"] = seeds;
    j["raw_earlier_count"] = verdict.raw_earlier_count;
    j["pass"] = verdict.pass;
    return j;
}

}  // namespace parallax::stability
