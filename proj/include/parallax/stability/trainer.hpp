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
#include "parallax/data/checkpoint.hpp"
#include "parallax/data/dataset.hpp"
#include "parallax/stability/monitor.hpp"
#include "parallax/stability/optimizer.hpp"
#include "parallax/vit/classifier.hpp"

namespace parallax::stability {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 0.05;
    std::int64_t epochs = 20;
    std::int64_t batch_size = 128;
    std::optional<double> clip_threshold = 10.0;
    std::vector<double> milestones{0.3, 0.6, 0.9};
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;
    bool augment_flips = true;

    double logit_cap = kLogitCap;
    double grad_cap = kGradCap;
    int explosion_patience = 3;  // consecutive flagged steps before halting
    std::int64_t max_steps = 0;  // 0 = no cap
    bool eval_initial = true;    // test accuracy before the first epoch

    void validate() const;
};

struct EpochAccuracy {
    std::int64_t epoch = 0;  // completed epochs; 0 is the pre-training evaluation
    std::string split;
    double accuracy = 0;
};

/// Everything needed to continue a run bit-exactly from an epoch boundary.
struct TrainState {
    OptimizerState<float> optimizer;
    std::int64_t epoch = 0;
    std::int64_t step = 0;
    int consecutive_flags = 0;

    static TrainState fresh(const ParamStore<float>& params);
};

struct TrainResult {
    std::vector<StepStats> steps;
    std::vector<EpochAccuracy> accuracy;
    bool exploded = false;
    std::optional<StepStats> explosion;  // the step that completed the halt streak
    bool hit_step_cap = false;
};

struct TrainObserver {
    std::function<void(const StepStats&)> on_step;
    std::function<void(const EpochAccuracy&)> on_epoch;
};

/// Runs epochs state.epoch .. config.epochs-1, or stops early after
/// `stop_after_epoch` completed epochs (for checkpointing) or on explosion.
TrainResult train_classifier(vit::VitClassifier<float>& model, const data::Dataset& train, const data::Dataset* test,
                             const TrainConfig& config, TrainState& state, const TrainObserver& observer = {},
                             std::int64_t stop_after_epoch = -1);

double evaluate_accuracy(const vit::VitClassifier<float>& model, const data::Dataset& dataset, std::int64_t batch_size);

nlohmann::ordered_json step_record(const StepStats& stats);
nlohmann::ordered_json epoch_record(const EpochAccuracy& acc);
nlohmann::ordered_json config_record(const TrainConfig& config);

void save_train_state(data::Checkpoint& ckpt, const TrainState& state);
TrainState load_train_state(const data::Checkpoint& ckpt, const ParamStore<float>& params);

}  // namespace parallax::stability
