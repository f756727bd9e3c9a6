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

#include "parallax/stability/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallax/core/ops.hpp"
#include "parallax/core/random.hpp"
#include "parallax/core/tape.hpp"
#include "parallax/metrics/frechet.hpp"

namespace parallax::stability {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5407;
constexpr std::uint64_t kFlipStream = 0xf119;

std::vector<Index> epoch_order(const TrainConfig& config, std::int64_t epoch, Index n) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
}

bool flip_sample(const TrainConfig& config, std::int64_t epoch, Index sample) {
    const std::uint64_t bits =
        derive_seed(derive_seed(config.seed, kFlipStream, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(sample));
    return unit_double(bits) < 0.5;
}

Index count_correct(const Tensor<float>& logits, const std::vector<int>& labels) {
    return static_cast<Index>(std::lround(metrics::accuracy(logits, labels) * static_cast<double>(labels.size())));
}

StepStats non_finite_stats(std::int64_t step, std::int64_t epoch, double lr) {
    StepStats s;
    s.step = step;
    s.epoch = epoch;
    s.lr = lr;
    s.loss = s.max_abs_logit = s.grad_max = s.grad_l2 = s.grad_l2_clipped = std::numeric_limits<double>::quiet_NaN();
    return s;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr >= 0) || !std::isfinite(lr)) throw UsageError("train.lr must be a finite nonnegative number");
    if (!(weight_decay >= 0)) throw UsageError("train.weight_decay must be >= 0");
    if (epochs <= 0) throw UsageError("train.epochs must be positive");
    if (batch_size <= 0) throw UsageError("train.batch_size must be positive");
    if (clip_threshold && !(*clip_threshold > 0)) throw UsageError("train.clip must be positive or \"none\"");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        if (!(milestones[i] > 0 && milestones[i] < 1)) throw UsageError("train.milestones must lie in (0,1)");
        if (i > 0 && !(milestones[i] > milestones[i - 1])) throw UsageError("train.milestones must be strictly increasing");
    }
    if (!(lr_decay_factor > 0)) throw UsageError("train.lr_decay_factor must be positive");
    if (explosion_patience <= 0) throw UsageError("train.explosion_patience must be positive");
    if (max_steps < 0) throw UsageError("train.max_steps must be >= 0");
}

TrainState TrainState::fresh(const ParamStore<float>& params) {
    TrainState state;
    state.optimizer = OptimizerState<float>::for_params(params);
    return state;
}

double evaluate_accuracy(const vit::VitClassifier<float>& model, const data::Dataset& dataset, std::int64_t batch_size) {
    NoGradScope<float> no_grad;
    Index correct = 0;
    std::vector<Index> rows;
    for (Index begin = 0; begin < dataset.size(); begin += batch_size) {
        const Index end = std::min<Index>(dataset.size(), begin + batch_size);
        rows.resize(static_cast<std::size_t>(end - begin));
        std::iota(rows.begin(), rows.end(), begin);
        const Tensor<float> logits = model.forward(dataset.batch(rows));
        correct += count_correct(logits, dataset.batch_labels(rows));
    }
    return dataset.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train_classifier(vit::VitClassifier<float>& model, const data::Dataset& train, const data::Dataset* test,
                             const TrainConfig& config, TrainState& state, const TrainObserver& observer,
                             std::int64_t stop_after_epoch) {
    config.validate();
    train.validate();
    if (!train.labeled()) throw UsageError("classifier training needs a labeled dataset");
    if (train.height != model.recipe().image_size || train.width != model.recipe().image_size) {
        throw DimensionError("dataset images are " + std::to_string(train.height) + "x" + std::to_string(train.width) +
                             " but the model expects " + std::to_string(model.recipe().image_size));
    }
    if (train.num_classes > model.recipe().num_classes) throw UsageError("dataset has more classes than the model head");

    TrainResult result;
    const auto emit_epoch = [&](EpochAccuracy acc) {
        result.accuracy.push_back(acc);
        if (observer.on_epoch) observer.on_epoch(acc);
    };
    if (config.eval_initial && test && state.epoch == 0 && state.step == 0) {
        emit_epoch({0, "test", evaluate_accuracy(model, *test, config.batch_size)});
    }

    ParamStore<float>& params = model.params();
    const Index n = train.size();
    while (state.epoch < config.epochs) {
        const std::int64_t epoch = state.epoch;
        const double lr = multistep_lr(config.lr, epoch, config.epochs, config.milestones, config.lr_decay_factor);
        const std::vector<Index> order = epoch_order(config, epoch, n);
        Index correct = 0, seen = 0;

        for (Index begin = 0; begin < n; begin += config.batch_size) {
            const Index end = std::min<Index>(n, begin + config.batch_size);
            const std::span<const Index> rows(order.data() + begin, static_cast<std::size_t>(end - begin));
            std::vector<bool> flips(rows.size(), false);
            if (config.augment_flips) {
                for (std::size_t i = 0; i < rows.size(); ++i) flips[i] = flip_sample(config, epoch, rows[i]);
            }
            const Tensor<float> images = train.batch(rows, flips);
            const std::vector<int> labels = train.batch_labels(rows);

            params.zero_grad();
            StepStats stats;
            try {
                Tape<float> tape;
                const Tensor<float> logits = model.forward(images);
                const Tensor<float> loss = cross_entropy(logits, labels);
                tape.backward(loss);
                stats = record_step_stats(params, logits, static_cast<double>(loss.item()), lr, state.step, epoch);
                correct += count_correct(logits, labels);
            } catch (const NumericError&) {
                stats = non_finite_stats(state.step, epoch, lr);
            }
            seen += end - begin;

            const bool flagged = detect_explosion(stats, config.logit_cap, config.grad_cap);
            state.consecutive_flags = flagged ? state.consecutive_flags + 1 : 0;
            if (std::isfinite(stats.grad_l2)) {
                if (config.clip_threshold) {
                    clip_global_norm(params, *config.clip_threshold);
                    stats.grad_l2_clipped = grad_norms(params).l2;
                }
                adamw_step(params, state.optimizer, lr, config.weight_decay);
            }

            result.steps.push_back(stats);
            if (observer.on_step) observer.on_step(stats);
            state.step += 1;
            if (state.consecutive_flags >= config.explosion_patience) {
                result.exploded = true;
                result.explosion = stats;
                return result;
            }
            if (config.max_steps > 0 && state.step >= config.max_steps) {
                result.hit_step_cap = true;
                return result;
            }
        }

        state.epoch += 1;
        emit_epoch({state.epoch, "train", seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0});
        if (test) emit_epoch({state.epoch, "test", evaluate_accuracy(model, *test, config.batch_size)});
        if (stop_after_epoch >= 0 && state.epoch >= stop_after_epoch) break;
    }
    return result;
}

nlohmann::ordered_json step_record(const StepStats& s) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["loss"] = s.loss;
    j["max_abs_logit"] = s.max_abs_logit;
    j["grad_max"] = s.grad_max;
    j["grad_l2"] = s.grad_l2;
    j["lr"] = s.lr;
    return j;
}

nlohmann::ordered_json epoch_record(const EpochAccuracy& acc) {
    nlohmann::ordered_json j;
    j["epoch"] = acc.epoch;
    j["split"] = acc.split;
    j["accuracy"] = acc.accuracy;
    return j;
}

nlohmann::ordered_json config_record(const TrainConfig& c) {
    nlohmann::ordered_json train;
    train["lr"] = c.lr;
    train["weight_decay"] = c.weight_decay;
    train["epochs"] = c.epochs;
    train["batch_size"] = c.batch_size;
    if (c.clip_threshold) {
        train["clip"] = *c.clip_threshold;
    } else {
        train["clip"] = "none";
    }
    train["milestones"] = c.milestones;
    train["lr_decay_factor"] = c.lr_decay_factor;
    train["seed"] = c.seed;
    train["augment_flips"] = c.augment_flips;
    train["logit_cap"] = c.logit_cap;
    train["grad_cap"] = c.grad_cap;
    train["explosion_patience"] = c.explosion_patience;
    train["max_steps"] = c.max_steps;
    return train;
}

void save_train_state(data::Checkpoint& ckpt, const TrainState& state) {
    const auto& opt = state.optimizer;
    for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
        const auto& m = opt.first_moment[i];
        const auto& v = opt.second_moment[i];
        ckpt.add_values("optimizer.m." + std::to_string(i), {static_cast<std::uint32_t>(m.size())},
                        std::vector<float>(m.data(), m.data() + m.size()));
        ckpt.add_values("optimizer.v." + std::to_string(i), {static_cast<std::uint32_t>(v.size())},
                        std::vector<float>(v.data(), v.data() + v.size()));
    }
    ckpt.add_u64("optimizer.step", static_cast<std::uint64_t>(opt.step));
    ckpt.add_u64("train.epoch", static_cast<std::uint64_t>(state.epoch));
    ckpt.add_u64("train.step", static_cast<std::uint64_t>(state.step));
    ckpt.add_u64("train.consecutive_flags", static_cast<std::uint64_t>(state.consecutive_flags));
}

TrainState load_train_state(const data::Checkpoint& ckpt, const ParamStore<float>& params) {
    TrainState state = TrainState::fresh(params);
    auto& opt = state.optimizer;
    for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
        for (auto* slot : {&opt.first_moment[i], &opt.second_moment[i]}) {
            const std::string name = (slot == &opt.first_moment[i] ? "optimizer.m." : "optimizer.v.") + std::to_string(i);
            const auto& values = ckpt.at(name).values;
            if (static_cast<Index>(values.size()) != slot->size()) {
                throw FormatError("checkpoint entry " + name + " does not match the model");
            }
            std::copy(values.begin(), values.end(), slot->data());
        }
    }
    opt.step = static_cast<std::int64_t>(ckpt.u64("optimizer.step"));
    state.epoch = static_cast<std::int64_t>(ckpt.u64("train.epoch"));
    state.step = static_cast<std::int64_t>(ckpt.u64("train.step"));
    state.consecutive_flags = static_cast<int>(ckpt.u64("train.consecutive_flags"));
    return state;
}

}  // namespace parallax::stability
