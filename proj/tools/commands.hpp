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
#include <ostream>
#include <string>

namespace parallax::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitExplosion = 4;

struct TrainClsOptions {
    std::string config;  // empty: built-in defaults
    std::optional<std::string> variant;
    std::optional<std::string> recipe;
    std::optional<std::string> data;  // "synthetic" or a CIFAR file/directory
    std::optional<std::int64_t> epochs;
    std::string out = "runs/train-cls";
    std::int64_t checkpoint_every = 1;  // epochs; 0 writes only the final checkpoint
    std::int64_t stop_after_epoch = -1;
    std::string resume;
};

struct ProbeOptions {
    std::string config;
    std::optional<int> seeds;
    std::optional<std::int64_t> max_steps;
    std::string out = "runs/probe";
};

struct TrainGanOptions {
    std::string config;
    std::optional<std::int64_t> steps;
    std::string out = "runs/train-gan";
    std::uint64_t fid_seed = 0;
    int samples = 4;
};

struct CountParamsOptions {
    std::string recipe = "Ti/16";
    std::string variant = "parallel_stabilized";
    int image = 224;
    int patch = 16;
    int classes = 1000;
};

struct FidOptions {
    std::string real;
    std::string fake;
    std::uint64_t seed = 0;
    std::string domain;
};

struct GenDataOptions {
    std::string kind;
    std::int64_t n = 256;
    std::uint64_t seed = 0;
    std::string out;
};

// Each command writes its artifacts under `out` and a short summary to `log`.
int train_cls(const TrainClsOptions& options, std::ostream& log);
int probe_stability(const ProbeOptions& options, std::ostream& log);
int train_gan(const TrainGanOptions& options, std::ostream& log);
int count_params(const CountParamsOptions& options, std::ostream& log);
int fid(const FidOptions& options, std::ostream& log);
int gen_data(const GenDataOptions& options, std::ostream& log);

}  // namespace parallax::cli
