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


#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "parallax/core/errors.hpp"
#include "parallax/data/checkpoint.hpp"
#include "parallax/data/config.hpp"
#include "parallax/data/metrics_writer.hpp"
#include "parallax/data/ppm.hpp"
#include "parallax/data/sources.hpp"
#include "parallax/metrics/features.hpp"
#include "parallax/metrics/frechet.hpp"
#include "parallax/stability/probe.hpp"
#include "parallax/stability/trainer.hpp"

namespace parallax::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

data::RunConfig load_config(const std::string& path) {
    data::RunConfig c = path.empty() ? data::parse_config_text("") : data::parse_config(path);
    return c;
}

std::ofstream open_stream(const fs::path& path, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    return out;
}

ordered_json explosion_record(const stability::StepStats& s) {
    ordered_json j = stability::step_record(s);
    j["record"] = "explosion";
    return j;
}

}  // namespace

int train_cls(const TrainClsOptions& options, std::ostream& log) {
    data::RunConfig cfg = load_config(options.config);
    if (options.variant) cfg.model.variant = vit::parse_variant(*options.variant);
    if (options.recipe) cfg.model.recipe = *options.recipe;
    if (options.data) {
        if (*options.data == "synthetic") {
            cfg.data.source = "synthetic";
        } else {
            if (cfg.data.source == "synthetic") cfg.data.source = "cifar10";
            cfg.data.train_path = *options.data;
            cfg.data.test_path = *options.data;
        }
    }
    if (options.epochs) cfg.train.epochs = *options.epochs;
    if (options.checkpoint_every < 0) throw UsageError("--checkpoint-every must be >= 0");
    cfg.sync_generator();
    cfg.validate();

    auto [train, test] = data::load_classification_data(cfg.data);
    vit::Recipe recipe = cfg.model.resolved_recipe();
    recipe.num_classes = train.num_classes;
    vit::VitClassifier<float> model(recipe, cfg.model.variant, cfg.model.seed);
    const std::string snapshot = data::config_json(cfg).dump();

    const fs::path out_dir(options.out);
    fs::create_directories(out_dir);
    stability::TrainState state = stability::TrainState::fresh(model.params());
    const bool resuming = !options.resume.empty();
    if (resuming) {
        const data::Checkpoint ckpt = data::checkpoint_load(options.resume);
        if (ckpt.text("config") != snapshot) throw UsageError("checkpoint was written with a different configuration");
        ckpt.load_params("model.", model.params());
        state = stability::load_train_state(ckpt, model.params());
    }
    std::ofstream stream = open_stream(out_dir / "metrics.jsonl", resuming);
    data::MetricsWriter writer(stream);
    if (!resuming) writer.emit(data::config_json(cfg));

    stability::TrainObserver observer;
    observer.on_step = [&](const stability::StepStats& s) { writer.emit(stability::step_record(s)); };
    observer.on_epoch = [&](const stability::EpochAccuracy& a) {
        writer.emit(stability::epoch_record(a));
        log << "epoch " << a.epoch << " " << a.split << " accuracy " << a.accuracy << "\n";
    };

    const auto save = [&] {
        data::Checkpoint ckpt;
        ckpt.add_text("config", snapshot);
        ckpt.add_params("model.", model.params());
        stability::save_train_state(ckpt, state);
        data::checkpoint_save(ckpt, out_dir / "checkpoint.vtub");
    };

    const std::int64_t epochs = cfg.train.epochs;
    while (state.epoch < epochs) {
        std::int64_t stop = options.checkpoint_every > 0 ? std::min(state.epoch + options.checkpoint_every, epochs) : epochs;
        if (options.stop_after_epoch >= 0) stop = std::min(stop, options.stop_after_epoch);
        if (stop <= state.epoch) break;
        const stability::TrainResult result = stability::train_classifier(model, train, &test, cfg.train, state, observer, stop);
        save();
        if (result.exploded) {
            writer.emit(explosion_record(*result.explosion));
            log << "explosion at step " << result.explosion->step << "\n";
            return kExitExplosion;
        }
        if (result.hit_step_cap) break;
    }
    save();
    log << "wrote " << (out_dir / "metrics.jsonl").string() << " and " << (out_dir / "checkpoint.vtub").string() << "\n";
    return kExitOk;
}

int probe_stability(const ProbeOptions& options, std::ostream& log) {
    data::RunConfig cfg = load_config(options.config);
    if (options.seeds) cfg.probe.seeds = *options.seeds;
    if (options.max_steps) cfg.probe.max_steps = *options.max_steps;
    cfg.probe.validate();

    const fs::path out_dir(options.out);
    fs::create_directories(out_dir);
    std::ofstream raw_stream = open_stream(out_dir / "parallel_raw.jsonl", false);
    std::ofstream stab_stream = open_stream(out_dir / "parallel_stabilized.jsonl", false);
    data::MetricsWriter raw(raw_stream), stabilized(stab_stream);
    const ordered_json header = data::config_json(cfg);
    raw.emit(header);
    stabilized.emit(header);

    const auto verdict = stability::probe_stability(cfg.probe, [&](vit::BlockVariant v, std::uint64_t seed, const stability::StepStats& s) {
        ordered_json j;
        j["seed"] = seed;
        j.update(stability::step_record(s));
        (v == vit::BlockVariant::parallel_raw ? raw : stabilized).emit(j);
    });
    const ordered_json record = stability::verdict_record(verdict);
    std::ofstream verdict_stream = open_stream(out_dir / "verdict.json", false);
    verdict_stream << record.dump(2) << "\n";
    for (const auto& s : verdict.seeds) {
        const auto show = [](const std::optional<std::int64_t>& t) { return t ? std::to_string(*t) : std::string("none"); };
        log << "seed " << s.seed << ": raw trigger " << show(s.raw.trigger_step) << " (peak logit " << s.raw.peak_logit
            << "), stabilized trigger " << show(s.stabilized.trigger_step) << "\n";
    }
    log << "raw earlier in " << verdict.raw_earlier_count << "/" << verdict.seeds.size() << " seeds: "
        << (verdict.pass ? "ordering holds" : "ordering not observed") << "\n";
    return kExitOk;
}

int train_gan(const TrainGanOptions& options, std::ostream& log) {
    data::RunConfig cfg = load_config(options.config);
    if (options.steps) cfg.gan.cyclegan.steps = *options.steps;
    if (options.samples < 0) throw UsageError("--samples must be >= 0");
    cfg.validate();

    const auto [domain_a, domain_b] = data::load_gan_domains(cfg.gan);
    gan::CycleGan model(cfg.gan.cyclegan);
    const metrics::FeatureExtractor extractor(options.fid_seed);
    const metrics::GaussianStats real_a = metrics::gaussian_stats(extractor.extract(domain_a.all_images()));
    const metrics::GaussianStats real_b = metrics::gaussian_stats(extractor.extract(domain_b.all_images()));

    const fs::path out_dir(options.out);
    fs::create_directories(out_dir / "samples");
    std::ofstream stream = open_stream(out_dir / "metrics.jsonl", false);
    data::MetricsWriter writer(stream);
    writer.emit(data::config_json(cfg));

    const auto evaluate = [&](std::int64_t step) {
        ordered_json j;
        j["record"] = "eval";
        j["step"] = step;
        j["cycle_l1"] = gan::cycle_l1(model, domain_a, domain_b);
        const auto fake_b = gan::translate(model.g_ab(), domain_a);
        const auto fake_a = gan::translate(model.g_ba(), domain_b);
        j["fid_ab"] = metrics::frechet_distance(metrics::gaussian_stats(extractor.extract(fake_b)), real_b);
        j["fid_ba"] = metrics::frechet_distance(metrics::gaussian_stats(extractor.extract(fake_a)), real_a);
        writer.emit(j);
        return j;
    };
    const auto write_samples = [&](std::int64_t step) {
        if (options.samples == 0) return;
        const Index count = std::min<Index>({options.samples, domain_a.size(), domain_b.size()});
        const std::string tag = std::to_string(step);
        data::write_ppm_batch(out_dir / "samples", tag + "_ab", gan::translate(model.g_ab(), domain_a.subset(count)));
        data::write_ppm_batch(out_dir / "samples", tag + "_ba", gan::translate(model.g_ba(), domain_b.subset(count)));
    };

    const ordered_json initial = evaluate(0);
    gan::GanObserver observer;
    const std::int64_t every = cfg.gan.sample_every;
    observer.on_step = [&](std::int64_t step, const gan::LossBreakdown& losses) {
        writer.emit(gan::gan_step_record(step, losses));
        if (every > 0 && (step + 1) % every == 0) write_samples(step + 1);
    };
    try {
        gan::train_cyclegan(model, domain_a, domain_b, observer);
    } catch (const gan::GanExplosionError& e) {
        ordered_json j = gan::gan_step_record(model.steps_done(), e.losses());
        j["record"] = "explosion";
        writer.emit(j);
        log << "explosion at step " << model.steps_done() << ": " << e.what() << "\n";
        return kExitExplosion;
    }
    const ordered_json final_eval = evaluate(model.steps_done());
    if (every <= 0 || model.steps_done() % every != 0) write_samples(model.steps_done());

    data::Checkpoint ckpt;
    ckpt.add_text("config", data::config_json(cfg).dump());
    ckpt.add_params("g_ab.", model.g_ab().params());
    ckpt.add_params("g_ba.", model.g_ba().params());
    ckpt.add_params("d_a.", model.d_a().params());
    ckpt.add_params("d_b.", model.d_b().params());
    data::checkpoint_save(ckpt, out_dir / "checkpoint.vtub");

    log << "cycle L1 " << initial["cycle_l1"].get<double>() << " -> " << final_eval["cycle_l1"].get<double>() << ", FID(A->B) "
        << initial["fid_ab"].get<double>() << " -> " << final_eval["fid_ab"].get<double>() << "\n";
    return kExitOk;
}

int count_params(const CountParamsOptions& options, std::ostream& log) {
    const vit::BlockVariant variant = vit::parse_variant(options.variant);
    vit::Recipe recipe = vit::named_recipe(options.recipe);
    recipe.num_classes = options.classes;
    const std::int64_t count = vit::count_params(recipe, variant, options.image, options.patch);
    const vit::ReferenceCount ref = vit::reference_param_count(options.recipe);
    const std::optional<double> reference = variant == vit::BlockVariant::serial ? ref.serial : ref.parallel;

    ordered_json j;
    j["recipe"] = recipe.name;
    j["variant"] = vit::to_string(variant);
    j["image"] = options.image;
    j["patch"] = options.patch;
    j["classes"] = options.classes;
    j["params"] = count;
    const bool comparable = reference && options.image == 224 && options.patch == 16 && options.classes == 1000;
    if (comparable) {
        j["reference"] = *reference;
        j["relative_error"] = std::abs(static_cast<double>(count) / *reference - 1.0);
    } else {
        j["reference"] = nullptr;
        j["relative_error"] = nullptr;
    }
    log << j.dump() << "\n";
    return kExitOk;
}

int fid(const FidOptions& options, std::ostream& log) {
    if (options.real.empty() || options.fake.empty()) throw UsageError("--real and --fake are required");
    const data::Dataset real = data::load_ppm_dir(options.real);
    const data::Dataset fake = data::load_ppm_dir(options.fake);
    const metrics::FeatureExtractor extractor(options.seed);
    const double distance = metrics::frechet_distance(metrics::gaussian_stats(extractor.extract(real.all_images())),
                                                      metrics::gaussian_stats(extractor.extract(fake.all_images())));
    ordered_json j;
    j["domain"] = options.domain.empty() ? fs::path(options.real).filename().string() : options.domain;
    j["n_real"] = real.size();
    j["n_fake"] = fake.size();
    j["fid"] = distance;
    j["extractor_seed"] = options.seed;
    log << j.dump() << "\n";
    return kExitOk;
}

int gen_data(const GenDataOptions& options, std::ostream& log) {
    if (options.out.empty()) throw UsageError("--out is required");
    const fs::path out_dir(options.out);
    if (options.kind == "provocation") {
        const data::Dataset d = data::gen_provocation_set(options.n, options.seed);
        data::write_dataset_ppm(out_dir, d);
        std::ofstream labels = open_stream(out_dir / "labels.txt", false);
        for (int label : d.labels) labels << label << "\n";
        log << "wrote " << d.size() << " images and labels.txt to " << out_dir.string() << "\n";
    } else if (options.kind == "toy-domains") {
        const auto [a, b] = data::gen_toy_domains(options.n, options.seed);
        data::write_dataset_ppm(out_dir / "A", a);
        data::write_dataset_ppm(out_dir / "B", b);
        log << "wrote " << a.size() << " images per domain to " << (out_dir / "A").string() << " and "
            << (out_dir / "B").string() << "\n";
    } else {
        throw UsageError("--kind must be provocation or toy-domains");
    }
    return kExitOk;
}

}  // namespace parallax::cli
