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


#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "parallax/core/errors.hpp"

using namespace parallax;

int main(int argc, char** argv) {
    CLI::App app{"parallax: vision transformer stability and translation experiments"};
    app.require_subcommand(1);

    cli::TrainClsOptions cls;
    auto* train_cls = app.add_subcommand("train-cls", "Train a ViT classifier and stream per-step metrics");
    train_cls->add_option("--config", cls.config, "TOML config file");
    train_cls->add_option("--variant", cls.variant, "serial | parallel_raw | parallel_stabilized");
    train_cls->add_option("--recipe", cls.recipe, "Ti/16 | S/16 | B/16 | L/16 | H/16");
    train_cls->add_option("--data", cls.data, "'synthetic' or a CIFAR binary file or directory");
    train_cls->add_option("--epochs", cls.epochs, "Override train.epochs");
    train_cls->add_option("--out", cls.out, "Output directory")->capture_default_str();
    train_cls->add_option("--checkpoint-every", cls.checkpoint_every, "Epochs between checkpoints (0: end only)")
        ->capture_default_str();
    train_cls->add_option("--stop-after-epoch", cls.stop_after_epoch, "Stop after this many completed epochs");
    train_cls->add_option("--resume", cls.resume, "Checkpoint to continue from; metrics are appended");

    cli::ProbeOptions probe;
    auto* probe_cmd = app.add_subcommand("probe-stability", "Raw versus stabilized explosion A/B on the provocation set");
    probe_cmd->add_option("--config", probe.config, "TOML config file ([probe] section)");
    probe_cmd->add_option("--seeds", probe.seeds, "Number of seeds");
    probe_cmd->add_option("--max-steps", probe.max_steps, "Step budget per raw run");
    probe_cmd->add_option("--out", probe.out, "Output directory")->capture_default_str();

    cli::TrainGanOptions gan;
    auto* gan_cmd = app.add_subcommand("train-gan", "CycleGAN with ViTUnet generators and PatchGAN critics");
    gan_cmd->add_option("--config", gan.config, "TOML config file");
    gan_cmd->add_option("--steps", gan.steps, "Override gan.steps");
    gan_cmd->add_option("--out", gan.out, "Output directory")->capture_default_str();
    gan_cmd->add_option("--fid-seed", gan.fid_seed, "Feature extractor seed")->capture_default_str();
    gan_cmd->add_option("--samples", gan.samples, "Images per direction in each sample dump")->capture_default_str();

    cli::CountParamsOptions count;
    auto* count_cmd = app.add_subcommand("count-params", "Exact parameter count and the reference count");
    count_cmd->add_option("--recipe", count.recipe)->capture_default_str();
    count_cmd->add_option("--variant", count.variant)->capture_default_str();
    count_cmd->add_option("--image", count.image)->capture_default_str();
    count_cmd->add_option("--patch", count.patch)->capture_default_str();
    count_cmd->add_option("--classes", count.classes)->capture_default_str();

    cli::FidOptions fid;
    auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between two PPM directories");
    fid_cmd->add_option("--real", fid.real)->required();
    fid_cmd->add_option("--fake", fid.fake)->required();
    fid_cmd->add_option("--seed", fid.seed, "Feature extractor seed")->capture_default_str();
    fid_cmd->add_option("--domain", fid.domain, "Label for the output record (default: real dir name)");

    cli::GenDataOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as PPM files");
    gen_cmd->add_option("--kind", gen.kind, "provocation | toy-domains")->required();
    gen_cmd->add_option("--n", gen.n)->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
    gen_cmd->add_option("--out", gen.out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cls) return cli::train_cls(cls, std::cout);
        if (*probe_cmd) return cli::probe_stability(probe, std::cout);
        if (*gan_cmd) return cli::train_gan(gan, std::cout);
        if (*count_cmd) return cli::count_params(count, std::cout);
        if (*fid_cmd) return cli::fid(fid, std::cout);
        if (*gen_cmd) return cli::gen_data(gen, std::cout);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitFormat;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitExplosion;
    }
    return cli::kExitUsage;
}
