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

#include "parallax/data/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "parallax/core/errors.hpp"
#include "parallax/core/random.hpp"
#include "parallax/data/ppm.hpp"
#include "parallax/data/sources.hpp"

namespace parallax::data {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

bool parse_number(const std::string& text, ConfigValue& out) {
    std::string clean;
    for (char c : text)
        if (c != '_') clean.push_back(c);
    const char* first = clean.data() + (!clean.empty() && clean[0] == '+' ? 1 : 0);
    const char* last = clean.data() + clean.size();
    if (clean.find_first_of(".eE") == std::string::npos || clean == "inf" || clean == "nan") {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec == std::errc() && ptr == last) {
            out.value = v;
            return true;
        }
    }
    double d = 0;
    const auto [ptr, ec] = std::from_chars(first, last, d);
    if (ec == std::errc() && ptr == last) {
        out.value = d;
        return true;
    }
    return false;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw UsageError(origin + ":" + std::to_string(line) + ": " + message);
}

ConfigValue parse_value(const std::string& text, const std::string& origin, int line) {
    ConfigValue out;
    out.line = line;
    if (text.empty()) fail(origin, line, "missing value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') fail(origin, line, "unterminated string");
        std::string s;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            if (text[i] == '\\' && i + 2 < text.size()) {
                const char next = text[++i];
                s.push_back(next == 'n' ? '\n' : next == 't' ? '\t' : next);
            } else {
                s.push_back(text[i]);
            }
        }
        out.value = s;
        return out;
    }
    if (text == "true" || text == "false") {
        out.value = text == "true";
        return out;
    }
    if (text.front() == '[') {
        if (text.back() != ']') fail(origin, line, "unterminated array");
        std::vector<double> items;
        std::stringstream inner(text.substr(1, text.size() - 2));
        std::string item;
        while (std::getline(inner, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            ConfigValue v;
            if (!parse_number(item, v)) fail(origin, line, "array items must be numbers, got '" + item + "'");
            items.push_back(std::holds_alternative<double>(v.value) ? std::get<double>(v.value)
                                                                    : static_cast<double>(std::get<std::int64_t>(v.value)));
        }
        out.value = items;
        return out;
    }
    if (!parse_number(text, out)) fail(origin, line, "cannot parse value '" + text + "'");
    return out;
}

class SectionReader {
   public:
    SectionReader(const ConfigTable& table, std::string section, std::string origin)
        : section_(std::move(section)), origin_(std::move(origin)) {
        const auto it = table.find(section_);
        if (it != table.end()) entries_ = &it->second;
    }

    void real(const char* key, double& target) {
        if (const ConfigValue* v = find(key)) {
            if (const auto* d = std::get_if<double>(&v->value)) {
                target = *d;
            } else if (const auto* i = std::get_if<std::int64_t>(&v->value)) {
                target = static_cast<double>(*i);
            } else {
                type_error(*v, key, "a number");
            }
        }
    }
    template <typename Int>
    void integer(const char* key, Int& target) {
        if (const ConfigValue* v = find(key)) {
            const auto* i = std::get_if<std::int64_t>(&v->value);
            if (!i) type_error(*v, key, "an integer");
            if (std::is_unsigned_v<Int> && *i < 0) type_error(*v, key, "a nonnegative integer");
            target = static_cast<Int>(*i);
        }
    }
    void boolean(const char* key, bool& target) {
        if (const ConfigValue* v = find(key)) {
            const auto* b = std::get_if<bool>(&v->value);
            if (!b) type_error(*v, key, "true or false");
            target = *b;
        }
    }
    void text(const char* key, std::string& target) {
        if (const ConfigValue* v = find(key)) {
            const auto* s = std::get_if<std::string>(&v->value);
            if (!s) type_error(*v, key, "a string");
            target = *s;
        }
    }
    void reals(const char* key, std::vector<double>& target) {
        if (const ConfigValue* v = find(key)) {
            const auto* a = std::get_if<std::vector<double>>(&v->value);
            if (!a) type_error(*v, key, "an array of numbers");
            target = *a;
        }
    }
    const ConfigValue* find(const char* key) {
        known_.insert(key);
        if (!entries_) return nullptr;
        const auto it = entries_->find(key);
        return it == entries_->end() ? nullptr : &it->second;
    }
    int line_of(const char* key) {
        const ConfigValue* v = find(key);
        return v ? v->line : 0;
    }
    void reject_unknown() const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_) {
            if (!known_.count(key)) fail(origin_, value.line, "unknown key '" + key + "' in [" + section_ + "]");
        }
    }

   private:
    [[noreturn]] void type_error(const ConfigValue& v, const char* key, const char* expected) const {
        fail(origin_, v.line, section_ + "." + key + " must be " + expected);
    }

    std::string section_;
    std::string origin_;
    const std::map<std::string, ConfigValue>* entries_ = nullptr;
    std::set<std::string> known_;
};

void with_line(const std::string& origin, int line, const std::function<void()>& check) {
    try {
        check();
    } catch (const std::exception& e) {
        if (line > 0) fail(origin, line, e.what());
        throw UsageError(origin + ": " + e.what());
    }
}

}  // namespace

ConfigTable parse_toml_subset(const std::string& text, const std::string& origin) {
    ConfigTable table;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string content = trim(strip_comment(raw));
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']') fail(origin, line, "malformed section header");
            section = trim(content.substr(1, content.size() - 2));
            if (section.empty()) fail(origin, line, "empty section name");
            if (table.count(section)) fail(origin, line, "duplicate section [" + section + "]");
            table[section];
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) fail(origin, line, "expected key = value");
        if (section.empty()) fail(origin, line, "key outside of a section");
        const std::string key = trim(content.substr(0, eq));
        if (key.empty()) fail(origin, line, "empty key");
        auto& entries = table[section];
        if (entries.count(key)) fail(origin, line, "duplicate key '" + key + "'");
        entries[key] = parse_value(trim(content.substr(eq + 1)), origin, line);
    }
    return table;
}

vit::Recipe ModelSection::resolved_recipe() const {
    vit::Recipe r = vit::named_recipe(recipe);
    r.patch_size = patch_size;
    r.image_size = image_size;
    r.num_classes = num_classes;
    r.validate();
    return r;
}

void RunConfig::sync_generator() {
    auto& g = gan.cyclegan.generator;
    g.backbone = vit::named_recipe(model.recipe);
    g.variant = model.variant;
    g.patch_size = model.patch_size;
    g.image_size = model.image_size;
}

void RunConfig::validate() const {
    model.resolved_recipe();
    train.validate();
    if (data.source != "synthetic" && data.source != "cifar10" && data.source != "cifar100") {
        throw UsageError("data.source must be synthetic, cifar10 or cifar100");
    }
    if (data.train_samples < 0 || data.test_samples < 0) throw UsageError("data sample counts must be >= 0");
    gan.cyclegan.validate();
    if (gan.toy_samples < 16) throw UsageError("gan.toy_samples must be >= 16");
    probe.validate();
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    const ConfigTable table = parse_toml_subset(text, origin);
    for (const auto& [name, entries] : table) {
        if (name != "model" && name != "train" && name != "data" && name != "gan" &&
            name != "probe") {
            const int line = entries.empty() ? 0 : entries.begin()->second.line;
            fail(origin, line, "unknown section [" + name + "]");
        }
    }
    RunConfig c;

    SectionReader model(table, "model", origin);
    model.text("recipe", c.model.recipe);
    std::string variant = vit::to_string(c.model.variant);
    model.text("variant", variant);
    with_line(origin, model.line_of("variant"), [&] { c.model.variant = vit::parse_variant(variant); });
    model.integer("patch_size", c.model.patch_size);
    model.integer("image_size", c.model.image_size);
    model.integer("num_classes", c.model.num_classes);
    model.integer("seed", c.model.seed);
    model.reject_unknown();
    with_line(origin, model.line_of("recipe"), [&] { c.model.resolved_recipe(); });

    SectionReader train(table, "train", origin);
    train.real("lr", c.train.lr);
    train.real("weight_decay", c.train.weight_decay);
    train.integer("epochs", c.train.epochs);
    train.integer("batch_size", c.train.batch_size);
    if (const ConfigValue* clip = train.find("clip")) {
        if (const auto* s = std::get_if<std::string>(&clip->value)) {
            if (*s != "none") fail(origin, clip->line, "train.clip must be a number or \"none\"");
            c.train.clip_threshold.reset();
        } else {
            double t = 0;
            train.real("clip", t);
            c.train.clip_threshold = t;
        }
    }
    train.reals("milestones", c.train.milestones);
    train.real("lr_decay_factor", c.train.lr_decay_factor);
    train.integer("seed", c.train.seed);
    train.boolean("augment_flips", c.train.augment_flips);
    train.real("logit_cap", c.train.logit_cap);
    train.real("grad_cap", c.train.grad_cap);
    train.integer("explosion_patience", c.train.explosion_patience);
    train.integer("max_steps", c.train.max_steps);
    train.boolean("eval_initial", c.train.eval_initial);
    train.reject_unknown();
    with_line(origin, 0, [&] { c.train.validate(); });

    SectionReader data(table, "data", origin);
    data.text("source", c.data.source);
    data.text("train_path", c.data.train_path);
    data.text("test_path", c.data.test_path);
    data.integer("train_samples", c.data.train_samples);
    data.integer("test_samples", c.data.test_samples);
    data.integer("seed", c.data.seed);
    data.reject_unknown();

    c.sync_generator();
    SectionReader gan(table, "gan", origin);
    auto& cg = c.gan.cyclegan;
    gan.real("lambda_cycle", cg.weights.cycle);
    gan.real("lambda_identity", cg.weights.identity);
    gan.integer("pool_capacity", cg.pool_capacity);
    gan.real("lr", cg.lr);
    gan.real("beta1", cg.beta1);
    gan.real("beta2", cg.beta2);
    gan.integer("steps", cg.steps);
    gan.integer("batch_size", cg.batch_size);
    gan.integer("seed", cg.seed);
    gan.integer("blocks_per_stage", cg.generator.blocks_per_stage);
    gan.integer("cnn_tail_blocks", cg.generator.cnn_tail_blocks);
    gan.integer("tail_channels", cg.generator.tail_channels);
    gan.integer("discriminator_channels", cg.discriminator.base_channels);
    gan.integer("discriminator_strided_layers", cg.discriminator.strided_layers);
    gan.text("domain_a", c.gan.domain_a);
    gan.text("domain_b", c.gan.domain_b);
    gan.integer("toy_samples", c.gan.toy_samples);
    gan.integer("sample_every", c.gan.sample_every);
    gan.reject_unknown();

    SectionReader probe(table, "probe", origin);
    auto& pc = c.probe;
    probe.text("recipe", pc.recipe);
    probe.integer("patch_size", pc.patch_size);
    probe.integer("image_size", pc.image_size);
    probe.integer("dataset_size", pc.dataset_size);
    probe.integer("dataset_seed", pc.dataset_seed);
    probe.integer("seeds", pc.seeds);
    probe.integer("base_seed", pc.base_seed);
    probe.real("lr", pc.lr);
    probe.real("weight_decay", pc.weight_decay);
    probe.integer("batch_size", pc.batch_size);
    probe.integer("max_steps", pc.max_steps);
    probe.real("logit_cap", pc.logit_cap);
    probe.real("grad_cap", pc.grad_cap);
    probe.reject_unknown();

    with_line(origin, 0, [&] { c.validate(); });
    return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

nlohmann::ordered_json config_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["record"] = "config";
    nlohmann::ordered_json model;
    model["recipe"] = c.model.recipe;
    model["variant"] = vit::to_string(c.model.variant);
    model["patch_size"] = c.model.patch_size;
    model["image_size"] = c.model.image_size;
    model["num_classes"] = c.model.num_classes;
    model["seed"] = c.model.seed;
    j["model"] = model;
    j["train"] = stability::config_record(c.train);
    nlohmann::ordered_json data;
    data["source"] = c.data.source;
    data["train_path"] = c.data.train_path;
    data["test_path"] = c.data.test_path;
    data["train_samples"] = c.data.train_samples;
    data["test_samples"] = c.data.test_samples;
    data["seed"] = c.data.seed;
    j["data"] = data;
    const auto& cg = c.gan.cyclegan;
    nlohmann::ordered_json gan;
    gan["lambda_cycle"] = cg.weights.cycle;
    gan["lambda_identity"] = cg.weights.identity;
    gan["pool_capacity"] = cg.pool_capacity;
    gan["lr"] = cg.lr;
    gan["beta1"] = cg.beta1;
    gan["beta2"] = cg.beta2;
    gan["steps"] = cg.steps;
    gan["batch_size"] = cg.batch_size;
    gan["seed"] = cg.seed;
    gan["blocks_per_stage"] = cg.generator.stage_depth();
    gan["cnn_tail_blocks"] = cg.generator.cnn_tail_blocks;
    gan["tail_channels"] = cg.generator.tail_channels;
    gan["discriminator_channels"] = cg.discriminator.base_channels;
    gan["discriminator_strided_layers"] = cg.discriminator.strided_layers;
    gan["domain_a"] = c.gan.domain_a;
    gan["domain_b"] = c.gan.domain_b;
    gan["toy_samples"] = c.gan.toy_samples;
    gan["sample_every"] = c.gan.sample_every;
    j["gan"] = gan;
    const auto& pc = c.probe;
    nlohmann::ordered_json probe;
    probe["recipe"] = pc.recipe;
    probe["patch_size"] = pc.patch_size;
    probe["image_size"] = pc.image_size;
    probe["dataset_size"] = pc.dataset_size;
    probe["dataset_seed"] = pc.dataset_seed;
    probe["seeds"] = pc.seeds;
    probe["base_seed"] = pc.base_seed;
    probe["lr"] = pc.lr;
    probe["weight_decay"] = pc.weight_decay;
    probe["batch_size"] = pc.batch_size;
    probe["max_steps"] = pc.max_steps;
    probe["logit_cap"] = pc.logit_cap;
    probe["grad_cap"] = pc.grad_cap;
    j["probe"] = probe;
    return j;
}

std::pair<Dataset, Dataset> load_classification_data(const DataSection& data) {
    Dataset train, test;
    if (data.source == "synthetic") {
        train = gen_provocation_set(std::max<std::int64_t>(data.train_samples, 64), data.seed);
        test = gen_provocation_set(std::max<std::int64_t>(data.test_samples, 64), derive_seed(data.seed, 0x7e57));
    } else {
        if (data.train_path.empty() || data.test_path.empty()) {
            throw UsageError("data.train_path and data.test_path are required for " + data.source);
        }
        const auto variant = data.source == "cifar100" ? CifarVariant::cifar100 : CifarVariant::cifar10;
        train = load_cifar_split(data.train_path, variant, true);
        test = load_cifar_split(data.test_path, variant, false);
    }
    if (data.train_samples > 0 && data.train_samples < train.size()) train = train.subset(data.train_samples);
    if (data.test_samples > 0 && data.test_samples < test.size()) test = test.subset(data.test_samples);
    train.split = "train";
    test.split = "test";
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> load_gan_domains(const GanSection& gan) {
    if (gan.domain_a.empty() != gan.domain_b.empty()) {
        throw UsageError("gan.domain_a and gan.domain_b must be set together");
    }
    if (gan.domain_a.empty()) return gen_toy_domains(gan.toy_samples, gan.cyclegan.seed);
    Dataset a = load_ppm_dir(gan.domain_a);
    Dataset b = load_ppm_dir(gan.domain_b);
    a.split = "A";
    b.split = "B";
    return {std::move(a), std::move(b)};
}

}  // namespace parallax::data
