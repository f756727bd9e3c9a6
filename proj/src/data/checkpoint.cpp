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

#include "parallax/data/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

#include "parallax/core/errors.hpp"

namespace parallax::data {

namespace {

void put_u8(std::vector<unsigned char>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

class Reader {
   public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

    const unsigned char* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw FormatError("checkpoint truncated at offset " + std::to_string(pos_) + " while reading " + what);
        }
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint8_t u8(const char* what) { return *take(1, what); }
    std::uint16_t u16(const char* what) {
        const unsigned char* p = take(2, what);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        const unsigned char* p = take(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }

   private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint32_t> dims_of(const Shape& shape) {
    std::vector<std::uint32_t> dims;
    for (Index d : shape) dims.push_back(static_cast<std::uint32_t>(d));
    return dims;
}

}  // namespace

void Checkpoint::add_values(const std::string& name, std::vector<std::uint32_t> dims, std::vector<float> values) {
    if (contains(name)) throw UsageError("duplicate checkpoint entry: " + name);
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("checkpoint entry name too long");
    if (dims.size() > std::numeric_limits<std::uint8_t>::max()) throw UsageError("checkpoint entry rank too large");
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    if (count != values.size()) throw DimensionError("checkpoint entry " + name + ": dims disagree with value count");
    entries_.push_back({name, std::move(dims), std::move(values)});
}

void Checkpoint::add_tensor(const std::string& name, const Tensor<float>& t) {
    add_values(name, dims_of(t.shape()), std::vector<float>(t.data().data(), t.data().data() + t.numel()));
}

void Checkpoint::add_words(const std::string& name, std::span<const std::uint32_t> words) {
    std::vector<float> values;
    values.reserve(words.size());
    for (auto w : words) values.push_back(std::bit_cast<float>(w));
    add_values(name, {static_cast<std::uint32_t>(words.size())}, std::move(values));
}

void Checkpoint::add_u64(const std::string& name, std::uint64_t value) {
    const std::uint32_t words[2] = {static_cast<std::uint32_t>(value & 0xffffffffu), static_cast<std::uint32_t>(value >> 32)};
    add_words(name, words);
}

void Checkpoint::add_text(const std::string& name, const std::string& text) {
    std::vector<std::uint32_t> words(text.begin(), text.end());
    for (auto& w : words) w &= 0xffu;
    add_words(name, words);
}

void Checkpoint::add_params(const std::string& prefix, const ParamStore<float>& params) {
    for (const auto& e : params.entries()) add_tensor(prefix + e.name, e.tensor);
}

bool Checkpoint::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw FormatError("checkpoint has no entry named " + name);
}

std::vector<std::uint32_t> Checkpoint::words(const std::string& name) const {
    std::vector<std::uint32_t> out;
    for (float v : at(name).values) out.push_back(std::bit_cast<std::uint32_t>(v));
    return out;
}

std::uint64_t Checkpoint::u64(const std::string& name) const {
    const auto w = words(name);
    if (w.size() != 2) throw FormatError("checkpoint entry " + name + " is not a 64-bit value");
    return static_cast<std::uint64_t>(w[0]) | (static_cast<std::uint64_t>(w[1]) << 32);
}

std::string Checkpoint::text(const std::string& name) const {
    std::string out;
    for (auto w : words(name)) out.push_back(static_cast<char>(w));
    return out;
}

void Checkpoint::load_tensor(const std::string& name, Tensor<float>& target) const {
    const CheckpointEntry& e = at(name);
    if (e.dims != dims_of(target.shape())) {
        throw FormatError("checkpoint entry " + name + " has a different shape than " + to_string(target.shape()));
    }
    for (Index i = 0; i < target.numel(); ++i) target.data()(i) = e.values[static_cast<std::size_t>(i)];
}

void Checkpoint::load_params(const std::string& prefix, ParamStore<float>& params) const {
    for (const auto& e : params.entries()) {
        Tensor<float> t = e.tensor;
        load_tensor(prefix + e.name, t);
    }
}

std::vector<unsigned char> checkpoint_bytes(const Checkpoint& ckpt) {
    std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.entries().size()));
    for (const auto& e : ckpt.entries()) {
        put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        put_u8(out, static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) put_u32(out, d);
        for (float v : e.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Checkpoint checkpoint_from_bytes(std::span<const unsigned char> bytes) {
    Reader in(bytes);
    const unsigned char* magic = in.take(4, "magic");
    if (!std::equal(magic, magic + 4, std::begin(kCheckpointMagic))) {
        throw FormatError("bad checkpoint magic at offset 0");
    }
    const std::uint32_t version = in.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at offset 4");
    }
    const std::uint32_t count = in.u32("entry count");
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = in.u16("name length");
        const unsigned char* name = in.take(name_len, "name");
        const std::uint8_t rank = in.u8("rank");
        std::vector<std::uint32_t> dims(rank);
        std::size_t numel = 1;
        for (auto& d : dims) {
            d = in.u32("dims");
            numel *= d;
        }
        if (numel > (bytes.size() - in.offset()) / 4) {
            throw FormatError("checkpoint truncated at offset " + std::to_string(in.offset()) + " while reading values");
        }
        std::vector<float> values(numel);
        for (auto& v : values) v = std::bit_cast<float>(in.u32("values"));
        ckpt.add_values(std::string(name, name + name_len), std::move(dims), std::move(values));
    }
    if (!in.done()) throw FormatError("trailing bytes after checkpoint at offset " + std::to_string(in.offset()));
    return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = checkpoint_bytes(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

}  // namespace parallax::data
