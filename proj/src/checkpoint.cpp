// Copyright 2026 The wmark Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmark/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "wmark/error.hpp"

namespace wmark {

namespace {

constexpr char kMagic[4] = {'N', 'W', 'M', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint64_t v) {
  if (v > 0xFFFFFFFFull) throw InputError("checkpoint: field exceeds 32 bits");
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("checkpoint: truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  const ModelSpec& spec = model.spec();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, spec.input_dim);
  put_u32(out, spec.hidden_layers.size());
  for (std::size_t w : spec.hidden_layers) put_u32(out, w);
  put_u32(out, static_cast<std::uint64_t>(spec.num_classes));
  put_u32(out, static_cast<std::uint32_t>(spec.activation));
  for (double v : model.theta()) put_f64(out, v);
  return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw FormatError("checkpoint: bad magic");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  ModelSpec spec;
  spec.input_dim = r.u32();
  const std::uint32_t layers = r.u32();
  if (layers > r.remaining() / 4) throw FormatError("checkpoint: truncated");
  spec.hidden_layers.resize(layers);
  for (auto& w : spec.hidden_layers) w = r.u32();
  spec.num_classes = static_cast<int>(r.u32());
  const std::uint32_t act = r.u32();
  if (act > 1) throw FormatError("checkpoint: unknown activation code " + std::to_string(act));
  spec.activation = static_cast<Activation>(act);
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("checkpoint: invalid spec: ") + e.what());
  }
  const std::size_t count = spec.param_count();
  if (r.remaining() != count * 8)
    throw FormatError(r.remaining() < count * 8 ? "checkpoint: truncated"
                                                : "checkpoint: trailing bytes");
  std::vector<double> theta(count);
  for (double& v : theta) v = r.f64();
  try {
    return Model(std::move(spec), std::move(theta));
  } catch (const InputError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

Model load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected) {
  Model m = load_checkpoint(path);
  if (m.spec() != expected)
    throw SpecMismatch("checkpoint " + path.string() +
                       " describes a different architecture");
  return m;
}

std::string fingerprint(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : encode_checkpoint(model)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wmark
