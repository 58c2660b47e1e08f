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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wmark/model.hpp"

namespace wmark {

// Checkpoint layout, all integers 4-byte little-endian unsigned:
//   "NWMK" | version | input_dim | hidden layer count | widths... |
//   num_classes | activation code | theta as little-endian float64
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
/// Throws FormatError on bad magic, version mismatch, truncation or trailing
/// bytes.
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
/// As load_checkpoint, but throws SpecMismatch unless the stored spec equals
/// `expected`.
Model load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected);

/// 16 hex digits of FNV-1a over the encoded checkpoint.
std::string fingerprint(const Model& model);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace wmark
