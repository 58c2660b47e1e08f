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

#include <filesystem>

#include "wmark/watermark.hpp"

namespace wmark {

inline constexpr int kTriggerSetVersion = 1;

/// Writes a JSON manifest at `manifest` and the x* vectors as little-endian
/// float64 to a sibling file with extension ".bin". Labels are 1-based and
/// parent indices 0-based in the manifest.
void save_trigger_set(const TriggerSet& set, const std::filesystem::path& manifest);

/// Inverse of save_trigger_set; x* is reproduced bitwise. Throws FormatError.
TriggerSet load_trigger_set(const std::filesystem::path& manifest);

}  // namespace wmark
