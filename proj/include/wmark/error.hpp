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

#include <stdexcept>
#include <string>

namespace wmark {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument: dimension mismatch, out-of-range label, empty dataset, ...
class InputError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// A stealing/removal attack could not produce a usable surrogate.
class AttackFailed : public Error {
 public:
  using Error::Error;
};

/// Malformed text input (CSV, config); carries the offending line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Malformed binary artifact: bad magic, truncation, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint was well formed but describes a different architecture.
class SpecMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration (unknown keys, bad values, missing files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmark
