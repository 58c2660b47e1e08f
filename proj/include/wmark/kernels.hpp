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

// Data-parallel batch kernels. Every kernel has a serial reference in
// wmark::kernels::serial and an OpenMP version in wmark::kernels::parallel
// that must return identical results; the unqualified entry points pick the
// parallel one when the library is built with OpenMP.

#include <cstddef>
#include <span>
#include <vector>

#include "wmark/model.hpp"

namespace wmark::kernels {

/// Row-major block of feature vectors.
struct Rows {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t count() const { return dim ? data.size() / dim : 0; }
  std::span<const double> row(std::size_t i) const {
    return data.subspan(i * dim, dim);
  }
};

inline Rows rows_of(const Dataset& d) { return {d.features(), d.dim()}; }

namespace serial {
std::vector<int> predict_rows(const Model& model, Rows rows);
/// counts[j] = number of models predicting labels[j] on row j.
std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels);
std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels);
}  // namespace serial

namespace parallel {
std::vector<int> predict_rows(const Model& model, Rows rows);
std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels);
std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels);
}  // namespace parallel

std::vector<int> predict_rows(const Model& model, Rows rows);
std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels);
std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels);

bool openmp_enabled() noexcept;
int max_threads() noexcept;

}  // namespace wmark::kernels
