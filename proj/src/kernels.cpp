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

#include "wmark/kernels.hpp"

#include <string>

#include "forward_impl.hpp"
#include "wmark/error.hpp"

#if defined(WMARK_HAVE_OPENMP)
#include <omp.h>
#endif

namespace wmark::kernels {

namespace {

void check_rows(const Model& model, Rows rows) {
  if (rows.dim != model.input_dim() || rows.data.size() % rows.dim != 0)
    throw InputError("kernels: row dimension " + std::to_string(rows.dim) +
                     " does not match model input " +
                     std::to_string(model.input_dim()));
}

void check_agreement(std::span<const Model> models, Rows rows,
                     std::span<const int> labels) {
  if (models.empty()) throw InputError("agreement: no models");
  for (const Model& m : models) check_rows(m, rows);
  if (labels.size() != rows.count())
    throw InputError("agreement: label count does not match rows");
}

}  // namespace

namespace serial {

std::vector<int> predict_rows(const Model& model, Rows rows) {
  check_rows(model, rows);
  const std::size_t n = rows.count();
  std::vector<int> out(n);
  detail::Workspace ws(model.spec());
  for (std::size_t i = 0; i < n; ++i) out[i] = ws.predict(model, rows.row(i));
  return out;
}

std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels) {
  check_agreement(models, rows, labels);
  const std::size_t n = rows.count();
  std::vector<int> counts(n, 0);
  detail::Workspace ws(models.front().spec());
  for (const Model& m : models) {
    if (m.spec() != models.front().spec()) ws = detail::Workspace(m.spec());
    for (std::size_t j = 0; j < n; ++j)
      if (ws.predict(m, rows.row(j)) == labels[j]) ++counts[j];
  }
  return counts;
}

std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels) {
  const std::vector<int> pred = serial::predict_rows(model, rows);
  if (labels.size() != pred.size())
    throw InputError("count_correct: label count does not match rows");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return hits;
}

}  // namespace serial

namespace parallel {

#if defined(WMARK_HAVE_OPENMP)

std::vector<int> predict_rows(const Model& model, Rows rows) {
  check_rows(model, rows);
  const auto n = static_cast<std::ptrdiff_t>(rows.count());
  std::vector<int> out(rows.count());
#pragma omp parallel if (n > 256)
  {
    detail::Workspace ws(model.spec());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      out[i] = ws.predict(model, rows.row(static_cast<std::size_t>(i)));
  }
  return out;
}

std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels) {
  check_agreement(models, rows, labels);
  const auto n = static_cast<std::ptrdiff_t>(rows.count());
  std::vector<int> counts(rows.count(), 0);
  // Each candidate row is owned by exactly one thread; counts are integers,
  // so the result does not depend on the schedule.
#pragma omp parallel if (n * static_cast<std::ptrdiff_t>(models.size()) > 256)
  {
    detail::Workspace ws(models.front().spec());
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      int c = 0;
      for (const Model& m : models) {
        if (m.spec() != models.front().spec()) {
          detail::Workspace other(m.spec());
          c += other.predict(m, rows.row(static_cast<std::size_t>(j))) == labels[j];
        } else {
          c += ws.predict(m, rows.row(static_cast<std::size_t>(j))) == labels[j];
        }
      }
      counts[j] = c;
    }
  }
  return counts;
}

std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels) {
  check_rows(model, rows);
  if (labels.size() != rows.count())
    throw InputError("count_correct: label count does not match rows");
  const auto n = static_cast<std::ptrdiff_t>(rows.count());
  std::size_t hits = 0;
#pragma omp parallel if (n > 256) reduction(+ : hits)
  {
    detail::Workspace ws(model.spec());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      hits += ws.predict(model, rows.row(static_cast<std::size_t>(i))) == labels[i];
  }
  return hits;
}

#else

std::vector<int> predict_rows(const Model& model, Rows rows) {
  return serial::predict_rows(model, rows);
}
std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels) {
  return serial::agreement_counts(models, rows, labels);
}
std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels) {
  return serial::count_correct(model, rows, labels);
}

#endif

}  // namespace parallel

std::vector<int> predict_rows(const Model& model, Rows rows) {
  return parallel::predict_rows(model, rows);
}

std::vector<int> agreement_counts(std::span<const Model> models, Rows rows,
                                  std::span<const int> labels) {
  return parallel::agreement_counts(models, rows, labels);
}

std::size_t count_correct(const Model& model, Rows rows, std::span<const int> labels) {
  return parallel::count_correct(model, rows, labels);
}

bool openmp_enabled() noexcept {
#if defined(WMARK_HAVE_OPENMP)
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#if defined(WMARK_HAVE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace wmark::kernels
