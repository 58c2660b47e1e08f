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

#include <doctest.h>

#include "test_support.hpp"
#include "wmark/kernels.hpp"
#include "wmark/model.hpp"

using namespace wmark;
using wmark::testing::random_model;

namespace {

std::vector<double> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> x(n * d);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("parallel predictions equal the serial reference") {
  for (auto act : {Activation::relu, Activation::tanh}) {
    Model m = random_model({3, {16, 8}, 5, act}, 3);
    for (std::size_t n : {0u, 1u, 7u, 1000u}) {
      const auto x = random_rows(n, 3, n + 1);
      const kernels::Rows rows{x, 3};
      const auto s = kernels::serial::predict_rows(m, rows);
      CHECK(kernels::parallel::predict_rows(m, rows) == s);
      CHECK(kernels::predict_rows(m, rows) == s);
      for (std::size_t i = 0; i < n; ++i) CHECK(s[i] == predict(m, rows.row(i)));
    }
  }
}

TEST_CASE("parallel agreement counts equal the serial reference") {
  ModelSpec spec{2, {8}, 4, Activation::tanh};
  std::vector<Model> models;
  for (int i = 0; i < 9; ++i) models.push_back(random_model(spec, 100 + i));
  const auto x = random_rows(500, 2, 5);
  const kernels::Rows rows{x, 2};
  std::vector<int> labels(500);
  for (std::size_t i = 0; i < 500; ++i) labels[i] = static_cast<int>(i % 4);
  const auto s = kernels::serial::agreement_counts(models, rows, labels);
  CHECK(kernels::parallel::agreement_counts(models, rows, labels) == s);
  for (std::size_t i = 0; i < 500; i += 37) {
    int c = 0;
    for (const auto& m : models) c += predict(m, rows.row(i)) == labels[i];
    CHECK(s[i] == c);
  }
}

TEST_CASE("parallel correct count equals the serial reference") {
  Model m = random_model({2, {6}, 3, Activation::relu}, 9);
  Dataset d = make_blobs(3, 2, 300, 2.0, 4);
  const auto rows = kernels::rows_of(d);
  const auto s = kernels::serial::count_correct(m, rows, d.labels());
  CHECK(kernels::parallel::count_correct(m, rows, d.labels()) == s);
  CHECK(accuracy(d, m) == static_cast<double>(s) / static_cast<double>(d.size()));
}

TEST_CASE("label count must match the rows") {
  Model m = random_model({2, {6}, 3, Activation::relu}, 9);
  const auto x = random_rows(4, 2, 1);
  std::vector<int> labels(3, 0);
  CHECK_THROWS_AS(kernels::count_correct(m, {x, 2}, labels), InputError);
}

TEST_CASE("thread reporting") {
  CHECK(kernels::max_threads() >= 1);
#ifdef WMARK_HAVE_OPENMP
  CHECK(kernels::openmp_enabled());
#else
  CHECK_FALSE(kernels::openmp_enabled());
#endif
}
