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

// Serial reference vs OpenMP kernels on a batch of random rows.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "wmark/kernels.hpp"

namespace {

using namespace wmark;

const ModelSpec kSpec{2, {32, 32}, 4, Activation::tanh};

std::vector<double> random_rows(std::size_t n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> x(n * kSpec.input_dim);
  for (auto& v : x) v = g(rng);
  return x;
}

std::vector<Model> random_models(std::size_t count) {
  std::vector<Model> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(Model::initialize(kSpec, 100 + i));
  return out;
}

template <auto Fn>
void BM_predict(benchmark::State& state) {
  const auto x = random_rows(static_cast<std::size_t>(state.range(0)));
  const Model model = Model::initialize(kSpec, 7);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(model, kernels::Rows{x, kSpec.input_dim}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_agreement(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto x = random_rows(n);
  const auto models = random_models(16);
  const std::vector<int> labels(n, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(models, kernels::Rows{x, kSpec.input_dim}, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 16);
}

BENCHMARK(BM_predict<kernels::serial::predict_rows>)->Name("predict_rows/serial")->Range(256, 65536);
BENCHMARK(BM_predict<kernels::parallel::predict_rows>)->Name("predict_rows/parallel")->Range(256, 65536);
BENCHMARK(BM_agreement<kernels::serial::agreement_counts>)->Name("agreement_counts/serial")->Range(64, 8192);
BENCHMARK(BM_agreement<kernels::parallel::agreement_counts>)->Name("agreement_counts/parallel")->Range(64, 8192);

}  // namespace

BENCHMARK_MAIN();
