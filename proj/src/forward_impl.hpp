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

// Allocation-free forward pass shared by nn_core and the batch kernels.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wmark/model.hpp"

namespace wmark::detail {

inline double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

/// d activation / dz expressed through the post-activation value.
inline double activate_grad(Activation a, double z, double post) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

/// In-place numerically stable softmax.
inline void softmax(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

/// Per-layer buffers for a forward pass: pre[l] and post[l] hold layer l's
/// pre- and post-activation; the last layer's post holds probabilities.
class Workspace {
 public:
  explicit Workspace(const ModelSpec& spec) : shapes_(layer_shapes(spec)) {
    pre_.resize(shapes_.size());
    post_.resize(shapes_.size());
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      pre_[l].resize(shapes_[l].out);
      post_[l].resize(shapes_[l].out);
    }
  }

  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::vector<double>& pre(std::size_t l) { return pre_[l]; }
  std::vector<double>& post(std::size_t l) { return post_[l]; }
  const std::vector<double>& probs() const { return post_.back(); }

  /// Runs the network on x; result in probs().
  void run(const Model& model, std::span<const double> x) {
    run(model.theta(), model.spec().activation, x);
  }

  void run(std::span<const double> theta, Activation act,
           std::span<const double> x) {
    std::span<const double> in = x;
    const std::size_t last = shapes_.size() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      const LayerShape& s = shapes_[l];
      const double* w = theta.data() + s.weight_offset;
      const double* b = theta.data() + s.bias_offset;
      auto& z = pre_[l];
      for (std::size_t o = 0; o < s.out; ++o) {
        double acc = b[o];
        const double* wr = w + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) acc += wr[i] * in[i];
        z[o] = acc;
      }
      auto& a = post_[l];
      if (l == last) {
        std::copy(z.begin(), z.end(), a.begin());
        softmax(a);
      } else {
        for (std::size_t o = 0; o < s.out; ++o) a[o] = activate(act, z[o]);
      }
      in = a;
    }
  }

  int predict(const Model& model, std::span<const double> x) {
    run(model, x);
    return argmax(probs());
  }

 private:
  std::vector<LayerShape> shapes_;
  std::vector<std::vector<double>> pre_;
  std::vector<std::vector<double>> post_;
};

}  // namespace wmark::detail
