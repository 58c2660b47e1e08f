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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "forward_impl.hpp"
#include "wmark/error.hpp"
#include "wmark/kernels.hpp"
#include "wmark/model.hpp"
#include "wmark/rng.hpp"

namespace wmark {

std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw InputError("model: input_dim must be positive");
  if (num_classes < 3)
    throw InputError("model: num_classes must be at least 3, got " +
                     std::to_string(num_classes));
  for (std::size_t w : hidden_layers)
    if (w == 0) throw InputError("model: hidden layer widths must be positive");
}

std::size_t ModelSpec::param_count() const {
  std::size_t count = 0;
  for (const LayerShape& s : layer_shapes(*this)) count += s.out * (s.in + 1);
  return count;
}

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  std::vector<LayerShape> shapes;
  std::size_t in = spec.input_dim;
  std::size_t offset = 0;
  auto push = [&](std::size_t out) {
    LayerShape s{in, out, offset, offset + in * out};
    offset = s.bias_offset + out;
    shapes.push_back(s);
    in = out;
  };
  for (std::size_t w : spec.hidden_layers) push(w);
  push(static_cast<std::size_t>(spec.num_classes));
  return shapes;
}

Model::Model(ModelSpec spec, std::vector<double> theta)
    : spec_(std::move(spec)), theta_(std::move(theta)) {
  spec_.validate();
  if (theta_.size() != spec_.param_count())
    throw InputError("model: theta has " + std::to_string(theta_.size()) +
                     " entries, spec needs " +
                     std::to_string(spec_.param_count()));
  for (double v : theta_)
    if (!std::isfinite(v)) throw InputError("model: non-finite parameter");
}

Model Model::zeros(const ModelSpec& spec) {
  spec.validate();
  return Model(spec, std::vector<double>(spec.param_count(), 0.0));
}

Model Model::initialize(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<double> theta(spec.param_count(), 0.0);
  Rng rng(derive_seed(seed, 0));
  for (const LayerShape& s : layer_shapes(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t k = 0; k < s.in * s.out; ++k)
      theta[s.weight_offset + k] = u(rng);
  }
  return Model(spec, std::move(theta));
}

namespace {

void check_input(const Model& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    throw InputError("input has dimension " + std::to_string(x.size()) +
                     ", model expects " + std::to_string(model.input_dim()));
}

void check_probs(std::span<const double> p, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size())
    throw InputError("label " + std::to_string(label) + " out of range");
}

/// Per-row training target and loss mixing.
struct TargetMix {
  std::span<const double> soft;  // rows x K
  std::span<const int> labels;
  double soft_weight = 0.0;
  std::size_t k = 0;

  bool uses_soft() const { return soft_weight != 0.0; }
  bool uses_hard() const { return soft_weight != 1.0; }

  void target(std::size_t r, std::span<double> out) const {
    const int y = uses_hard() ? labels[r] : -1;
    for (std::size_t c = 0; c < k; ++c) {
      const double hard = static_cast<int>(c) == y ? 1.0 : 0.0;
      if (!uses_soft())
        out[c] = hard;
      else if (!uses_hard())
        out[c] = soft[r * k + c];
      else
        out[c] = soft_weight * soft[r * k + c] + (1.0 - soft_weight) * hard;
    }
  }

  double loss(std::size_t r, std::span<const double> q) const {
    if (!uses_soft()) return cross_entropy(q, labels[r]);
    const double kl = kl_divergence(soft.subspan(r * k, k), q);
    if (!uses_hard()) return kl;
    return soft_weight * kl + (1.0 - soft_weight) * cross_entropy(q, labels[r]);
  }
};

/// Adds the gradient of (1/batch) * sum of per-row losses over `rows` to
/// `grad`; returns the summed (not averaged) loss.
double accumulate(std::span<const double> theta, Activation act,
                  detail::Workspace& ws, std::span<const double> features,
                  std::size_t dim, std::span<const std::size_t> rows,
                  const TargetMix& mix, std::span<double> grad) {
  const auto& shapes = ws.shapes();
  const std::size_t last = shapes.size() - 1;
  const double scale = 1.0 / static_cast<double>(rows.size());
  std::vector<double> target(mix.k);
  std::vector<double> delta, prev;
  double loss_sum = 0.0;

  for (std::size_t r : rows) {
    std::span<const double> x = features.subspan(r * dim, dim);
    ws.run(theta, act, x);
    loss_sum += mix.loss(r, ws.probs());
    mix.target(r, target);
    delta.assign(mix.k, 0.0);
    for (std::size_t c = 0; c < mix.k; ++c)
      delta[c] = (ws.probs()[c] - target[c]) * scale;

    for (std::size_t l = last + 1; l-- > 0;) {
      const LayerShape& s = shapes[l];
      std::span<const double> in =
          l == 0 ? x : std::span<const double>(ws.post(l - 1));
      double* gw = grad.data() + s.weight_offset;
      double* gb = grad.data() + s.bias_offset;
      for (std::size_t o = 0; o < s.out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* gr = gw + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) gr[i] += d * in[i];
      }
      if (l == 0) break;
      prev.assign(s.in, 0.0);
      const double* w = theta.data() + s.weight_offset;
      for (std::size_t o = 0; o < s.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* wr = w + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) prev[i] += wr[i] * d;
      }
      const auto& z = ws.pre(l - 1);
      const auto& a = ws.post(l - 1);
      for (std::size_t i = 0; i < s.in; ++i)
        prev[i] *= detail::activate_grad(act, z[i], a[i]);
      delta.swap(prev);
    }
  }
  return loss_sum;
}

TargetMix batch_mix(const Model& model, const Batch& batch, Loss loss) {
  const auto k = static_cast<std::size_t>(model.num_classes());
  const std::size_t n = batch.size();
  if (n == 0) throw InputError("gradients: empty batch");
  if (batch.dim != model.input_dim() || batch.features.size() != n * batch.dim)
    throw InputError("gradients: batch dimension mismatch");
  TargetMix mix;
  mix.k = k;
  if (loss == Loss::cross_entropy) {
    if (batch.labels.size() != n) throw InputError("gradients: label count mismatch");
    for (int y : batch.labels)
      if (y < 0 || y >= model.num_classes())
        throw InputError("gradients: label out of range");
    mix.labels = batch.labels;
    mix.soft_weight = 0.0;
  } else {
    if (batch.targets.size() != n * k)
      throw InputError("gradients: target matrix shape mismatch");
    mix.soft = batch.targets;
    mix.soft_weight = 1.0;
  }
  return mix;
}

}  // namespace

std::vector<double> forward(const Model& model, std::span<const double> x) {
  check_input(model, x);
  detail::Workspace ws(model.spec());
  ws.run(model, x);
  return ws.probs();
}

std::vector<std::vector<double>> hidden_activations(const Model& model,
                                                    std::span<const double> x) {
  check_input(model, x);
  detail::Workspace ws(model.spec());
  ws.run(model, x);
  std::vector<std::vector<double>> out;
  for (std::size_t l = 0; l + 1 < ws.shapes().size(); ++l) out.push_back(ws.post(l));
  return out;
}

int predict(const Model& model, std::span<const double> x) {
  check_input(model, x);
  detail::Workspace ws(model.spec());
  return ws.predict(model, x);
}

double cross_entropy(std::span<const double> probs, int label) {
  check_probs(probs, label);
  return -std::log(std::clamp(probs[label], kProbFloor, 1.0));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw InputError("kl_divergence: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    sum += p[i] * (std::log(p[i]) - std::log(std::clamp(q[i], kProbFloor, 1.0)));
  }
  return std::max(sum, 0.0);
}

std::vector<double> gradients(const Model& model, const Batch& batch, Loss loss) {
  const TargetMix mix = batch_mix(model, batch, loss);
  std::vector<double> grad(model.theta().size(), 0.0);
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::Workspace ws(model.spec());
  accumulate(model.theta(), model.spec().activation, ws, batch.features,
             batch.dim, rows, mix, grad);
  return grad;
}

double batch_loss(const Model& model, const Batch& batch, Loss loss) {
  const TargetMix mix = batch_mix(model, batch, loss);
  detail::Workspace ws(model.spec());
  double sum = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    ws.run(model, batch.features.subspan(r * batch.dim, batch.dim));
    sum += mix.loss(r, ws.probs());
  }
  return sum / static_cast<double>(batch.size());
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw InputError("train: learning_rate must be finite and non-negative");
  if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0)
    throw InputError("train: momentum must lie in [0, 1)");
  if (!std::isfinite(weight_decay) || weight_decay < 0.0)
    throw InputError("train: weight_decay must be finite and non-negative");
  if (batch_size && *batch_size == 0)
    throw InputError("train: batch_size must be positive");
}

FitResult fit(Model init, const Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  if (!objective.data || objective.data->empty())
    throw InputError("train: empty dataset");
  const Dataset& data = *objective.data;
  const ModelSpec& spec = init.spec();
  if (data.dim() != spec.input_dim)
    throw InputError("train: dataset dimension does not match model");
  if (data.num_classes() > spec.num_classes)
    throw InputError("train: dataset has more classes than the model");
  const double w = objective.soft_weight;
  if (!(w >= 0.0 && w <= 1.0)) throw InputError("train: soft_weight outside [0, 1]");
  const auto k = static_cast<std::size_t>(spec.num_classes);
  if (w != 0.0 && objective.soft_targets.size() != data.size() * k)
    throw InputError("train: soft target matrix shape mismatch");

  const std::size_t n = data.size();
  const std::size_t bs = cfg.batch_size.value_or(std::min<std::size_t>(n, 2048));
  if (bs > n)
    throw InputError("train: batch_size " + std::to_string(bs) +
                     " exceeds dataset size " + std::to_string(n));

  TargetMix mix{objective.soft_targets, data.labels(), w, k};
  std::vector<double> theta = init.theta();
  std::vector<double> velocity(theta.size(), 0.0);
  std::vector<double> grad(theta.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::Workspace ws(spec);
  Rng rng(derive_seed(cfg.seed, 1));

  std::vector<double> history;
  history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (bs < n) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      loss_sum += accumulate(theta, spec.activation, ws, data.features(),
                             data.dim(), rows, mix, grad);
      for (std::size_t p = 0; p < theta.size(); ++p) {
        double g = grad[p];
        if (cfg.weight_decay != 0.0) g += cfg.weight_decay * theta[p];
        velocity[p] = cfg.momentum * velocity[p] + g;
        theta[p] -= cfg.learning_rate * velocity[p];
      }
    }
    const double mean = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean))
      throw TrainingDiverged("train: loss became non-finite at epoch " +
                             std::to_string(epoch + 1));
    history.push_back(mean);
  }
  for (double v : theta)
    if (!std::isfinite(v))
      throw TrainingDiverged("train: parameters became non-finite");
  return {Model(spec, std::move(theta)), std::move(history)};
}

Model train(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw InputError("train: empty dataset");
  return fit(Model::initialize(spec, cfg.seed), Objective{&data, {}, 0.0}, cfg).model;
}

double accuracy(const Dataset& data, const Model& model) {
  if (data.empty()) throw InputError("accuracy: empty dataset");
  if (data.dim() != model.input_dim())
    throw InputError("accuracy: dataset dimension does not match model");
  const std::size_t hits =
      kernels::count_correct(model, kernels::rows_of(data), data.labels());
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double theta_distance(const Model& a, const Model& b) {
  if (a.theta().size() != b.theta().size())
    throw InputError("theta_distance: parameter counts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.theta().size(); ++i) {
    const double d = a.theta()[i] - b.theta()[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double theta_norm(const Model& m) {
  double sum = 0.0;
  for (double v : m.theta()) sum += v * v;
  return std::sqrt(sum);
}

}  // namespace wmark
