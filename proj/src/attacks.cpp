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

#include "wmark/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wmark/error.hpp"
#include "wmark/kernels.hpp"

namespace wmark {

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::soft_label: return "soft_label";
    case AttackKind::hard_label: return "hard_label";
    case AttackKind::rgt: return "rgt";
    case AttackKind::prune: return "prune";
    case AttackKind::finetune: return "finetune";
  }
  return "soft_label";
}

AttackKind attack_kind_from_string(std::string_view name) {
  for (AttackKind k : {AttackKind::soft_label, AttackKind::hard_label, AttackKind::rgt,
                       AttackKind::prune, AttackKind::finetune})
    if (name == to_string(k)) return k;
  throw InputError("unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  surrogate_spec.validate();
  train.validate();
  if (surrogate_data.empty()) throw InputError("attack: empty surrogate dataset");
  if (gamma.has_value() != (kind == AttackKind::rgt))
    throw InputError("attack: gamma is required for rgt and only for rgt");
  if (prune_ratio.has_value() != (kind == AttackKind::prune))
    throw InputError("attack: prune_ratio is required for prune and only for prune");
  if (gamma && !(*gamma >= 0.0 && *gamma <= 1.0))
    throw InputError("attack: gamma must lie in [0, 1]");
  if (prune_ratio && !(*prune_ratio >= 0.0 && *prune_ratio < 1.0))
    throw InputError("attack: prune_ratio must lie in [0, 1)");
  if (surrogate_data.dim() != surrogate_spec.input_dim)
    throw InputError("attack: surrogate data dimension does not match surrogate spec");
}

std::vector<double> soft_targets(const Model& f, const Dataset& data) {
  if (data.dim() != f.input_dim()) throw InputError("soft_targets: dimension mismatch");
  std::vector<double> out;
  out.reserve(data.size() * static_cast<std::size_t>(f.num_classes()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = forward(f, data.row(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Dataset relabel(const Model& f, const Dataset& data) {
  if (data.dim() != f.input_dim()) throw InputError("relabel: dimension mismatch");
  std::vector<int> labels = kernels::predict_rows(f, kernels::rows_of(data));
  return Dataset(data.features(), std::move(labels), data.dim(), f.num_classes());
}

namespace {

void check_source(const Model& f, const AttackConfig& cfg, AttackKind expected) {
  if (cfg.kind != expected)
    throw InputError("attack: config kind " + std::string(to_string(cfg.kind)) +
                     " passed to " + std::string(to_string(expected)));
  cfg.validate();
  if (cfg.surrogate_spec.input_dim != f.input_dim())
    throw InputError("attack: surrogate input dimension differs from source");
  if (cfg.surrogate_spec.num_classes != f.num_classes())
    throw InputError("attack: surrogate class count differs from source");
}

// Trains from `init` and appends the final model's loss on the whole set.
AttackResult train_attack(Model init, const Objective& objective, const AttackConfig& cfg) {
  FitResult fitted = [&] {
    try {
      return fit(std::move(init), objective, cfg.train);
    } catch (const TrainingDiverged& e) {
      throw AttackFailed(std::string(to_string(cfg.kind)) + ": " + e.what());
    }
  }();
  const Dataset& data = *objective.data;
  const auto k = static_cast<std::size_t>(fitted.model.num_classes());
  double final_loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto q = forward(fitted.model, data.row(i));
    double l = 0.0;
    if (objective.soft_weight != 0.0) {
      const double kl = kl_divergence(objective.soft_targets.subspan(i * k, k), q);
      l = objective.soft_weight == 1.0 ? kl : objective.soft_weight * kl;
    }
    if (objective.soft_weight != 1.0) {
      const double ce = cross_entropy(q, data.label(i));
      l += objective.soft_weight == 0.0 ? ce : (1.0 - objective.soft_weight) * ce;
    }
    final_loss += l;
  }
  final_loss /= static_cast<double>(data.size());
  if (!std::isfinite(final_loss))
    throw AttackFailed(std::string(to_string(cfg.kind)) + ": non-finite final loss");
  fitted.loss_history.push_back(final_loss);

  AttackResult r{std::move(fitted.model), 0.0, std::move(fitted.loss_history),
                 cfg.train.seed, std::nullopt};
  r.clean_accuracy = accuracy(cfg.surrogate_data, r.surrogate);
  return r;
}

}  // namespace

AttackResult steal_soft(const Model& f, const AttackConfig& cfg) {
  check_source(f, cfg, AttackKind::soft_label);
  const std::vector<double> targets = soft_targets(f, cfg.surrogate_data);
  return train_attack(Model::initialize(cfg.surrogate_spec, cfg.train.seed),
                      Objective{&cfg.surrogate_data, targets, 1.0}, cfg);
}

AttackResult steal_hard(const Model& f, const AttackConfig& cfg) {
  check_source(f, cfg, AttackKind::hard_label);
  Dataset labeled = relabel(f, cfg.surrogate_data);
  AttackResult r = train_attack(Model::initialize(cfg.surrogate_spec, cfg.train.seed),
                                Objective{&labeled, {}, 0.0}, cfg);
  r.relabeled = std::move(labeled);
  return r;
}

AttackResult steal_rgt(const Model& f, const AttackConfig& cfg) {
  check_source(f, cfg, AttackKind::rgt);
  const double gamma = *cfg.gamma;
  std::vector<double> targets;
  if (gamma != 0.0) targets = soft_targets(f, cfg.surrogate_data);
  return train_attack(Model::initialize(cfg.surrogate_spec, cfg.train.seed),
                      Objective{&cfg.surrogate_data, targets, gamma}, cfg);
}

AttackResult finetune(const Model& f, const AttackConfig& cfg) {
  check_source(f, cfg, AttackKind::finetune);
  if (cfg.surrogate_spec != f.spec())
    throw InputError("finetune: surrogate spec must equal the source spec");
  return train_attack(f, Objective{&cfg.surrogate_data, {}, 0.0}, cfg);
}

std::vector<std::vector<double>> neuron_activity(const Model& f, const Dataset& calibration) {
  if (calibration.empty()) throw InputError("prune: empty calibration set");
  if (calibration.dim() != f.input_dim()) throw InputError("prune: dimension mismatch");
  std::vector<std::vector<double>> activity;
  for (std::size_t w : f.spec().hidden_layers) activity.emplace_back(w, 0.0);
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    const auto acts = hidden_activations(f, calibration.row(i));
    for (std::size_t l = 0; l < acts.size(); ++l)
      for (std::size_t j = 0; j < acts[l].size(); ++j) activity[l][j] += std::abs(acts[l][j]);
  }
  for (auto& layer : activity)
    for (double& a : layer) a /= static_cast<double>(calibration.size());
  return activity;
}

std::vector<std::vector<std::size_t>> prune_plan(const Model& f, double ratio,
                                                 const Dataset& calibration) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw InputError("prune: ratio must lie in [0, 1)");
  const auto activity = neuron_activity(f, calibration);
  std::vector<std::vector<std::size_t>> plan;
  for (const auto& layer : activity) {
    // The epsilon keeps products such as 0.3 * 10 from rounding down to 2.
    const auto cut = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(layer.size()) + 1e-9));
    std::vector<std::size_t> order(layer.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return layer[a] < layer[b]; });
    order.resize(cut);
    std::sort(order.begin(), order.end());
    plan.push_back(std::move(order));
  }
  return plan;
}

Model apply_prune(const Model& f, const std::vector<std::vector<std::size_t>>& plan) {
  const auto shapes = layer_shapes(f.spec());
  if (plan.size() + 1 != shapes.size()) throw InputError("prune: plan does not match model");
  std::vector<double> theta = f.theta();
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const LayerShape& s = shapes[l];
    const LayerShape& next = shapes[l + 1];
    for (std::size_t j : plan[l]) {
      if (j >= s.out) throw InputError("prune: neuron index out of range");
      std::fill_n(theta.begin() + static_cast<std::ptrdiff_t>(s.weight_offset + j * s.in),
                  s.in, 0.0);
      theta[s.bias_offset + j] = 0.0;
      for (std::size_t o = 0; o < next.out; ++o) theta[next.weight_offset + o * next.in + j] = 0.0;
    }
  }
  return Model(f.spec(), std::move(theta));
}

AttackResult prune(const Model& f, const AttackConfig& cfg, const Dataset& calibration) {
  if (cfg.kind != AttackKind::prune) throw InputError("prune: config kind is not prune");
  if (!cfg.prune_ratio) throw InputError("prune: missing prune_ratio");
  const double ratio = *cfg.prune_ratio;
  if (!(ratio >= 0.0 && ratio < 1.0)) throw InputError("prune: ratio must lie in [0, 1)");
  AttackResult r{apply_prune(f, prune_plan(f, ratio, calibration)), 0.0, {}, cfg.train.seed,
                 std::nullopt};
  r.clean_accuracy = accuracy(calibration, r.surrogate);
  return r;
}

AttackResult run_attack(const Model& f, const AttackConfig& cfg, const Dataset* calibration) {
  switch (cfg.kind) {
    case AttackKind::soft_label: return steal_soft(f, cfg);
    case AttackKind::hard_label: return steal_hard(f, cfg);
    case AttackKind::rgt: return steal_rgt(f, cfg);
    case AttackKind::prune: return prune(f, cfg, calibration ? *calibration : cfg.surrogate_data);
    case AttackKind::finetune: return finetune(f, cfg);
  }
  throw InputError("attack: unknown kind");
}

}  // namespace wmark
