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
#include <optional>
#include <string_view>
#include <vector>

#include "wmark/data.hpp"
#include "wmark/model.hpp"

namespace wmark {

enum class AttackKind { soft_label, hard_label, rgt, prune, finetune };

std::string_view to_string(AttackKind k);
AttackKind attack_kind_from_string(std::string_view name);

/// One stealing or watermark-removal procedure.
///
/// soft_label, hard_label and rgt train a fresh `surrogate_spec` network on
/// `surrogate_data` (the adversary's dataset); rgt also uses its true labels.
/// finetune continues training a copy of the source on `surrogate_data`.
/// prune zeroes low-activity neurons of the source without training.
struct AttackConfig {
  AttackKind kind = AttackKind::soft_label;
  ModelSpec surrogate_spec;
  Dataset surrogate_data;
  std::optional<double> gamma;        // rgt only, in [0, 1]
  std::optional<double> prune_ratio;  // prune only, in [0, 1)
  TrainConfig train;

  void validate() const;
};

struct AttackResult {
  Model surrogate;
  /// Accuracy on the true labels of surrogate_data (calibration data for prune).
  double clean_accuracy = 0.0;
  /// Per-epoch training loss followed by the loss of the final model on the
  /// whole attack dataset. Empty for prune.
  std::vector<double> loss_history;
  std::uint64_t attack_seed = 0;
  /// hard_label only: the dataset relabeled by the source.
  std::optional<Dataset> relabeled;
};

/// Probability vectors of `f` on every row, row-major N x K.
std::vector<double> soft_targets(const Model& f, const Dataset& data);
/// `data` with labels replaced by predict(f, x).
Dataset relabel(const Model& f, const Dataset& data);

/// Minimizes mean KL(f(x) || f*(x)) over surrogate_data; f's outputs are
/// captured once before training.
AttackResult steal_soft(const Model& f, const AttackConfig& cfg);
/// Cross-entropy training on surrogate_data relabeled by f.
AttackResult steal_hard(const Model& f, const AttackConfig& cfg);
/// gamma * KL(f || f*) + (1 - gamma) * CE(f*, true label) over surrogate_data.
AttackResult steal_rgt(const Model& f, const AttackConfig& cfg);
AttackResult prune(const Model& f, const AttackConfig& cfg, const Dataset& calibration);
/// Continues cross-entropy training of a copy of f on surrogate_data.
AttackResult finetune(const Model& f, const AttackConfig& cfg);

/// Dispatches on cfg.kind; prune uses `calibration` or, if null, surrogate_data.
AttackResult run_attack(const Model& f, const AttackConfig& cfg,
                        const Dataset* calibration = nullptr);

/// Mean |post-activation| of every hidden neuron over `calibration`.
std::vector<std::vector<double>> neuron_activity(const Model& f, const Dataset& calibration);

/// Per hidden layer, the floor(ratio * width) least active neuron indices
/// (ties broken by lower index), ascending.
std::vector<std::vector<std::size_t>> prune_plan(const Model& f, double ratio,
                                                 const Dataset& calibration);

/// Zeroes incoming weights, bias and outgoing weights of the planned neurons.
Model apply_prune(const Model& f, const std::vector<std::vector<std::size_t>>& plan);

}  // namespace wmark
