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

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmark/data.hpp"

namespace wmark {

enum class Activation : std::uint32_t { relu = 0, tanh = 1 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Architecture of a dense feed-forward classifier.
struct ModelSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_layers = {32, 32};
  int num_classes = 3;
  Activation activation = Activation::relu;

  /// Throws InputError unless K >= 3 and every width is positive.
  void validate() const;
  std::size_t param_count() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Position of one dense layer inside the flat parameter vector. Each layer
/// stores its out x in weight matrix row-major, followed by its bias.
struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec);

/// A classifier: architecture plus flattened parameter vector theta.
class Model {
 public:
  /// Throws InputError on length mismatch or non-finite parameters.
  Model(ModelSpec spec, std::vector<double> theta);

  static Model zeros(const ModelSpec& spec);
  /// Glorot-uniform weights, zero biases.
  static Model initialize(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  std::size_t input_dim() const noexcept { return spec_.input_dim; }
  int num_classes() const noexcept { return spec_.num_classes; }

  bool operator==(const Model&) const = default;

 private:
  ModelSpec spec_;
  std::vector<double> theta_;
};

/// Class probabilities (softmax of the final logits).
std::vector<double> forward(const Model& model, std::span<const double> x);

/// Post-activation outputs of every hidden layer, outermost vector indexed by
/// layer.
std::vector<std::vector<double>> hidden_activations(const Model& model,
                                                    std::span<const double> x);

/// 0-based argmax of forward(); ties go to the lowest index.
int predict(const Model& model, std::span<const double> x);

/// Lower clamp applied to probabilities inside log().
inline constexpr double kProbFloor = 1e-12;

double cross_entropy(std::span<const double> probs, int label);
/// KL(p || q) with 0 log 0 = 0 and q clamped to kProbFloor.
double kl_divergence(std::span<const double> p, std::span<const double> q);

enum class Loss { cross_entropy, kl_to_targets };

/// Rows of a training batch. `labels` is read for cross_entropy, `targets`
/// (rows x K probability vectors) for kl_to_targets.
struct Batch {
  std::span<const double> features;
  std::size_t dim = 0;
  std::span<const int> labels;
  std::span<const double> targets;

  std::size_t size() const { return dim ? features.size() / dim : 0; }
};

/// Gradient of the batch-mean loss with respect to theta.
std::vector<double> gradients(const Model& model, const Batch& batch, Loss loss);

/// Mean batch loss matching gradients().
double batch_loss(const Model& model, const Batch& batch, Loss loss);

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Unset: full batch when the dataset has at most 2048 rows, else 2048.
  std::optional<std::size_t> batch_size;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Training objective over one dataset: mean over rows of
///   soft_weight * KL(soft_target || model) + (1 - soft_weight) * CE(model, label).
/// Terms with zero weight are skipped entirely, so soft_weight = 0 is plain
/// cross-entropy training and soft_weight = 1 is pure distillation.
struct Objective {
  const Dataset* data = nullptr;
  std::span<const double> soft_targets;  // data->size() x K, may be empty when soft_weight == 0
  double soft_weight = 0.0;
};

struct FitResult {
  Model model;
  std::vector<double> loss_history;  // mean loss per epoch, before each epoch's updates
};

/// SGD with momentum and L2 weight decay starting from `init`. Throws
/// TrainingDiverged if the loss becomes non-finite.
FitResult fit(Model init, const Objective& objective, const TrainConfig& cfg);

/// Initialize from cfg.seed and minimize cross-entropy on `data`.
Model train(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg);

/// Fraction of rows classified correctly by `predictor` (any callable
/// span<const double> -> 0-based label).
template <typename Predictor>
  requires std::invocable<Predictor&, std::span<const double>>
double accuracy(const Dataset& data, Predictor&& predictor);

double accuracy(const Dataset& data, const Model& model);

/// L2 distance between parameter vectors of equal length.
double theta_distance(const Model& a, const Model& b);
double theta_norm(const Model& m);

}  // namespace wmark

#include "wmark/error.hpp"

template <typename Predictor>
  requires std::invocable<Predictor&, std::span<const double>>
double wmark::accuracy(const Dataset& data, Predictor&& predictor) {
  if (data.empty()) throw InputError("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predictor(data.row(i)) == data.label(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}
