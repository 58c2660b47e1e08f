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
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wmark/attacks.hpp"
#include "wmark/data.hpp"
#include "wmark/model.hpp"
#include "wmark/stats.hpp"
#include "wmark/watermark.hpp"

namespace wmark {

// ---------------------------------------------------------------------------
// Configuration

struct BlobGenerator {
  int classes = 4;
  std::size_t dim = 2;
  std::size_t n_per_class = 200;
  double spread = 2.5;
};

struct DatasetBlock {
  std::optional<BlobGenerator> generator;
  std::optional<std::filesystem::path> csv;
  std::optional<int> num_classes;  // csv only
  double holdout_fraction = 0.3;
};

struct ModelBlock {
  std::vector<std::size_t> hidden_layers = {32, 32};
  Activation activation = Activation::tanh;
};

struct SourceBlock {
  ModelBlock model;
  TrainConfig train;
  bool train_seed_given = false;
};

struct BallBlock {
  bool relative = true;
  double delta = 0.15;
  double tau = 1.0;
  std::optional<double> sigma;
  std::size_t m = 16;
  std::size_t n = 10;
  std::optional<std::size_t> max_candidates;
  double alpha = 0.05;
};

/// Where an attack's dataset comes from.
struct SurrogateDataSource {
  enum class Kind { train, holdout, generator, csv } kind = Kind::train;
  BlobGenerator generator;
  std::filesystem::path csv;
};

struct AttackBlock {
  AttackKind kind = AttackKind::soft_label;
  std::optional<ModelBlock> model;  // defaults to the source architecture
  TrainConfig train;                // defaults to the source schedule
  std::optional<double> gamma;
  std::optional<double> prune_ratio;
  SurrogateDataSource surrogate_data;
};

struct IndependentBlock {
  std::size_t count = 4;
  double subset_fraction = 0.5;
  std::optional<ModelBlock> model;
  TrainConfig train;
};

struct IntegrityBlock {
  std::size_t complements = 1;
  double subset_fraction = 0.5;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  DatasetBlock dataset;
  SourceBlock source;
  BallBlock ball;
  std::vector<AttackBlock> attacks;
  std::size_t repeats = 3;
  IndependentBlock independents;
  IntegrityBlock integrity;
};

/// Parses a configuration tree. Unknown keys, wrong types and invalid values
/// raise ConfigError naming the offending key path. Relative CSV paths are
/// resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Built-in desk-scale defaults (what an empty "{}" config yields).
ExperimentConfig default_config();

// ---------------------------------------------------------------------------
// Stages

/// A stage failure; the message is prefixed with the stage name.
class ExperimentError : public Error {
 public:
  ExperimentError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Stream tags for derive_seed(config.seed, tag, index).
inline constexpr std::uint64_t kSeedData = 1;
inline constexpr std::uint64_t kSeedSplit = 2;
inline constexpr std::uint64_t kSeedSource = 3;
inline constexpr std::uint64_t kSeedVerify = 4;
inline constexpr std::uint64_t kSeedSurrogateData = 5;
inline constexpr std::uint64_t kSeedAttackBase = 1000;  // + attack index, repeat
inline constexpr std::uint64_t kSeedIndependent = 2000;
inline constexpr std::uint64_t kSeedComplement = 3000;

struct PreparedData {
  Dataset train;
  Dataset holdout;
};

PreparedData prepare_data(const ExperimentConfig& cfg);
ModelSpec make_spec(const ModelBlock& block, const Dataset& data);
TrainConfig source_train_config(const ExperimentConfig& cfg);
Model train_source(const ExperimentConfig& cfg, const Dataset& train);
ProxyBall build_ball(const ExperimentConfig& cfg, const Model& source, const Dataset& train);
VerifyConfig verify_config(const ExperimentConfig& cfg);

/// Seed of repeat `repeat` of attack `index`.
std::uint64_t attack_seed(const ExperimentConfig& cfg, std::size_t index, std::size_t repeat);

AttackConfig build_attack_config(const ExperimentConfig& cfg, std::size_t index,
                                 std::size_t repeat, const Model& source,
                                 const PreparedData& data);

/// Sorted row indices of a seeded random subset of floor(fraction * n) rows;
/// every row when fraction == 1. Throws InputError if the subset is empty.
std::vector<std::size_t> independent_subset(std::size_t n, double subset_fraction,
                                            std::uint64_t seed);

/// Trains `spec` on a seeded random subset of floor(fraction * N) rows
/// (kept in original order); base.seed is replaced by `seed`.
Model train_independent(const ModelSpec& spec, const Dataset& data, double subset_fraction,
                        std::uint64_t seed, TrainConfig base = {});

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string role;    // source | surrogate | independent
  std::string attack;  // attack kind, "-" otherwise
  std::uint64_t seed = 0;
  double clean_acc = 0.0;
  double trigger_acc = 0.0;
  std::string verdict;
  std::filesystem::path checkpoint;    // relative to the output directory
  std::optional<double> prune_ratio;   // prune rows only
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  VerificationStats acceptance;
  TransferabilityBound bound;
  double baseline = 0.0;
  std::string baseline_source;
  double threshold = 0.0;
  bool degenerate_rule = false;
  double wall_seconds = 0.0;
};

/// Runs the whole pipeline and writes every artifact under cfg.output_dir.
/// Does not write report.csv / summary.txt; see emit_report.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// report.csv, summary.txt and plotdata.csv.
void emit_report(const ExperimentReport& report, const std::filesystem::path& output_dir);

std::string report_csv(const ExperimentReport& report);
std::string summary_text(const ExperimentReport& report);
std::string plotdata_csv(const ExperimentReport& report);

struct IntegrityReport {
  VerificationStats plain;
  VerificationStats integrity;
  std::size_t complements = 0;
  /// Complement trigger accuracies on the plain and integrity sets.
  std::vector<double> complement_acc_plain;
  std::vector<double> complement_acc_integrity;
};

/// Trains the source and cfg.integrity.complements independent complement
/// models, then builds the plain and integrity-enhanced trigger sets from the
/// same candidate stream.
IntegrityReport run_integrity(const ExperimentConfig& cfg);
void emit_integrity(const IntegrityReport& report, const std::filesystem::path& output_dir);

/// Formats with %.17g.
std::string format_double(double v);

}  // namespace wmark
