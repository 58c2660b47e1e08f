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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace wmark {

/// Labeled feature matrix. Labels are 0-based in memory; files use 1-based.
class Dataset {
 public:
  Dataset() = default;
  /// Throws InputError on empty data, non-finite features or labels outside
  /// [0, num_classes).
  Dataset(std::vector<double> features, std::vector<int> labels,
          std::size_t dim, int num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  int num_classes() const noexcept { return num_classes_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  /// Rows at `indices`, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Same features with replacement labels.
  Dataset relabeled(std::vector<int> labels) const;

  /// Number of distinct labels actually present.
  int classes_present() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<double> features_;
  std::vector<int> labels_;
  std::size_t dim_ = 0;
  int num_classes_ = 0;
};

/// Gaussian blobs: class c centered at radius 3 on a regular K-gon in the
/// first two coordinates (remaining coordinates 0), isotropic noise of std
/// `spread`. Rows are grouped by class.
Dataset make_blobs(int num_classes, std::size_t dim, std::size_t n_per_class,
                   double spread, std::uint64_t seed);

/// Centroid of class `c` used by make_blobs.
std::vector<double> blob_centroid(int c, int num_classes, std::size_t dim);

struct SplitSpec {
  double holdout_fraction = 0.3;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset holdout;
  std::vector<std::size_t> train_indices;    // ascending
  std::vector<std::size_t> holdout_indices;  // ascending
};

/// Stratified split: each class contributes round(fraction * n_c) rows to the
/// hold-out part.
SplitResult split(const Dataset& data, const SplitSpec& spec);

/// CSV with header "y,x1,...,xd" and 1-based labels. K is the largest label
/// unless `num_classes` is given.
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<int> num_classes = std::nullopt);

/// Writes 17 significant digits so load_csv reproduces every value exactly.
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace wmark
