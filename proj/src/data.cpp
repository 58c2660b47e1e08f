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

#include "wmark/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "wmark/error.hpp"
#include "wmark/rng.hpp"

namespace wmark {

Dataset::Dataset(std::vector<double> features, std::vector<int> labels,
                 std::size_t dim, int num_classes)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      dim_(dim),
      num_classes_(num_classes) {
  if (labels_.empty()) throw InputError("dataset: no rows");
  if (dim_ == 0) throw InputError("dataset: dimension must be positive");
  if (features_.size() != labels_.size() * dim_)
    throw InputError("dataset: feature matrix is not N x d");
  if (num_classes_ < 1) throw InputError("dataset: num_classes must be positive");
  for (double v : features_)
    if (!std::isfinite(v)) throw InputError("dataset: non-finite feature");
  for (int y : labels_)
    if (y < 0 || y >= num_classes_)
      throw InputError("dataset: label " + std::to_string(y + 1) +
                       " outside [1, " + std::to_string(num_classes_) + "]");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> f;
  std::vector<int> y;
  f.reserve(indices.size() * dim_);
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InputError("dataset: subset index out of range");
    auto r = row(i);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[i]);
  }
  return Dataset(std::move(f), std::move(y), dim_, num_classes_);
}

Dataset Dataset::relabeled(std::vector<int> labels) const {
  return Dataset(features_, std::move(labels), dim_, num_classes_);
}

int Dataset::classes_present() const {
  return static_cast<int>(std::set<int>(labels_.begin(), labels_.end()).size());
}

std::vector<double> blob_centroid(int c, int num_classes, std::size_t dim) {
  std::vector<double> centroid(dim, 0.0);
  const double angle = 2.0 * std::numbers::pi * c / num_classes;
  centroid[0] = 3.0 * std::cos(angle);
  centroid[1] = 3.0 * std::sin(angle);
  return centroid;
}

Dataset make_blobs(int num_classes, std::size_t dim, std::size_t n_per_class,
                   double spread, std::uint64_t seed) {
  if (num_classes < 3) throw InputError("make_blobs: need at least 3 classes");
  if (dim < 2) throw InputError("make_blobs: need at least 2 dimensions");
  if (n_per_class == 0) throw InputError("make_blobs: n_per_class must be positive");
  if (!(spread >= 0.0) || !std::isfinite(spread))
    throw InputError("make_blobs: spread must be finite and non-negative");

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> features;
  std::vector<int> labels;
  features.reserve(num_classes * n_per_class * dim);
  for (int c = 0; c < num_classes; ++c) {
    const auto centroid = blob_centroid(c, num_classes, dim);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t j = 0; j < dim; ++j)
        features.push_back(centroid[j] + spread * noise(rng));
      labels.push_back(c);
    }
  }
  return Dataset(std::move(features), std::move(labels), dim, num_classes);
}

SplitResult split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0))
    throw InputError("split: holdout_fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.label(i)].push_back(i);

  Rng rng(spec.seed);
  SplitResult out;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::llround(spec.holdout_fraction * static_cast<double>(members.size())));
    out.holdout_indices.insert(out.holdout_indices.end(), members.begin(),
                               members.begin() + take);
    out.train_indices.insert(out.train_indices.end(), members.begin() + take,
                             members.end());
  }
  if (out.train_indices.empty() || out.holdout_indices.empty())
    throw InputError("split: holdout_fraction leaves an empty part");
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.holdout_indices.begin(), out.holdout_indices.end());
  out.train = data.subset(out.train_indices);
  out.holdout = data.subset(out.holdout_indices);
  return out;
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
  return v;
}

int parse_label(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("non-integer label '" + std::string(cell) + "'", line);
  if (v < 1) throw ParseError("label " + std::to_string(v) + " < 1", line);
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header", 1);
  const auto header = split_cells(line);
  if (header.size() < 2 || trim(header[0]) != "y")
    throw ParseError(path.string() + ": header must be y,x1,...,xd", 1);
  const std::size_t dim = header.size() - 1;

  std::vector<double> features;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != dim + 1)
      throw ParseError(path.string() + ": expected " + std::to_string(dim + 1) +
                           " cells, got " + std::to_string(cells.size()),
                       lineno);
    labels.push_back(parse_label(cells[0], lineno) - 1);
    for (std::size_t j = 1; j <= dim; ++j) features.push_back(parse_double(cells[j], lineno));
  }
  if (labels.empty()) throw ParseError(path.string() + ": no rows");
  const int inferred = *std::max_element(labels.begin(), labels.end()) + 1;
  const int k = num_classes.value_or(inferred);
  if (k < inferred)
    throw ParseError(path.string() + ": label exceeds num_classes override");
  return Dataset(std::move(features), std::move(labels), dim, k);
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << 'y';
  for (std::size_t j = 1; j <= data.dim(); ++j) out << ",x" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.label(i) + 1;
    for (double v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace wmark
