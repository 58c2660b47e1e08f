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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmark/error.hpp"
#include "wmark/model.hpp"
#include "wmark/watermark.hpp"

namespace wmark {

/// Outcome of asking m proxies whether they reproduce y* at one input.
struct AgreementTrialResult {
  std::size_t t = 0;  // successes
  std::size_t m = 0;  // trials
  std::vector<bool> per_proxy;
};

AgreementTrialResult agreement_trials(std::span<const double> x, int y_star,
                                      std::span<const Model> proxies);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double x, double a, double b);

/// q-quantile of Beta(a, b) by bisection on incomplete_beta.
double beta_quantile(double q, double a, double b);

/// One-sided Clopper-Pearson lower bound on a success probability after t
/// successes in m trials: the alpha/2 quantile of Beta(t, m - t + 1), or 0
/// when t = 0.
double clopper_pearson_lower(std::size_t t, std::size_t m, double alpha);

/// (1 - alpha)^n: probability that the per-sample bounds hold for all n
/// samples of a verified set simultaneously.
double lemma_bound(std::size_t n, double alpha);

struct TransferabilityBound {
  double p_hat = 0.0;
  double alpha = 0.05;
  double phi = 1.0;
  std::size_t m = 0;
  std::size_t n = 0;
};

/// Bound for a verified set of size n built with m unanimous proxies.
TransferabilityBound transferability_bound(std::size_t m, std::size_t n, double alpha);

/// Fraction of trigger samples on which `model` predicts y*.
double trigger_accuracy(const TriggerSet& set, const Model& model);

enum class Verdict { stolen, independent, inconclusive };
std::string_view to_string(Verdict v);

class DegenerateRule : public Error {
 public:
  using Error::Error;
};

struct VerdictResult {
  Verdict verdict = Verdict::inconclusive;
  double threshold = 0.0;
};

/// Midpoint rule: threshold = (baseline + p_hat) / 2; stolen at or above the
/// threshold, independent at or below the baseline, inconclusive between.
/// Throws DegenerateRule when baseline >= p_hat.
VerdictResult ownership_verdict(double trigger_acc, double baseline_acc, double p_hat);

struct VerificationReport {
  std::string suspect;
  double trigger_accuracy = 0.0;
  double clean_accuracy = 0.0;
  TransferabilityBound bound;
  double baseline_accuracy = 0.0;
  std::string baseline_source;  // "independent-models" or "chance"
  Verdict verdict = Verdict::inconclusive;
  double threshold_used = 0.0;
  std::string rule = "midpoint(baseline, p_hat)";
};

/// Evaluates `suspect` against `set` and applies ownership_verdict.
VerificationReport make_verification_report(std::string suspect_name, const Model& suspect,
                                            const TriggerSet& set, const Dataset* clean_data,
                                            double baseline_acc, std::string baseline_source,
                                            double alpha);

std::string report_to_json(const VerificationReport& r);
std::string report_csv_header();
std::string report_csv_row(const VerificationReport& r);

}  // namespace wmark
