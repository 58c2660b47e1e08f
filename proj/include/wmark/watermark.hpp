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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmark/data.hpp"
#include "wmark/error.hpp"
#include "wmark/model.hpp"
#include "wmark/rng.hpp"

namespace wmark {

/// A mixture x* = lambda * x_a + (1 - lambda) * x_b of two hold-out rows from
/// different classes that the source assigns to a third class y*.
struct TriggerSample {
  std::vector<double> x_star;
  int y_star = 0;  // 0-based
  std::size_t parent_a = 0;
  std::size_t parent_b = 0;
  double lambda = 0.5;

  bool operator==(const TriggerSample&) const = default;
};

/// Proxy-ball parameters as recorded alongside a trigger set.
struct BallParams {
  double delta = 0.0;
  double tau = 1.0;
  double sigma = 0.0;
  std::size_t m = 0;

  bool operator==(const BallParams&) const = default;
};

struct VerificationStats {
  std::size_t candidates_consumed = 0;
  std::size_t accepted = 0;
  double acceptance_rate = 0.0;
  /// Source accuracy on the accepted samples; 1 by construction.
  double trigger_accuracy = 0.0;

  bool operator==(const VerificationStats&) const = default;
};

struct TriggerSet {
  std::vector<TriggerSample> samples;
  std::string source_fingerprint;
  BallParams ball;
  std::uint64_t seed = 0;  // VerifyConfig::seed the set was built with
  VerificationStats stats;

  std::size_t size() const noexcept { return samples.size(); }
  bool operator==(const TriggerSet&) const = default;
};

/// The set of models within L2 distance `delta` of the source parameters
/// whose accuracy on `reference` differs from the source's by at most `tau`.
struct ProxyBall {
  Model source;
  double delta = 0.0;
  double tau = 1.0;
  double sigma = 1.0;
  std::optional<Dataset> reference;  // required when tau < 1

  void validate() const;
};

/// Ball with an absolute radius; sigma defaults to delta / sqrt(dim) so the
/// expected noise norm is about delta.
ProxyBall make_ball(Model source, double delta, double tau = 1.0,
                    std::optional<double> sigma = std::nullopt,
                    std::optional<Dataset> reference = std::nullopt);

/// Ball with radius `relative_delta * ||theta(source)||`.
ProxyBall make_relative_ball(Model source, double relative_delta, double tau = 1.0,
                             std::optional<double> sigma = std::nullopt,
                             std::optional<Dataset> reference = std::nullopt);

class NoCandidateFound : public Error {
 public:
  using Error::Error;
};

class BallTooTight : public Error {
 public:
  using Error::Error;
};

/// Verification ran out of candidates; `partial` holds what was accepted.
class InsufficientTransferability : public Error {
 public:
  InsufficientTransferability(const std::string& what, TriggerSet partial)
      : Error(what), partial(std::move(partial)) {}
  TriggerSet partial;
};

inline constexpr double kLambdaMargin = 1e-6;

/// Draws hold-out pairs until a mixture lands in a third class of `source`.
/// Throws NoCandidateFound after `max_attempts` pair draws.
TriggerSample trigger_candidate(const Dataset& holdout, const Model& source,
                                Rng& rng, std::size_t max_attempts = 20000);

/// theta(source) + Delta with Delta ~ N(0, sigma^2 I) rescaled onto the
/// sphere of radius delta when it falls outside. With tau < 1 the draw is
/// repeated until the accuracy gap on the reference set is within tau;
/// throws BallTooTight after 1000 consecutive rejections.
Model sample_proxy(const ProxyBall& ball, Rng& rng);

/// m proxies drawn in sequence from Rng(seed); a prefix of a longer draw
/// with the same seed.
std::vector<Model> sample_proxies(const ProxyBall& ball, std::size_t m,
                                  std::uint64_t seed);

struct VerifyConfig {
  std::size_t m = 16;
  std::size_t n = 10;
  /// Unset: 200 * n.
  std::optional<std::size_t> max_candidates;
  std::uint64_t seed = 0;
  /// Draw fresh proxies for each candidate instead of once per run.
  bool resample_per_candidate = false;

  std::size_t candidate_budget() const { return max_candidates.value_or(200 * n); }
  void validate() const;
};

/// Seeds of the candidate and proxy streams used by verification.
std::uint64_t candidate_stream_seed(const VerifyConfig& cfg);
std::uint64_t proxy_stream_seed(const VerifyConfig& cfg);

/// The candidate stream verification consumes: the first `count` outputs of
/// trigger_candidate under cfg's candidate seed.
std::vector<TriggerSample> candidate_stream(const Dataset& holdout, const Model& source,
                                            const VerifyConfig& cfg, std::size_t count);

/// Accepts candidates on which every one of m proxies, sampled once up front,
/// predicts y*. Returns exactly cfg.n samples in draw order or throws
/// InsufficientTransferability.
TriggerSet verify_trigger_set(const Dataset& holdout, const Model& source,
                              const ProxyBall& ball, const VerifyConfig& cfg);

/// As verify_trigger_set, additionally requiring every complement model to
/// predict something other than y*. Complements of the source architecture
/// must lie outside the ball (InputError otherwise).
TriggerSet verify_trigger_set_integrity(const Dataset& holdout, const Model& source,
                                        const ProxyBall& ball,
                                        std::span<const Model> complements,
                                        const VerifyConfig& cfg);

/// True iff x* is still the lambda-mixture of its parents (to 1e-12) and the
/// model still predicts y* there.
bool recompute_and_check(const TriggerSample& sample, const Dataset& holdout,
                         const Model& model);

/// Rows x* of the set, row-major.
std::vector<double> trigger_features(const TriggerSet& set);
std::vector<int> trigger_labels(const TriggerSet& set);

}  // namespace wmark
