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

#include "wmark/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wmark/checkpoint.hpp"
#include "wmark/kernels.hpp"

namespace wmark {

namespace {

constexpr std::size_t kMaxConsecutiveRejections = 1000;
constexpr std::size_t kCandidateBatch = 64;
constexpr std::uint64_t kCandidateStreamTag = 0xC0FFEE01;
constexpr std::uint64_t kProxyStreamTag = 0xC0FFEE02;

void check_holdout(const Dataset& holdout, const Model& source) {
  if (holdout.empty()) throw InputError("trigger: empty hold-out set");
  if (holdout.dim() != source.input_dim())
    throw InputError("trigger: hold-out dimension does not match source model");
  if (holdout.num_classes() > source.num_classes())
    throw InputError("trigger: hold-out has more classes than the source model");
}

std::vector<double> mix(std::span<const double> a, std::span<const double> b,
                        double lambda) {
  std::vector<double> x(a.size());
  for (std::size_t j = 0; j < a.size(); ++j)
    x[j] = lambda * a[j] + (1.0 - lambda) * b[j];
  return x;
}

double gaussian_norm_draw(std::vector<double>& delta, double sigma, Rng& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  double sq = 0.0;
  for (double& d : delta) {
    d = noise(rng);
    sq += d * d;
  }
  return std::sqrt(sq);
}

TriggerSet run_verification(const Dataset& holdout, const Model& source,
                            const ProxyBall& ball, std::span<const Model> complements,
                            const VerifyConfig& cfg) {
  cfg.validate();
  ball.validate();
  check_holdout(holdout, source);
  if (ball.source.theta() != source.theta() || ball.source.spec() != source.spec())
    throw InputError("verify: ball is not centered on the source model");

  const std::size_t budget = cfg.candidate_budget();
  const std::size_t attempt_cap = 10 * budget;
  Rng cand_rng(candidate_stream_seed(cfg));
  Rng proxy_rng(proxy_stream_seed(cfg));

  std::vector<Model> proxies;
  if (!cfg.resample_per_candidate) {
    proxies.reserve(cfg.m);
    for (std::size_t i = 0; i < cfg.m; ++i) proxies.push_back(sample_proxy(ball, proxy_rng));
  }

  TriggerSet out;
  out.source_fingerprint = fingerprint(source);
  out.ball = {ball.delta, ball.tau, ball.sigma, cfg.m};
  out.seed = cfg.seed;

  const auto m = static_cast<int>(cfg.m);
  std::size_t consumed = 0;
  while (out.samples.size() < cfg.n && consumed < budget) {
    const std::size_t batch = std::min(kCandidateBatch, budget - consumed);
    std::vector<TriggerSample> cands;
    cands.reserve(batch);
    for (std::size_t j = 0; j < batch; ++j)
      cands.push_back(trigger_candidate(holdout, source, cand_rng, attempt_cap));

    std::vector<double> rows_data;
    std::vector<int> labels;
    for (const auto& c : cands) {
      rows_data.insert(rows_data.end(), c.x_star.begin(), c.x_star.end());
      labels.push_back(c.y_star);
    }
    const kernels::Rows rows{rows_data, source.input_dim()};

    std::vector<int> agree;
    if (cfg.resample_per_candidate) {
      agree.resize(batch);
      for (std::size_t j = 0; j < batch; ++j) {
        std::vector<Model> fresh;
        fresh.reserve(cfg.m);
        for (std::size_t i = 0; i < cfg.m; ++i) fresh.push_back(sample_proxy(ball, proxy_rng));
        agree[j] = kernels::agreement_counts(fresh, {rows.row(j), rows.dim},
                                             std::span<const int>(&labels[j], 1))[0];
      }
    } else {
      agree = kernels::agreement_counts(proxies, rows, labels);
    }
    std::vector<int> comp_agree(batch, 0);
    if (!complements.empty()) comp_agree = kernels::agreement_counts(complements, rows, labels);

    // Accept in draw order; the merge never depends on kernel scheduling.
    for (std::size_t j = 0; j < batch && out.samples.size() < cfg.n; ++j) {
      ++consumed;
      if (agree[j] == m && comp_agree[j] == 0) out.samples.push_back(std::move(cands[j]));
    }
  }

  out.stats.candidates_consumed = consumed;
  out.stats.accepted = out.samples.size();
  out.stats.acceptance_rate =
      consumed ? static_cast<double>(out.samples.size()) / static_cast<double>(consumed) : 0.0;
  if (!out.samples.empty()) {
    const auto feats = trigger_features(out);
    const auto labels = trigger_labels(out);
    out.stats.trigger_accuracy =
        static_cast<double>(kernels::count_correct(source, {feats, source.input_dim()}, labels)) /
        static_cast<double>(out.samples.size());
  }
  if (out.samples.size() < cfg.n)
    throw InsufficientTransferability(
        "verify: accepted " + std::to_string(out.samples.size()) + " of " +
            std::to_string(cfg.n) + " samples after " + std::to_string(consumed) +
            " candidates",
        std::move(out));
  return out;
}

}  // namespace

void ProxyBall::validate() const {
  if (!std::isfinite(delta) || delta < 0.0)
    throw InputError("ball: delta must be finite and non-negative");
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError("ball: tau must lie in (0, 1]");
  if (!std::isfinite(sigma) || sigma <= 0.0)
    throw InputError("ball: sigma must be finite and positive");
  if (tau < 1.0 && !reference)
    throw InputError("ball: tau < 1 needs reference data");
}

ProxyBall make_ball(Model source, double delta, double tau,
                    std::optional<double> sigma, std::optional<Dataset> reference) {
  const double dim = static_cast<double>(source.theta().size());
  double s = sigma.value_or(delta / std::sqrt(dim));
  if (!sigma && s == 0.0) s = 1.0;  // delta == 0: the noise is discarded anyway
  ProxyBall ball{std::move(source), delta, tau, s, std::move(reference)};
  ball.validate();
  return ball;
}

ProxyBall make_relative_ball(Model source, double relative_delta, double tau,
                             std::optional<double> sigma, std::optional<Dataset> reference) {
  const double delta = relative_delta * theta_norm(source);
  return make_ball(std::move(source), delta, tau, sigma, std::move(reference));
}

TriggerSample trigger_candidate(const Dataset& holdout, const Model& source, Rng& rng,
                                std::size_t max_attempts) {
  check_holdout(holdout, source);
  std::uniform_int_distribution<std::size_t> pick(0, holdout.size() - 1);
  std::uniform_real_distribution<double> lam(kLambdaMargin, 1.0 - kLambdaMargin);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    const int ya = holdout.label(a);
    const int yb = holdout.label(b);
    if (ya == yb) continue;
    const double lambda = lam(rng);
    std::vector<double> x = mix(holdout.row(a), holdout.row(b), lambda);
    const int y = predict(source, x);
    if (y != ya && y != yb) return {std::move(x), y, a, b, lambda};
  }
  throw NoCandidateFound("trigger: no third-class mixture after " +
                         std::to_string(max_attempts) + " pair draws");
}

Model sample_proxy(const ProxyBall& ball, Rng& rng) {
  if (ball.delta == 0.0) return ball.source;
  const auto& theta = ball.source.theta();
  const bool constrained = ball.tau < 1.0;
  const double source_acc = constrained ? accuracy(*ball.reference, ball.source) : 0.0;
  std::vector<double> delta(theta.size());
  for (std::size_t tries = 0; tries < kMaxConsecutiveRejections; ++tries) {
    const double norm = gaussian_norm_draw(delta, ball.sigma, rng);
    const double scale = norm > ball.delta ? ball.delta / norm : 1.0;
    std::vector<double> p(theta.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = theta[i] + scale * delta[i];
    Model proxy(ball.source.spec(), std::move(p));
    if (!constrained ||
        std::abs(accuracy(*ball.reference, proxy) - source_acc) <= ball.tau)
      return proxy;
  }
  throw BallTooTight("ball: 1000 consecutive proxies violated the accuracy gap tau");
}

std::vector<Model> sample_proxies(const ProxyBall& ball, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Model> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(sample_proxy(ball, rng));
  return out;
}

void VerifyConfig::validate() const {
  if (m == 0) throw InputError("verify: m must be at least 1");
  if (n == 0) throw InputError("verify: n must be at least 1");
  if (candidate_budget() < n) throw InputError("verify: max_candidates must be >= n");
}

std::uint64_t candidate_stream_seed(const VerifyConfig& cfg) {
  return derive_seed(cfg.seed, kCandidateStreamTag);
}

std::uint64_t proxy_stream_seed(const VerifyConfig& cfg) {
  return derive_seed(cfg.seed, kProxyStreamTag);
}

std::vector<TriggerSample> candidate_stream(const Dataset& holdout, const Model& source,
                                            const VerifyConfig& cfg, std::size_t count) {
  Rng rng(candidate_stream_seed(cfg));
  std::vector<TriggerSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(trigger_candidate(holdout, source, rng, 10 * cfg.candidate_budget()));
  return out;
}

TriggerSet verify_trigger_set(const Dataset& holdout, const Model& source,
                              const ProxyBall& ball, const VerifyConfig& cfg) {
  return run_verification(holdout, source, ball, {}, cfg);
}

TriggerSet verify_trigger_set_integrity(const Dataset& holdout, const Model& source,
                                        const ProxyBall& ball,
                                        std::span<const Model> complements,
                                        const VerifyConfig& cfg) {
  if (complements.empty()) throw InputError("integrity: no complement models");
  for (const Model& c : complements) {
    if (c.input_dim() != source.input_dim())
      throw InputError("integrity: complement input dimension differs from source");
    // Different architectures have no theta distance; they count as outside.
    if (c.spec() == source.spec() && theta_distance(c, source) <= ball.delta)
      throw InputError("integrity: complement model lies inside the proxy ball");
  }
  return run_verification(holdout, source, ball, complements, cfg);
}

bool recompute_and_check(const TriggerSample& sample, const Dataset& holdout,
                         const Model& model) {
  if (sample.parent_a >= holdout.size() || sample.parent_b >= holdout.size()) return false;
  if (sample.x_star.size() != holdout.dim() || holdout.dim() != model.input_dim()) return false;
  const auto x = mix(holdout.row(sample.parent_a), holdout.row(sample.parent_b), sample.lambda);
  for (std::size_t j = 0; j < x.size(); ++j)
    if (std::abs(x[j] - sample.x_star[j]) > 1e-12) return false;
  if (sample.y_star == holdout.label(sample.parent_a) ||
      sample.y_star == holdout.label(sample.parent_b))
    return false;
  return predict(model, sample.x_star) == sample.y_star;
}

std::vector<double> trigger_features(const TriggerSet& set) {
  std::vector<double> out;
  for (const auto& s : set.samples) out.insert(out.end(), s.x_star.begin(), s.x_star.end());
  return out;
}

std::vector<int> trigger_labels(const TriggerSet& set) {
  std::vector<int> out;
  out.reserve(set.size());
  for (const auto& s : set.samples) out.push_back(s.y_star);
  return out;
}

}  // namespace wmark
