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

#include "wmark/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "wmark/kernels.hpp"

namespace wmark {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

AgreementTrialResult agreement_trials(std::span<const double> x, int y_star,
                                      std::span<const Model> proxies) {
  if (proxies.empty()) throw InputError("agreement_trials: no proxies");
  AgreementTrialResult r;
  r.m = proxies.size();
  r.per_proxy.reserve(r.m);
  for (const Model& p : proxies) {
    const bool hit = predict(p, x) == y_star;
    r.per_proxy.push_back(hit);
    r.t += hit;
  }
  return r;
}

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw InputError("incomplete_beta: a, b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double beta_quantile(double q, double a, double b) {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("beta_quantile: q outside [0, 1]");
  double lo = 0.0;
  double hi = 1.0;
  // I_x is monotone in x; stop when the bracket is at double resolution.
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (incomplete_beta(mid, a, b) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double clopper_pearson_lower(std::size_t t, std::size_t m, double alpha) {
  if (m == 0) throw InputError("clopper_pearson_lower: m must be at least 1");
  if (t > m) throw InputError("clopper_pearson_lower: t exceeds m");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InputError("clopper_pearson_lower: alpha must lie in (0, 1)");
  if (t == 0) return 0.0;
  return beta_quantile(alpha / 2.0, static_cast<double>(t), static_cast<double>(m - t + 1));
}

double lemma_bound(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("lemma_bound: alpha must lie in (0, 1)");
  return std::pow(1.0 - alpha, static_cast<double>(n));
}

TransferabilityBound transferability_bound(std::size_t m, std::size_t n, double alpha) {
  return {clopper_pearson_lower(m, m, alpha), alpha, lemma_bound(n, alpha), m, n};
}

double trigger_accuracy(const TriggerSet& set, const Model& model) {
  if (set.samples.empty()) throw InputError("trigger_accuracy: empty trigger set");
  const auto feats = trigger_features(set);
  const auto labels = trigger_labels(set);
  const std::size_t hits =
      kernels::count_correct(model, {feats, model.input_dim()}, labels);
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::stolen: return "stolen";
    case Verdict::independent: return "independent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

VerdictResult ownership_verdict(double trigger_acc, double baseline_acc, double p_hat) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(trigger_acc) || !in_unit(baseline_acc) || !in_unit(p_hat))
    throw InputError("ownership_verdict: arguments must lie in [0, 1]");
  if (baseline_acc >= p_hat)
    throw DegenerateRule("ownership_verdict: baseline accuracy " + std::to_string(baseline_acc) +
                         " is not below the lower bound " + std::to_string(p_hat));
  VerdictResult r;
  r.threshold = 0.5 * (baseline_acc + p_hat);
  if (trigger_acc >= r.threshold)
    r.verdict = Verdict::stolen;
  else if (trigger_acc <= baseline_acc)
    r.verdict = Verdict::independent;
  else
    r.verdict = Verdict::inconclusive;
  return r;
}

VerificationReport make_verification_report(std::string suspect_name, const Model& suspect,
                                            const TriggerSet& set, const Dataset* clean_data,
                                            double baseline_acc, std::string baseline_source,
                                            double alpha) {
  VerificationReport r;
  r.suspect = std::move(suspect_name);
  r.trigger_accuracy = trigger_accuracy(set, suspect);
  r.clean_accuracy = clean_data ? accuracy(*clean_data, suspect)
                                : std::numeric_limits<double>::quiet_NaN();
  r.bound = transferability_bound(set.ball.m, set.size(), alpha);
  r.baseline_accuracy = baseline_acc;
  r.baseline_source = std::move(baseline_source);
  const VerdictResult v = ownership_verdict(r.trigger_accuracy, baseline_acc, r.bound.p_hat);
  r.verdict = v.verdict;
  r.threshold_used = v.threshold;
  return r;
}

std::string report_to_json(const VerificationReport& r) {
  nlohmann::ordered_json j;
  j["suspect"] = r.suspect;
  j["trigger_accuracy"] = r.trigger_accuracy;
  j["clean_accuracy"] = std::isfinite(r.clean_accuracy) ? nlohmann::ordered_json(r.clean_accuracy)
                                                        : nlohmann::ordered_json(nullptr);
  j["bound"] = {{"p_hat", r.bound.p_hat}, {"alpha", r.bound.alpha}, {"phi", r.bound.phi},
                {"m", r.bound.m}, {"n", r.bound.n}};
  j["baseline_accuracy"] = r.baseline_accuracy;
  j["baseline_source"] = r.baseline_source;
  j["rule"] = r.rule;
  j["threshold_used"] = r.threshold_used;
  j["verdict"] = std::string(to_string(r.verdict));
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "suspect,trigger_acc,clean_acc,p_hat,alpha,phi,m,n,baseline_acc,baseline_source,"
         "threshold,verdict";
}

std::string report_csv_row(const VerificationReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%.17g,%s,%.17g,%s",
                r.suspect.c_str(), r.trigger_accuracy, r.clean_accuracy, r.bound.p_hat,
                r.bound.alpha, r.bound.phi, r.bound.m, r.bound.n, r.baseline_accuracy,
                r.baseline_source.c_str(), r.threshold_used,
                std::string(to_string(r.verdict)).c_str());
  return buf;
}

}  // namespace wmark
