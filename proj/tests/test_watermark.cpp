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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "test_support.hpp"
#include "wmark/attacks.hpp"
#include "wmark/error.hpp"
#include "wmark/stats.hpp"
#include "wmark/trigger_io.hpp"
#include "wmark/watermark.hpp"

using namespace wmark;
using wmark::testing::BlobPipeline;
using wmark::testing::constant_model;
using wmark::testing::linear_model;
using wmark::testing::make_pipeline;
using wmark::testing::TempDir;

namespace {

// Shared across cases; training it once keeps the suite fast.
const BlobPipeline& pipeline() {
  static const BlobPipeline p = make_pipeline(2, 150, 2.5, 100);
  return p;
}

VerifyConfig verify_cfg(std::size_t m, std::size_t n, std::uint64_t seed) {
  VerifyConfig vc;
  vc.m = m;
  vc.n = n;
  vc.seed = seed;
  return vc;
}

// Nearest-centroid classifier as a linear model: logit_k = c_k . x - |c_k|^2 / 2.
Model voronoi_model(const std::vector<std::array<double, 2>>& c) {
  std::vector<double> w, b;
  for (const auto& ck : c) {
    w.push_back(ck[0]);
    w.push_back(ck[1]);
    b.push_back(-0.5 * (ck[0] * ck[0] + ck[1] * ck[1]));
  }
  return linear_model(2, static_cast<int>(c.size()), w, b);
}

}  // namespace

TEST_SUITE("trigger candidates") {
  TEST_CASE("Voronoi model: the midpoint of two centroids lands in the third cell") {
    const std::vector<std::array<double, 2>> c = {{-1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}};
    Model f = voronoi_model(c);
    const std::vector<double> mid = {0.5 * c[0][0] + 0.5 * c[1][0], 0.0};
    // Direct dot products: the third logit is 0, the others -0.5.
    const double l0 = c[0][0] * mid[0] - 0.5, l1 = c[1][0] * mid[0] - 0.5, l2 = 0.0;
    REQUIRE(l2 > l0);
    REQUIRE(l2 > l1);
    CHECK(predict(f, mid) == 2);

    Dataset holdout({-1.0, 0.0, 1.0, 0.0}, {0, 1}, 2, 3);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      const TriggerSample s = trigger_candidate(holdout, f, rng);
      CHECK(s.y_star == 2);
      CHECK(s.parent_a != s.parent_b);
      // Cell 3 is |x| < 1/2, i.e. lambda in (1/4, 3/4).
      CHECK(s.lambda > 0.25);
      CHECK(s.lambda < 0.75);
      CHECK(recompute_and_check(s, holdout, f));
    }
  }

  TEST_CASE("accepted samples are third-class mixtures with interior lambda") {
    const auto& p = pipeline();
    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
      const TriggerSample s = trigger_candidate(p.holdout, p.source, rng);
      CHECK(s.lambda > 0.0);
      CHECK(s.lambda < 1.0);
      CHECK(s.y_star != p.holdout.label(s.parent_a));
      CHECK(s.y_star != p.holdout.label(s.parent_b));
      CHECK(s.y_star == predict(p.source, s.x_star));
      CHECK(recompute_and_check(s, p.holdout, p.source));
    }
  }

  TEST_CASE("single-class hold-out never yields a candidate") {
    Dataset holdout({0.0, 0.0, 1.0, 1.0, 2.0, 0.5}, {1, 1, 1}, 2, 3);
    Model f = Model::zeros({2, {3}, 3, Activation::relu});
    Rng rng(1);
    CHECK_THROWS_AS(trigger_candidate(holdout, f, rng, 500), NoCandidateFound);
  }

  TEST_CASE("recheck rejects a relabeled sample") {
    const auto& p = pipeline();
    Rng rng(5);
    TriggerSample s = trigger_candidate(p.holdout, p.source, rng);
    CHECK(recompute_and_check(s, p.holdout, p.source));
    s.y_star = p.holdout.label(s.parent_a);
    CHECK_FALSE(recompute_and_check(s, p.holdout, p.source));
  }
}

TEST_SUITE("proxy ball") {
  TEST_CASE("zero radius returns the source") {
    const auto& p = pipeline();
    const ProxyBall ball = make_ball(p.source, 0.0);
    Rng rng(1);
    CHECK(sample_proxy(ball, rng) == p.source);
  }

  TEST_CASE("tiny sigma keeps the source predictions") {
    const auto& p = pipeline();
    const ProxyBall ball = make_ball(p.source, 1.0, 1.0, 1e-12);
    Rng rng(2);
    const Model g = sample_proxy(ball, rng);
    CHECK(g != p.source);
    for (std::size_t i = 0; i < p.holdout.size(); ++i) {
      CHECK(predict(g, p.holdout.row(i)) == predict(p.source, p.holdout.row(i)));
    }
  }

  TEST_CASE("every proxy lies inside the ball") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.05);
    CHECK(ball.delta == doctest::Approx(0.05 * theta_norm(p.source)));
    const auto proxies = sample_proxies(ball, 1000, 7);
    for (const auto& g : proxies) CHECK(theta_distance(g, p.source) <= ball.delta * (1 + 1e-9));
  }

  TEST_CASE("unclipped perturbation norm follows the chi mean") {
    const auto& p = pipeline();
    const double dim = static_cast<double>(p.source.theta().size());
    const double delta = 0.05 * theta_norm(p.source);
    const double sigma = delta / (2 * std::sqrt(dim));
    const ProxyBall ball = make_ball(p.source, delta, 1.0, sigma);
    const auto proxies = sample_proxies(ball, 1000, 8);
    double mean = 0.0, worst = 0.0;
    for (const auto& g : proxies) {
      const double d = theta_distance(g, p.source);
      mean += d / 1000.0;
      worst = std::max(worst, d);
    }
    CHECK(worst <= delta * (1 + 1e-9));
    CHECK(std::abs(mean - sigma * std::sqrt(dim)) <= 0.1 * sigma * std::sqrt(dim));
  }

  TEST_CASE("default sigma is delta over root dim") {
    const auto& p = pipeline();
    const ProxyBall ball = make_ball(p.source, 2.0);
    CHECK(ball.sigma == doctest::Approx(2.0 / std::sqrt(static_cast<double>(p.source.theta().size()))));
  }

  TEST_CASE("proxy draws are prefix-consistent and seeded") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.1);
    const auto a = sample_proxies(ball, 5, 3);
    const auto b = sample_proxies(ball, 9, 3);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a[i] == b[i]);
    CHECK(sample_proxies(ball, 1, 4)[0] != a[0]);
  }

  TEST_CASE("accuracy-gap constraint") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.1, 0.05, std::nullopt, p.train);
    const double src = accuracy(p.train, p.source);
    for (const auto& g : sample_proxies(ball, 20, 5)) {
      CHECK(std::abs(accuracy(p.train, g) - src) <= 0.05);
    }
    const ProxyBall hopeless = make_relative_ball(p.source, 50.0, 1e-6, 50.0, p.train);
    Rng rng(1);
    CHECK_THROWS_AS(sample_proxy(hopeless, rng), BallTooTight);
  }

  TEST_CASE("invalid balls") {
    const auto& p = pipeline();
    CHECK_THROWS_AS(make_ball(p.source, -1.0), InputError);
    CHECK_THROWS_AS(make_ball(p.source, 1.0, 0.0), InputError);
    CHECK_THROWS_AS(make_ball(p.source, 1.0, 0.5), InputError);  // tau < 1 needs a reference
    CHECK_THROWS_AS(make_ball(p.source, 1.0, 1.0, -2.0), InputError);
  }
}

TEST_SUITE("verification") {
  TEST_CASE("zero radius accepts the first n candidates") {
    const auto& p = pipeline();
    const ProxyBall ball = make_ball(p.source, 0.0);
    const VerifyConfig vc = verify_cfg(16, 10, 11);
    const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, vc);
    CHECK(set.samples == candidate_stream(p.holdout, p.source, vc, 10));
    CHECK(set.stats.acceptance_rate == 1.0);
    CHECK(set.stats.candidates_consumed == 10);
  }

  TEST_CASE("source scores 1 on its verified set") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 12));
    CHECK(set.size() == 10);
    CHECK(trigger_accuracy(set, p.source) == 1.0);
    CHECK(set.stats.trigger_accuracy == 1.0);
    CHECK(trigger_accuracy(set, Model(p.source.spec(), p.source.theta())) == 1.0);
  }

  TEST_CASE("acceptance rate strictly between 0 and 1 on 3-class blobs") {
    Dataset all = make_blobs(3, 2, 200, 2.5, 21);
    SplitResult s = split(all, {0.3, 22});
    Model f = train({2, {32, 32}, 3, Activation::tanh}, s.train,
                    wmark::testing::desk_train_config(23, 100));
    const ProxyBall ball = make_relative_ball(f, 0.05);
    // The rate is near 0.93 here, so n = 10 often sees no rejection at all.
    VerifyConfig vc = verify_cfg(16, 200, 24);
    vc.max_candidates = 2000;
    const TriggerSet set = verify_trigger_set(s.holdout, f, ball, vc);
    CHECK(set.stats.acceptance_rate > 0.0);
    CHECK(set.stats.acceptance_rate < 1.0);
  }

  TEST_CASE("verified samples are sound on recheck") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    for (std::uint64_t seed = 30; seed < 35; ++seed) {
      const VerifyConfig vc = verify_cfg(16, 10, seed);
      const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, vc);
      const auto proxies = sample_proxies(ball, vc.m, proxy_stream_seed(vc));
      for (const auto& s : set.samples) {
        CHECK(recompute_and_check(s, p.holdout, p.source));
        CHECK(agreement_trials(s.x_star, s.y_star, proxies).t == vc.m);
      }
    }
  }

  TEST_CASE("verification is deterministic") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    const auto a = verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 40));
    CHECK(verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 40)) == a);
    CHECK(!(verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 41)) == a));
  }

  TEST_CASE("acceptance rate does not grow with m") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    double prev = 1.0;
    for (std::size_t m : {1u, 4u, 16u, 64u}) {
      VerifyConfig vc = verify_cfg(m, 600, 50);
      vc.max_candidates = 600;
      double rate = 0.0;
      try {
        rate = verify_trigger_set(p.holdout, p.source, ball, vc).stats.acceptance_rate;
      } catch (const InsufficientTransferability& e) {
        CHECK(e.partial.stats.candidates_consumed == 600);
        rate = e.partial.stats.acceptance_rate;
      }
      CHECK(rate <= prev + 0.02);
      prev = rate;
    }
  }

  TEST_CASE("exhausted budget reports the partial set") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    VerifyConfig vc = verify_cfg(16, 50, 60);
    vc.max_candidates = 50;
    try {
      verify_trigger_set(p.holdout, p.source, ball, vc);
      FAIL("expected insufficient transferability");
    } catch (const InsufficientTransferability& e) {
      CHECK(e.partial.size() < 50);
      CHECK(e.partial.stats.candidates_consumed == 50);
    }
  }

  TEST_CASE("per-candidate proxies still accept only agreed samples") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    VerifyConfig vc = verify_cfg(8, 5, 70);
    vc.resample_per_candidate = true;
    const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, vc);
    CHECK(set.size() == 5);
    CHECK(trigger_accuracy(set, p.source) == 1.0);
  }

  TEST_CASE("configuration and ball checks") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    CHECK_THROWS_AS(verify_trigger_set(p.holdout, p.source, ball, verify_cfg(0, 5, 1)), InputError);
    CHECK_THROWS_AS(verify_trigger_set(p.holdout, p.source, ball, verify_cfg(4, 0, 1)), InputError);
    VerifyConfig vc = verify_cfg(4, 10, 1);
    vc.max_candidates = 5;
    CHECK_THROWS_AS(verify_trigger_set(p.holdout, p.source, ball, vc), InputError);
    const ProxyBall other = make_relative_ball(wmark::testing::random_model(p.source.spec(), 3), 0.1);
    CHECK_THROWS_AS(verify_trigger_set(p.holdout, p.source, other, verify_cfg(4, 5, 1)), InputError);
  }
}

TEST_SUITE("integrity") {
  TEST_CASE("the source as its own complement is inside the ball") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    const std::vector<Model> comps = {p.source};
    CHECK_THROWS_AS(verify_trigger_set_integrity(p.holdout, p.source, ball, comps, verify_cfg(16, 5, 1)),
                    InputError);
  }

  TEST_CASE("a constant-class complement removes that class") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    for (int c = 0; c < 4; ++c) {
      const std::vector<Model> comps = {constant_model(p.source.spec(), c)};
      VerifyConfig vc = verify_cfg(16, 10, 80 + static_cast<std::uint64_t>(c));
      vc.max_candidates = 5000;
      const TriggerSet set = verify_trigger_set_integrity(p.holdout, p.source, ball, comps, vc);
      for (const auto& s : set.samples) CHECK(s.y_star != c);
      CHECK(trigger_accuracy(set, comps[0]) == 0.0);
    }
  }

  TEST_CASE("an independent complement never raises the acceptance rate") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    std::vector<std::size_t> half;
    for (std::size_t i = 0; i < p.train.size(); i += 2) half.push_back(i);
    const Model g = train(p.source.spec(), p.train.subset(half),
                          wmark::testing::desk_train_config(999, 100));
    const std::vector<Model> comps = {g};
    VerifyConfig vc = verify_cfg(16, 10, 90);
    vc.max_candidates = 20000;
    const TriggerSet plain = verify_trigger_set(p.holdout, p.source, ball, vc);
    const TriggerSet integ = verify_trigger_set_integrity(p.holdout, p.source, ball, comps, vc);
    CHECK(integ.stats.acceptance_rate <= plain.stats.acceptance_rate);
    CHECK(trigger_accuracy(integ, g) == 0.0);
  }
}

TEST_CASE("fine-tuning may flip rechecks without raising") {
  const auto& p = pipeline();
  const ProxyBall ball = make_relative_ball(p.source, 0.15);
  const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 95));
  AttackConfig ac;
  ac.kind = AttackKind::finetune;
  ac.surrogate_spec = p.source.spec();
  ac.surrogate_data = p.train;
  ac.train = wmark::testing::desk_train_config(96, 50);
  ac.train.learning_rate = 0.2;
  const Model tuned = finetune(p.source, ac).surrogate;
  std::size_t flipped = 0;
  for (const auto& s : set.samples) {
    bool ok = true;
    CHECK_NOTHROW(ok = recompute_and_check(s, p.holdout, tuned));
    flipped += !ok;
  }
  MESSAGE("flip rate after fine-tuning: " << static_cast<double>(flipped) / set.size());
}

TEST_SUITE("trigger-set files") {
  TEST_CASE("round trip and manifest layout") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 10, 100));
    TempDir dir("ts");
    save_trigger_set(set, dir / "ts.json");
    CHECK(load_trigger_set(dir / "ts.json") == set);
    CHECK(std::filesystem::file_size(dir / "ts.bin") == 10 * 2 * 8);
    std::ifstream in(dir / "ts.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["n"] == 10);
    CHECK(j["dim"] == 2);
    CHECK(j["blob"] == "ts.bin");
    CHECK(j["seeds"]["verify"] == 100);
    CHECK(j["samples"][0]["y_star"] == set.samples[0].y_star + 1);
  }

  TEST_CASE("malformed manifests and blobs") {
    const auto& p = pipeline();
    const ProxyBall ball = make_relative_ball(p.source, 0.15);
    const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, verify_cfg(16, 3, 101));
    TempDir dir("ts");
    save_trigger_set(set, dir / "ts.json");
    std::filesystem::resize_file(dir / "ts.bin", 20);
    CHECK_THROWS_AS(load_trigger_set(dir / "ts.json"), FormatError);
    std::ofstream(dir / "bad.json") << "{\"version\": 1";
    CHECK_THROWS_AS(load_trigger_set(dir / "bad.json"), FormatError);
    std::ofstream(dir / "v.json") << "{\"version\": 7}";
    CHECK_THROWS_AS(load_trigger_set(dir / "v.json"), FormatError);
  }
}
