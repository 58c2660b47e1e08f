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

#include "test_support.hpp"
#include "wmark/attacks.hpp"
#include "wmark/error.hpp"
#include "wmark/stats.hpp"
#include "wmark/watermark.hpp"

using namespace wmark;
using wmark::testing::BlobPipeline;
using wmark::testing::desk_train_config;
using wmark::testing::make_pipeline;
using wmark::testing::random_model;

namespace {

const BlobPipeline& pipeline() {
  static const BlobPipeline p = make_pipeline(4, 150, 2.5, 100);
  return p;
}

AttackConfig attack_cfg(AttackKind kind, const BlobPipeline& p, std::uint64_t seed,
                        std::size_t epochs = 100) {
  AttackConfig ac;
  ac.kind = kind;
  ac.surrogate_spec = p.source.spec();
  ac.surrogate_data = p.train;
  ac.train = desk_train_config(seed, epochs);
  if (kind == AttackKind::rgt) ac.gamma = 0.5;
  if (kind == AttackKind::prune) ac.prune_ratio = 0.25;
  return ac;
}

}  // namespace

TEST_SUITE("soft label") {
  TEST_CASE("same architecture approaches the source accuracy") {
    const auto& p = pipeline();
    const auto r = steal_soft(p.source, attack_cfg(AttackKind::soft_label, p, 10, 200));
    CHECK(std::abs(r.clean_accuracy - accuracy(p.train, p.source)) <= 0.03);
    CHECK(r.clean_accuracy == accuracy(p.train, r.surrogate));
    CHECK(r.attack_seed == 10);
  }

  TEST_CASE("zero epochs keep the initialization and its KL") {
    const auto& p = pipeline();
    const auto r = steal_soft(p.source, attack_cfg(AttackKind::soft_label, p, 11, 0));
    const Model init = Model::initialize(p.source.spec(), 11);
    CHECK(r.surrogate == init);
    REQUIRE(r.loss_history.size() == 1);
    const auto t = soft_targets(p.source, p.train);
    const Batch b{p.train.features(), p.train.dim(), p.train.labels(), t};
    CHECK(r.loss_history[0] == doctest::Approx(batch_loss(init, b, Loss::kl_to_targets)).epsilon(1e-12));
  }

  TEST_CASE("a cloned model has zero KL to the source") {
    const auto& p = pipeline();
    const Model clone(p.source.spec(), p.source.theta());
    double mean = 0.0;
    for (std::size_t i = 0; i < p.train.size(); ++i) {
      mean += kl_divergence(forward(p.source, p.train.row(i)), forward(clone, p.train.row(i)));
    }
    CHECK(mean / static_cast<double>(p.train.size()) < 1e-12);
  }

  TEST_CASE("soft targets are the source probabilities") {
    const auto& p = pipeline();
    const auto t = soft_targets(p.source, p.holdout);
    REQUIRE(t.size() == p.holdout.size() * 4);
    const auto q = forward(p.source, p.holdout.row(3));
    for (std::size_t k = 0; k < 4; ++k) CHECK(t[3 * 4 + k] == q[k]);
  }
}

TEST_SUITE("hard label") {
  TEST_CASE("a perfect source relabels nothing and the attack is plain training") {
    Dataset d = make_blobs(3, 2, 60, 0.3, 5);
    const ModelSpec spec{2, {16}, 3, Activation::relu};
    const Model f = train(spec, d, TrainConfig{100, 0.05, 0.9, 5e-4, 30, 5});
    REQUIRE(accuracy(d, f) == 1.0);
    CHECK(relabel(f, d) == d);
    AttackConfig ac;
    ac.kind = AttackKind::hard_label;
    ac.surrogate_spec = spec;
    ac.surrogate_data = d;
    ac.train = TrainConfig{20, 0.05, 0.9, 5e-4, 30, 77};
    CHECK(steal_hard(f, ac).surrogate == train(spec, d, ac.train));
  }

  TEST_CASE("flipped-label fraction is one minus source accuracy") {
    const auto& p = pipeline();
    const Dataset r = relabel(p.source, p.train);
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < r.size(); ++i) flipped += r.label(i) != p.train.label(i);
    CHECK(static_cast<double>(flipped) / static_cast<double>(r.size()) ==
          doctest::Approx(1.0 - accuracy(p.train, p.source)).epsilon(1e-15));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.label(i) == predict(p.source, r.row(i)));
  }

  TEST_CASE("hard-label surrogates trail soft-label ones on the trigger set") {
    double soft = 0.0, hard = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto p = make_pipeline(seed, 150, 2.5, 100);
      const ProxyBall ball = make_relative_ball(p.source, 0.15);
      VerifyConfig vc;
      vc.m = 16;
      vc.n = 20;
      vc.seed = seed;
      const TriggerSet set = verify_trigger_set(p.holdout, p.source, ball, vc);
      soft += trigger_accuracy(set, steal_soft(p.source, attack_cfg(AttackKind::soft_label, p, seed + 50)).surrogate);
      hard += trigger_accuracy(set, steal_hard(p.source, attack_cfg(AttackKind::hard_label, p, seed + 50)).surrogate);
    }
    MESSAGE("mean trigger accuracy soft " << soft / 5 << " hard " << hard / 5);
    CHECK(hard <= soft);
  }
}

TEST_SUITE("rgt") {
  TEST_CASE("gamma 0 is plain cross-entropy training, bit for bit") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::rgt, p, 12, 20);
    ac.gamma = 0.0;
    const auto r = steal_rgt(p.source, ac);
    const FitResult plain = fit(Model::initialize(ac.surrogate_spec, 12), {&p.train, {}, 0.0}, ac.train);
    CHECK(r.surrogate == plain.model);
    REQUIRE(r.loss_history.size() == plain.loss_history.size() + 1);
    for (std::size_t i = 0; i < plain.loss_history.size(); ++i) CHECK(r.loss_history[i] == plain.loss_history[i]);
  }

  TEST_CASE("gamma 1 is the soft-label attack, bit for bit") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::rgt, p, 13, 20);
    ac.gamma = 1.0;
    AttackConfig sc = attack_cfg(AttackKind::soft_label, p, 13, 20);
    const auto a = steal_rgt(p.source, ac);
    const auto b = steal_soft(p.source, sc);
    CHECK(a.surrogate == b.surrogate);
    CHECK(a.loss_history == b.loss_history);
  }

  TEST_CASE("half-mixed targets keep clean accuracy at least at the hard-label level") {
    const auto& p = pipeline();
    const auto rgt = steal_rgt(p.source, attack_cfg(AttackKind::rgt, p, 14));
    const auto hard = steal_hard(p.source, attack_cfg(AttackKind::hard_label, p, 14));
    MESSAGE("clean accuracy rgt " << rgt.clean_accuracy << " hard " << hard.clean_accuracy);
    CHECK(rgt.clean_accuracy >= hard.clean_accuracy);
  }
}

TEST_SUITE("prune") {
  TEST_CASE("ratio 0 leaves the model unchanged") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::prune, p, 1);
    ac.prune_ratio = 0.0;
    CHECK(prune(p.source, ac, p.train).surrogate == p.source);
  }

  TEST_CASE("cutting one neuron of a width-4 layer") {
    const ModelSpec spec{3, {4, 3}, 3, Activation::tanh};
    const Model f = random_model(spec, 3);
    Dataset cal = make_blobs(3, 3, 20, 1.0, 1);
    const auto activity = neuron_activity(f, cal);
    const auto plan = prune_plan(f, 0.25, cal);
    REQUIRE(plan[0].size() == 1);
    CHECK(plan[1].empty());  // floor(0.25 * 3) = 0
    const std::size_t j = plan[0][0];
    for (std::size_t k = 0; k < 4; ++k) CHECK(activity[0][j] <= activity[0][k]);
    const Model g = apply_prune(f, plan);
    const auto s = layer_shapes(spec);
    for (std::size_t i = 0; i < g.theta().size(); ++i) {
      const bool in_row = i >= s[0].weight_offset + j * 3 && i < s[0].weight_offset + (j + 1) * 3;
      const bool bias = i == s[0].bias_offset + j;
      bool in_col = false;
      for (std::size_t o = 0; o < 3; ++o) in_col |= i == s[1].weight_offset + o * 4 + j;
      if (in_row || bias || in_col) {
        CHECK(g.theta()[i] == 0.0);
      } else {
        CHECK(g.theta()[i] == f.theta()[i]);
      }
    }
  }

  TEST_CASE("zeroed parameter count matches the per-layer cuts") {
    const ModelSpec spec{3, {10, 7, 12}, 4, Activation::relu};
    const Model f = random_model(spec, 5);  // no exact zeros
    Dataset cal = make_blobs(4, 3, 25, 1.0, 2);
    const auto s = layer_shapes(spec);
    for (double ratio : {0.1, 0.3, 0.5, 0.75, 0.9}) {
      std::vector<std::size_t> cut;
      for (std::size_t w : spec.hidden_layers) {
        cut.push_back(static_cast<std::size_t>(std::floor(ratio * static_cast<double>(w) + 1e-9)));
      }
      // Inclusion-exclusion: rows + biases + next-layer columns, minus the
      // entries that are both a pruned row and a pruned column.
      std::size_t expect = 0;
      for (std::size_t l = 0; l < cut.size(); ++l) {
        expect += cut[l] * (s[l].in + 1) + cut[l] * s[l + 1].out;
        if (l + 1 < cut.size()) expect -= cut[l] * cut[l + 1];
      }
      const Model g = apply_prune(f, prune_plan(f, ratio, cal));
      std::size_t zeros = 0;
      for (double v : g.theta()) zeros += v == 0.0;
      CHECK(zeros == expect);
    }
  }

  TEST_CASE("clean accuracy falls as the ratio grows") {
    const auto& p = pipeline();
    double prev = 1.0;
    for (int i = 0; i <= 8; ++i) {
      AttackConfig ac = attack_cfg(AttackKind::prune, p, 1);
      ac.prune_ratio = 0.1 * i;
      const double acc = prune(p.source, ac, p.train).clean_accuracy;
      CHECK(acc <= prev + 0.01);
      prev = acc;
    }
  }

  TEST_CASE("calibration defaults to the attack data") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::prune, p, 1);
    ac.surrogate_data = p.holdout;
    CHECK(run_attack(p.source, ac, nullptr).surrogate == prune(p.source, ac, p.holdout).surrogate);
  }

  TEST_CASE("plan and ratio validation") {
    const auto& p = pipeline();
    CHECK_THROWS_AS(prune_plan(p.source, 1.0, p.train), InputError);
    CHECK_THROWS_AS(apply_prune(p.source, {{0}}), InputError);
    CHECK_THROWS_AS(apply_prune(p.source, {{99}, {}}), InputError);
  }
}

TEST_SUITE("finetune") {
  TEST_CASE("zero epochs return the source") {
    const auto& p = pipeline();
    CHECK(finetune(p.source, attack_cfg(AttackKind::finetune, p, 1, 0)).surrogate == p.source);
  }

  TEST_CASE("zero learning rate leaves theta unchanged") {
    const auto& p = pipeline();
    for (double wd : {0.0, 5e-4}) {
      AttackConfig ac = attack_cfg(AttackKind::finetune, p, 2, 3);
      ac.train.learning_rate = 0.0;
      ac.train.weight_decay = wd;
      CHECK(finetune(p.source, ac).surrogate == p.source);
    }
  }

  TEST_CASE("architecture must match the source") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::finetune, p, 2, 3);
    ac.surrogate_spec.hidden_layers = {8};
    CHECK_THROWS_AS(finetune(p.source, ac), InputError);
  }
}

TEST_SUITE("attack plumbing") {
  TEST_CASE("the source is never modified") {
    const auto& p = pipeline();
    const std::vector<double> before = p.source.theta();
    for (auto kind : {AttackKind::soft_label, AttackKind::hard_label, AttackKind::rgt,
                      AttackKind::prune, AttackKind::finetune}) {
      run_attack(p.source, attack_cfg(kind, p, 3, 5), &p.train);
      CHECK(p.source.theta() == before);
    }
  }

  TEST_CASE("attacks are deterministic") {
    const auto& p = pipeline();
    for (auto kind : {AttackKind::soft_label, AttackKind::hard_label, AttackKind::rgt,
                      AttackKind::prune, AttackKind::finetune}) {
      const auto ac = attack_cfg(kind, p, 4, 5);
      CHECK(run_attack(p.source, ac, &p.train).surrogate == run_attack(p.source, ac, &p.train).surrogate);
    }
  }

  TEST_CASE("surrogates may use a different architecture") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::soft_label, p, 5, 5);
    ac.surrogate_spec.hidden_layers = {16};
    ac.surrogate_spec.activation = Activation::relu;
    CHECK(steal_soft(p.source, ac).surrogate.spec() == ac.surrogate_spec);
    ac.surrogate_spec.num_classes = 5;
    CHECK_THROWS_AS(steal_soft(p.source, ac), InputError);
  }

  TEST_CASE("parameter presence follows the kind") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::soft_label, p, 6);
    ac.gamma = 0.5;
    CHECK_THROWS_AS(ac.validate(), InputError);
    ac = attack_cfg(AttackKind::rgt, p, 6);
    ac.gamma.reset();
    CHECK_THROWS_AS(ac.validate(), InputError);
    ac = attack_cfg(AttackKind::rgt, p, 6);
    ac.gamma = 1.5;
    CHECK_THROWS_AS(ac.validate(), InputError);
    ac = attack_cfg(AttackKind::prune, p, 6);
    ac.prune_ratio.reset();
    CHECK_THROWS_AS(ac.validate(), InputError);
    ac = attack_cfg(AttackKind::hard_label, p, 6);
    ac.prune_ratio = 0.1;
    CHECK_THROWS_AS(ac.validate(), InputError);
    ac = attack_cfg(AttackKind::hard_label, p, 6);
    CHECK_THROWS_AS(steal_soft(p.source, ac), InputError);
  }

  TEST_CASE("divergence surfaces as an attack failure") {
    const auto& p = pipeline();
    AttackConfig ac = attack_cfg(AttackKind::soft_label, p, 7, 5);
    ac.train.learning_rate = 1e300;
    CHECK_THROWS_AS(steal_soft(p.source, ac), AttackFailed);
  }

  TEST_CASE("kind names round-trip") {
    for (auto kind : {AttackKind::soft_label, AttackKind::hard_label, AttackKind::rgt,
                      AttackKind::prune, AttackKind::finetune}) {
      CHECK(attack_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(attack_kind_from_string("distill"), InputError);
  }
}
