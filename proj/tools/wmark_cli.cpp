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

// wmark: command-line front end for the experiment harness.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 experiment error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wmark/checkpoint.hpp"
#include "wmark/harness.hpp"
#include "wmark/trigger_io.hpp"

namespace fs = std::filesystem;
using namespace wmark;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitExperiment = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct ExtraOptions {
  std::string source;
  std::string suspect;
  std::string trigger_set;
  std::optional<double> baseline;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON); built-in defaults if omitted");
  cmd->add_option("--seed", o.seed, "base seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error("cannot write " + path.string());
}

// The source model: an explicit checkpoint, else <out>/source.nwmk when it
// exists, else freshly trained (and saved).
Model obtain_source(const ExperimentConfig& cfg, const PreparedData& data,
                    const std::string& explicit_path) {
  const ModelSpec spec = make_spec(cfg.source.model, data.train);
  if (!explicit_path.empty()) return load_checkpoint(explicit_path, spec);
  const fs::path cached = cfg.output_dir / "source.nwmk";
  if (fs::exists(cached)) return load_checkpoint(cached, spec);
  Model m = train_source(cfg, data.train);
  save_checkpoint(m, cached);
  return m;
}

int cmd_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const PreparedData data = prepare_data(cfg);
  save_csv(data.train, cfg.output_dir / "train.csv");
  save_csv(data.holdout, cfg.output_dir / "holdout.csv");
  const Model m = train_source(cfg, data.train);
  save_checkpoint(m, cfg.output_dir / "source.nwmk");
  std::printf("source %s  train_acc %.4f  holdout_acc %.4f\n", fingerprint(m).c_str(),
              accuracy(data.train, m), accuracy(data.holdout, m));
  return 0;
}

int cmd_watermark(const ExperimentConfig& cfg, const ExtraOptions& x) {
  fs::create_directories(cfg.output_dir);
  const PreparedData data = prepare_data(cfg);
  const Model source = obtain_source(cfg, data, x.source);
  const ProxyBall ball = build_ball(cfg, source, data.train);
  try {
    const TriggerSet set = verify_trigger_set(data.holdout, source, ball, verify_config(cfg));
    save_trigger_set(set, cfg.output_dir / "trigger_set.json");
    std::printf("trigger set: %zu samples, %zu candidates, acceptance %.4f\n", set.size(),
                set.stats.candidates_consumed, set.stats.acceptance_rate);
  } catch (const InsufficientTransferability& e) {
    save_trigger_set(e.partial, cfg.output_dir / "trigger_set.partial.json");
    throw;
  }
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const ExtraOptions& x) {
  fs::create_directories(cfg.output_dir / "surrogates");
  const PreparedData data = prepare_data(cfg);
  const Model source = obtain_source(cfg, data, x.source);
  std::optional<TriggerSet> set;
  if (!x.trigger_set.empty()) set = load_trigger_set(x.trigger_set);

  std::string csv = "attack,repeat,seed,clean_acc,trigger_acc\n";
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    for (std::size_t k = 0; k < cfg.repeats; ++k) {
      const AttackConfig ac = build_attack_config(cfg, i, k, source, data);
      const AttackResult r = run_attack(source, ac, &data.train);
      const std::string stem = "attack" + std::to_string(i) + "_" +
                               std::string(to_string(ac.kind)) + "_r" + std::to_string(k);
      save_checkpoint(r.surrogate, cfg.output_dir / "surrogates" / (stem + ".nwmk"));
      const double clean = accuracy(data.train, r.surrogate);
      csv += std::string(to_string(ac.kind)) + "," + std::to_string(k) + "," +
             std::to_string(r.attack_seed) + "," + format_double(clean) + "," +
             (set ? format_double(trigger_accuracy(*set, r.surrogate)) : std::string()) + "\n";
      std::printf("%-28s clean_acc %.4f", stem.c_str(), clean);
      if (set) std::printf("  trigger_acc %.4f", trigger_accuracy(*set, r.surrogate));
      std::printf("\n");
    }
  }
  write_text(cfg.output_dir / "attacks.csv", csv);
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const ExtraOptions& x) {
  const Model suspect = load_checkpoint(x.suspect);
  const TriggerSet set = load_trigger_set(x.trigger_set);
  const PreparedData data = prepare_data(cfg);
  const bool same_task = data.train.dim() == suspect.spec().input_dim &&
                         data.train.num_classes() == suspect.spec().num_classes;
  const double baseline =
      x.baseline.value_or(1.0 / static_cast<double>(suspect.spec().num_classes));
  const VerificationReport r = make_verification_report(
      x.suspect, suspect, set, same_task ? &data.train : nullptr, baseline,
      x.baseline ? "user" : "chance", cfg.ball.alpha);
  const std::string js = report_to_json(r);
  std::fputs(js.c_str(), stdout);
  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "verification.json", js);
  write_text(cfg.output_dir / "verification.csv", report_csv_header() + "\n" + report_csv_row(r) + "\n");
  return 0;
}

int cmd_integrity(const ExperimentConfig& cfg) {
  const IntegrityReport r = run_integrity(cfg);
  emit_integrity(r, cfg.output_dir);
  std::printf("plain:     %zu accepted of %zu candidates (%.4f)\n", r.plain.accepted,
              r.plain.candidates_consumed, r.plain.acceptance_rate);
  std::printf("integrity: %zu accepted of %zu candidates (%.4f)\n", r.integrity.accepted,
              r.integrity.candidates_consumed, r.integrity.acceptance_rate);
  for (std::size_t j = 0; j < r.complements; ++j) {
    std::printf("complement %zu trigger_acc plain %.4f integrity %.4f\n", j,
                r.complement_acc_plain[j], r.complement_acc_integrity[j]);
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const ExperimentReport r = run_experiment(cfg);
  emit_report(r, cfg.output_dir);
  std::fputs(summary_text(r).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmark: trigger-set watermarking experiments for small MLPs"};
  app.require_subcommand(1);

  CommonOptions common;
  ExtraOptions extra;

  auto* train_cmd = app.add_subcommand("train", "train the source model");
  auto* wm_cmd = app.add_subcommand("watermark", "build a verified trigger set");
  auto* attack_cmd = app.add_subcommand("attack", "run the configured attacks");
  auto* verify_cmd = app.add_subcommand("verify", "verify a suspect checkpoint");
  auto* integrity_cmd = app.add_subcommand("integrity", "plain vs integrity-enhanced sets");
  auto* run_cmd = app.add_subcommand("run", "full pipeline with report");

  for (auto* c : {train_cmd, wm_cmd, attack_cmd, verify_cmd, integrity_cmd, run_cmd}) {
    add_common(c, common);
  }
  wm_cmd->add_option("--source", extra.source, "source checkpoint")->check(CLI::ExistingFile);
  attack_cmd->add_option("--source", extra.source, "source checkpoint")->check(CLI::ExistingFile);
  attack_cmd->add_option("--trigger-set", extra.trigger_set, "trigger-set manifest")
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--suspect", extra.suspect, "suspect checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--trigger-set", extra.trigger_set, "trigger-set manifest")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--baseline", extra.baseline,
                         "baseline trigger accuracy (default: chance, 1/K)")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const ExperimentConfig cfg = resolve_config(common);
    if (*train_cmd) return cmd_train(cfg);
    if (*wm_cmd) return cmd_watermark(cfg, extra);
    if (*attack_cmd) return cmd_attack(cfg, extra);
    if (*verify_cmd) return cmd_verify(cfg, extra);
    if (*integrity_cmd) return cmd_integrity(cfg);
    if (*run_cmd) return cmd_run(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitExperiment;
  }
  return kExitConfig;
}
