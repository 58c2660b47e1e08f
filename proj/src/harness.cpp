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

#include "wmark/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "wmark/checkpoint.hpp"
#include "wmark/kernels.hpp"
#include "wmark/rng.hpp"
#include "wmark/trigger_io.hpp"

namespace wmark {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

// Reads the members of one JSON object and rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  std::optional<T> opt(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    return convert<T>(*v, child(key));
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (auto v = opt<T>(key)) out = *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + child(it.key()) + "'");
    }
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
          v.get<long long>() < 0) {
        throw ConfigError(path + ": must be non-negative");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      return v.get<T>();
    } else {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

BlobGenerator parse_generator(const json& j, const std::string& path) {
  BlobGenerator g;
  ObjectReader r(j, path);
  r.read("classes", g.classes);
  r.read("dim", g.dim);
  r.read("n_per_class", g.n_per_class);
  r.read("spread", g.spread);
  r.finish();
  require(g.classes >= 3, path + ".classes", "need at least 3 classes");
  require(g.dim >= 1, path + ".dim", "must be positive");
  require(g.n_per_class >= 1, path + ".n_per_class", "must be positive");
  require(std::isfinite(g.spread) && g.spread >= 0.0, path + ".spread",
          "must be finite and non-negative");
  return g;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

ModelBlock parse_model(const json& j, const std::string& path) {
  ModelBlock m;
  ObjectReader r(j, path);
  if (const json* h = r.get("hidden_layers")) {
    require(h->is_array(), r.child("hidden_layers"), "expected an array of widths");
    m.hidden_layers.clear();
    for (std::size_t i = 0; i < h->size(); ++i) {
      auto w = ObjectReader::convert<std::size_t>((*h)[i],
                                                  r.child("hidden_layers") + "[" +
                                                      std::to_string(i) + "]");
      require(w > 0, r.child("hidden_layers"), "widths must be positive");
      m.hidden_layers.push_back(w);
    }
  }
  if (auto a = r.opt<std::string>("activation")) {
    try {
      m.activation = activation_from_string(*a);
    } catch (const Error& e) {
      throw ConfigError(r.child("activation") + ": " + e.what());
    }
  }
  r.finish();
  return m;
}

void parse_train(const json& j, const std::string& path, TrainConfig& t, bool allow_seed,
                 bool* seed_given) {
  ObjectReader r(j, path);
  r.read("epochs", t.epochs);
  r.read("learning_rate", t.learning_rate);
  r.read("momentum", t.momentum);
  r.read("weight_decay", t.weight_decay);
  if (const json* b = r.get("batch_size")) {
    t.batch_size = ObjectReader::convert<std::size_t>(*b, r.child("batch_size"));
  }
  if (allow_seed) {
    if (auto s = r.opt<std::uint64_t>("seed")) {
      t.seed = *s;
      if (seed_given) *seed_given = true;
    }
  }
  r.finish();
  try {
    t.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

SurrogateDataSource parse_surrogate_data(const json& j, const std::string& path,
                                         const fs::path& base) {
  SurrogateDataSource s;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "train") {
      s.kind = SurrogateDataSource::Kind::train;
    } else if (name == "holdout") {
      s.kind = SurrogateDataSource::Kind::holdout;
    } else {
      throw ConfigError(path + ": expected \"train\", \"holdout\" or an object");
    }
    return s;
  }
  ObjectReader r(j, path);
  const json* g = r.get("generator");
  auto csv = r.opt<std::string>("csv");
  r.finish();
  require(!g != !csv, path, "give exactly one of 'generator' or 'csv'");
  if (g) {
    s.kind = SurrogateDataSource::Kind::generator;
    s.generator = parse_generator(*g, r.child("generator"));
  } else {
    s.kind = SurrogateDataSource::Kind::csv;
    s.csv = resolve(*csv, base);
    require(fs::exists(s.csv), r.child("csv"), "file not found: " + s.csv.string());
  }
  return s;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.dataset.generator = BlobGenerator{};
  c.source.train.epochs = 200;
  c.source.train.batch_size = 16;
  c.independents.train = c.source.train;

  auto attack = [&](AttackKind kind) {
    AttackBlock a;
    a.kind = kind;
    a.train = c.source.train;
    return a;
  };
  c.attacks.push_back(attack(AttackKind::soft_label));
  c.attacks.push_back(attack(AttackKind::hard_label));
  AttackBlock rgt = attack(AttackKind::rgt);
  rgt.gamma = 0.5;
  c.attacks.push_back(rgt);
  AttackBlock ft = attack(AttackKind::finetune);
  ft.train.epochs = c.source.train.epochs / 2;
  c.attacks.push_back(ft);
  AttackBlock pr = attack(AttackKind::prune);
  pr.prune_ratio = 0.2;
  c.attacks.push_back(pr);
  return c;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  ExperimentConfig c = default_config();
  ObjectReader root(j, "");

  root.read("seed", c.seed);
  if (auto o = root.opt<std::string>("output_dir")) c.output_dir = *o;

  if (const json* d = root.get("dataset")) {
    ObjectReader r(*d, "dataset");
    const json* g = r.get("generator");
    auto csv = r.opt<std::string>("csv");
    c.dataset.num_classes = r.opt<int>("num_classes");
    r.read("holdout_fraction", c.dataset.holdout_fraction);
    r.finish();
    require(!(g && csv), "dataset", "give at most one of 'generator' or 'csv'");
    if (csv) {
      c.dataset.generator.reset();
      c.dataset.csv = resolve(*csv, base_dir);
      require(fs::exists(*c.dataset.csv), "dataset.csv",
              "file not found: " + c.dataset.csv->string());
    } else {
      require(!c.dataset.num_classes, "dataset.num_classes", "only valid with 'csv'");
      if (g) c.dataset.generator = parse_generator(*g, "dataset.generator");
    }
    require(c.dataset.holdout_fraction > 0.0 && c.dataset.holdout_fraction < 1.0,
            "dataset.holdout_fraction", "must lie in (0, 1)");
  }

  if (const json* s = root.get("source")) {
    ObjectReader r(*s, "source");
    if (const json* m = r.get("model")) c.source.model = parse_model(*m, "source.model");
    if (const json* t = r.get("train")) {
      parse_train(*t, "source.train", c.source.train, true, &c.source.train_seed_given);
    }
    r.finish();
  }

  if (const json* b = root.get("ball")) {
    ObjectReader r(*b, "ball");
    if (auto mode = r.opt<std::string>("delta_mode")) {
      require(*mode == "relative" || *mode == "absolute", "ball.delta_mode",
              "expected \"relative\" or \"absolute\"");
      c.ball.relative = *mode == "relative";
    }
    r.read("delta", c.ball.delta);
    r.read("tau", c.ball.tau);
    c.ball.sigma = r.opt<double>("sigma");
    r.read("m", c.ball.m);
    r.read("n", c.ball.n);
    c.ball.max_candidates = r.opt<std::size_t>("max_candidates");
    r.read("alpha", c.ball.alpha);
    r.finish();
    require(std::isfinite(c.ball.delta) && c.ball.delta >= 0.0, "ball.delta",
            "must be finite and non-negative");
    require(c.ball.tau > 0.0 && c.ball.tau <= 1.0, "ball.tau", "must lie in (0, 1]");
    require(!c.ball.sigma || *c.ball.sigma > 0.0, "ball.sigma", "must be positive");
    require(c.ball.m >= 1, "ball.m", "must be positive");
    require(c.ball.n >= 1, "ball.n", "must be positive");
    require(!c.ball.max_candidates || *c.ball.max_candidates >= 1, "ball.max_candidates",
            "must be positive");
    require(c.ball.alpha > 0.0 && c.ball.alpha < 1.0, "ball.alpha", "must lie in (0, 1)");
  }

  // Attack and independent schedules default to the (possibly overridden)
  // source schedule.
  TrainConfig inherited = c.source.train;
  inherited.seed = 0;
  if (const json* list = root.get("attacks")) {
    require(list->is_array(), "attacks", "expected an array");
    c.attacks.clear();
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string path = "attacks[" + std::to_string(i) + "]";
      ObjectReader r((*list)[i], path);
      AttackBlock a;
      a.train = inherited;
      auto kind = r.opt<std::string>("kind");
      require(kind.has_value(), path + ".kind", "missing");
      try {
        a.kind = attack_kind_from_string(*kind);
      } catch (const Error& e) {
        throw ConfigError(path + ".kind: " + e.what());
      }
      if (const json* m = r.get("model")) a.model = parse_model(*m, path + ".model");
      if (const json* t = r.get("train")) parse_train(*t, path + ".train", a.train, false, nullptr);
      a.gamma = r.opt<double>("gamma");
      a.prune_ratio = r.opt<double>("prune_ratio");
      if (const json* sd = r.get("surrogate_data")) {
        a.surrogate_data = parse_surrogate_data(*sd, path + ".surrogate_data", base_dir);
      }
      r.finish();
      const bool is_rgt = a.kind == AttackKind::rgt;
      const bool is_prune = a.kind == AttackKind::prune;
      require(is_rgt == a.gamma.has_value(), path + ".gamma",
              is_rgt ? "required for rgt" : "only valid for rgt");
      require(is_prune == a.prune_ratio.has_value(), path + ".prune_ratio",
              is_prune ? "required for prune" : "only valid for prune");
      if (a.gamma) require(*a.gamma >= 0.0 && *a.gamma <= 1.0, path + ".gamma", "must lie in [0, 1]");
      if (a.prune_ratio) {
        require(*a.prune_ratio >= 0.0 && *a.prune_ratio < 1.0, path + ".prune_ratio",
                "must lie in [0, 1)");
      }
      if (a.kind == AttackKind::prune || a.kind == AttackKind::finetune) {
        require(!a.model, path + ".model", "prune and finetune keep the source architecture");
      }
      c.attacks.push_back(std::move(a));
    }
  } else {
    for (auto& a : c.attacks) {
      a.train = inherited;
      if (a.kind == AttackKind::finetune) a.train.epochs = std::max<std::size_t>(1, inherited.epochs / 2);
    }
  }

  root.read("repeats", c.repeats);

  c.independents.train = inherited;
  if (const json* ind = root.get("independents")) {
    ObjectReader r(*ind, "independents");
    r.read("count", c.independents.count);
    r.read("subset_fraction", c.independents.subset_fraction);
    if (const json* m = r.get("model")) c.independents.model = parse_model(*m, "independents.model");
    if (const json* t = r.get("train")) {
      parse_train(*t, "independents.train", c.independents.train, false, nullptr);
    }
    r.finish();
    require(c.independents.subset_fraction > 0.0 && c.independents.subset_fraction <= 1.0,
            "independents.subset_fraction", "must lie in (0, 1]");
  }

  if (const json* in = root.get("integrity")) {
    ObjectReader r(*in, "integrity");
    r.read("complements", c.integrity.complements);
    r.read("subset_fraction", c.integrity.subset_fraction);
    r.finish();
    require(c.integrity.subset_fraction > 0.0 && c.integrity.subset_fraction <= 1.0,
            "integrity.subset_fraction", "must lie in (0, 1]");
  }

  root.finish();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Stages

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ExperimentError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(name, e.what());
  }
}

Dataset generate(const BlobGenerator& g, std::uint64_t seed) {
  return make_blobs(g.classes, g.dim, g.n_per_class, g.spread, seed);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  Dataset all = cfg.dataset.csv
                    ? load_csv(*cfg.dataset.csv, cfg.dataset.num_classes)
                    : generate(cfg.dataset.generator.value_or(BlobGenerator{}),
                               derive_seed(cfg.seed, kSeedData));
  SplitResult s = split(all, {cfg.dataset.holdout_fraction, derive_seed(cfg.seed, kSeedSplit)});
  return {std::move(s.train), std::move(s.holdout)};
}

ModelSpec make_spec(const ModelBlock& block, const Dataset& data) {
  ModelSpec spec{data.dim(), block.hidden_layers, data.num_classes(), block.activation};
  spec.validate();
  return spec;
}

TrainConfig source_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.source.train;
  if (!cfg.source.train_seed_given) t.seed = derive_seed(cfg.seed, kSeedSource);
  return t;
}

Model train_source(const ExperimentConfig& cfg, const Dataset& train_data) {
  const ModelSpec spec = make_spec(cfg.source.model, train_data);
  return train(spec, train_data, source_train_config(cfg));
}

ProxyBall build_ball(const ExperimentConfig& cfg, const Model& source, const Dataset& train_data) {
  std::optional<Dataset> reference;
  if (cfg.ball.tau < 1.0) reference = train_data;
  if (cfg.ball.relative) {
    return make_relative_ball(source, cfg.ball.delta, cfg.ball.tau, cfg.ball.sigma,
                              std::move(reference));
  }
  return make_ball(source, cfg.ball.delta, cfg.ball.tau, cfg.ball.sigma, std::move(reference));
}

VerifyConfig verify_config(const ExperimentConfig& cfg) {
  VerifyConfig v;
  v.m = cfg.ball.m;
  v.n = cfg.ball.n;
  v.max_candidates = cfg.ball.max_candidates;
  v.seed = derive_seed(cfg.seed, kSeedVerify);
  return v;
}

std::uint64_t attack_seed(const ExperimentConfig& cfg, std::size_t index, std::size_t repeat) {
  return derive_seed(cfg.seed, kSeedAttackBase + index, repeat);
}

AttackConfig build_attack_config(const ExperimentConfig& cfg, std::size_t index,
                                 std::size_t repeat, const Model& source,
                                 const PreparedData& data) {
  const AttackBlock& a = cfg.attacks.at(index);
  AttackConfig ac;
  ac.kind = a.kind;
  ac.gamma = a.gamma;
  ac.prune_ratio = a.prune_ratio;
  ac.train = a.train;
  ac.train.seed = attack_seed(cfg, index, repeat);

  switch (a.surrogate_data.kind) {
    case SurrogateDataSource::Kind::train:
      ac.surrogate_data = data.train;
      break;
    case SurrogateDataSource::Kind::holdout:
      ac.surrogate_data = data.holdout;
      break;
    case SurrogateDataSource::Kind::generator:
      ac.surrogate_data =
          generate(a.surrogate_data.generator, derive_seed(cfg.seed, kSeedSurrogateData, index));
      break;
    case SurrogateDataSource::Kind::csv:
      ac.surrogate_data = load_csv(a.surrogate_data.csv, source.spec().num_classes);
      break;
  }
  ac.surrogate_spec = a.model ? make_spec(*a.model, ac.surrogate_data) : source.spec();
  if (ac.train.batch_size && *ac.train.batch_size > ac.surrogate_data.size()) {
    ac.train.batch_size = ac.surrogate_data.size();
  }
  ac.validate();
  return ac;
}

std::vector<std::size_t> independent_subset(std::size_t n, double subset_fraction,
                                            std::uint64_t seed) {
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw InputError("subset fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (subset_fraction == 1.0) {
    if (n == 0) throw InputError("independent-model subset is empty");
    return idx;
  }
  const auto keep =
      static_cast<std::size_t>(std::floor(subset_fraction * static_cast<double>(n)));
  if (keep == 0) throw InputError("independent-model subset is empty");
  Rng rng(derive_seed(seed, 7));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Model train_independent(const ModelSpec& spec, const Dataset& data, double subset_fraction,
                        std::uint64_t seed, TrainConfig base) {
  const auto idx = independent_subset(data.size(), subset_fraction, seed);
  base.seed = seed;
  // The full-data path trains on `data` itself, exactly like the source.
  if (idx.size() == data.size()) return train(spec, data, base);
  const Dataset subset = data.subset(idx);
  if (base.batch_size && *base.batch_size > subset.size()) base.batch_size = subset.size();
  return train(spec, subset, base);
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

struct Job {
  enum class Kind { attack, independent } kind;
  std::size_t index = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
};

struct JobOutput {
  std::optional<Model> model;
  std::optional<AttackResult> attack;
};

// Runs fn(i) for every job, in parallel when available, and rethrows the
// first failure in job order.
void for_each_job(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#ifdef WMARK_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string attack_file_stem(const ExperimentConfig& cfg, std::size_t index, std::size_t repeat) {
  return "attack" + std::to_string(index) + "_" + std::string(to_string(cfg.attacks[index].kind)) +
         "_r" + std::to_string(repeat);
}

void write_sidecar(const fs::path& path, const AttackConfig& ac, const AttackResult& r,
                   std::size_t index, std::size_t repeat) {
  ordered_json j;
  j["attack"] = std::string(to_string(ac.kind));
  j["attack_index"] = index;
  j["repeat"] = repeat;
  j["seed"] = r.attack_seed;
  j["gamma"] = ac.gamma ? json(*ac.gamma) : json(nullptr);
  j["prune_ratio"] = ac.prune_ratio ? json(*ac.prune_ratio) : json(nullptr);
  j["epochs"] = ac.train.epochs;
  j["learning_rate"] = ac.train.learning_rate;
  j["surrogate_rows"] = ac.surrogate_data.size();
  j["clean_accuracy"] = r.clean_accuracy;
  j["loss_history"] = r.loss_history;
  j["fingerprint"] = fingerprint(r.surrogate);
  write_text(path, j.dump(2) + "\n");
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = cfg.output_dir;
  stage("output", [&] { fs::create_directories(out); });

  const PreparedData data = stage("data", [&] {
    PreparedData d = prepare_data(cfg);
    save_csv(d.train, out / "train.csv");
    save_csv(d.holdout, out / "holdout.csv");
    return d;
  });

  const Model source = stage("source", [&] {
    Model m = train_source(cfg, data.train);
    save_checkpoint(m, out / "source.nwmk");
    return m;
  });

  const TriggerSet trigger_set = stage("watermark", [&] {
    const ProxyBall ball = build_ball(cfg, source, data.train);
    try {
      TriggerSet set = verify_trigger_set(data.holdout, source, ball, verify_config(cfg));
      save_trigger_set(set, out / "trigger_set.json");
      return set;
    } catch (const InsufficientTransferability& e) {
      save_trigger_set(e.partial, out / "trigger_set.partial.json");
      throw;
    }
  });

  // Independent jobs: attacks (in config order, then repeats), then independents.
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    for (std::size_t k = 0; k < cfg.repeats; ++k) {
      jobs.push_back({Job::Kind::attack, i, k, attack_seed(cfg, i, k)});
    }
  }
  for (std::size_t j = 0; j < cfg.independents.count; ++j) {
    jobs.push_back({Job::Kind::independent, j, 0, derive_seed(cfg.seed, kSeedIndependent, j)});
  }

  stage("attack", [&] {
    fs::create_directories(out / "surrogates");
    fs::create_directories(out / "independents");
  });
  std::vector<JobOutput> outputs(jobs.size());
  for_each_job(jobs.size(), [&](std::size_t idx) {
    const Job& job = jobs[idx];
    if (job.kind == Job::Kind::attack) {
      stage("attack", [&] {
        const AttackConfig ac = build_attack_config(cfg, job.index, job.repeat, source, data);
        AttackResult r = run_attack(source, ac, &data.train);
        const std::string stem = attack_file_stem(cfg, job.index, job.repeat);
        save_checkpoint(r.surrogate, out / "surrogates" / (stem + ".nwmk"));
        write_sidecar(out / "surrogates" / (stem + ".json"), ac, r, job.index, job.repeat);
        outputs[idx].attack = std::move(r);
      });
    } else {
      stage("independent", [&] {
        const ModelSpec spec = cfg.independents.model
                                   ? make_spec(*cfg.independents.model, data.train)
                                   : source.spec();
        Model g = train_independent(spec, data.train, cfg.independents.subset_fraction,
                                    job.seed, cfg.independents.train);
        save_checkpoint(g, out / "independents" /
                               ("independent_" + std::to_string(job.index) + ".nwmk"));
        outputs[idx].model = std::move(g);
      });
    }
  });

  // Single-threaded reduction in job order.
  return stage("report", [&] {
    ExperimentReport rep;
    rep.acceptance = trigger_set.stats;
    rep.bound = transferability_bound(cfg.ball.m, cfg.ball.n, cfg.ball.alpha);

    ReportRow src_row{"source", "-", source_train_config(cfg).seed,
                      accuracy(data.train, source), trigger_accuracy(trigger_set, source),
                      "-", "source.nwmk", std::nullopt};
    rep.rows.push_back(src_row);

    std::vector<const Model*> models;
    std::vector<double> independent_acc;
    for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
      const Job& job = jobs[idx];
      ReportRow row;
      row.seed = job.seed;
      if (job.kind == Job::Kind::attack) {
        const AttackResult& r = *outputs[idx].attack;
        row.role = "surrogate";
        row.attack = std::string(to_string(cfg.attacks[job.index].kind));
        row.prune_ratio = cfg.attacks[job.index].prune_ratio;
        row.checkpoint = fs::path("surrogates") /
                         (attack_file_stem(cfg, job.index, job.repeat) + ".nwmk");
        models.push_back(&r.surrogate);
      } else {
        row.role = "independent";
        row.attack = "-";
        row.checkpoint = fs::path("independents") /
                         ("independent_" + std::to_string(job.index) + ".nwmk");
        models.push_back(&*outputs[idx].model);
      }
      row.clean_acc = accuracy(data.train, *models.back());
      row.trigger_acc = trigger_accuracy(trigger_set, *models.back());
      if (job.kind == Job::Kind::independent) independent_acc.push_back(row.trigger_acc);
      rep.rows.push_back(std::move(row));
    }

    if (independent_acc.empty()) {
      rep.baseline = 1.0 / static_cast<double>(source.spec().num_classes);
      rep.baseline_source = "chance";
    } else {
      rep.baseline = std::accumulate(independent_acc.begin(), independent_acc.end(), 0.0) /
                     static_cast<double>(independent_acc.size());
      rep.baseline_source = "independent-models";
    }

    try {
      rep.threshold = ownership_verdict(0.0, rep.baseline, rep.bound.p_hat).threshold;
    } catch (const DegenerateRule&) {
      rep.degenerate_rule = true;
    }

    fs::create_directories(out / "verification");
    for (std::size_t r = 1; r < rep.rows.size(); ++r) {
      ReportRow& row = rep.rows[r];
      const Model& model = *models[r - 1];
      row.verdict = rep.degenerate_rule
                        ? "degenerate"
                        : std::string(to_string(
                              ownership_verdict(row.trigger_acc, rep.baseline, rep.bound.p_hat)
                                  .verdict));
      if (!rep.degenerate_rule) {
        const auto vr = make_verification_report(row.checkpoint.string(), model, trigger_set,
                                                 &data.train, rep.baseline, rep.baseline_source,
                                                 cfg.ball.alpha);
        fs::path name = row.checkpoint.filename();
        name.replace_extension(".json");
        write_text(out / "verification" / name, report_to_json(vr));
      }
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  });
}

// ---------------------------------------------------------------------------
// Report emission

std::string report_csv(const ExperimentReport& report) {
  std::string s = "role,attack,seed,clean_acc,trigger_acc,verdict\n";
  for (const auto& r : report.rows) {
    s += r.role + "," + r.attack + "," + std::to_string(r.seed) + "," + format_double(r.clean_acc) +
         "," + format_double(r.trigger_acc) + "," + r.verdict + "\n";
  }
  return s;
}

namespace {

struct Aggregate {
  std::size_t count = 0;
  double clean_mean = 0, clean_std = 0, trigger_mean = 0, trigger_std = 0;
};

// Sample standard deviation (n - 1); 0 for a single value.
std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::string summary_text(const ExperimentReport& report) {
  // Groups keep first-appearance order of (role, attack).
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& r : report.rows) {
    auto key = std::make_pair(r.role, r.attack);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].first.push_back(r.clean_acc);
    groups[key].second.push_back(r.trigger_acc);
  }

  std::ostringstream o;
  char line[256];
  o << "wmark experiment summary\n\n";
  o << "accuracies as mean +- sample std over runs, in percent\n\n";
  std::snprintf(line, sizeof line, "%-12s %-11s %5s  %-18s %-18s\n", "role", "attack", "runs",
                "acc(D)", "acc(D*)");
  o << line;
  for (const auto& key : keys) {
    const auto& [clean, trig] = groups[key];
    const auto [cm, cs] = mean_std(clean);
    const auto [tm, ts] = mean_std(trig);
    std::snprintf(line, sizeof line, "%-12s %-11s %5zu  %7.2f +- %-7.2f %7.2f +- %-7.2f\n",
                  key.first.c_str(), key.second.c_str(), clean.size(), 100 * cm, 100 * cs,
                  100 * tm, 100 * ts);
    o << line;
  }
  o << "\n";
  std::snprintf(line, sizeof line,
                "trigger set: %zu accepted of %zu candidates (acceptance rate %.4f)\n",
                report.acceptance.accepted, report.acceptance.candidates_consumed,
                report.acceptance.acceptance_rate);
  o << line;
  std::snprintf(line, sizeof line, "bound: m=%zu n=%zu alpha=%g p_hat=%.6f phi=%.6f\n",
                report.bound.m, report.bound.n, report.bound.alpha, report.bound.p_hat,
                report.bound.phi);
  o << line;
  std::snprintf(line, sizeof line, "baseline: %.6f (%s)\n", report.baseline,
                report.baseline_source.c_str());
  o << line;
  if (report.degenerate_rule) {
    o << "verdict rule: midpoint(baseline, p_hat) is degenerate (baseline >= p_hat)\n";
  } else {
    std::snprintf(line, sizeof line, "verdict rule: midpoint(baseline, p_hat), threshold %.6f\n",
                  report.threshold);
    o << line;
  }
  std::snprintf(line, sizeof line, "wall clock: %.3f s\n", report.wall_seconds);
  o << line;
  return o.str();
}

std::string plotdata_csv(const ExperimentReport& report) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_ratio;
  for (const auto& r : report.rows) {
    if (!r.prune_ratio) continue;
    by_ratio[*r.prune_ratio].first.push_back(r.clean_acc);
    by_ratio[*r.prune_ratio].second.push_back(r.trigger_acc);
  }
  std::string s = "ratio,clean_acc,trigger_acc\n";
  for (const auto& [ratio, accs] : by_ratio) {
    s += format_double(ratio) + "," + format_double(mean_std(accs.first).first) + "," +
         format_double(mean_std(accs.second).first) + "\n";
  }
  return s;
}

void emit_report(const ExperimentReport& report, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  write_text(output_dir / "report.csv", report_csv(report));
  write_text(output_dir / "summary.txt", summary_text(report));
  write_text(output_dir / "plotdata.csv", plotdata_csv(report));
}

// ---------------------------------------------------------------------------
// Integrity

IntegrityReport run_integrity(const ExperimentConfig& cfg) {
  const PreparedData data = stage("data", [&] { return prepare_data(cfg); });
  const Model source = stage("source", [&] { return train_source(cfg, data.train); });

  std::vector<Model> complements;
  stage("independent", [&] {
    for (std::size_t j = 0; j < cfg.integrity.complements; ++j) {
      complements.push_back(train_independent(source.spec(), data.train,
                                              cfg.integrity.subset_fraction,
                                              derive_seed(cfg.seed, kSeedComplement, j),
                                              cfg.independents.train));
    }
  });

  return stage("watermark", [&] {
    const ProxyBall ball = build_ball(cfg, source, data.train);
    const VerifyConfig vc = verify_config(cfg);
    IntegrityReport rep;
    rep.complements = complements.size();
    const TriggerSet plain = verify_trigger_set(data.holdout, source, ball, vc);
    const TriggerSet integ =
        verify_trigger_set_integrity(data.holdout, source, ball, complements, vc);
    rep.plain = plain.stats;
    rep.integrity = integ.stats;
    for (const auto& g : complements) {
      rep.complement_acc_plain.push_back(trigger_accuracy(plain, g));
      rep.complement_acc_integrity.push_back(trigger_accuracy(integ, g));
    }
    if (!cfg.output_dir.empty()) {
      fs::create_directories(cfg.output_dir);
      save_trigger_set(plain, cfg.output_dir / "trigger_set.json");
      save_trigger_set(integ, cfg.output_dir / "trigger_set_integrity.json");
      save_checkpoint(source, cfg.output_dir / "source.nwmk");
      for (std::size_t j = 0; j < complements.size(); ++j) {
        save_checkpoint(complements[j],
                        cfg.output_dir / ("complement_" + std::to_string(j) + ".nwmk"));
      }
    }
    return rep;
  });
}

void emit_integrity(const IntegrityReport& report, const fs::path& output_dir) {
  std::string s = "mode,candidates,accepted,acceptance_rate,complement_trigger_acc\n";
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto row = [&](const char* mode, const VerificationStats& st, const std::vector<double>& acc) {
    s += std::string(mode) + "," + std::to_string(st.candidates_consumed) + "," +
         std::to_string(st.accepted) + "," + format_double(st.acceptance_rate) + "," +
         format_double(mean(acc)) + "\n";
  };
  row("plain", report.plain, report.complement_acc_plain);
  row("integrity", report.integrity, report.complement_acc_integrity);
  write_text(output_dir / "integrity.csv", s);
}

}  // namespace wmark
