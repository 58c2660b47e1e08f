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

#include "wmark/trigger_io.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "wmark/checkpoint.hpp"

namespace wmark {

using nlohmann::ordered_json;

void save_trigger_set(const TriggerSet& set, const std::filesystem::path& manifest) {
  const std::size_t dim = set.samples.empty() ? 0 : set.samples.front().x_star.size();
  std::filesystem::path blob = manifest;
  blob.replace_extension(".bin");

  ordered_json j;
  j["version"] = kTriggerSetVersion;
  j["n"] = set.size();
  j["dim"] = dim;
  j["source_fingerprint"] = set.source_fingerprint;
  VerifyConfig vc;
  vc.seed = set.seed;
  j["seeds"] = {{"verify", set.seed},
                {"candidate_stream", candidate_stream_seed(vc)},
                {"proxy_stream", proxy_stream_seed(vc)}};
  j["ball"] = {{"delta", set.ball.delta}, {"tau", set.ball.tau},
               {"sigma", set.ball.sigma}, {"m", set.ball.m}};
  j["stats"] = {{"candidates_consumed", set.stats.candidates_consumed},
                {"accepted", set.stats.accepted},
                {"acceptance_rate", set.stats.acceptance_rate},
                {"trigger_accuracy", set.stats.trigger_accuracy}};
  j["blob"] = blob.filename().string();
  ordered_json samples = ordered_json::array();
  std::vector<std::uint8_t> bytes;
  bytes.reserve(set.size() * dim * 8);
  for (const TriggerSample& s : set.samples) {
    if (s.x_star.size() != dim) throw InputError("trigger set: ragged x* vectors");
    samples.push_back({{"parent_a", s.parent_a},
                       {"parent_b", s.parent_b},
                       {"lambda", s.lambda},
                       {"y_star", s.y_star + 1}});
    for (double v : s.x_star) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  j["samples"] = std::move(samples);

  std::ofstream out(manifest);
  if (!out) throw Error("cannot write " + manifest.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + manifest.string());
  write_file(blob, bytes);
}

TriggerSet load_trigger_set(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open trigger set " + manifest.string());
  TriggerSet set;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kTriggerSetVersion)
      throw FormatError("trigger set: unsupported version");
    const auto n = j.at("n").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    set.source_fingerprint = j.at("source_fingerprint").get<std::string>();
    set.seed = j.at("seeds").at("verify").get<std::uint64_t>();
    const auto& ball = j.at("ball");
    set.ball = {ball.at("delta").get<double>(), ball.at("tau").get<double>(),
                ball.at("sigma").get<double>(), ball.at("m").get<std::size_t>()};
    if (j.contains("stats")) {
      const auto& st = j.at("stats");
      set.stats = {st.at("candidates_consumed").get<std::size_t>(),
                   st.at("accepted").get<std::size_t>(),
                   st.at("acceptance_rate").get<double>(),
                   st.at("trigger_accuracy").get<double>()};
    }
    const auto& samples = j.at("samples");
    if (samples.size() != n) throw FormatError("trigger set: sample count differs from n");

    const auto bytes = read_file(manifest.parent_path() / j.at("blob").get<std::string>());
    if (bytes.size() != n * dim * 8) throw FormatError("trigger set: blob size mismatch");
    std::size_t pos = 0;
    for (const auto& rec : samples) {
      TriggerSample s;
      s.parent_a = rec.at("parent_a").get<std::size_t>();
      s.parent_b = rec.at("parent_b").get<std::size_t>();
      s.lambda = rec.at("lambda").get<double>();
      s.y_star = rec.at("y_star").get<int>() - 1;
      if (s.y_star < 0) throw FormatError("trigger set: y_star must be >= 1");
      s.x_star.resize(dim);
      for (double& v : s.x_star) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[pos + b]} << (8 * b);
        pos += 8;
        v = std::bit_cast<double>(bits);
      }
      set.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("trigger set " + manifest.string() + ": " + e.what());
  }
  return set;
}

}  // namespace wmark
