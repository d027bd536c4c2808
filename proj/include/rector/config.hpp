// Copyright 2026 The RECTor Authors
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

// Run configuration: a flat text file of `section.key = value` lines.
// '#' starts a comment. Unknown keys are rejected.

#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rector/ann.hpp"
#include "rector/common.hpp"
#include "rector/eval.hpp"
#include "rector/featurizer.hpp"
#include "rector/neural.hpp"
#include "rector/trainer.hpp"
#include "rector/traffic.hpp"

namespace rector {

struct PathConfig {
  std::string dataset = "data/flows.jsonl";
  std::string train = "data/train.jsonl";
  std::string test = "data/test.jsonl";
  std::string features = "features";
  std::string checkpoints = "model";
  std::string embeddings = "embeddings.jsonl";
  std::string index = "index.json";
  std::string reports = "reports";
};

struct RunConfig {
  PathConfig paths;
  SynthConfig synth;
  double train_fraction = 0.9;
  WindowSpec window;
  ModelDims dims;
  bool tied = false;
  TrainConfig train;
  std::size_t checkpoint_every = 0;
  std::size_t index_K = 0;  // 0 = auto
  std::size_t n_probe = kDefaultProbes;
  std::size_t top_k = 0;
  double tau = 0.5;
  std::size_t eval_N = 500;
  std::size_t eval_M = 500;
  std::vector<double> sigmas{0.1, 0.3, 0.5, 0.8, 1.0};
  BenchConfig bench;
  std::uint64_t seed = 7;

  // Train settings carry the model shape and seed of the run.
  TrainConfig train_config() const {
    TrainConfig t = train;
    t.dims = dims;
    t.tied = tied;
    t.seed = derive_seed(seed, "train");
    return t;
  }

  void validate() const {
    synth.validate();
    window.validate();
    dims.validate();
    train_config().validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split.train_fraction must lie in (0, 1)");
    for (double s : sigmas)
      if (!(s > 0.0 && s <= 1.0)) throw ConfigError("eval.sigma values must lie in (0, 1]");
    if (n_probe < 1) throw ConfigError("index.n_probe must be >= 1");
    if (eval_N < 1 || eval_M < 1) throw ConfigError("eval.N and eval.M must be >= 1");
  }

  // Hash of the settings that fix artifact compatibility: window geometry
  // and model shape. Every artifact records it.
  std::string config_hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "window.W=" << window.windows << "\nwindow.window_s=" << window.window_s << "\nwindow.L=" << window.max_packets
       << "\nmodel.H=" << dims.hidden << "\nmodel.A=" << dims.attention << "\nmodel.D=" << dims.embedding
       << "\nmodel.tied=" << tied << "\n";
    return hex64(fnv1a64(os.str()));
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t pos = 0;
    try {
      out = static_cast<T>(std::stod(v, &pos));
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  } else {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  return out;
}

}  // namespace detail

// Applies one key/value pair.
inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  const std::string& v = value;
  auto sz = [&] { return parse_number<std::size_t>(key, v); };
  auto i64 = [&] { return parse_number<std::int64_t>(key, v); };
  auto dbl = [&] { return parse_number<double>(key, v); };

  static const std::map<std::string, std::string PathConfig::*> paths{
      {"paths.dataset", &PathConfig::dataset},         {"paths.train", &PathConfig::train},
      {"paths.test", &PathConfig::test},               {"paths.features", &PathConfig::features},
      {"paths.checkpoints", &PathConfig::checkpoints}, {"paths.embeddings", &PathConfig::embeddings},
      {"paths.index", &PathConfig::index},             {"paths.reports", &PathConfig::reports}};
  if (auto it = paths.find(key); it != paths.end()) {
    c.paths.*(it->second) = v;
    return;
  }

  if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "synth.circuits") c.synth.n_circuits = i64();
  else if (key == "synth.websites") c.synth.n_websites = i64();
  else if (key == "synth.visits") c.synth.visits_per_pair = i64();
  else if (key == "synth.mean_latency_s") c.synth.mean_latency_s = dbl();
  else if (key == "synth.latency_jitter_s") c.synth.latency_jitter_s = dbl();
  else if (key == "synth.drop_prob") c.synth.drop_prob = dbl();
  else if (key == "synth.cell_bytes") c.synth.cell_bytes = static_cast<int>(i64());
  else if (key == "synth.duration_cap_s") c.synth.duration_cap_s = dbl();
  else if (key == "split.train_fraction") c.train_fraction = dbl();
  else if (key == "window.W") c.window.windows = sz();
  else if (key == "window.window_s") c.window.window_s = dbl();
  else if (key == "window.L") c.window.max_packets = sz();
  else if (key == "model.H") c.dims.hidden = sz();
  else if (key == "model.A") c.dims.attention = sz();
  else if (key == "model.D") c.dims.embedding = sz();
  else if (key == "model.tied") c.tied = detail::parse_bool(key, v);
  else if (key == "train.margin") c.train.margin = dbl();
  else if (key == "train.learning_rate") c.train.learning_rate = dbl();
  else if (key == "train.batch_size") c.train.batch_size = sz();
  else if (key == "train.max_epochs") c.train.max_epochs = sz();
  else if (key == "train.target_loss") c.train.target_loss = dbl();
  else if (key == "train.hard_negative_frac") c.train.hard_negative_frac = dbl();
  else if (key == "train.checkpoint_every") c.checkpoint_every = sz();
  else if (key == "index.K") c.index_K = v == "auto" ? 0 : sz();
  else if (key == "index.n_probe") c.n_probe = sz();
  else if (key == "index.top_k") c.top_k = sz();
  else if (key == "match.tau") c.tau = dbl();
  else if (key == "eval.N") c.eval_N = sz();
  else if (key == "eval.M") c.eval_M = sz();
  else if (key == "eval.sigma") c.sigmas = detail::parse_list<double>(key, v);
  else if (key == "bench.counts") c.bench.counts = detail::parse_list<std::size_t>(key, v);
  else if (key == "bench.sigma") c.bench.sigma = dbl();
  else if (key == "bench.repetitions") c.bench.repetitions = sz();
  else if (key == "bench.cluster_rule") c.bench.cluster_rule = cluster_rule_from_string(v);
  else throw ConfigError("unknown key '" + key + "'");
}

inline void load_config(std::istream& is, RunConfig& c) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

}  // namespace rector
