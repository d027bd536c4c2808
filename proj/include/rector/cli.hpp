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

// Command-line driver: one subcommand per pipeline stage. Every artifact gets
// a `<file>.meta.json` sidecar recording the config hash that produced it.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rector/rector.hpp"

namespace rector::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Context {
  RunConfig rc;
  bool force = false;
  bool timings = true;
  std::ostream* out = &std::cout;
};

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingInputError(what + " not found: " + p.string());
}

inline std::ifstream open_in(const fs::path& p, const std::string& what) {
  require_file(p, what);
  std::ifstream is(p, std::ios::binary);
  if (!is) throw MissingInputError("cannot open " + what + ": " + p.string());
  return is;
}

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << content;
  if (!os) throw Error("cannot write " + p.string());
}

inline fs::path meta_path(const fs::path& p) { return fs::path(p.string() + ".meta.json"); }

inline void write_meta(const fs::path& p, const std::string& artifact, const Context& cx,
                       const ordered_json& extra = ordered_json::object()) {
  ordered_json j;
  j["artifact"] = artifact;
  j["config_hash"] = cx.rc.config_hash();
  j["seed"] = cx.rc.seed;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file(meta_path(p), j.dump(2) + "\n");
}

// Artifacts without a sidecar (hand-made inputs) are accepted as-is.
inline void check_meta(const fs::path& p, const Context& cx) {
  const auto mp = meta_path(p);
  if (!fs::exists(mp)) return;
  std::ifstream is(mp);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("unreadable metadata " + mp.string() + ": " + e.what());
  }
  const auto have = j.value("config_hash", std::string());
  const auto want = cx.rc.config_hash();
  if (have != want && !cx.force)
    throw InvariantError("config hash mismatch for " + p.string() + ": artifact " + have + ", current " + want +
                         " (regenerate it or pass --force)");
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline Dataset load_dataset(const fs::path& p, const Context& cx, const std::string& what) {
  auto is = open_in(p, what);
  check_meta(p, cx);
  Dataset ds = read_flows_jsonl(is);
  ds.meta.source = p.string();
  const auto bad = validate_dataset(ds);
  if (!bad.empty())
    throw InvariantError(what + " " + p.string() + ": " + std::to_string(bad.size()) + " violation(s), first: flow '" +
                         bad.front().flow_id + "' " + bad.front().rule);
  return ds;
}

inline void save_dataset(const fs::path& p, const Dataset& ds, const Context& cx, const std::string& artifact) {
  std::ostringstream os;
  write_flows_jsonl(os, ds);
  write_file(p, os.str());
  write_meta(p, artifact, cx, {{"flows", ds.flows.size()}, {"source", ds.meta.source}});
}

struct FlowIdentity {
  std::string flow_id;
  Role role = Role::ingress;
  std::string session_id;
};

inline fs::path ids_path(const fs::path& features) {
  auto p = features;
  return p.replace_extension(".ids.jsonl");
}

inline fs::path features_for(const Context& cx, const fs::path& dataset) {
  return fs::path(cx.rc.paths.features) / (dataset.stem().string() + ".rctf");
}

struct FeatureSet {
  std::vector<FeatureTensor> tensors;
  std::vector<FlowIdentity> ids;
};

inline FeatureSet load_features(const fs::path& p, const Context& cx) {
  auto is = open_in(p, "feature dump");
  check_meta(p, cx);
  FeatureSet fs_;
  std::size_t W = 0, L = 0;
  fs_.tensors = read_feature_dump(is, &W, &L);
  if (W != cx.rc.window.windows || L != cx.rc.window.max_packets)
    throw InvariantError("feature dump " + p.string() + " has W=" + std::to_string(W) + " L=" + std::to_string(L) +
                         ", configuration expects W=" + std::to_string(cx.rc.window.windows) +
                         " L=" + std::to_string(cx.rc.window.max_packets));
  auto ids = open_in(ids_path(p), "feature id list");
  std::string line;
  while (std::getline(ids, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    fs_.ids.push_back({j.at("flow_id").get<std::string>(), role_from_string(j.at("role").get<std::string>()),
                       j.at("session_id").get<std::string>()});
  }
  if (fs_.ids.size() != fs_.tensors.size())
    throw InvariantError("feature dump " + p.string() + " holds " + std::to_string(fs_.tensors.size()) +
                         " tensors but its id list has " + std::to_string(fs_.ids.size()));
  return fs_;
}

inline Checkpoint load_checkpoint(const fs::path& p, const Context& cx) {
  auto is = open_in(p, "checkpoint");
  check_meta(p, cx);
  try {
    return checkpoint_from_json(nlohmann::json::parse(is), &cx.rc.window, &cx.rc.dims);
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("checkpoint " + p.string() + ": " + e.what());
  }
}

inline std::vector<FlowEmbedding> load_embeddings(const fs::path& p, const Context& cx) {
  auto is = open_in(p, "embeddings");
  check_meta(p, cx);
  std::vector<FlowEmbedding> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(flow_embedding_from_json(nlohmann::json::parse(line)));
    if (out.back().embedding.size() != cx.rc.dims.embedding)
      throw InvariantError("embedding " + out.back().flow_id + " has width " +
                           std::to_string(out.back().embedding.size()) + ", configuration expects " +
                           std::to_string(cx.rc.dims.embedding));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void cmd_gen(Context& cx) {
  SynthConfig sc = cx.rc.synth;
  sc.seed = cx.rc.seed;
  const Dataset ds = gen_synthetic(sc);
  if (const auto bad = validate_dataset(ds); !bad.empty())
    throw Error("generator produced an invalid dataset: " + bad.front().flow_id + " " + bad.front().rule);
  save_dataset(cx.rc.paths.dataset, ds, cx, "dataset");
  *cx.out << "gen: " << ds.flows.size() << " flows -> " << cx.rc.paths.dataset << "\n";
}

inline void cmd_split(Context& cx) {
  const Dataset ds = load_dataset(cx.rc.paths.dataset, cx, "dataset");
  const auto r = split_by_circuit(ds, cx.rc.train_fraction, cx.rc.seed);
  save_dataset(cx.rc.paths.train, r.train, cx, "train split");
  save_dataset(cx.rc.paths.test, r.test, cx, "test split");
  *cx.out << "split: " << r.train.flows.size() << " train / " << r.test.flows.size() << " test flows\n";
}

inline void cmd_featurize(Context& cx, std::vector<std::string> inputs) {
  if (inputs.empty()) inputs = {cx.rc.paths.train, cx.rc.paths.test};
  for (const auto& in : inputs) {
    const Dataset ds = load_dataset(in, cx, "dataset");
    std::vector<FeatureTensor> feats(ds.flows.size());
    parallel_for(ds.flows.size(), worker_count(),
                 [&](std::size_t i) { feats[i] = featurize_flow(ds.flows[i], cx.rc.window); });
    const fs::path out = features_for(cx, in);
    std::ostringstream bin, ids;
    write_feature_dump(bin, cx.rc.window, feats);
    for (const auto& f : ds.flows) {
      ordered_json j{{"flow_id", f.flow_id}, {"role", to_string(f.role)}, {"session_id", f.session_id}};
      ids << j.dump() << '\n';
    }
    write_file(out, bin.str());
    write_file(ids_path(out), ids.str());
    write_meta(out, "features", cx, {{"flows", feats.size()}, {"source", in}});
    *cx.out << "featurize: " << feats.size() << " flows -> " << out.string() << "\n";
  }
}

inline void write_checkpoints(const fs::path& dir, const TrainState& st, const Context& cx) {
  for (Role r : {Role::ingress, Role::egress}) {
    const fs::path p = dir / (std::string(to_string(r)) + ".json");
    write_file(p, checkpoint_to_json(st.tower(r), cx.rc.window).dump() + "\n");
    write_meta(p, "checkpoint", cx, {{"role", to_string(r)}, {"epoch", st.epoch}});
  }
}

inline void cmd_train(Context& cx, std::optional<std::string> features) {
  const fs::path train_path = cx.rc.paths.train;
  const Dataset ds = load_dataset(train_path, cx, "training dataset");
  const fs::path fpath = features ? fs::path(*features) : features_for(cx, train_path);
  const FeatureSet fset = load_features(fpath, cx);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < fset.ids.size(); ++i) pos[fset.ids[i].flow_id] = i;
  std::vector<FeatureTensor> aligned;
  aligned.reserve(ds.flows.size());
  for (const auto& f : ds.flows) {
    auto it = pos.find(f.flow_id);
    if (it == pos.end()) throw InvariantError("flow " + f.flow_id + " has no features in " + fpath.string());
    aligned.push_back(fset.tensors[it->second]);
  }
  const TrainingCorpus corpus = build_corpus(ds, aligned);
  const TrainConfig tc = cx.rc.train_config();
  const fs::path dir = cx.rc.paths.checkpoints;
  const fs::path log = dir / "train_log.csv";

  auto write_log = [&](const TrainState& st) {
    std::ostringstream os;
    os << std::setprecision(17) << "epoch,mean_loss,wall_seconds\n";
    for (std::size_t e = 0; e < st.loss_history.size(); ++e)
      os << e + 1 << ',' << st.loss_history[e] << ',' << (cx.timings ? st.wall_seconds[e] : 0.0) << '\n';
    write_file(log, os.str());
  };
  const TrainState st = train(corpus, tc, [&](const TrainState& s) {
    write_log(s);
    *cx.out << "epoch " << s.epoch << " loss " << s.loss_history.back() << "\n" << std::flush;
    if (cx.rc.checkpoint_every > 0 && s.epoch % cx.rc.checkpoint_every == 0) {
      std::ostringstream name;
      name << "epoch_" << std::setw(4) << std::setfill('0') << s.epoch;
      write_checkpoints(dir / name.str(), s, cx);
    }
  });
  write_checkpoints(dir, st, cx);
  write_meta(log, "training log", cx, {{"epochs", st.epoch}, {"final_loss", st.loss_history.back()}});
  *cx.out << "train: " << corpus.size() << " sessions, " << st.epoch << " epochs, final loss "
          << st.loss_history.back() << " -> " << dir.string() << "\n";
}

inline void cmd_embed(Context& cx, std::vector<std::string> features) {
  if (features.empty()) features = {features_for(cx, cx.rc.paths.test).string()};
  const fs::path dir = cx.rc.paths.checkpoints;
  const Checkpoint ck_in = load_checkpoint(dir / "ingress.json", cx);
  const Checkpoint ck_out = load_checkpoint(dir / "egress.json", cx);
  std::ostringstream os;
  std::size_t total = 0;
  for (const auto& fp : features) {
    const FeatureSet fset = load_features(fp, cx);
    std::vector<Embedding> emb(fset.tensors.size());
    parallel_for(emb.size(), worker_count(), [&](std::size_t i) {
      const auto& params = fset.ids[i].role == Role::ingress ? ck_in.params : ck_out.params;
      emb[i] = embed_flow(params, fset.tensors[i]);
    });
    for (std::size_t i = 0; i < emb.size(); ++i)
      os << flow_embedding_to_json({fset.ids[i].flow_id, fset.ids[i].role, fset.ids[i].session_id, emb[i]}).dump()
         << '\n';
    total += emb.size();
  }
  write_file(cx.rc.paths.embeddings, os.str());
  write_meta(cx.rc.paths.embeddings, "embeddings", cx, {{"flows", total}});
  *cx.out << "embed: " << total << " flows -> " << cx.rc.paths.embeddings << "\n";
}

inline void cmd_index(Context& cx) {
  const auto store = load_embeddings(cx.rc.paths.embeddings, cx);
  std::vector<IndexEntry> entries;
  for (const auto& fe : store)
    if (fe.role == Role::egress) entries.push_back({fe.flow_id, fe.embedding});
  if (entries.empty()) throw InvariantError("index: no egress embeddings in " + cx.rc.paths.embeddings);
  const IvfIndex idx = build_index(entries, cx.rc.index_K, derive_seed(cx.rc.seed, "index"), cx.rc.n_probe);
  write_file(cx.rc.paths.index, index_to_json(idx).dump() + "\n");
  write_meta(cx.rc.paths.index, "index", cx, {{"K", idx.K}, {"entries", idx.size()}});
  *cx.out << "index: " << idx.size() << " egress flows in " << idx.K << " lists -> " << cx.rc.paths.index << "\n";
}

inline void cmd_match(Context& cx, const std::string& out_csv) {
  const fs::path ipath = cx.rc.paths.index;
  require_file(ipath, "index");
  const auto store = load_embeddings(cx.rc.paths.embeddings, cx);
  auto is = open_in(ipath, "index");
  check_meta(ipath, cx);
  IvfIndex idx;
  try {
    idx = index_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError("index " + ipath.string() + ": " + e.what());
  }
  if (idx.dim() != cx.rc.dims.embedding)
    throw InvariantError("index " + ipath.string() + " has width " + std::to_string(idx.dim()) +
                         ", configuration expects " + std::to_string(cx.rc.dims.embedding));
  const std::size_t n_probe = std::min(cx.rc.n_probe, idx.K);
  const std::size_t top_k = cx.rc.top_k == 0 ? idx.size() : cx.rc.top_k;
  std::ostringstream os;
  os << std::setprecision(17) << "ingress_id,egress_id,score,declared\n";
  std::size_t queries = 0, comparisons = 0, declared = 0;
  for (const auto& fe : store) {
    if (fe.role != Role::ingress) continue;
    const auto res = query(idx, fe.embedding, n_probe, top_k);
    ++queries;
    comparisons += res.comparisons;
    for (const auto& h : res.hits) {
      const bool d = h.score >= cx.rc.tau;
      declared += d;
      os << fe.flow_id << ',' << h.flow_id << ',' << h.score << ',' << (d ? 1 : 0) << '\n';
    }
  }
  write_file(out_csv, os.str());
  write_meta(out_csv, "matches", cx,
             {{"queries", queries}, {"comparisons", comparisons}, {"declared", declared}, {"n_probe", n_probe},
              {"tau", cx.rc.tau}});
  *cx.out << "match: " << queries << " queries, " << comparisons << " comparisons, " << declared
          << " declared -> " << out_csv << "\n";
}

inline void cmd_eval(Context& cx) {
  const Dataset test = load_dataset(cx.rc.paths.test, cx, "test dataset");
  const auto store = load_embeddings(cx.rc.paths.embeddings, cx);
  const fs::path dir = cx.rc.paths.reports;
  for (double sigma : cx.rc.sigmas) {
    EvalConfig ec;
    ec.N = cx.rc.eval_N;
    ec.M = cx.rc.eval_M;
    ec.sigma = sigma;
    ec.seed = derive_seed(cx.rc.seed, "eval");
    ec.K = cx.rc.index_K;
    ec.n_probe = cx.rc.n_probe;
    ec.top_k = cx.rc.top_k;
    ec.tau = cx.rc.tau;
    EvalReport rep = run_eval(test, store, ec);
    rep.config_hash = cx.rc.config_hash();
    const std::string tag = "sigma_" + fmt_num(sigma);
    const fs::path json = dir / ("eval_" + tag + ".json");
    write_file(json, eval_report_to_json(rep, cx.timings).dump(2) + "\n");
    for (const auto& m : rep.matchers) write_file(dir / ("roc_" + tag + "_" + m.matcher + ".csv"), roc_csv(m.roc));
    *cx.out << "eval: sigma " << sigma << " n_true " << rep.n_true;
    for (const auto& m : rep.matchers) *cx.out << ", " << m.matcher << " TPR@0.2 " << m.tpr_at.at(0.2);
    *cx.out << " -> " << json.string() << "\n";
  }
}

inline void cmd_bench(Context& cx) {
  BenchConfig bc = cx.rc.bench;
  bc.dim = cx.rc.dims.embedding;
  bc.n_probe = cx.rc.n_probe;
  bc.tau = cx.rc.tau;
  bc.seed = derive_seed(cx.rc.seed, "bench");
  const BenchResult r = scaling_bench(bc);
  const fs::path dir = cx.rc.paths.reports;
  std::string csv = bench_csv(r);
  if (!cx.timings) {
    BenchResult z = r;
    for (auto& row : z.rows) row.wall_s = 0.0;
    csv = bench_csv(z);
  }
  write_file(dir / "scaling.csv", csv);
  write_file(dir / "scaling.json", bench_to_json(r, cx.timings).dump(2) + "\n");
  *cx.out << "bench: comparisons slope pairwise " << r.slope_pairwise << ", ann " << r.slope_ann << " -> "
          << (dir / "scaling.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void report_error(std::ostream& err, int code, const std::string& kind, const std::string& msg) {
  ordered_json j{{"error", {{"kind", kind}, {"exit_code", code}, {"message", msg}}}};
  err << j.dump() << "\n";
}

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::missing_input: return "missing_input";
    case ErrorKind::invariant: return "invariant_violation";
    default: return "internal";
  }
}

// Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Flow correlation pipeline: gen, split, featurize, train, embed, index, match, eval, bench", "rector"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool force = false, no_timings = false;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> inputs;
  std::optional<std::string> features_opt;
  std::string match_out;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "run seed (overrides the config)");
    sub->add_option("--set", sets, "extra key=value override, repeatable");
    sub->add_flag("--force", force, "accept artifacts produced under a different config hash");
    sub->add_flag("--no-timings", no_timings, "write zero / omit wall-clock fields for byte-stable output");
  };
  auto key = [&](CLI::App* sub, const std::string& flag, const std::string& cfg_key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&overrides, cfg_key](const std::string& v) {
      overrides.emplace_back(cfg_key, v);
    }, help);
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic paired-flow dataset");
  common(gen);
  key(gen, "--circuits", "synth.circuits", "number of circuits");
  key(gen, "--websites", "synth.websites", "number of websites");
  key(gen, "--visits", "synth.visits", "visits per circuit/website pair");
  key(gen, "-o,--out", "paths.dataset", "output JSONL");

  auto* split = app.add_subcommand("split", "circuit-disjoint train/test split");
  common(split);
  key(split, "-i,--input", "paths.dataset", "dataset JSONL");
  key(split, "--train-fraction", "split.train_fraction", "fraction of circuits used for training");
  key(split, "--train-out", "paths.train", "train JSONL");
  key(split, "--test-out", "paths.test", "test JSONL");

  auto* feat = app.add_subcommand("featurize", "window and encode flows into feature dumps");
  common(feat);
  feat->add_option("-i,--input", inputs, "dataset JSONL, repeatable (default: train and test splits)");
  key(feat, "--features-dir", "paths.features", "output directory");

  auto* tr = app.add_subcommand("train", "train the ingress/egress encoders");
  common(tr);
  key(tr, "-i,--input", "paths.train", "training dataset JSONL");
  tr->add_option("--features", features_opt, "feature dump (default: <features>/<train stem>.rctf)");
  key(tr, "--epochs", "train.max_epochs", "maximum epochs");
  key(tr, "--lr", "train.learning_rate", "Adam learning rate");
  key(tr, "--margin", "train.margin", "triplet margin");
  key(tr, "--hard-negative-frac", "train.hard_negative_frac", "fraction of mined negatives");
  key(tr, "--checkpoint-every", "train.checkpoint_every", "write a checkpoint every k epochs (0 = final only)");
  key(tr, "--checkpoints", "paths.checkpoints", "checkpoint directory");

  auto* emb = app.add_subcommand("embed", "embed featurized flows with trained checkpoints");
  common(emb);
  emb->add_option("--features", inputs, "feature dump, repeatable (default: test split)");
  key(emb, "--checkpoints", "paths.checkpoints", "checkpoint directory");
  key(emb, "-o,--out", "paths.embeddings", "output JSONL");

  auto* idx = app.add_subcommand("index", "build the clustered egress index");
  common(idx);
  key(idx, "--embeddings", "paths.embeddings", "embeddings JSONL");
  key(idx, "-K,--clusters", "index.K", "cluster count or 'auto'");
  key(idx, "--n-probe", "index.n_probe", "default probe count");
  key(idx, "-o,--out", "paths.index", "output JSON");

  auto* mt = app.add_subcommand("match", "query ingress embeddings against the index");
  common(mt);
  key(mt, "--embeddings", "paths.embeddings", "embeddings JSONL");
  key(mt, "--index", "paths.index", "index JSON");
  key(mt, "--tau", "match.tau", "declaration threshold");
  key(mt, "--n-probe", "index.n_probe", "probed clusters per query");
  key(mt, "--top-k", "index.top_k", "candidates kept per query (0 = all scanned)");
  mt->add_option("-o,--out", match_out, "decisions CSV (default: <reports>/matches.csv)");

  auto* ev = app.add_subcommand("eval", "sigma sweep with ROC reports");
  common(ev);
  key(ev, "--test", "paths.test", "test dataset JSONL");
  key(ev, "--embeddings", "paths.embeddings", "embeddings JSONL");
  ev->add_option_function<std::vector<std::string>>("--sigma", [&](const std::vector<std::string>& v) {
    std::string joined;
    for (const auto& s : v) joined += (joined.empty() ? "" : ",") + s;
    overrides.emplace_back("eval.sigma", joined);
  }, "overlap sigma, repeatable");
  key(ev, "-N", "eval.N", "ingress flows per scenario");
  key(ev, "-M", "eval.M", "egress flows per scenario");
  key(ev, "-K,--clusters", "index.K", "cluster count or 'auto'");
  key(ev, "--n-probe", "index.n_probe", "probed clusters per query");
  key(ev, "--tau", "match.tau", "declaration threshold");
  key(ev, "--reports", "paths.reports", "report directory");

  auto* bn = app.add_subcommand("bench", "comparison-count scaling benchmark");
  common(bn);
  key(bn, "--counts", "bench.counts", "comma-separated flow counts");
  key(bn, "--sigma", "bench.sigma", "overlap sigma");
  key(bn, "--repetitions", "bench.repetitions", "repetitions per count");
  key(bn, "--cluster-rule", "bench.cluster_rule", "sqrt or m_over_log2m");
  key(bn, "--reports", "paths.reports", "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    report_error(err, 3, "usage", e.what());
    return 3;
  }

  try {
    Context cx;
    cx.out = &out;
    if (!config_path.empty()) {
      auto is = open_in(config_path, "config file");
      load_config(is, cx.rc);
    }
    if (seed) cx.rc.seed = *seed;
    for (const auto& [k, v] : overrides) apply_config_value(cx.rc, k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_config_value(cx.rc, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    cx.rc.validate();
    cx.force = force;
    cx.timings = !no_timings;

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen") cmd_gen(cx);
    else if (name == "split") cmd_split(cx);
    else if (name == "featurize") cmd_featurize(cx, inputs);
    else if (name == "train") cmd_train(cx, features_opt);
    else if (name == "embed") cmd_embed(cx, inputs);
    else if (name == "index") cmd_index(cx);
    else if (name == "match") cmd_match(cx, match_out.empty() ? (fs::path(cx.rc.paths.reports) / "matches.csv").string() : match_out);
    else if (name == "eval") cmd_eval(cx);
    else if (name == "bench") cmd_bench(cx);
    return 0;
  } catch (const Error& e) {
    report_error(err, e.exit_code(), kind_name(e.kind()), e.what());
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    report_error(err, 3, kind_name(ErrorKind::invariant), std::string("malformed JSON: ") + e.what());
    return 3;
  } catch (const std::exception& e) {
    report_error(err, 1, kind_name(ErrorKind::internal), e.what());
    return 1;
  }
}

}  // namespace rector::cli
