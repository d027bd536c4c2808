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

// Partial-mapping scenarios, pairwise and IVF matchers, ROC sweeps and the
// comparison-count scaling benchmark.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rector/ann.hpp"
#include "rector/common.hpp"
#include "rector/neural.hpp"
#include "rector/traffic.hpp"

namespace rector {

struct FlowEmbedding {
  std::string flow_id;
  Role role = Role::ingress;
  std::string session_id;
  Embedding embedding;
};

inline nlohmann::ordered_json flow_embedding_to_json(const FlowEmbedding& fe) {
  nlohmann::ordered_json j;
  j["flow_id"] = fe.flow_id;
  j["role"] = to_string(fe.role);
  j["session_id"] = fe.session_id;
  j["embedding"] = fe.embedding.v;
  return j;
}

inline FlowEmbedding flow_embedding_from_json(const nlohmann::json& j) {
  return {j.at("flow_id").get<std::string>(), role_from_string(j.at("role").get<std::string>()),
          j.at("session_id").get<std::string>(), {j.at("embedding").get<Vec>()}};
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct ScenarioFlow {
  std::string flow_id;
  std::string session_id;
  Embedding embedding;
};

struct Scenario {
  std::vector<ScenarioFlow> ingress;
  std::vector<ScenarioFlow> egress;
  std::vector<std::pair<std::size_t, std::size_t>> true_pairs;  // (ingress idx, egress idx), sorted
  double sigma = 0.0;           // requested
  double realized_sigma = 0.0;  // |true_pairs| / min(N, M)
  std::uint64_t seed = 0;

  bool is_true(std::size_t i, std::size_t e) const {
    return std::binary_search(true_pairs.begin(), true_pairs.end(), std::make_pair(i, e));
  }
};

inline std::size_t true_pair_count(std::size_t N, std::size_t M, double sigma) {
  return static_cast<std::size_t>(std::llround(sigma * static_cast<double>(std::min(N, M))));
}

namespace detail {
inline void finish_scenario(Scenario& sc, std::vector<std::string>& true_sessions, Rng& rng) {
  rng.shuffle(sc.ingress);
  rng.shuffle(sc.egress);
  std::unordered_map<std::string, std::size_t> in_pos, eg_pos;
  for (std::size_t i = 0; i < sc.ingress.size(); ++i) in_pos[sc.ingress[i].session_id] = i;
  for (std::size_t i = 0; i < sc.egress.size(); ++i) eg_pos[sc.egress[i].session_id] = i;
  for (const auto& s : true_sessions) sc.true_pairs.emplace_back(in_pos.at(s), eg_pos.at(s));
  std::sort(sc.true_pairs.begin(), sc.true_pairs.end());
}
}  // namespace detail

// Draws round(sigma * min(N, M)) complete sessions as true pairs; the other
// slots are filled with flows whose counterpart is kept out of the scenario.
// Noise comes from the same pool (same circuits and websites).
inline Scenario build_scenario(const Dataset& test, std::span<const FlowEmbedding> store, std::size_t N,
                               std::size_t M, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw InvariantError("scenario: sigma must lie in (0, 1]");
  if (N < 1 || M < 1) throw InvariantError("scenario: N and M must be >= 1");
  std::unordered_map<std::string, const FlowEmbedding*> by_id;
  for (const auto& fe : store) by_id[fe.flow_id] = &fe;

  struct Sess {
    const FlowEmbedding* in = nullptr;
    const FlowEmbedding* out = nullptr;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Sess> sessions;
  for (const auto& f : test.flows) {
    auto it = by_id.find(f.flow_id);
    if (it == by_id.end()) continue;
    auto [s, inserted] = sessions.try_emplace(f.session_id);
    if (inserted) order.push_back(f.session_id);
    (f.role == Role::ingress ? s->second.in : s->second.out) = it->second;
  }
  std::vector<std::string> complete, in_only, out_only;
  for (const auto& s : order) {
    const auto& v = sessions.at(s);
    if (v.in && v.out) complete.push_back(s);
    else if (v.in) in_only.push_back(s);
    else out_only.push_back(s);
  }

  const std::size_t n_true = true_pair_count(N, M, sigma);
  const std::size_t need_sessions = N + M - n_true;
  if (complete.size() < n_true || complete.size() + in_only.size() + out_only.size() < need_sessions ||
      complete.size() + in_only.size() < N || complete.size() + out_only.size() < M)
    throw InvariantError("scenario: pool too small: need " + std::to_string(n_true) + " complete sessions and " +
                         std::to_string(need_sessions) + " distinct sessions (N=" + std::to_string(N) +
                         ", M=" + std::to_string(M) + "), have " + std::to_string(complete.size()) + " complete, " +
                         std::to_string(in_only.size()) + " ingress-only, " + std::to_string(out_only.size()) +
                         " egress-only");

  Rng rng(derive_seed(seed, "scenario", N, M, static_cast<std::uint64_t>(std::llround(sigma * 1e6))));
  rng.shuffle(complete);
  Scenario sc;
  sc.sigma = sigma;
  sc.seed = seed;
  std::vector<std::string> true_sessions(complete.begin(), complete.begin() + static_cast<std::ptrdiff_t>(n_true));
  auto add = [](std::vector<ScenarioFlow>& side, const FlowEmbedding* fe) {
    side.push_back({fe->flow_id, fe->session_id, fe->embedding});
  };
  for (const auto& s : true_sessions) {
    add(sc.ingress, sessions.at(s).in);
    add(sc.egress, sessions.at(s).out);
  }

  std::vector<std::string> rest(complete.begin() + static_cast<std::ptrdiff_t>(n_true), complete.end());
  std::vector<std::string> in_pool = in_only;
  in_pool.insert(in_pool.end(), rest.begin(), rest.end());
  rng.shuffle(in_pool);
  // Prefer single-sided sessions for ingress noise when they are needed to
  // leave enough complete sessions for the egress side.
  std::stable_partition(in_pool.begin(), in_pool.end(), [&](const std::string& s) { return !sessions.at(s).out; });
  std::set<std::string> used;
  for (std::size_t i = 0; i < N - n_true; ++i) {
    add(sc.ingress, sessions.at(in_pool[i]).in);
    used.insert(in_pool[i]);
  }
  std::vector<std::string> out_pool = out_only;
  for (const auto& s : rest)
    if (!used.count(s)) out_pool.push_back(s);
  if (out_pool.size() < M - n_true) throw InvariantError("scenario: pool too small for egress noise");
  rng.shuffle(out_pool);
  for (std::size_t i = 0; i < M - n_true; ++i) add(sc.egress, sessions.at(out_pool[i]).out);

  sc.realized_sigma = static_cast<double>(n_true) / static_cast<double>(std::min(N, M));
  detail::finish_scenario(sc, true_sessions, rng);
  return sc;
}

// Mixture-of-clusters embeddings for benchmarks that need more flows than a
// trained corpus provides. True-pair ingress vectors are perturbed copies of
// their egress partner.
inline Scenario synthetic_scenario(std::size_t n, double sigma, std::size_t dim, std::uint64_t seed,
                                   std::size_t clusters = 20) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw InvariantError("scenario: sigma must lie in (0, 1]");
  Rng rng(derive_seed(seed, "synthetic-scenario", n));
  auto unit = [&](Vec v) {
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    return Embedding{std::move(v)};
  };
  std::vector<Vec> centers(clusters, Vec(dim));
  for (auto& c : centers)
    for (double& x : c) x = rng.normal();
  auto sample = [&] {
    const auto& c = centers[rng.below(clusters)];
    Vec v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = c[d] / std::sqrt(static_cast<double>(dim)) + 0.45 * rng.normal() / std::sqrt(static_cast<double>(dim));
    return unit(std::move(v));
  };
  const std::size_t n_true = true_pair_count(n, n, sigma);
  Scenario sc;
  sc.sigma = sigma;
  sc.seed = seed;
  std::vector<std::string> true_sessions;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string sid = "s" + std::to_string(i);
    Embedding e = sample();
    if (i < n_true) {
      Vec v = e.v;
      for (double& x : v) x += 0.08 * rng.normal() / std::sqrt(static_cast<double>(dim));
      sc.ingress.push_back({sid + "_in", sid, unit(std::move(v))});
      true_sessions.push_back(sid);
    } else {
      sc.ingress.push_back({sid + "_in", sid, sample()});
    }
    sc.egress.push_back({sid + "_out", i < n_true ? sid : sid + "x", std::move(e)});
  }
  sc.realized_sigma = static_cast<double>(n_true) / static_cast<double>(n);
  detail::finish_scenario(sc, true_sessions, rng);
  return sc;
}

// ---------------------------------------------------------------------------
// Matchers
// ---------------------------------------------------------------------------

struct MatchDecision {
  std::size_t ingress = 0;  // index into Scenario::ingress
  std::size_t egress = 0;   // index into Scenario::egress
  double score = 0.0;
  bool declared = false;
};

struct MatchResult {
  std::vector<MatchDecision> decisions;  // every scored pair
  std::size_t comparisons = 0;
};

inline MatchResult match_pairwise(const Scenario& sc, double tau) {
  MatchResult r;
  r.decisions.reserve(sc.ingress.size() * sc.egress.size());
  for (std::size_t i = 0; i < sc.ingress.size(); ++i) {
    for (std::size_t e = 0; e < sc.egress.size(); ++e) {
      const double s = cosine_score(sc.ingress[i].embedding, sc.egress[e].embedding);
      r.decisions.push_back({i, e, s, s >= tau});
    }
  }
  r.comparisons = sc.ingress.size() * sc.egress.size();
  return r;
}

inline IvfIndex build_scenario_index(const Scenario& sc, std::size_t K, std::uint64_t seed,
                                     std::size_t n_probe_default = kDefaultProbes) {
  std::vector<IndexEntry> entries;
  entries.reserve(sc.egress.size());
  for (const auto& f : sc.egress) entries.push_back({f.flow_id, f.embedding});
  return build_index(entries, K, seed, n_probe_default);
}

// top_k == 0 keeps every scanned candidate.
inline MatchResult match_ann(const Scenario& sc, const IvfIndex& index, std::size_t n_probe, double tau,
                             std::size_t top_k) {
  std::unordered_map<std::string, std::size_t> egress_pos;
  for (std::size_t e = 0; e < sc.egress.size(); ++e) egress_pos[sc.egress[e].flow_id] = e;
  MatchResult r;
  const std::size_t k = top_k == 0 ? sc.egress.size() : top_k;
  for (std::size_t i = 0; i < sc.ingress.size(); ++i) {
    const auto res = query(index, sc.ingress[i].embedding, n_probe, k);
    r.comparisons += res.comparisons;
    for (const auto& h : res.hits) r.decisions.push_back({i, egress_pos.at(h.flow_id), h.score, h.score >= tau});
  }
  return r;
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

struct RocPoint {
  double tau = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

struct ScoredPair {
  double score = 0.0;
  bool is_true = false;
};

// One point per distinct score (declared <=> score >= tau), preceded by the
// tau = +inf origin. Pairs that were never scored count as undeclared, so
// n_true and n_negative are the full denominators.
inline std::vector<RocPoint> roc_sweep(std::span<const ScoredPair> scored, std::size_t n_true, std::size_t n_negative) {
  if (scored.empty()) throw InvariantError("roc: empty score set");
  if (n_true == 0 || n_negative == 0) throw InvariantError("roc: need at least one true pair and one non-pair");
  std::vector<ScoredPair> s(scored.begin(), scored.end());
  std::sort(s.begin(), s.end(), [](const ScoredPair& a, const ScoredPair& b) { return a.score > b.score; });
  std::vector<RocPoint> roc{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < s.size();) {
    const double tau = s[i].score;
    for (; i < s.size() && s[i].score == tau; ++i) (s[i].is_true ? tp : fp)++;
    roc.push_back({tau, static_cast<double>(tp) / static_cast<double>(n_true),
                   static_cast<double>(fp) / static_cast<double>(n_negative)});
  }
  return roc;
}

enum class FprDenominator {
  scored,     // non-true pairs the matcher actually scored
  all_pairs,  // N * M - |true_pairs|
};

inline std::vector<ScoredPair> scored_pairs(const Scenario& sc, const MatchResult& m) {
  std::vector<ScoredPair> out;
  out.reserve(m.decisions.size());
  for (const auto& d : m.decisions) out.push_back({d.score, sc.is_true(d.ingress, d.egress)});
  return out;
}

inline std::vector<RocPoint> roc_for(const Scenario& sc, const MatchResult& m, FprDenominator denom) {
  const auto pairs = scored_pairs(sc, m);
  std::size_t neg = 0;
  if (denom == FprDenominator::scored) {
    for (const auto& p : pairs) neg += !p.is_true;
  } else {
    neg = sc.ingress.size() * sc.egress.size() - sc.true_pairs.size();
  }
  return roc_sweep(pairs, sc.true_pairs.size(), neg);
}

// Step-function lookup: best TPR among points with FPR <= target.
inline double tpr_at_fpr(std::span<const RocPoint> roc, double fpr_target) {
  double best = 0.0;
  for (const auto& p : roc)
    if (p.fpr <= fpr_target) best = std::max(best, p.tpr);
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct EvalConfig {
  std::size_t N = 500;
  std::size_t M = 500;
  double sigma = 0.5;
  std::uint64_t seed = 0;
  std::size_t K = 0;  // 0 = auto (sqrt M)
  std::size_t n_probe = kDefaultProbes;
  std::size_t top_k = 0;  // 0 = every scanned candidate
  double tau = 0.5;
  std::vector<double> fpr_targets{0.01, 0.05, 0.1, 0.2};
};

struct MatcherReport {
  std::string matcher;
  std::vector<RocPoint> roc;         // FPR over all N*M - |true| non-pairs
  std::vector<RocPoint> roc_scored;  // FPR over scored non-pairs only
  std::map<double, double> tpr_at;   // all-pairs FPR target -> TPR
  std::size_t comparisons = 0;
  std::size_t declared = 0;  // at the configured tau
  std::size_t declared_true = 0;
  double seconds = 0.0;
};

struct EvalReport {
  EvalConfig config;
  std::size_t n_true = 0;
  double realized_sigma = 0.0;
  std::size_t K = 0;
  std::size_t n_probe = 0;
  double index_build_seconds = 0.0;
  std::vector<MatcherReport> matchers;
  std::string config_hash;
};

inline MatcherReport summarize_matcher(const std::string& name, const Scenario& sc, const MatchResult& m,
                                       const EvalConfig& cfg, double seconds) {
  MatcherReport r;
  r.matcher = name;
  r.roc = roc_for(sc, m, FprDenominator::all_pairs);
  r.roc_scored = roc_for(sc, m, FprDenominator::scored);
  for (double t : cfg.fpr_targets) r.tpr_at[t] = tpr_at_fpr(r.roc, t);
  r.comparisons = m.comparisons;
  for (const auto& d : m.decisions) {
    if (!d.declared) continue;
    ++r.declared;
    r.declared_true += sc.is_true(d.ingress, d.egress);
  }
  r.seconds = seconds;
  return r;
}

inline EvalReport evaluate_scenario(const Scenario& sc, const EvalConfig& cfg) {
  using clock = std::chrono::steady_clock;
  EvalReport rep;
  rep.config = cfg;
  rep.n_true = sc.true_pairs.size();
  rep.realized_sigma = sc.realized_sigma;

  auto t0 = clock::now();
  const MatchResult pw = match_pairwise(sc, cfg.tau);
  const double pw_s = std::chrono::duration<double>(clock::now() - t0).count();
  rep.matchers.push_back(summarize_matcher("pairwise", sc, pw, cfg, pw_s));

  t0 = clock::now();
  const IvfIndex idx = build_scenario_index(sc, cfg.K, derive_seed(cfg.seed, "eval-index"), cfg.n_probe);
  rep.index_build_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  rep.K = idx.K;
  rep.n_probe = std::min(cfg.n_probe, idx.K);
  t0 = clock::now();
  const MatchResult ann = match_ann(sc, idx, rep.n_probe, cfg.tau, cfg.top_k);
  const double ann_s = std::chrono::duration<double>(clock::now() - t0).count();
  rep.matchers.push_back(summarize_matcher("ann", sc, ann, cfg, ann_s));
  return rep;
}

inline EvalReport run_eval(const Dataset& test, std::span<const FlowEmbedding> store, const EvalConfig& cfg) {
  const Scenario sc = build_scenario(test, store, cfg.N, cfg.M, cfg.sigma, cfg.seed);
  return evaluate_scenario(sc, cfg);
}

namespace detail {
inline nlohmann::ordered_json roc_json(const std::vector<RocPoint>& roc) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : roc) {
    nlohmann::ordered_json j;
    j["tau"] = std::isinf(p.tau) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p.tau);
    j["tpr"] = p.tpr;
    j["fpr"] = p.fpr;
    arr.push_back(std::move(j));
  }
  return arr;
}
}  // namespace detail

// include_timings = false drops wall-clock fields (for byte-stable output).
inline nlohmann::ordered_json eval_report_to_json(const EvalReport& r, bool include_timings = true) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["config_hash"] = r.config_hash;
  j["config"] = {{"N", r.config.N},         {"M", r.config.M},     {"sigma", r.config.sigma},
                 {"seed", r.config.seed},   {"K", r.config.K},     {"n_probe", r.config.n_probe},
                 {"top_k", r.config.top_k}, {"tau", r.config.tau}, {"fpr_targets", r.config.fpr_targets}};
  j["n_true"] = r.n_true;
  j["realized_sigma"] = r.realized_sigma;
  j["K"] = r.K;
  j["n_probe"] = r.n_probe;
  if (include_timings) j["index_build_seconds"] = r.index_build_seconds;
  auto ms = nlohmann::ordered_json::array();
  for (const auto& m : r.matchers) {
    nlohmann::ordered_json mj;
    mj["matcher"] = m.matcher;
    mj["comparisons"] = m.comparisons;
    if (include_timings) mj["seconds"] = m.seconds;
    mj["declared"] = m.declared;
    mj["declared_true"] = m.declared_true;
    auto tp = nlohmann::ordered_json::array();
    for (const auto& [fpr, tpr] : m.tpr_at) tp.push_back({{"fpr", fpr}, {"tpr", tpr}});
    mj["tpr_at_fpr"] = std::move(tp);
    mj["roc"] = detail::roc_json(m.roc);
    mj["roc_scored_fpr"] = detail::roc_json(m.roc_scored);
    ms.push_back(std::move(mj));
  }
  j["matchers"] = std::move(ms);
  return j;
}

inline std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::ostringstream os;
  os.precision(17);
  os << "tau,tpr,fpr\n";
  for (const auto& p : roc) {
    if (std::isinf(p.tau)) os << "inf";
    else os << p.tau;
    os << ',' << p.tpr << ',' << p.fpr << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Scaling benchmark
// ---------------------------------------------------------------------------

using ScenarioSource = std::function<Scenario(std::size_t n, double sigma, std::uint64_t seed)>;

struct BenchConfig {
  std::vector<std::size_t> counts{100, 250, 500, 1000, 2000};
  double sigma = 0.1;
  std::size_t repetitions = 1;
  std::size_t n_probe = kDefaultProbes;
  ClusterRule cluster_rule = ClusterRule::m_over_log2_m;
  std::size_t dim = 32;
  double tau = 0.5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t n = 0;
  std::string matcher;
  double comparisons = 0.0;  // mean over repetitions
  double wall_s = 0.0;       // mean over repetitions
  double ratio = 1.0;        // comparisons relative to the smallest n
  double wall_ratio = 1.0;
};

struct BenchResult {
  BenchConfig config;
  std::vector<BenchRow> rows;
  double slope_pairwise = 0.0;  // log-log slope of comparisons vs n
  double slope_ann = 0.0;
  double wall_slope_pairwise = 0.0;
  double wall_slope_ann = 0.0;
};

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need >= 2 paired samples");
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += std::log(x[i]), my += std::log(std::max(y[i], 1e-300));
  mx /= n, my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(std::max(y[i], 1e-300)) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline BenchResult scaling_bench(const BenchConfig& cfg, const ScenarioSource& source = {}) {
  if (cfg.counts.size() < 3) throw InvariantError("bench: need at least 3 flow counts");
  if (!std::is_sorted(cfg.counts.begin(), cfg.counts.end()) ||
      std::adjacent_find(cfg.counts.begin(), cfg.counts.end()) != cfg.counts.end())
    throw InvariantError("bench: flow counts must be strictly ascending");
  if (cfg.repetitions < 1) throw InvariantError("bench: repetitions must be >= 1");
  using clock = std::chrono::steady_clock;
  auto make = source ? source : ScenarioSource([&](std::size_t n, double s, std::uint64_t seed) {
    return synthetic_scenario(n, s, cfg.dim, seed);
  });

  BenchResult res;
  res.config = cfg;
  std::vector<double> xs, pw_c, pw_w, ann_c, ann_w;
  for (std::size_t n : cfg.counts) {
    double pc = 0, pw = 0, ac = 0, aw = 0;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const Scenario sc = make(n, cfg.sigma, derive_seed(cfg.seed, "bench", n, rep));
      auto t0 = clock::now();
      pc += static_cast<double>(match_pairwise(sc, cfg.tau).comparisons);
      pw += std::chrono::duration<double>(clock::now() - t0).count();

      const std::size_t K = auto_cluster_count(sc.egress.size(), cfg.cluster_rule);
      const IvfIndex idx = build_scenario_index(sc, K, derive_seed(cfg.seed, "bench-index", n, rep));
      t0 = clock::now();
      ac += static_cast<double>(match_ann(sc, idx, std::min(cfg.n_probe, idx.K), cfg.tau, 0).comparisons);
      aw += std::chrono::duration<double>(clock::now() - t0).count();
    }
    const double r = static_cast<double>(cfg.repetitions);
    xs.push_back(static_cast<double>(n));
    pw_c.push_back(pc / r), pw_w.push_back(pw / r), ann_c.push_back(ac / r), ann_w.push_back(aw / r);
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    res.rows.push_back({cfg.counts[i], "pairwise", pw_c[i], pw_w[i], pw_c[i] / pw_c[0], pw_w[i] / pw_w[0]});
    res.rows.push_back({cfg.counts[i], "ann", ann_c[i], ann_w[i], ann_c[i] / ann_c[0], ann_w[i] / ann_w[0]});
  }
  res.slope_pairwise = loglog_slope(xs, pw_c);
  res.slope_ann = loglog_slope(xs, ann_c);
  res.wall_slope_pairwise = loglog_slope(xs, pw_w);
  res.wall_slope_ann = loglog_slope(xs, ann_w);
  return res;
}

inline std::string bench_csv(const BenchResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << "n,matcher,comparisons,wall_s,ratio\n";
  for (const auto& row : r.rows) os << row.n << ',' << row.matcher << ',' << row.comparisons << ',' << row.wall_s << ',' << row.ratio << '\n';
  return os.str();
}

inline nlohmann::ordered_json bench_to_json(const BenchResult& r, bool include_timings = true) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["config"] = {{"counts", r.config.counts},           {"sigma", r.config.sigma},
                 {"repetitions", r.config.repetitions}, {"n_probe", r.config.n_probe},
                 {"cluster_rule", to_string(r.config.cluster_rule)}, {"seed", r.config.seed}};
  j["slope_comparisons"] = {{"pairwise", r.slope_pairwise}, {"ann", r.slope_ann}};
  if (include_timings) j["slope_wall"] = {{"pairwise", r.wall_slope_pairwise}, {"ann", r.wall_slope_ann}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json rj{{"n", row.n}, {"matcher", row.matcher}, {"comparisons", row.comparisons}, {"ratio", row.ratio}};
    if (include_timings) rj["wall_s"] = row.wall_s, rj["wall_ratio"] = row.wall_ratio;
    rows.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace rector
