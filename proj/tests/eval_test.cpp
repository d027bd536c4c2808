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

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rector/eval.hpp"

namespace rector {
namespace {

struct Pool {
  Dataset ds;
  std::vector<FlowEmbedding> store;
};

// Sessions s0.. are complete, then ingress-only, then egress-only.
Pool make_pool(std::size_t complete, std::size_t in_only, std::size_t out_only, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Pool p;
  std::size_t sid = 0;
  auto add = [&](const std::string& s, Role r) {
    const std::string id = s + (r == Role::ingress ? "_in" : "_out");
    p.ds.flows.push_back({id, r, static_cast<std::int64_t>(sid % 7), static_cast<std::int64_t>(sid % 5), s, {}});
    p.store.push_back({id, r, s, oracle::random_unit(g, 8)});
  };
  for (std::size_t i = 0; i < complete; ++i, ++sid) add("s" + std::to_string(sid), Role::ingress), add("s" + std::to_string(sid), Role::egress);
  for (std::size_t i = 0; i < in_only; ++i, ++sid) add("s" + std::to_string(sid), Role::ingress);
  for (std::size_t i = 0; i < out_only; ++i, ++sid) add("s" + std::to_string(sid), Role::egress);
  return p;
}

void check_accounting(const Scenario& sc, std::size_t N, std::size_t M, std::size_t n_true) {
  ASSERT_EQ(sc.ingress.size(), N);
  ASSERT_EQ(sc.egress.size(), M);
  ASSERT_EQ(sc.true_pairs.size(), n_true);
  std::set<std::string> in_s, out_s, ids;
  for (const auto& f : sc.ingress) in_s.insert(f.session_id), ids.insert(f.flow_id);
  for (const auto& f : sc.egress) out_s.insert(f.session_id), ids.insert(f.flow_id);
  EXPECT_EQ(in_s.size(), N);
  EXPECT_EQ(out_s.size(), M);
  EXPECT_EQ(ids.size(), N + M);
  // A session shows up on both sides exactly when it is a declared true pair.
  std::size_t shared = 0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t e = 0; e < M; ++e) {
      const bool same = sc.ingress[i].session_id == sc.egress[e].session_id;
      ASSERT_EQ(same, sc.is_true(i, e));
      shared += same;
    }
  EXPECT_EQ(shared, n_true);
}

TEST(Scenario, AllTrueAtSigmaOne) {
  const auto p = make_pool(60, 0, 0, 1);
  const auto sc = build_scenario(p.ds, p.store, 50, 50, 1.0, 3);
  check_accounting(sc, 50, 50, 50);
  EXPECT_DOUBLE_EQ(sc.realized_sigma, 1.0);
}

TEST(Scenario, TenPercentOfFiveHundred) {
  const auto p = make_pool(500, 250, 250, 2);
  const auto sc = build_scenario(p.ds, p.store, 500, 500, 0.1, 4);
  check_accounting(sc, 500, 500, 50);
  EXPECT_DOUBLE_EQ(sc.realized_sigma, 0.1);
}

TEST(Scenario, NoiseFromCompleteSessionsOnly) {
  // With no single-sided flows the noise must come from split-up sessions.
  const auto p = make_pool(950, 0, 0, 3);
  check_accounting(build_scenario(p.ds, p.store, 500, 500, 0.1, 5), 500, 500, 50);
}

TEST(Scenario, AccountingProperty) {
  std::mt19937_64 g(4);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t N = 1 + g() % 60, M = 1 + g() % 60;
    const double sigma = (1 + g() % 100) / 100.0;
    const auto p = make_pool(N + M, g() % 20, g() % 20, rep);
    const auto sc = build_scenario(p.ds, p.store, N, M, sigma, rep);
    check_accounting(sc, N, M, true_pair_count(N, M, sigma));
  }
}

TEST(Scenario, RoundingAndErrors) {
  EXPECT_EQ(true_pair_count(500, 500, 0.1), 50u);
  EXPECT_EQ(true_pair_count(3, 10, 0.5), 2u);
  EXPECT_EQ(true_pair_count(10, 7, 1.0), 7u);
  const auto p = make_pool(20, 0, 0, 5);
  EXPECT_THROW(build_scenario(p.ds, p.store, 10, 10, 0.0, 1), InvariantError);
  EXPECT_THROW(build_scenario(p.ds, p.store, 10, 10, 1.5, 1), InvariantError);
  EXPECT_THROW(build_scenario(p.ds, p.store, 0, 10, 0.5, 1), InvariantError);
  try {
    build_scenario(p.ds, p.store, 50, 50, 0.5, 1);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("pool too small"), std::string::npos);
  }
}

TEST(Scenario, Deterministic) {
  const auto p = make_pool(120, 10, 10, 6);
  const auto a = build_scenario(p.ds, p.store, 60, 60, 0.3, 9);
  const auto b = build_scenario(p.ds, p.store, 60, 60, 0.3, 9);
  const auto c = build_scenario(p.ds, p.store, 60, 60, 0.3, 10);
  auto ids = [](const Scenario& s) {
    std::vector<std::string> v;
    for (const auto& f : s.ingress) v.push_back(f.flow_id);
    for (const auto& f : s.egress) v.push_back(f.flow_id);
    return v;
  };
  EXPECT_EQ(ids(a), ids(b));
  EXPECT_EQ(a.true_pairs, b.true_pairs);
  EXPECT_NE(ids(a), ids(c));
}

TEST(Synthetic, Accounting) {
  const auto sc = synthetic_scenario(300, 0.1, 16, 1);
  check_accounting(sc, 300, 300, 30);
}

TEST(Pairwise, ComparisonsAndThresholds) {
  const auto sc = synthetic_scenario(10, 0.5, 8, 2);
  auto r = match_pairwise(sc, -1.0);
  EXPECT_EQ(r.comparisons, 100u);
  ASSERT_EQ(r.decisions.size(), 100u);
  for (const auto& d : r.decisions) EXPECT_TRUE(d.declared);
  r = match_pairwise(sc, 1.0 + 1e-9);
  for (const auto& d : r.decisions) EXPECT_FALSE(d.declared);
  for (const auto& d : r.decisions)
    EXPECT_NEAR(d.score, dot(sc.ingress[d.ingress].embedding.v, sc.egress[d.egress].embedding.v), 1e-15);
}

TEST(Ann, FullProbeMatchesPairwise) {
  const auto sc = synthetic_scenario(200, 0.5, 16, 3);
  const auto idx = build_scenario_index(sc, 0, 3);
  const auto ann = match_ann(sc, idx, idx.K, 0.5, 0);
  const auto pw = match_pairwise(sc, 0.5);
  EXPECT_EQ(ann.comparisons, pw.comparisons);
  auto key = [](const MatchResult& m) {
    std::set<std::tuple<std::size_t, std::size_t, double, bool>> s;
    for (const auto& d : m.decisions) s.emplace(d.ingress, d.egress, d.score, d.declared);
    return s;
  };
  EXPECT_EQ(key(ann), key(pw));
}

TEST(Ann, SubsetOfPairwiseWithFewerComparisons) {
  const auto sc = synthetic_scenario(400, 0.5, 16, 4);
  const auto idx = build_scenario_index(sc, 0, 4);
  const auto ann = match_ann(sc, idx, 4, 0.5, 0);
  const auto pw = match_pairwise(sc, 0.5);
  EXPECT_LT(ann.comparisons, pw.comparisons);
  EXPECT_EQ(ann.decisions.size(), ann.comparisons);
  std::map<std::pair<std::size_t, std::size_t>, double> ref;
  for (const auto& d : pw.decisions) ref[{d.ingress, d.egress}] = d.score;
  for (const auto& d : ann.decisions) EXPECT_EQ(ref.at({d.ingress, d.egress}), d.score);
}

TEST(Ann, TopOneAgreesWithPairwise) {
  const auto sc = synthetic_scenario(500, 0.5, 32, 5);
  const auto idx = build_scenario_index(sc, 0, 5);
  const auto ann = match_ann(sc, idx, 8, 0.5, 1);
  const auto pw = match_pairwise(sc, 0.5);
  std::vector<std::pair<double, std::size_t>> best(500, {-2.0, 0});
  for (const auto& d : pw.decisions)
    if (d.score > best[d.ingress].first) best[d.ingress] = {d.score, d.egress};
  std::size_t differ = 0;
  for (const auto& d : ann.decisions) differ += d.egress != best[d.ingress].second;
  EXPECT_EQ(ann.decisions.size(), 500u);
  EXPECT_LE(differ, 50u);
}

TEST(Roc, SeparatedScoresReachPerfectCorner) {
  std::vector<ScoredPair> s{{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}};
  const auto roc = roc_sweep(s, 2, 2);
  ASSERT_EQ(roc.size(), 5u);
  EXPECT_TRUE(std::isinf(roc[0].tau));
  EXPECT_EQ(roc[0].tpr, 0.0);
  EXPECT_EQ(roc[0].fpr, 0.0);
  EXPECT_EQ(roc[2], (RocPoint{0.8, 1.0, 0.0}));
  EXPECT_EQ(roc.back(), (RocPoint{0.1, 1.0, 1.0}));
}

TEST(Roc, AllEqualScores) {
  std::vector<ScoredPair> s{{0.3, true}, {0.3, false}, {0.3, false}};
  const auto roc = roc_sweep(s, 1, 2);
  ASSERT_EQ(roc.size(), 2u);
  EXPECT_EQ(roc[0].tpr + roc[0].fpr, 0.0);
  EXPECT_EQ(roc[1], (RocPoint{0.3, 1.0, 1.0}));
}

// Threshold enumeration: declared <=> score >= tau, counted directly.
TEST(Roc, MatchesEnumerationOracle) {
  std::mt19937_64 g(7);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<ScoredPair> s;
    const std::size_t n = 2 + g() % 10;
    for (std::size_t i = 0; i < n; ++i) s.push_back({static_cast<double>(g() % 5) / 4.0, i == 0 || g() % 3 == 0});
    s[1].is_true = false;
    std::size_t P = 0, Nn = 0;
    for (const auto& p : s) (p.is_true ? P : Nn)++;
    const std::size_t extra_neg = g() % 4;  // unscored non-pairs
    const auto roc = roc_sweep(s, P, Nn + extra_neg);
    std::set<double> taus;
    for (const auto& p : s) taus.insert(p.score);
    ASSERT_EQ(roc.size(), taus.size() + 1);
    std::size_t k = 1;
    for (auto it = taus.rbegin(); it != taus.rend(); ++it, ++k) {
      std::size_t tp = 0, fp = 0;
      for (const auto& p : s)
        if (p.score >= *it) (p.is_true ? tp : fp)++;
      ASSERT_EQ(roc[k].tau, *it);
      ASSERT_DOUBLE_EQ(roc[k].tpr, static_cast<double>(tp) / P);
      ASSERT_DOUBLE_EQ(roc[k].fpr, static_cast<double>(fp) / (Nn + extra_neg));
    }
  }
}

TEST(Roc, MonotoneProperty) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sc = synthetic_scenario(80, 0.3, 8, seed);
    const auto m = match_pairwise(sc, 0.5);
    for (auto denom : {FprDenominator::scored, FprDenominator::all_pairs}) {
      const auto roc = roc_for(sc, m, denom);
      for (std::size_t i = 1; i < roc.size(); ++i) {
        ASSERT_LT(roc[i].tau, roc[i - 1].tau);
        ASSERT_GE(roc[i].tpr, roc[i - 1].tpr);
        ASSERT_GE(roc[i].fpr, roc[i - 1].fpr);
        ASSERT_LE(roc[i].tpr, 1.0);
        ASSERT_LE(roc[i].fpr, 1.0);
      }
      EXPECT_EQ(roc.back().tpr, 1.0);
      EXPECT_EQ(roc.back().fpr, 1.0);
    }
  }
}

TEST(Roc, DenominatorsDifferForAnn) {
  const auto sc = synthetic_scenario(300, 0.5, 16, 8);
  const auto idx = build_scenario_index(sc, 0, 8);
  const auto m = match_ann(sc, idx, 2, 0.5, 0);
  const auto all = roc_for(sc, m, FprDenominator::all_pairs);
  const auto scored = roc_for(sc, m, FprDenominator::scored);
  EXPECT_LT(all.back().fpr, scored.back().fpr);
  EXPECT_EQ(scored.back().fpr, 1.0);
}

TEST(Roc, EmptyRejected) {
  EXPECT_THROW(roc_sweep(std::vector<ScoredPair>{}, 1, 1), InvariantError);
  EXPECT_THROW(roc_sweep(std::vector<ScoredPair>{{0.5, true}}, 1, 0), InvariantError);
}

TEST(Roc, TprAtFprStepLookup) {
  const std::vector<RocPoint> roc{{1e300, 0.0, 0.0}, {0.9, 0.4, 0.0}, {0.7, 0.6, 0.05}, {0.5, 0.9, 0.3}, {0.1, 1.0, 1.0}};
  EXPECT_EQ(tpr_at_fpr(roc, 0.0), 0.4);
  EXPECT_EQ(tpr_at_fpr(roc, 0.05), 0.6);
  EXPECT_EQ(tpr_at_fpr(roc, 0.2), 0.6);
  EXPECT_EQ(tpr_at_fpr(roc, 0.3), 0.9);
  EXPECT_EQ(tpr_at_fpr(roc, 1.0), 1.0);
}

TEST(Report, JsonAndCsv) {
  const auto sc = synthetic_scenario(100, 0.5, 16, 9);
  EvalConfig cfg;
  cfg.N = cfg.M = 100;
  cfg.seed = 9;
  auto rep = evaluate_scenario(sc, cfg);
  rep.config_hash = "abc";
  ASSERT_EQ(rep.matchers.size(), 2u);
  EXPECT_EQ(rep.matchers[0].matcher, "pairwise");
  EXPECT_EQ(rep.matchers[0].comparisons, 10000u);
  EXPECT_EQ(rep.K, 10u);
  EXPECT_EQ(rep.n_true, 50u);
  const auto j = eval_report_to_json(rep, false);
  EXPECT_FALSE(j.contains("index_build_seconds"));
  EXPECT_FALSE(j["matchers"][0].contains("seconds"));
  EXPECT_EQ(j["config_hash"], "abc");
  EXPECT_EQ(j["matchers"][1]["roc"][0]["tau"], "inf");
  EXPECT_EQ(j["matchers"][0]["tpr_at_fpr"].size(), 4u);
  EXPECT_TRUE(eval_report_to_json(rep, true).contains("index_build_seconds"));
  const std::string csv = roc_csv(rep.matchers[0].roc);
  EXPECT_EQ(csv.rfind("tau,tpr,fpr\ninf,0,0\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rep.matchers[0].roc.size() + 1);
  std::size_t declared = 0;
  for (const auto& d : match_pairwise(sc, cfg.tau).decisions) declared += d.declared;
  EXPECT_EQ(rep.matchers[0].declared, declared);
}

TEST(Bench, PairwiseIsExactlyQuadratic) {
  BenchConfig cfg;
  cfg.counts = {100, 200, 400};
  const auto r = scaling_bench(cfg);
  std::vector<double> pw;
  for (const auto& row : r.rows)
    if (row.matcher == "pairwise") pw.push_back(row.comparisons);
  EXPECT_EQ(pw, (std::vector<double>{1e4, 4e4, 1.6e5}));
  EXPECT_NEAR(r.slope_pairwise, 2.0, 1e-12);
  EXPECT_LT(r.slope_ann, r.slope_pairwise);
}

TEST(Bench, RatioAtTwentyFold) {
  BenchConfig cfg;
  cfg.counts = {100, 1000, 2000};
  const auto r = scaling_bench(cfg);
  EXPECT_DOUBLE_EQ(r.rows[4].ratio, 400.0);
  EXPECT_EQ(r.rows[4].matcher, "pairwise");
  const std::string csv = bench_csv(r);
  EXPECT_EQ(csv.rfind("n,matcher,comparisons,wall_s,ratio\n", 0), 0u);
  const auto j = bench_to_json(r, false);
  EXPECT_FALSE(j.contains("slope_wall"));
  EXPECT_EQ(j["config"]["cluster_rule"], "m_over_log2m");
}

TEST(Bench, Errors) {
  BenchConfig cfg;
  cfg.counts = {100, 200};
  EXPECT_THROW(scaling_bench(cfg), InvariantError);
  cfg.counts = {200, 100, 400};
  EXPECT_THROW(scaling_bench(cfg), InvariantError);
  cfg.counts = {100, 100, 400};
  EXPECT_THROW(scaling_bench(cfg), InvariantError);
}

TEST(Bench, LoglogSlope) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 6 * std::sqrt(2.0) / 2 * std::sqrt(2.0), 12, 24};
  EXPECT_NEAR(loglog_slope(x, y), 1.0, 1e-12);
  const std::vector<double> y3{1, 8, 64, 512};
  EXPECT_NEAR(loglog_slope(x, y3), 3.0, 1e-12);
  EXPECT_THROW(loglog_slope(std::vector<double>{1}, std::vector<double>{1}), ContractError);
}

}  // namespace
}  // namespace rector
