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

// Inverted-file (IVF) index over unit-norm embeddings: k-means coarse
// quantizer, per-centroid posting lists, and n_probe-list cosine scans.
// exact_search() is the brute-force oracle with identical ordering rules.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rector/common.hpp"
#include "rector/linalg.hpp"
#include "rector/neural.hpp"

namespace rector {

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansResult {
  Matrix centroids;                  // K x D
  std::vector<std::size_t> assignment;
  std::vector<double> distortion;    // after each Lloyd iteration
  std::size_t iterations = 0;
};

namespace detail {

// Nearest centroid by squared Euclidean distance, ties to the lowest index.
inline std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> x, double* dist = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows; ++k) {
    const double d = squared_distance(centroids.row(k), x);
    if (d < bd) bd = d, best = k;
  }
  if (dist) *dist = bd;
  return best;
}

inline double distortion(const Matrix& points, const Matrix& centroids, std::span<const std::size_t> assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) s += squared_distance(points.row(i), centroids.row(assign[i]));
  return s;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding. An empty cluster takes the point
// farthest from its current centroid (from a cluster with > 1 member).
inline KMeansResult kmeans(const Matrix& points, std::size_t K, std::uint64_t seed, std::size_t max_iter = 100,
                           double tol = 1e-6) {
  const std::size_t n = points.rows, D = points.cols;
  if (K < 1) throw ContractError("kmeans: K must be >= 1");
  if (n == 0) throw ContractError("kmeans: no points");
  if (K > n) throw ContractError("kmeans: K=" + std::to_string(K) + " exceeds point count " + std::to_string(n));

  Rng rng(derive_seed(seed, "kmeans++"));
  KMeansResult res;
  res.centroids = Matrix(K, D);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t pick = rng.below(n);
  for (std::size_t k = 0; k < K; ++k) {
    if (k > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double r = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          if (r < d2[i]) {
            pick = i;
            break;
          }
          r -= d2[i];
        }
        while (d2[pick] <= 0.0) --pick;  // rounding at the tail
      } else {
        // Every point coincides with a centroid already.
        pick = 0;
        while (pick + 1 < n && chosen[pick]) ++pick;
      }
    }
    chosen[pick] = 1;
    std::copy(points.row(pick).begin(), points.row(pick).end(), res.centroids.row(k).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), res.centroids.row(k)));
  }

  res.assignment.assign(n, 0);
  std::vector<double> dist(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) res.assignment[i] = detail::nearest_centroid(res.centroids, points.row(i), &dist[i]);

    std::vector<std::size_t> counts(K, 0);
    for (std::size_t a : res.assignment) ++counts[a];
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] > 0) continue;
      std::size_t victim = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignment[i]] <= 1) continue;
        if (victim == n || dist[i] > dist[victim]) victim = i;
      }
      if (victim == n) throw ContractError("kmeans: cannot repair empty cluster");
      --counts[res.assignment[victim]];
      res.assignment[victim] = k;
      counts[k] = 1;
      dist[victim] = 0.0;
      std::copy(points.row(victim).begin(), points.row(victim).end(), res.centroids.row(k).begin());
    }

    Matrix next(K, D);
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, points.row(i), next.row(res.assignment[i]));
    double movement = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      for (double& v : next.row(k)) v /= static_cast<double>(counts[k]);
      movement = std::max(movement, std::sqrt(squared_distance(next.row(k), res.centroids.row(k))));
    }
    res.centroids = std::move(next);
    res.distortion.push_back(detail::distortion(points, res.centroids, res.assignment));
    res.iterations = it + 1;
    if (movement < tol) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultProbes = 8;

struct IndexEntry {
  std::string flow_id;
  Embedding embedding;
};

struct SearchHit {
  std::string flow_id;
  double score = 0.0;  // cosine similarity

  bool operator==(const SearchHit&) const = default;
};

struct SearchResult {
  std::vector<SearchHit> hits;
  std::size_t comparisons = 0;
};

struct IvfIndex {
  std::size_t K = 0;
  std::size_t n_probe_default = kDefaultProbes;
  Matrix centroids;
  std::vector<std::vector<IndexEntry>> lists;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : lists) n += l.size();
    return n;
  }
  std::size_t dim() const { return centroids.cols; }
};

enum class ClusterRule {
  sqrt_m,         // K = round(sqrt(M))
  m_over_log2_m,  // K = round(M / log2(M)): posting lists of ~log2(M) entries
};

inline ClusterRule cluster_rule_from_string(const std::string& s) {
  if (s == "sqrt") return ClusterRule::sqrt_m;
  if (s == "m_over_log2m") return ClusterRule::m_over_log2_m;
  throw ConfigError("unknown cluster rule '" + s + "' (expected sqrt or m_over_log2m)");
}

inline const char* to_string(ClusterRule r) { return r == ClusterRule::sqrt_m ? "sqrt" : "m_over_log2m"; }

inline std::size_t auto_cluster_count(std::size_t M, ClusterRule rule = ClusterRule::sqrt_m) {
  if (M <= 1) return 1;
  const double m = static_cast<double>(M);
  const double k = rule == ClusterRule::sqrt_m ? std::sqrt(m) : m / std::log2(m);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(k)), 1, M);
}

// Sort key shared by query() and exact_search(): score descending, then
// flow_id ascending.
inline bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.flow_id < b.flow_id;
}

inline double cosine_score(const Embedding& a, const Embedding& b) { return std::clamp(dot(a.v, b.v), -1.0, 1.0); }

inline void keep_top(std::vector<SearchHit>& hits, std::size_t top_k) {
  if (top_k < hits.size()) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(top_k), hits.end(), hit_order);
    hits.resize(top_k);
  } else {
    std::sort(hits.begin(), hits.end(), hit_order);
  }
}

// K == 0 selects auto_cluster_count(M).
inline IvfIndex build_index(std::span<const IndexEntry> entries, std::size_t K, std::uint64_t seed,
                            std::size_t n_probe_default = kDefaultProbes) {
  if (entries.empty()) throw InvariantError("index: cannot build from an empty embedding set");
  const std::size_t M = entries.size(), D = entries.front().embedding.size();
  if (K == 0) K = auto_cluster_count(M);
  if (K > M) throw ContractError("index: K=" + std::to_string(K) + " exceeds embedding count " + std::to_string(M));
  Matrix pts(M, D);
  for (std::size_t i = 0; i < M; ++i) {
    if (entries[i].embedding.size() != D) throw ContractError("index: embedding width mismatch");
    std::copy(entries[i].embedding.v.begin(), entries[i].embedding.v.end(), pts.row(i).begin());
  }
  auto km = kmeans(pts, K, seed);
  IvfIndex idx;
  idx.K = K;
  idx.n_probe_default = std::clamp<std::size_t>(n_probe_default, 1, K);
  idx.centroids = std::move(km.centroids);
  idx.lists.assign(K, {});
  // Assign against the final centroids so membership is exactly nearest-centroid.
  for (std::size_t i = 0; i < M; ++i) idx.lists[detail::nearest_centroid(idx.centroids, pts.row(i))].push_back(entries[i]);
  return idx;
}

inline IvfIndex build_index(std::span<const IndexEntry> entries, std::optional<std::size_t> K, std::uint64_t seed) {
  return build_index(entries, K.value_or(0), seed);
}

// Centroid ids ordered by Euclidean distance to q (ties to lower id).
inline std::vector<std::size_t> rank_centroids(const IvfIndex& index, const Embedding& q) {
  std::vector<std::pair<double, std::size_t>> d(index.K);
  for (std::size_t k = 0; k < index.K; ++k) d[k] = {squared_distance(index.centroids.row(k), q.v), k};
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out(index.K);
  for (std::size_t k = 0; k < index.K; ++k) out[k] = d[k].second;
  return out;
}

inline SearchResult query(const IvfIndex& index, const Embedding& q, std::size_t n_probe, std::size_t top_k) {
  SearchResult res;
  if (index.K == 0 || index.size() == 0) return res;
  if (n_probe < 1 || n_probe > index.K)
    throw ContractError("query: n_probe=" + std::to_string(n_probe) + " outside [1, " + std::to_string(index.K) + "]");
  if (q.size() != index.dim()) throw ContractError("query: embedding width mismatch");
  const auto order = rank_centroids(index, q);
  for (std::size_t p = 0; p < n_probe; ++p) {
    for (const auto& e : index.lists[order[p]]) res.hits.push_back({e.flow_id, cosine_score(q, e.embedding)});
    res.comparisons += index.lists[order[p]].size();
  }
  keep_top(res.hits, top_k);
  return res;
}

inline SearchResult exact_search(std::span<const IndexEntry> entries, const Embedding& q, std::size_t top_k) {
  SearchResult res;
  res.hits.reserve(entries.size());
  for (const auto& e : entries) res.hits.push_back({e.flow_id, cosine_score(q, e.embedding)});
  res.comparisons = entries.size();
  keep_top(res.hits, top_k);
  return res;
}

// ---------------------------------------------------------------------------
// Index file
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json index_to_json(const IvfIndex& idx) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["K"] = idx.K;
  j["n_probe_default"] = idx.n_probe_default;
  auto cents = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < idx.K; ++k) cents.push_back(std::vector<double>(idx.centroids.row(k).begin(), idx.centroids.row(k).end()));
  j["centroids"] = std::move(cents);
  auto lists = nlohmann::ordered_json::array();
  for (const auto& l : idx.lists) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : l) arr.push_back(nlohmann::ordered_json::array({e.flow_id, e.embedding.v}));
    lists.push_back(std::move(arr));
  }
  j["lists"] = std::move(lists);
  return j;
}

inline IvfIndex index_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw InvariantError("index: unsupported version");
  IvfIndex idx;
  idx.K = j.at("K").get<std::size_t>();
  idx.n_probe_default = j.at("n_probe_default").get<std::size_t>();
  const auto& cents = j.at("centroids");
  const auto& lists = j.at("lists");
  if (cents.size() != idx.K || lists.size() != idx.K) throw InvariantError("index: K does not match centroid/list count");
  if (idx.K == 0) return idx;
  const std::size_t D = cents.at(0).size();
  idx.centroids = Matrix(idx.K, D);
  for (std::size_t k = 0; k < idx.K; ++k) {
    if (cents[k].size() != D) throw InvariantError("index: ragged centroid matrix");
    for (std::size_t d = 0; d < D; ++d) idx.centroids(k, d) = cents[k][d].get<double>();
    std::vector<IndexEntry> l;
    for (const auto& e : lists[k]) {
      IndexEntry ie{e.at(0).get<std::string>(), {e.at(1).get<Vec>()}};
      if (ie.embedding.size() != D) throw InvariantError("index: embedding width mismatch in list " + std::to_string(k));
      l.push_back(std::move(ie));
    }
    idx.lists.push_back(std::move(l));
  }
  if (idx.n_probe_default < 1 || idx.n_probe_default > idx.K) throw InvariantError("index: n_probe_default outside [1, K]");
  return idx;
}

}  // namespace rector
