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

// Siamese training of the ingress/egress encoders with a cosine-distance
// triplet margin loss and Adam.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rector/common.hpp"
#include "rector/featurizer.hpp"
#include "rector/neural.hpp"
#include "rector/traffic.hpp"

namespace rector {

struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error("training: " + w, ErrorKind::internal) {}
};

struct TrainConfig {
  double margin = 0.2;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  double target_loss = 0.004;
  double hard_negative_frac = 0.0;
  std::uint64_t seed = 0;
  ModelDims dims;
  bool tied = false;  // one encoder shared by both roles
  std::size_t threads = 0;  // 0 = worker_count()

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(target_loss >= 0.0)) throw ConfigError("target loss must be >= 0");
    if (!(hard_negative_frac >= 0.0 && hard_negative_frac <= 1.0)) throw ConfigError("hard_negative_frac must lie in [0, 1]");
    dims.validate();
  }
};

// ---------------------------------------------------------------------------
// Triplet loss on cosine distance d(u, v) = 1 - u.v
// ---------------------------------------------------------------------------

struct TripletLoss {
  double loss = 0.0;
  Vec grad_anchor, grad_positive, grad_negative;
};

inline TripletLoss triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n, double margin) {
  const std::size_t D = a.size();
  if (p.size() != D || n.size() != D) throw ContractError("triplet_loss: embedding width mismatch");
  TripletLoss out;
  out.grad_anchor.assign(D, 0.0);
  out.grad_positive.assign(D, 0.0);
  out.grad_negative.assign(D, 0.0);
  const double d_ap = 1.0 - dot(a.v, p.v);
  const double d_an = 1.0 - dot(a.v, n.v);
  const double hinge = d_ap - d_an + margin;
  if (hinge <= 0.0) return out;
  out.loss = hinge;
  for (std::size_t i = 0; i < D; ++i) {
    out.grad_anchor[i] = n.v[i] - p.v[i];
    out.grad_positive[i] = -a.v[i];
    out.grad_negative[i] = a.v[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paired training corpus
// ---------------------------------------------------------------------------

// Complete sessions only; ingress[i] and egress[i] belong to sessions[i].
struct TrainingCorpus {
  std::vector<std::string> sessions;
  std::vector<FeatureTensor> ingress;
  std::vector<FeatureTensor> egress;

  std::size_t size() const { return sessions.size(); }
};

// `features` is aligned with ds.flows.
inline TrainingCorpus build_corpus(const Dataset& ds, std::span<const FeatureTensor> features) {
  if (features.size() != ds.flows.size()) throw ContractError("build_corpus: features not aligned with flows");
  std::unordered_map<std::string, std::pair<long, long>> roles;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < ds.flows.size(); ++i) {
    const auto& f = ds.flows[i];
    auto [it, inserted] = roles.try_emplace(f.session_id, std::pair<long, long>{-1, -1});
    if (inserted) order.push_back(f.session_id);
    (f.role == Role::ingress ? it->second.first : it->second.second) = static_cast<long>(i);
  }
  TrainingCorpus c;
  for (const auto& s : order) {
    const auto [in, out] = roles.at(s);
    if (in < 0 || out < 0) continue;
    c.sessions.push_back(s);
    c.ingress.push_back(features[static_cast<std::size_t>(in)]);
    c.egress.push_back(features[static_cast<std::size_t>(out)]);
  }
  return c;
}

inline TrainingCorpus build_corpus(const Dataset& ds, const WindowSpec& spec) {
  std::vector<FeatureTensor> feats;
  feats.reserve(ds.flows.size());
  for (const auto& f : ds.flows) feats.push_back(featurize_flow(f, spec));
  return build_corpus(ds, feats);
}

// Indices into a TrainingCorpus: anchor is ingress[anchor], positive is
// egress[anchor], negative is egress[negative] with negative != anchor.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t negative = 0;

  std::size_t positive() const { return anchor; }
  bool operator==(const Triplet&) const = default;
};

// Semi-hard: the most similar non-matching egress that is still less similar
// than the true partner; falls back to the most similar one overall.
inline std::size_t mine_negative(std::size_t anchor, std::span<const Embedding> anchors,
                                 std::span<const Embedding> egress) {
  const double pos = dot(anchors[anchor].v, egress[anchor].v);
  std::size_t best_semi = egress.size(), best_any = egress.size();
  double s_semi = -std::numeric_limits<double>::infinity(), s_any = s_semi;
  for (std::size_t j = 0; j < egress.size(); ++j) {
    if (j == anchor) continue;
    const double s = dot(anchors[anchor].v, egress[j].v);
    if (s > s_any) s_any = s, best_any = j;
    if (s < pos && s > s_semi) s_semi = s, best_semi = j;
  }
  return best_semi < egress.size() ? best_semi : best_any;
}

// The first round(batch * hard_fraction) negatives are mined from the
// embedding caches, the rest are uniform over the other sessions.
inline std::vector<Triplet> sample_triplets(std::size_t sessions, std::size_t batch, double hard_fraction,
                                            std::span<const Embedding> anchor_cache,
                                            std::span<const Embedding> egress_cache, Rng& rng) {
  if (sessions < 2) throw InvariantError("sampling: need at least 2 complete sessions, found " + std::to_string(sessions));
  const auto n_hard = static_cast<std::size_t>(std::llround(hard_fraction * static_cast<double>(batch)));
  if (n_hard > 0 && (anchor_cache.size() != sessions || egress_cache.size() != sessions))
    throw ContractError("sampling: hard negatives need embedding caches for every session");
  std::vector<Triplet> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    auto& t = out[i];
    t.anchor = rng.below(sessions);
    if (i < n_hard) {
      t.negative = mine_negative(t.anchor, anchor_cache, egress_cache);
    } else {
      t.negative = rng.below(sessions - 1);
      if (t.negative >= t.anchor) ++t.negative;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct AdamState {
  ModelParams m, v;
  std::size_t steps = 0;

  AdamState() = default;
  explicit AdamState(const ModelParams& like) : m(zeros_like(like)), v(zeros_like(like)) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

inline void adam_update(ModelParams& params, const ModelParams& grad, AdamState& st, double lr) {
  ++st.steps;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.steps));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.steps));
  std::vector<std::span<double>> p, m, v;
  std::vector<std::span<const double>> g;
  visit_params(params, [&](const std::string&, auto& t) { p.push_back(flat(t)); });
  visit_params(st.m, [&](const std::string&, auto& t) { m.push_back(flat(t)); });
  visit_params(st.v, [&](const std::string&, auto& t) { v.push_back(flat(t)); });
  visit_params(grad, [&](const std::string&, const auto& t) { g.push_back(flat(t)); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      m[k][i] = kAdamBeta1 * m[k][i] + (1.0 - kAdamBeta1) * g[k][i];
      v[k][i] = kAdamBeta2 * v[k][i] + (1.0 - kAdamBeta2) * g[k][i] * g[k][i];
      p[k][i] -= lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + kAdamEps);
    }
  }
}

// grads += scale * other
inline void accumulate(ModelParams& grads, const ModelParams& other, double scale = 1.0) {
  std::vector<std::span<double>> dst;
  visit_params(grads, [&](const std::string&, auto& t) { dst.push_back(flat(t)); });
  std::size_t k = 0;
  visit_params(other, [&](const std::string&, const auto& t) { axpy(scale, flat(t), dst[k++]); });
}

struct TrainState {
  ModelParams ingress;
  ModelParams egress;  // unused when tied
  AdamState adam_ingress, adam_egress;
  bool tied = false;
  std::size_t epoch = 0;
  Vec loss_history;
  Vec wall_seconds;
  std::vector<Embedding> anchor_cache, egress_cache;

  const ModelParams& tower(Role r) const { return tied || r == Role::ingress ? ingress : egress; }
};

// Loss and parameter gradients for one triplet. With tied towers pass the
// same object as both gradient sinks.
inline double triplet_step(const ModelParams& ingress, const ModelParams& egress, const FeatureTensor& anchor,
                           const FeatureTensor& positive, const FeatureTensor& negative, double margin,
                           ModelParams& grad_ingress, ModelParams& grad_egress) {
  ForwardCache ca, cp, cn;
  const Embedding a = embed_flow(ingress, anchor, ca);
  const Embedding p = embed_flow(egress, positive, cp);
  const Embedding n = embed_flow(egress, negative, cn);
  const TripletLoss tl = triplet_loss(a, p, n, margin);
  if (tl.loss > 0.0) {
    backward_into(ingress, ca, tl.grad_anchor, grad_ingress);
    backward_into(egress, cp, tl.grad_positive, grad_egress);
    backward_into(egress, cn, tl.grad_negative, grad_egress);
  }
  return tl.loss;
}

inline TrainState init_train_state(const TrainConfig& cfg) {
  TrainState st;
  st.tied = cfg.tied;
  st.ingress = init_params(cfg.dims, derive_seed(cfg.seed, "tower", "ingress"));
  st.egress = cfg.tied ? ModelParams() : init_params(cfg.dims, derive_seed(cfg.seed, "tower", "egress"));
  st.adam_ingress = AdamState(st.ingress);
  if (!cfg.tied) st.adam_egress = AdamState(st.egress);
  return st;
}

inline void refresh_caches(const TrainingCorpus& corpus, TrainState& st, std::size_t threads) {
  const std::size_t n = corpus.size();
  st.anchor_cache.assign(n, {});
  st.egress_cache.assign(n, {});
  parallel_for(2 * n, threads, [&](std::size_t i) {
    if (i < n)
      st.anchor_cache[i] = embed_flow(st.tower(Role::ingress), corpus.ingress[i]);
    else
      st.egress_cache[i - n] = embed_flow(st.tower(Role::egress), corpus.egress[i - n]);
  });
}

using EpochCallback = std::function<void(const TrainState&)>;

// Mini-batch Adam until the epoch-mean loss reaches target_loss or
// max_epochs have run. Each epoch draws ceil(sessions / batch) batches.
// Gradients are reduced in triplet order, so results do not depend on the
// worker count.
inline TrainState train(const TrainingCorpus& corpus, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (corpus.size() < 2) throw InvariantError("training: need at least 2 complete sessions");
  const std::size_t threads = cfg.threads ? cfg.threads : worker_count();
  TrainState st = init_train_state(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t batches = (corpus.size() + cfg.batch_size - 1) / cfg.batch_size;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "epoch", epoch));
    if (cfg.hard_negative_frac > 0.0) refresh_caches(corpus, st, threads);
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto triplets = sample_triplets(corpus.size(), cfg.batch_size, cfg.hard_negative_frac, st.anchor_cache,
                                            st.egress_cache, rng);
      std::vector<double> losses(triplets.size());
      std::vector<ModelParams> g_in(triplets.size()), g_eg(cfg.tied ? 0 : triplets.size());
      parallel_for(triplets.size(), threads, [&](std::size_t i) {
        const auto& t = triplets[i];
        g_in[i] = zeros_like(st.ingress);
        ModelParams& sink_eg = cfg.tied ? g_in[i] : (g_eg[i] = zeros_like(st.egress));
        losses[i] = triplet_step(st.tower(Role::ingress), st.tower(Role::egress), corpus.ingress[t.anchor],
                                 corpus.egress[t.positive()], corpus.egress[t.negative], cfg.margin, g_in[i], sink_eg);
      });
      const double scale = 1.0 / static_cast<double>(triplets.size());
      ModelParams grad_in = zeros_like(st.ingress);
      for (const auto& g : g_in) accumulate(grad_in, g, scale);
      adam_update(st.ingress, grad_in, st.adam_ingress, cfg.learning_rate);
      if (!cfg.tied) {
        ModelParams grad_eg = zeros_like(st.egress);
        for (const auto& g : g_eg) accumulate(grad_eg, g, scale);
        adam_update(st.egress, grad_eg, st.adam_egress, cfg.learning_rate);
      }
      for (double l : losses) loss_sum += l;
      count += losses.size();
    }
    const double mean = loss_sum / static_cast<double>(count);
    if (!std::isfinite(mean) || !all_finite(st.ingress) || (!cfg.tied && !all_finite(st.egress)))
      throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
    st.epoch = epoch;
    st.loss_history.push_back(mean);
    st.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (on_epoch) on_epoch(st);
    if (mean <= cfg.target_loss) break;
  }
  return st;
}

}  // namespace rector
