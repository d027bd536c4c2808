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

// Flow encoder: every window runs through a two-layer GRU, the final hidden
// states are pooled with tanh-gated attention (the windows are the instances
// of a multiple-instance bag), projected to D dimensions and L2-normalized.
//
//   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//   h_t = (1 - z_t) * h_{t-1} + z_t * c_t
//
//   s_k = w . tanh(V h_k),   a = softmax(s),   pooled = sum_k a_k h_k
//   y = P pooled + b_P,      e = y / |y|
//
// Everything is double precision; backward() is exact reverse mode and is
// cross-checked against central differences by finite_diff_check().

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rector/common.hpp"
#include "rector/featurizer.hpp"
#include "rector/linalg.hpp"

namespace rector {

inline constexpr double kDegenerateNorm = 1e-12;

struct ModelDims {
  std::size_t hidden = 32;
  std::size_t attention = 16;
  std::size_t embedding = 32;
  static constexpr std::size_t input = kChannels;

  void validate() const {
    if (hidden < 1 || attention < 1 || embedding < 1) throw ConfigError("model dimensions must be >= 1");
  }
  bool operator==(const ModelDims&) const = default;
};

struct GruLayerParams {
  Matrix W_z, W_r, W_h;  // hidden x input
  Matrix U_z, U_r, U_h;  // hidden x hidden
  Vec b_z, b_r, b_h;

  GruLayerParams() = default;
  GruLayerParams(std::size_t input, std::size_t hidden)
      : W_z(hidden, input), W_r(hidden, input), W_h(hidden, input),
        U_z(hidden, hidden), U_r(hidden, hidden), U_h(hidden, hidden),
        b_z(hidden, 0.0), b_r(hidden, 0.0), b_h(hidden, 0.0) {}

  std::size_t input_dim() const { return W_z.cols; }
  std::size_t hidden_dim() const { return W_z.rows; }

  void check_shapes() const {
    const std::size_t h = hidden_dim(), in = input_dim();
    for (const Matrix* m : {&W_z, &W_r, &W_h})
      if (m->rows != h || m->cols != in) throw ContractError("GRU input matrix shape mismatch");
    for (const Matrix* m : {&U_z, &U_r, &U_h})
      if (m->rows != h || m->cols != h) throw ContractError("GRU recurrent matrix shape mismatch");
    for (const Vec* b : {&b_z, &b_r, &b_h})
      if (b->size() != h) throw ContractError("GRU bias shape mismatch");
  }
};

struct AttentionParams {
  Matrix V;  // attention x hidden
  Vec w;     // attention

  AttentionParams() = default;
  AttentionParams(std::size_t hidden, std::size_t attention) : V(attention, hidden), w(attention, 0.0) {}
};

struct ModelParams {
  ModelDims dims;
  GruLayerParams gru1;
  GruLayerParams gru2;
  AttentionParams attn;
  Matrix P;  // embedding x hidden
  Vec b_P;

  ModelParams() = default;
  explicit ModelParams(const ModelDims& d)
      : dims(d), gru1(ModelDims::input, d.hidden), gru2(d.hidden, d.hidden), attn(d.hidden, d.attention),
        P(d.embedding, d.hidden), b_P(d.embedding, 0.0) {}
};

// Calls f(name, Matrix&) / f(name, Vec&) for every learnable tensor in a
// fixed order. Works for const and non-const params.
template <typename Params, typename F>
void visit_params(Params& p, F&& f) {
  auto gru = [&](std::string_view prefix, auto& g) {
    const std::string s(prefix);
    f(s + ".W_z", g.W_z);
    f(s + ".W_r", g.W_r);
    f(s + ".W_h", g.W_h);
    f(s + ".U_z", g.U_z);
    f(s + ".U_r", g.U_r);
    f(s + ".U_h", g.U_h);
    f(s + ".b_z", g.b_z);
    f(s + ".b_r", g.b_r);
    f(s + ".b_h", g.b_h);
  };
  gru("gru1", p.gru1);
  gru("gru2", p.gru2);
  f(std::string("attn.V"), p.attn.V);
  f(std::string("attn.w"), p.attn.w);
  f(std::string("proj.P"), p.P);
  f(std::string("proj.b_P"), p.b_P);
}

inline std::span<double> flat(Matrix& m) { return m.data; }
inline std::span<const double> flat(const Matrix& m) { return m.data; }
inline std::span<double> flat(Vec& v) { return v; }
inline std::span<const double> flat(const Vec& v) { return v; }

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  visit_params(p, [&](const std::string&, const auto& t) { n += flat(t).size(); });
  return n;
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  visit_params(p, [&](const std::string&, const auto& t) {
    for (double v : flat(t)) ok = ok && std::isfinite(v);
  });
  return ok;
}

inline ModelParams zeros_like(const ModelParams& p) { return ModelParams(p.dims); }

// Uniform(-s, s) with s = 1/sqrt(fan_in); biases use the layer's hidden
// width as fan-in.
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  ModelParams p(dims);
  Rng rng(derive_seed(seed, "init"));
  auto fill = [&](std::span<double> t, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t) v = rng.uniform(-s, s);
  };
  auto gru = [&](GruLayerParams& g) {
    const std::size_t in = g.input_dim(), h = g.hidden_dim();
    for (Matrix* m : {&g.W_z, &g.W_r, &g.W_h}) fill(m->data, in);
    for (Matrix* m : {&g.U_z, &g.U_r, &g.U_h}) fill(m->data, h);
    for (Vec* b : {&g.b_z, &g.b_r, &g.b_h}) fill(*b, h);
  };
  gru(p.gru1);
  gru(p.gru2);
  fill(p.attn.V.data, dims.hidden);
  fill(p.attn.w, dims.attention);
  fill(p.P.data, dims.hidden);
  fill(p.b_P, dims.hidden);
  return p;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

// Activations of one GRU layer over one sequence, rows indexed by step.
struct GruTrace {
  std::size_t steps = 0;
  Vec h0;
  Matrix z, r, c, h;
};

inline void gru_forward_traced(const GruLayerParams& layer, const Matrix& inputs, std::span<const double> h0,
                               GruTrace& tr) {
  const std::size_t H = layer.hidden_dim();
  if (inputs.cols != layer.input_dim()) throw ContractError("gru_forward: input width mismatch");
  if (h0.size() != H) throw ContractError("gru_forward: h0 width mismatch");
  if (inputs.rows < 1) throw ContractError("gru_forward: need at least one step");
  const std::size_t T = inputs.rows;
  tr.steps = T;
  tr.h0.assign(h0.begin(), h0.end());
  tr.z = Matrix(T, H);
  tr.r = Matrix(T, H);
  tr.c = Matrix(T, H);
  tr.h = Matrix(T, H);

  Vec az(H), ar(H), ac(H), rh(H);
  for (std::size_t t = 0; t < T; ++t) {
    const auto x = inputs.row(t);
    const std::span<const double> hp = t == 0 ? std::span<const double>(tr.h0) : tr.h.row(t - 1);
    std::copy(layer.b_z.begin(), layer.b_z.end(), az.begin());
    std::copy(layer.b_r.begin(), layer.b_r.end(), ar.begin());
    std::copy(layer.b_h.begin(), layer.b_h.end(), ac.begin());
    gemv_add(layer.W_z, x, az);
    gemv_add(layer.U_z, hp, az);
    gemv_add(layer.W_r, x, ar);
    gemv_add(layer.U_r, hp, ar);
    auto z = tr.z.row(t), r = tr.r.row(t), c = tr.c.row(t), h = tr.h.row(t);
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = sigmoid(az[i]);
      r[i] = sigmoid(ar[i]);
      rh[i] = r[i] * hp[i];
    }
    gemv_add(layer.W_h, x, ac);
    gemv_add(layer.U_h, rh, ac);
    for (std::size_t i = 0; i < H; ++i) {
      c[i] = std::tanh(ac[i]);
      h[i] = (1.0 - z[i]) * hp[i] + z[i] * c[i];
    }
  }
}

// Returns h_1..h_T as a T x H matrix.
inline Matrix gru_forward(const GruLayerParams& layer, const Matrix& inputs, std::span<const double> h0) {
  layer.check_shapes();
  GruTrace tr;
  gru_forward_traced(layer, inputs, h0, tr);
  return std::move(tr.h);
}

// Reverse pass through one layer. d_hidden holds dLoss/dh_t for every step
// (rows); parameter gradients are accumulated into `grad`, and the gradient
// w.r.t. the inputs is returned.
inline Matrix gru_backward(const GruLayerParams& layer, const Matrix& inputs, const GruTrace& tr,
                           const Matrix& d_hidden, GruLayerParams& grad) {
  const std::size_t H = layer.hidden_dim(), T = tr.steps;
  Matrix d_inputs(T, layer.input_dim());
  Vec carry(H, 0.0), dh(H), dhp(H), dac(H), daz(H), dar(H), rh(H), drh(H);
  for (std::size_t step = T; step-- > 0;) {
    const auto x = inputs.row(step);
    const std::span<const double> hp = step == 0 ? std::span<const double>(tr.h0) : tr.h.row(step - 1);
    const auto z = tr.z.row(step), r = tr.r.row(step), c = tr.c.row(step);
    const auto dH = d_hidden.row(step);
    for (std::size_t i = 0; i < H; ++i) {
      dh[i] = dH[i] + carry[i];
      dac[i] = dh[i] * z[i] * (1.0 - c[i] * c[i]);
      daz[i] = dh[i] * (c[i] - hp[i]) * z[i] * (1.0 - z[i]);
      dhp[i] = dh[i] * (1.0 - z[i]);
      rh[i] = r[i] * hp[i];
      drh[i] = 0.0;
    }
    ger_add(grad.W_h, dac, x);
    ger_add(grad.U_h, dac, rh);
    axpy(1.0, dac, grad.b_h);
    gemv_t_add(layer.U_h, dac, drh);
    for (std::size_t i = 0; i < H; ++i) {
      dar[i] = drh[i] * hp[i] * r[i] * (1.0 - r[i]);
      dhp[i] += drh[i] * r[i];
    }
    ger_add(grad.W_z, daz, x);
    ger_add(grad.U_z, daz, hp);
    axpy(1.0, daz, grad.b_z);
    ger_add(grad.W_r, dar, x);
    ger_add(grad.U_r, dar, hp);
    axpy(1.0, dar, grad.b_r);
    gemv_t_add(layer.U_z, daz, dhp);
    gemv_t_add(layer.U_r, dar, dhp);

    auto dx = d_inputs.row(step);
    gemv_t_add(layer.W_z, daz, dx);
    gemv_t_add(layer.W_r, dar, dx);
    gemv_t_add(layer.W_h, dac, dx);
    carry.swap(dhp);
  }
  return d_inputs;
}

// ---------------------------------------------------------------------------
// Window encoder and attention pooling
// ---------------------------------------------------------------------------

struct WindowCache {
  Matrix inputs;  // steps x 2
  GruTrace layer1;
  GruTrace layer2;
};

// Rows at or beyond valid_len are never read; an empty window runs a single
// all-zero step.
inline Matrix window_inputs(std::span<const double> window, std::size_t valid_len) {
  const std::size_t steps = std::max<std::size_t>(valid_len, 1);
  Matrix x(steps, kChannels);
  std::copy(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(valid_len * kChannels), x.data.begin());
  return x;
}

inline Vec encode_window_traced(const ModelParams& params, std::span<const double> window, std::size_t valid_len,
                                WindowCache& cache) {
  if (valid_len * kChannels > window.size()) throw ContractError("encode_window: valid_len exceeds window rows");
  const std::size_t H = params.dims.hidden;
  const Vec zero(H, 0.0);
  cache.inputs = window_inputs(window, valid_len);
  gru_forward_traced(params.gru1, cache.inputs, zero, cache.layer1);
  gru_forward_traced(params.gru2, cache.layer1.h, zero, cache.layer2);
  const auto last = cache.layer2.h.row(cache.layer2.steps - 1);
  return {last.begin(), last.end()};
}

inline Vec encode_window(const ModelParams& params, std::span<const double> window, std::size_t valid_len) {
  WindowCache cache;
  return encode_window_traced(params, window, valid_len, cache);
}

struct AttentionResult {
  Vec pooled;   // H
  Vec weights;  // W, positive, sums to 1
  Vec logits;   // W
  Matrix gate;  // W x A, tanh(V h_k)
};

inline AttentionResult attention_pool(const AttentionParams& attn, const Matrix& instances) {
  const std::size_t W = instances.rows, H = instances.cols, A = attn.w.size();
  if (W < 1) throw ContractError("attention_pool: need at least one instance");
  if (attn.V.cols != H || attn.V.rows != A) throw ContractError("attention_pool: shape mismatch");
  AttentionResult res;
  res.gate = Matrix(W, A);
  res.logits.assign(W, 0.0);
  for (std::size_t k = 0; k < W; ++k) {
    auto u = res.gate.row(k);
    gemv_add(attn.V, instances.row(k), u);
    for (double& v : u) v = std::tanh(v);
    res.logits[k] = dot(attn.w, u);
  }
  const double mx = *std::max_element(res.logits.begin(), res.logits.end());
  res.weights.resize(W);
  double total = 0.0;
  for (std::size_t k = 0; k < W; ++k) total += res.weights[k] = std::exp(res.logits[k] - mx);
  for (double& a : res.weights) a /= total;
  res.pooled.assign(H, 0.0);
  for (std::size_t k = 0; k < W; ++k) axpy(res.weights[k], instances.row(k), res.pooled);
  return res;
}

// ---------------------------------------------------------------------------
// Flow embedding
// ---------------------------------------------------------------------------

struct Embedding {
  Vec v;

  std::size_t size() const { return v.size(); }
  double operator[](std::size_t i) const { return v[i]; }
  bool operator==(const Embedding&) const = default;
};

struct ForwardCache {
  std::vector<WindowCache> windows;
  Matrix encoded;  // W x H window encodings
  AttentionResult attention;
  Vec projected;  // pre-normalization, D
  double norm = 0.0;
  bool degenerate = false;
  Embedding embedding;
};

inline Embedding embed_flow(const ModelParams& params, const FeatureTensor& ft, ForwardCache& cache) {
  const std::size_t W = ft.windows, H = params.dims.hidden, D = params.dims.embedding;
  if (W < 1) throw ContractError("embed_flow: tensor has no windows");
  cache.windows.resize(W);
  cache.encoded = Matrix(W, H);
  for (std::size_t k = 0; k < W; ++k) {
    const Vec enc = encode_window_traced(params, ft.window(k), ft.valid_len[k], cache.windows[k]);
    std::copy(enc.begin(), enc.end(), cache.encoded.row(k).begin());
  }
  cache.attention = attention_pool(params.attn, cache.encoded);
  cache.projected = params.b_P;
  gemv_add(params.P, cache.attention.pooled, cache.projected);
  cache.norm = norm2(cache.projected);
  cache.embedding.v.assign(D, 0.0);
  cache.degenerate = cache.norm < kDegenerateNorm;
  if (cache.degenerate) {
    cache.embedding.v[0] = 1.0;
  } else {
    for (std::size_t i = 0; i < D; ++i) cache.embedding.v[i] = cache.projected[i] / cache.norm;
  }
  return cache.embedding;
}

inline Embedding embed_flow(const ModelParams& params, const FeatureTensor& ft) {
  ForwardCache cache;
  return embed_flow(params, ft, cache);
}

// Accumulates d(grad_embedding . e)/d(theta) into `grads`.
inline void backward_into(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_embedding,
                          ModelParams& grads) {
  const std::size_t D = params.dims.embedding, H = params.dims.hidden, A = params.dims.attention;
  const std::size_t W = cache.windows.size();
  if (grad_embedding.size() != D) throw ContractError("backward: gradient width mismatch");
  if (cache.embedding.size() != D || cache.encoded.rows != W || cache.encoded.cols != H)
    throw ContractError("backward: cache does not match parameters");
  if (cache.degenerate) return;

  // Normalization: de/dy = (I - e e^T) / |y|.
  const auto& e = cache.embedding.v;
  const double proj = dot(e, grad_embedding);
  Vec dy(D);
  for (std::size_t i = 0; i < D; ++i) dy[i] = (grad_embedding[i] - e[i] * proj) / cache.norm;

  const auto& att = cache.attention;
  ger_add(grads.P, dy, att.pooled);
  axpy(1.0, dy, grads.b_P);
  Vec dpooled(H, 0.0);
  gemv_t_add(params.P, dy, dpooled);

  // Softmax-weighted sum.
  Vec dweights(W);
  for (std::size_t k = 0; k < W; ++k) dweights[k] = dot(cache.encoded.row(k), dpooled);
  const double mean = dot(att.weights, dweights);
  Matrix dencoded(W, H);
  Vec dpre(A);
  for (std::size_t k = 0; k < W; ++k) {
    const double dlogit = att.weights[k] * (dweights[k] - mean);
    auto dh = dencoded.row(k);
    axpy(att.weights[k], dpooled, dh);
    const auto u = att.gate.row(k);
    axpy(dlogit, u, grads.attn.w);
    for (std::size_t j = 0; j < A; ++j) dpre[j] = dlogit * params.attn.w[j] * (1.0 - u[j] * u[j]);
    ger_add(grads.attn.V, dpre, cache.encoded.row(k));
    gemv_t_add(params.attn.V, dpre, dh);
  }

  for (std::size_t k = 0; k < W; ++k) {
    const auto& wc = cache.windows[k];
    Matrix dtop(wc.layer2.steps, H);
    const auto src = dencoded.row(k);
    std::copy(src.begin(), src.end(), dtop.row(wc.layer2.steps - 1).begin());
    const Matrix dmid = gru_backward(params.gru2, wc.layer1.h, wc.layer2, dtop, grads.gru2);
    gru_backward(params.gru1, wc.inputs, wc.layer1, dmid, grads.gru1);
  }
}

inline ModelParams backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_embedding) {
  ModelParams grads = zeros_like(params);
  backward_into(params, cache, grad_embedding, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

using GradientFn = std::function<ModelParams(const ModelParams&, const ForwardCache&, std::span<const double>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double max_abs_objective = 0.0;  // max |f| over the probes
  std::size_t coords_checked = 0;
  std::string worst_param;
};

// Relative error with a 1e-6 absolute floor on the denominator.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Checks the analytic gradient of f(theta) = g . embed(theta) for a seeded
// random direction g against central differences. max_coords == 0 perturbs
// every parameter; otherwise a seeded random subset of that size.
inline GradCheckResult finite_diff_check(const ModelParams& params, const FeatureTensor& ft, std::uint64_t seed,
                                         std::size_t max_coords = 0, const GradientFn& gradient = {},
                                         double step = 1e-5) {
  Rng rng(derive_seed(seed, "fdcheck"));
  Vec g(params.dims.embedding);
  for (double& v : g) v = rng.normal();

  ForwardCache cache;
  embed_flow(params, ft, cache);
  const ModelParams analytic = gradient ? gradient(params, cache, g) : backward(params, cache, g);

  struct Coord {
    std::string name;
    std::size_t tensor;
    std::size_t index;
  };
  std::vector<Coord> coords;
  std::size_t tensor_no = 0;
  visit_params(params, [&](const std::string& name, const auto& t) {
    for (std::size_t i = 0; i < flat(t).size(); ++i) coords.push_back({name, tensor_no, i});
    ++tensor_no;
  });
  if (max_coords > 0 && max_coords < coords.size()) {
    rng.shuffle(coords);
    coords.resize(max_coords);
  }

  auto tensor_at = [](auto& p, std::size_t which) {
    std::span<std::remove_reference_t<decltype(p.b_P[0])>> out;
    std::size_t n = 0;
    visit_params(p, [&](const std::string&, auto& t) {
      if (n++ == which) out = flat(t);
    });
    return out;
  };

  GradCheckResult res;
  ModelParams probe = params;
  for (const auto& c : coords) {
    auto t = tensor_at(probe, c.tensor);
    const double orig = t[c.index];
    t[c.index] = orig + step;
    const double fp = dot(g, embed_flow(probe, ft).v);
    t[c.index] = orig - step;
    const double fm = dot(g, embed_flow(probe, ft).v);
    t[c.index] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = tensor_at(analytic, c.tensor)[c.index];
    const double err = relative_error(a, numeric);
    res.max_abs_error = std::max(res.max_abs_error, std::abs(a - numeric));
    res.max_abs_objective = std::max({res.max_abs_objective, std::abs(fp), std::abs(fm)});
    if (!(err <= res.max_rel_error)) {
      res.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      res.worst_param = c.name + "[" + std::to_string(c.index) + "]";
    }
    ++res.coords_checked;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::ordered_json tensor_json(const Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}
inline nlohmann::ordered_json tensor_json(const Vec& v) { return v; }

inline void tensor_from_json(const nlohmann::json& j, Matrix& m, const std::string& name) {
  if (!j.is_array() || j.size() != m.rows) throw InvariantError("checkpoint: " + name + " has wrong row count");
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (!j[r].is_array() || j[r].size() != m.cols) throw InvariantError("checkpoint: " + name + " has wrong column count");
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  }
}
inline void tensor_from_json(const nlohmann::json& j, Vec& v, const std::string& name) {
  if (!j.is_array() || j.size() != v.size()) throw InvariantError("checkpoint: " + name + " has wrong length");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
}
}  // namespace detail

inline nlohmann::ordered_json checkpoint_to_json(const ModelParams& p, const WindowSpec& spec) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["dims"] = {{"H", p.dims.hidden}, {"A", p.dims.attention}, {"D", p.dims.embedding},
               {"W", spec.windows}, {"L", spec.max_packets}};
  nlohmann::ordered_json params;
  visit_params(p, [&](const std::string& name, const auto& t) { params[name] = detail::tensor_json(t); });
  j["params"] = std::move(params);
  return j;
}

struct Checkpoint {
  ModelParams params;
  std::size_t windows = 0;
  std::size_t max_packets = 0;
};

// Rejects version, dimension and shape mismatches. When `expect` is given its
// window geometry must match the checkpoint's.
inline Checkpoint checkpoint_from_json(const nlohmann::json& j, const WindowSpec* expect = nullptr,
                                       const ModelDims* expect_dims = nullptr) {
  if (j.value("version", 0) != 1) throw InvariantError("checkpoint: unsupported version");
  const auto& d = j.at("dims");
  ModelDims dims{d.at("H").get<std::size_t>(), d.at("A").get<std::size_t>(), d.at("D").get<std::size_t>()};
  dims.validate();
  Checkpoint ck{ModelParams(dims), d.at("W").get<std::size_t>(), d.at("L").get<std::size_t>()};
  if (expect && (expect->windows != ck.windows || expect->max_packets != ck.max_packets))
    throw InvariantError("checkpoint: window geometry W=" + std::to_string(ck.windows) + " L=" +
                         std::to_string(ck.max_packets) + " does not match configuration");
  if (expect_dims && !(*expect_dims == dims)) throw InvariantError("checkpoint: model dimensions do not match configuration");
  const auto& params = j.at("params");
  visit_params(ck.params, [&](const std::string& name, auto& t) {
    if (!params.contains(name)) throw InvariantError("checkpoint: missing tensor " + name);
    detail::tensor_from_json(params.at(name), t, name);
  });
  if (!all_finite(ck.params)) throw InvariantError("checkpoint: non-finite parameter");
  return ck;
}

}  // namespace rector
