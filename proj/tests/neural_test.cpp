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

#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rector/neural.hpp"

namespace rector {
namespace {

const ModelDims kSmall{6, 4, 5};
const WindowSpec kSmallSpec{3, 2.0, 8};

Matrix random_inputs(std::mt19937_64& g, std::size_t T, std::size_t I) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(T, I);
  for (double& v : m.data) v = u(g);
  return m;
}

std::vector<oracle::V> rows(const Matrix& m) {
  std::vector<oracle::V> out;
  for (std::size_t t = 0; t < m.rows; ++t) out.emplace_back(m.row(t).begin(), m.row(t).end());
  return out;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

TEST(Gru, ZeroParamsGiveZeroStates) {
  std::mt19937_64 g(1);
  const GruLayerParams layer(2, 5);
  const Matrix h = gru_forward(layer, random_inputs(g, 7, 2), Vec(5, 0.0));
  for (double v : h.data) EXPECT_EQ(v, 0.0);
}

TEST(Gru, SingleStepMatchesGateEquations) {
  GruLayerParams layer(1, 1);
  layer.W_z(0, 0) = 0.3, layer.U_z(0, 0) = -0.2, layer.b_z[0] = 0.1;
  layer.W_r(0, 0) = -0.5, layer.U_r(0, 0) = 0.4, layer.b_r[0] = 0.2;
  layer.W_h(0, 0) = 0.7, layer.U_h(0, 0) = 0.9, layer.b_h[0] = -0.3;
  Matrix x(1, 1);
  x(0, 0) = 0.8;
  const double h0 = 0.25;
  const double z = 1.0 / (1.0 + std::exp(-(0.3 * 0.8 - 0.2 * h0 + 0.1)));
  const double r = 1.0 / (1.0 + std::exp(-(-0.5 * 0.8 + 0.4 * h0 + 0.2)));
  const double c = std::tanh(0.7 * 0.8 + 0.9 * r * h0 - 0.3);
  const Matrix h = gru_forward(layer, x, Vec{h0});
  EXPECT_NEAR(h(0, 0), (1 - z) * h0 + z * c, 1e-15);
}

TEST(Gru, MatchesScalarReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(seed);
    const ModelParams p = init_params(kSmall, seed);
    const Matrix x = random_inputs(g, 1 + g() % 20, 2);
    const Matrix h1 = gru_forward(p.gru1, x, Vec(kSmall.hidden, 0.0));
    const Matrix h2 = gru_forward(p.gru2, h1, Vec(kSmall.hidden, 0.0));
    const auto r1 = oracle::gru(p.gru1, rows(x));
    const auto r2 = oracle::gru(p.gru2, r1);
    for (std::size_t t = 0; t < x.rows; ++t)
      for (std::size_t i = 0; i < kSmall.hidden; ++i) {
        ASSERT_NEAR(h1(t, i), r1[t][i], 1e-12);
        ASSERT_NEAR(h2(t, i), r2[t][i], 1e-12);
      }
  }
}

TEST(Gru, ShapeMismatchIsContractError) {
  GruLayerParams layer(2, 4);
  EXPECT_THROW(gru_forward(layer, Matrix(3, 3), Vec(4, 0.0)), ContractError);
  EXPECT_THROW(gru_forward(layer, Matrix(3, 2), Vec(3, 0.0)), ContractError);
  layer.U_h = Matrix(3, 4);
  EXPECT_THROW(gru_forward(layer, Matrix(3, 2), Vec(4, 0.0)), ContractError);
}

// ---------------------------------------------------------------------------
// Window encoder
// ---------------------------------------------------------------------------

TEST(Encode, EmptyWindowZeroParams) {
  const ModelParams p(kSmall);
  const Vec h = encode_window(p, Vec(16, 0.0), 0);
  for (double v : h) EXPECT_EQ(v, 0.0);
}

TEST(Encode, PaddingIsIgnored) {
  std::mt19937_64 g(3);
  const ModelParams p = init_params(kSmall, 3);
  Vec a(16, 0.0), b(16, 0.0);
  for (std::size_t i = 0; i < 6; ++i) a[i] = b[i] = std::uniform_real_distribution<double>(-1, 1)(g);
  for (std::size_t i = 6; i < 16; ++i) b[i] = 42.0;
  EXPECT_EQ(encode_window(p, a, 3), encode_window(p, b, 3));
}

TEST(Encode, MatchesScalarReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(seed);
    const ModelParams p = init_params(kSmall, seed + 100);
    const FeatureTensor ft = oracle::random_tensor(g, kSmallSpec);
    for (std::size_t w = 0; w < ft.windows; ++w) {
      const Vec h = encode_window(p, ft.window(w), ft.valid_len[w]);
      const auto ref = oracle::encode_window(p, ft, w);
      for (std::size_t i = 0; i < h.size(); ++i) ASSERT_NEAR(h[i], ref[i], 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Attention pooling
// ---------------------------------------------------------------------------

Matrix random_instances(std::mt19937_64& g, std::size_t W, std::size_t H) { return random_inputs(g, W, H); }

TEST(Attention, SingletonIsIdentity) {
  std::mt19937_64 g(1);
  const ModelParams p = init_params(kSmall, 1);
  const Matrix h = random_instances(g, 1, kSmall.hidden);
  const auto r = attention_pool(p.attn, h);
  EXPECT_EQ(r.weights, Vec{1.0});
  for (std::size_t i = 0; i < kSmall.hidden; ++i) EXPECT_EQ(r.pooled[i], h(0, i));
}

TEST(Attention, IdenticalInstancesShareWeight) {
  std::mt19937_64 g(2);
  const ModelParams p = init_params(kSmall, 2);
  const Matrix one = random_instances(g, 1, kSmall.hidden);
  Matrix h(5, kSmall.hidden);
  for (std::size_t k = 0; k < 5; ++k) std::copy(one.data.begin(), one.data.end(), h.row(k).begin());
  const auto r = attention_pool(p.attn, h);
  for (double a : r.weights) EXPECT_NEAR(a, 0.2, 1e-15);
}

TEST(Attention, MatchesScalarReference) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 g(seed);
    const ModelParams p = init_params(kSmall, seed);
    const Matrix h = random_instances(g, 1 + g() % 12, kSmall.hidden);
    const auto r = attention_pool(p.attn, h);
    const auto ref = oracle::attention(p.attn, rows(h));
    for (std::size_t k = 0; k < h.rows; ++k) ASSERT_NEAR(r.weights[k], ref.a[k], 1e-12);
    for (std::size_t i = 0; i < kSmall.hidden; ++i) ASSERT_NEAR(r.pooled[i], ref.z[i], 1e-12);
  }
}

TEST(Attention, ShiftInvarianceAndLargeLogits) {
  std::mt19937_64 g(4);
  ModelParams p = init_params(kSmall, 4);
  const Matrix h = random_instances(g, 6, kSmall.hidden);
  const auto base = attention_pool(p.attn, h);
  // Softmax of logits + c equals the reported weights for any c.
  for (double c : {-50.0, 0.5, 300.0}) {
    double total = 0.0;
    for (double l : base.logits) total += std::exp(l + c - 300.0);
    for (std::size_t k = 0; k < h.rows; ++k)
      EXPECT_NEAR(std::exp(base.logits[k] + c - 300.0) / total, base.weights[k], 1e-12);
  }
  for (double& w : p.attn.w) w *= 1e4;  // logits of order 1e4 must not overflow
  const auto big = attention_pool(p.attn, h);
  double s = 0.0;
  for (double a : big.weights) {
    EXPECT_TRUE(std::isfinite(a));
    s += a;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Attention, WeightsPositiveAndNormalizedProperty) {
  std::mt19937_64 g(5);
  for (int rep = 0; rep < 500; ++rep) {
    const ModelParams p = init_params(kSmall, rep);
    const auto r = attention_pool(p.attn, random_instances(g, 1 + g() % 15, kSmall.hidden));
    double s = 0.0;
    for (double a : r.weights) {
      ASSERT_GT(a, 0.0);
      s += a;
    }
    ASSERT_NEAR(s, 1.0, 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Flow embedding
// ---------------------------------------------------------------------------

TEST(Embed, DegenerateZeroCase) {
  const ModelParams p(kSmall);
  const FeatureTensor ft(kSmallSpec.windows, kSmallSpec.max_packets);
  ForwardCache cache;
  const Embedding e = embed_flow(p, ft, cache);
  EXPECT_TRUE(cache.degenerate);
  Vec e1(kSmall.embedding, 0.0);
  e1[0] = 1.0;
  EXPECT_EQ(e.v, e1);
  const ModelParams gz = backward(p, cache, Vec(kSmall.embedding, 1.0));
  visit_params(gz, [](const std::string&, const auto& t) {
    for (double v : flat(t)) EXPECT_EQ(v, 0.0);
  });
}

TEST(Embed, SwappingEmptyWindowsChangesNothing) {
  std::mt19937_64 g(8);
  const ModelParams p = init_params(kSmall, 8);
  const WindowSpec spec{4, 2.0, 8};
  FlowTrace f = oracle::random_trace(g, 2.0, 5);  // window 0 only
  const FeatureTensor a = featurize_flow(f, spec);
  FeatureTensor b = a;
  std::swap_ranges(b.window(1).begin(), b.window(1).end(), b.window(3).begin());
  std::swap(b.valid_len[1], b.valid_len[3]);
  EXPECT_EQ(embed_flow(p, a).v, embed_flow(p, b).v);
}

TEST(Embed, MatchesScalarReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(seed);
    const ModelParams p = init_params(kSmall, seed + 7);
    const FeatureTensor ft = oracle::random_tensor(g, kSmallSpec);
    const Embedding e = embed_flow(p, ft);
    const auto ref = oracle::embed(p, ft);
    for (std::size_t i = 0; i < e.size(); ++i) ASSERT_NEAR(e[i], ref[i], 1e-12);
  }
}

TEST(Embed, DefaultDimsMatchScalarReference) {
  std::mt19937_64 g(77);
  const ModelParams p = init_params(ModelDims{}, 77);
  const FeatureTensor ft = oracle::random_tensor(g, WindowSpec{});
  const Embedding e = embed_flow(p, ft);
  const auto ref = oracle::embed(p, ft);
  for (std::size_t i = 0; i < e.size(); ++i) ASSERT_NEAR(e[i], ref[i], 1e-12);
}

TEST(Embed, UnitNormAndPaddingInvarianceProperty) {
  std::mt19937_64 g(12);
  for (int rep = 0; rep < 200; ++rep) {
    const ModelParams p = init_params(kSmall, rep);
    FeatureTensor ft = oracle::random_tensor(g, kSmallSpec);
    const Embedding e = embed_flow(p, ft);
    ASSERT_NEAR(norm2(e.v), 1.0, 1e-9);
    // Junk in padded rows is never read.
    for (std::size_t w = 0; w < ft.windows; ++w)
      for (std::size_t l = ft.valid_len[w]; l < ft.max_packets; ++l)
        ft.window(w)[l * kChannels] = ft.window(w)[l * kChannels + 1] = 3.5;
    ASSERT_EQ(embed_flow(p, ft).v, e.v);
  }
}

// ---------------------------------------------------------------------------
// Backward and the finite-difference check
// ---------------------------------------------------------------------------

TEST(Backward, ZeroUpstreamGradient) {
  std::mt19937_64 g(1);
  const ModelParams p = init_params(kSmall, 1);
  ForwardCache cache;
  embed_flow(p, oracle::random_tensor(g, kSmallSpec), cache);
  const ModelParams gr = backward(p, cache, Vec(kSmall.embedding, 0.0));
  visit_params(gr, [](const std::string&, const auto& t) {
    for (double v : flat(t)) EXPECT_EQ(v, 0.0);
  });
}

TEST(Backward, ZeroInputsGiveZeroInputMatrixGradients) {
  const ModelParams p = init_params(kSmall, 2);
  const FeatureTensor ft(kSmallSpec.windows, kSmallSpec.max_packets);
  ForwardCache cache;
  embed_flow(p, ft, cache);
  ASSERT_FALSE(cache.degenerate);
  const ModelParams gr = backward(p, cache, Vec(kSmall.embedding, 1.0));
  for (const Matrix* m : {&gr.gru1.W_z, &gr.gru1.W_r, &gr.gru1.W_h})
    for (double v : m->data) EXPECT_EQ(v, 0.0);
  double other = 0.0;
  for (double v : gr.gru1.U_z.data) other += std::abs(v);
  for (double v : gr.gru1.b_h) other += std::abs(v);
  EXPECT_GT(other, 0.0);
}

TEST(Backward, WidthMismatchIsContractError) {
  const ModelParams p = init_params(kSmall, 2);
  ForwardCache cache;
  embed_flow(p, FeatureTensor(2, 3), cache);
  EXPECT_THROW(backward(p, cache, Vec(kSmall.embedding + 1, 0.0)), ContractError);
}

// Central differences at h = 1e-5 cannot resolve better than a few ulps of
// the objective divided by 2h; the bound allows 100 ulps.
double roundoff_bound(const GradCheckResult& r, double h = 1e-5) {
  return 100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, r.max_abs_objective) / h;
}

TEST(GradCheck, AllCoordinatesSmallModel) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 g(seed);
    const ModelParams p = init_params(kSmall, seed + 50);
    const auto r = finite_diff_check(p, oracle::random_tensor(g, kSmallSpec), seed);
    EXPECT_EQ(r.coords_checked, parameter_count(p));
    EXPECT_LE(r.max_abs_error, roundoff_bound(r)) << "worst " << r.worst_param;
  }
}

TEST(GradCheck, SubsetDefaultModel) {
  std::mt19937_64 g(21);
  const WindowSpec spec{10, 5.0, 30};
  const ModelParams p = init_params(ModelDims{}, 21);
  const auto r = finite_diff_check(p, oracle::random_tensor(g, spec), 21, 250);
  EXPECT_EQ(r.coords_checked, 250u);
  EXPECT_LE(r.max_abs_error, roundoff_bound(r)) << "worst " << r.worst_param;
}

TEST(GradCheck, FlippedRecurrentCandidateGradientIsCaught) {
  std::mt19937_64 g(3);
  const ModelParams p = init_params(kSmall, 3);
  const GradientFn mutant = [](const ModelParams& params, const ForwardCache& cache, std::span<const double> ge) {
    ModelParams gr = backward(params, cache, ge);
    for (double& v : gr.gru1.U_h.data) v = -v;
    for (double& v : gr.gru2.U_h.data) v = -v;
    return gr;
  };
  const auto r = finite_diff_check(p, oracle::random_tensor(g, kSmallSpec), 3, 0, mutant);
  EXPECT_GT(r.max_rel_error, 1e-2);
  EXPECT_NE(r.worst_param.find("U_h"), std::string::npos);
}

TEST(GradCheck, ZeroParamsStayFinite) {
  std::mt19937_64 g(4);
  const ModelParams p(kSmall);
  const auto r = finite_diff_check(p, oracle::random_tensor(g, kSmallSpec), 4);
  EXPECT_TRUE(std::isfinite(r.max_rel_error));
}

// ---------------------------------------------------------------------------
// Initialization and checkpoints
// ---------------------------------------------------------------------------

TEST(Init, DeterministicAndBounded) {
  const ModelParams a = init_params(kSmall, 9), b = init_params(kSmall, 9), c = init_params(kSmall, 10);
  EXPECT_EQ(a.gru1.W_z.data, b.gru1.W_z.data);
  EXPECT_NE(a.gru1.W_z.data, c.gru1.W_z.data);
  for (double v : a.gru1.W_z.data) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(2.0));
  for (double v : a.gru2.U_h.data) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(6.0));
  EXPECT_TRUE(all_finite(a));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelParams p = init_params(kSmall, 5);
  const auto j = checkpoint_to_json(p, kSmallSpec);
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["dims"]["W"], kSmallSpec.windows);
  const Checkpoint ck = checkpoint_from_json(nlohmann::json::parse(j.dump()), &kSmallSpec, &kSmall);
  visit_params(p, [&, k = std::size_t{0}](const std::string& name, const auto& t) mutable {
    std::size_t n = 0;
    visit_params(ck.params, [&](const std::string& other, const auto& u) {
      if (n++ == k) {
        EXPECT_EQ(other, name);
        EXPECT_TRUE(std::equal(flat(t).begin(), flat(t).end(), flat(u).begin()));
      }
    });
    ++k;
  });
}

TEST(Checkpoint, RejectsMismatches) {
  const ModelParams p = init_params(kSmall, 5);
  const auto j = nlohmann::json::parse(checkpoint_to_json(p, kSmallSpec).dump());
  const WindowSpec other{4, 2.0, 8};
  EXPECT_THROW(checkpoint_from_json(j, &other), InvariantError);
  const ModelDims dims{6, 4, 6};
  EXPECT_THROW(checkpoint_from_json(j, nullptr, &dims), InvariantError);
  auto bad = j;
  bad["params"]["proj.P"] = nlohmann::json::array({{1.0}});
  EXPECT_THROW(checkpoint_from_json(bad), InvariantError);
  bad = j;
  bad["version"] = 2;
  EXPECT_THROW(checkpoint_from_json(bad), InvariantError);
  bad = j;
  bad["params"].erase("attn.w");
  EXPECT_THROW(checkpoint_from_json(bad), InvariantError);
}

}  // namespace
}  // namespace rector
