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
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rector/featurizer.hpp"

namespace rector {
namespace {

FlowTrace trace(std::vector<PacketRecord> pk) { return {"f", Role::ingress, 0, 0, "s", std::move(pk)}; }

TEST(Partition, HalfOpenBoundary) {
  const auto w = partition_windows(trace({{0.0, 10, 1}, {4.9, 10, 1}, {5.0, 10, 1}}), WindowSpec{});
  ASSERT_EQ(w.size(), 10u);
  EXPECT_EQ(w[0].size(), 2u);
  EXPECT_DOUBLE_EQ(w[1].at(0).t, 5.0);
  for (std::size_t k = 2; k < 10; ++k) EXPECT_TRUE(w[k].empty());
}

TEST(Partition, EmptyTrace) {
  const auto w = partition_windows(trace({}), WindowSpec{});
  ASSERT_EQ(w.size(), 10u);
  for (const auto& x : w) EXPECT_TRUE(x.empty());
}

TEST(Partition, PastLastWindowDiscarded) {
  const auto w = partition_windows(trace({{49.999, 10, 1}, {50.0, 10, 1}}), WindowSpec{});
  EXPECT_EQ(w[9].size(), 1u);
  std::size_t total = 0;
  for (const auto& x : w) total += x.size();
  EXPECT_EQ(total, 1u);
}

TEST(Window, EmptyIsAllZero) {
  const Matrix m = featurize_window({}, 100, 5.0);
  EXPECT_EQ(m.rows, 100u);
  for (double v : m.data) EXPECT_EQ(v, 0.0);
}

TEST(Window, SinglePacketSaturates) {
  const std::vector<PacketRecord> pk{{1.0, 1500, 1}};
  const Matrix m = featurize_window(pk, 100, 5.0);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 0.0);
  for (std::size_t i = 2; i < m.data.size(); ++i) EXPECT_EQ(m.data[i], 0.0);
}

TEST(Window, HandComputedRows) {
  const std::vector<PacketRecord> pk{{0.0, 750, -1}, {0.2, 1500, 1}};
  const Matrix m = featurize_window(pk, 4, 5.0);
  EXPECT_DOUBLE_EQ(m(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(m(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 0.2);
  for (std::size_t i = 4; i < m.data.size(); ++i) EXPECT_EQ(m.data[i], 0.0);
}

TEST(Window, OverflowKeepsFirstL) {
  std::vector<PacketRecord> pk;
  for (int i = 0; i < 7; ++i) pk.push_back({0.1 * i, 100 * (i + 1), 1});
  const Matrix m = featurize_window(pk, 3, 5.0);
  EXPECT_DOUBLE_EQ(m(2, 0), 300.0 / 1500.0);
  const Matrix oversize = featurize_window(std::vector<PacketRecord>{{0.0, 9000, -1}}, 1, 5.0);
  EXPECT_EQ(oversize(0, 0), -1.0);
}

TEST(Flow, EmptyTraceTensor) {
  const auto ft = featurize_flow(trace({}), WindowSpec{});
  EXPECT_EQ(ft.values.size(), 10u * 100u * 2u);
  for (double v : ft.values) EXPECT_EQ(v, 0.0);
  for (auto n : ft.valid_len) EXPECT_EQ(n, 0u);
}

TEST(Flow, TwelveSecondTraceFillsThreeWindows) {
  std::vector<PacketRecord> pk;
  for (int i = 0; i <= 120; ++i) pk.push_back({0.1 * i * (11.99 / 12.0), 600, i % 2 ? 1 : -1});
  const auto ft = featurize_flow(trace(pk), WindowSpec{});
  for (std::size_t w = 0; w < 3; ++w) EXPECT_GT(ft.valid_len[w], 0u);
  for (std::size_t w = 3; w < 10; ++w) {
    EXPECT_EQ(ft.valid_len[w], 0u);
    for (double v : ft.window(w)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Flow, RemovingOneWindowTouchesOnlyThatSlice) {
  std::mt19937_64 g(11);
  const WindowSpec spec;
  for (int rep = 0; rep < 50; ++rep) {
    auto f = oracle::random_trace(g, 55.0, 300);
    const auto before = featurize_flow(f, spec);
    const std::size_t target = g() % spec.windows;
    std::erase_if(f.packets, [&](const PacketRecord& p) { return std::floor(p.t / spec.window_s) == target; });
    const auto after = featurize_flow(f, spec);
    for (std::size_t w = 0; w < spec.windows; ++w) {
      const auto a = before.window(w), b = after.window(w);
      const bool same = std::equal(a.begin(), a.end(), b.begin());
      if (w == target) EXPECT_EQ(after.valid_len[w], 0u);
      else EXPECT_TRUE(same) << "window " << w;
    }
  }
}

// Locality under perturbation: jitter the sizes and times of packets inside
// one window, keeping them inside it; other slices are unchanged.
TEST(Flow, LocalityProperty) {
  std::mt19937_64 g(5);
  const WindowSpec spec{6, 2.0, 40};
  for (int rep = 0; rep < 200; ++rep) {
    auto f = oracle::random_trace(g, 12.0, 150);
    const auto before = featurize_flow(f, spec);
    const std::size_t target = g() % spec.windows;
    for (auto& p : f.packets) {
      if (std::floor(p.t / spec.window_s) != target) continue;
      p.size = 1 + static_cast<int>(g() % 1500);
      p.dir = -p.dir;
    }
    const auto after = featurize_flow(f, spec);
    for (std::size_t w = 0; w < spec.windows; ++w) {
      if (w == target) continue;
      const auto a = before.window(w), b = after.window(w);
      ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST(Flow, PaddingAndChannelBoundsProperty) {
  std::mt19937_64 g(9);
  for (int rep = 0; rep < 300; ++rep) {
    const WindowSpec spec{1 + g() % 12, 0.5 + (g() % 100) / 10.0, 1 + g() % 64};
    const auto f = oracle::random_trace(g, spec.windows * spec.window_s * 1.2, g() % 400);
    const auto ft = featurize_flow(f, spec);
    for (std::size_t w = 0; w < spec.windows; ++w) {
      ASSERT_LE(ft.valid_len[w], spec.max_packets);
      for (std::size_t l = 0; l < spec.max_packets; ++l) {
        const double c0 = ft.at(w, l, 0), c1 = ft.at(w, l, 1);
        if (l >= ft.valid_len[w]) {
          ASSERT_EQ(c0, 0.0);
          ASSERT_EQ(c1, 0.0);
        } else {
          ASSERT_GE(c0, -1.0);
          ASSERT_LE(c0, 1.0);
          ASSERT_NE(c0, 0.0);
          ASSERT_GE(c1, 0.0);
          ASSERT_LE(c1, spec.window_s);
        }
      }
    }
  }
}

TEST(Flow, Deterministic) {
  std::mt19937_64 g(1);
  const auto f = oracle::random_trace(g, 40.0, 200);
  EXPECT_EQ(featurize_flow(f, WindowSpec{}), featurize_flow(f, WindowSpec{}));
}

TEST(Dump, HeaderAndRoundTrip) {
  std::mt19937_64 g(2);
  const WindowSpec spec{3, 2.0, 8};
  std::vector<FeatureTensor> ts;
  for (int i = 0; i < 5; ++i) ts.push_back(featurize_flow(oracle::random_trace(g, 7.0, g() % 30), spec));
  std::ostringstream os;
  write_feature_dump(os, spec, ts);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 16u + 5u * 3u * 8u * 2u * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "RCTF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 8u);
  std::istringstream is(bytes);
  std::size_t W = 0, L = 0;
  const auto back = read_feature_dump(is, &W, &L);
  EXPECT_EQ(W, 3u);
  EXPECT_EQ(L, 8u);
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_EQ(back[i], ts[i]);
}

TEST(Dump, RejectsBadMagic) {
  std::istringstream is(std::string("XXXX\0\0\0\0", 8));
  EXPECT_THROW(read_feature_dump(is), InvariantError);
}

TEST(Spec, Validation) {
  EXPECT_THROW((WindowSpec{0, 5.0, 100}.validate()), ConfigError);
  EXPECT_THROW((WindowSpec{10, 0.0, 100}.validate()), ConfigError);
  EXPECT_THROW((WindowSpec{10, 5.0, 0}.validate()), ConfigError);
  EXPECT_NO_THROW(WindowSpec{}.validate());
}

}  // namespace
}  // namespace rector
