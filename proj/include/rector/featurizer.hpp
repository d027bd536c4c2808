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

// Window partition and the padded W x L x 2 per-packet feature tensor.
//
// Channel 0 holds the direction-signed size, dir * min(size, 1500) / 1500.
// Channel 1 holds the gap to the previous packet of the same window (0 for
// the first packet), clipped to the window duration. Rows past the window's
// packet count are zero.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "rector/common.hpp"
#include "rector/linalg.hpp"
#include "rector/traffic.hpp"

namespace rector {

inline constexpr double kSizeScale = 1500.0;
inline constexpr std::size_t kChannels = 2;

struct WindowSpec {
  std::size_t windows = 10;
  double window_s = 5.0;
  std::size_t max_packets = 100;

  void validate() const {
    if (windows < 1) throw ConfigError("window count must be >= 1");
    if (!(window_s > 0.0)) throw ConfigError("window duration must be > 0");
    if (max_packets < 1) throw ConfigError("max packets per window must be >= 1");
  }

  bool operator==(const WindowSpec&) const = default;
};

struct FeatureTensor {
  std::size_t windows = 0;
  std::size_t max_packets = 0;
  std::vector<double> values;          // windows * max_packets * 2
  std::vector<std::size_t> valid_len;  // per window, <= max_packets

  FeatureTensor() = default;
  FeatureTensor(std::size_t w, std::size_t l) : windows(w), max_packets(l), values(w * l * kChannels, 0.0), valid_len(w, 0) {}

  std::span<double> window(std::size_t w) { return {values.data() + w * max_packets * kChannels, max_packets * kChannels}; }
  std::span<const double> window(std::size_t w) const {
    return {values.data() + w * max_packets * kChannels, max_packets * kChannels};
  }
  double at(std::size_t w, std::size_t l, std::size_t c) const { return values[(w * max_packets + l) * kChannels + c]; }

  bool operator==(const FeatureTensor&) const = default;
};

// Half-open windows [w * window_s, (w + 1) * window_s); later packets dropped.
inline std::vector<std::vector<PacketRecord>> partition_windows(const FlowTrace& trace, const WindowSpec& spec) {
  std::vector<std::vector<PacketRecord>> out(spec.windows);
  for (const auto& p : trace.packets) {
    const double idx = std::floor(p.t / spec.window_s);
    if (idx >= 0.0 && idx < static_cast<double>(spec.windows)) out[static_cast<std::size_t>(idx)].push_back(p);
  }
  return out;
}

// Writes the L x 2 row-major block for one window into `out` and returns the
// number of rows used.
inline std::size_t featurize_window_into(std::span<const PacketRecord> packets, std::size_t max_packets,
                                         double window_s, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t n = std::min(packets.size(), max_packets);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& p = packets[l];
    out[l * kChannels] = p.dir * std::min<double>(p.size, kSizeScale) / kSizeScale;
    const double gap = l == 0 ? 0.0 : p.t - packets[l - 1].t;
    out[l * kChannels + 1] = std::clamp(gap, 0.0, window_s);
  }
  return n;
}

inline Matrix featurize_window(std::span<const PacketRecord> packets, std::size_t max_packets, double window_s) {
  Matrix m(max_packets, kChannels);
  featurize_window_into(packets, max_packets, window_s, m.data);
  return m;
}

inline FeatureTensor featurize_flow(const FlowTrace& trace, const WindowSpec& spec) {
  FeatureTensor ft(spec.windows, spec.max_packets);
  const auto parts = partition_windows(trace, spec);
  for (std::size_t w = 0; w < spec.windows; ++w)
    ft.valid_len[w] = featurize_window_into(parts[w], spec.max_packets, spec.window_s, ft.window(w));
  return ft;
}

// ---------------------------------------------------------------------------
// Feature dump: "RCTF", u32 W, u32 L, u32 channels, then one W*L*2 block of
// little-endian f64 per flow. Flow ids live in a JSONL sidecar.
// ---------------------------------------------------------------------------

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw InvariantError("feature dump: truncated header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}
inline double get_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw InvariantError("feature dump: truncated record");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace detail

inline void write_feature_dump(std::ostream& os, const WindowSpec& spec, std::span<const FeatureTensor> tensors) {
  os.write("RCTF", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(spec.windows));
  detail::put_u32(os, static_cast<std::uint32_t>(spec.max_packets));
  detail::put_u32(os, static_cast<std::uint32_t>(kChannels));
  for (const auto& ft : tensors) {
    if (ft.windows != spec.windows || ft.max_packets != spec.max_packets)
      throw ContractError("feature dump: tensor shape does not match window spec");
    for (double v : ft.values) detail::put_f64(os, v);
  }
}

// valid_len is recovered from channel 0, which is never zero for a real packet.
inline std::vector<FeatureTensor> read_feature_dump(std::istream& is, std::size_t* windows_out = nullptr,
                                                    std::size_t* max_packets_out = nullptr) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "RCTF", 4) != 0) throw InvariantError("feature dump: bad magic");
  const std::size_t w = detail::get_u32(is);
  const std::size_t l = detail::get_u32(is);
  const std::size_t ch = detail::get_u32(is);
  if (ch != kChannels || w == 0 || l == 0) throw InvariantError("feature dump: unsupported shape");
  if (windows_out) *windows_out = w;
  if (max_packets_out) *max_packets_out = l;
  std::vector<FeatureTensor> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    FeatureTensor ft(w, l);
    for (double& v : ft.values) v = detail::get_f64(is);
    for (std::size_t k = 0; k < w; ++k) {
      std::size_t n = 0;
      while (n < l && ft.at(k, n, 0) != 0.0) ++n;
      ft.valid_len[k] = n;
    }
    out.push_back(std::move(ft));
  }
  return out;
}

}  // namespace rector
