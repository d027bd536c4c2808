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

// Flow traces, dataset validation, circuit-disjoint splitting and the
// synthetic Tor-like traffic generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rector/common.hpp"

namespace rector {

struct PacketRecord {
  double t = 0.0;  // seconds since flow start
  int size = 0;    // payload bytes
  int dir = 1;     // +1 client->server, -1 server->client

  bool operator==(const PacketRecord&) const = default;
};

enum class Role { ingress, egress };

inline const char* to_string(Role r) { return r == Role::ingress ? "ingress" : "egress"; }

inline Role role_from_string(const std::string& s) {
  if (s == "ingress") return Role::ingress;
  if (s == "egress") return Role::egress;
  throw InvariantError("unknown flow role '" + s + "'");
}

struct FlowTrace {
  std::string flow_id;
  Role role = Role::ingress;
  std::int64_t circuit_id = 0;
  std::int64_t website_id = 0;
  std::string session_id;
  std::vector<PacketRecord> packets;

  bool operator==(const FlowTrace&) const = default;
};

struct DatasetMeta {
  std::string source = "unknown";
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct Dataset {
  std::vector<FlowTrace> flows;
  DatasetMeta meta;
};

struct SynthConfig {
  std::int64_t n_circuits = 40;
  std::int64_t n_websites = 20;
  std::int64_t visits_per_pair = 1;
  double mean_latency_s = 0.08;
  double latency_jitter_s = 0.01;
  double drop_prob = 0.02;
  int cell_bytes = 512;
  double duration_cap_s = 60.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_circuits < 1 || n_websites < 1 || visits_per_pair < 1)
      throw ConfigError("circuit, website and visit counts must be >= 1");
    if (!(mean_latency_s >= 0.0) || !(latency_jitter_s >= 0.0))
      throw ConfigError("latency parameters must be non-negative");
    if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw ConfigError("drop_prob must lie in [0, 1]");
    if (cell_bytes < 1) throw ConfigError("cell_bytes must be >= 1");
    if (!(duration_cap_s > 0.0)) throw ConfigError("duration_cap_s must be > 0");
  }

  // Canonical text used for provenance hashing.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "circuits=" << n_circuits << ";websites=" << n_websites << ";visits=" << visits_per_pair
       << ";latency=" << mean_latency_s << ";jitter=" << latency_jitter_s << ";drop=" << drop_prob
       << ";cell=" << cell_bytes << ";cap=" << duration_cap_s << ";seed=" << seed;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string flow_id;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

inline std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  std::unordered_set<std::string> ids;
  struct SessionInfo {
    std::int64_t circuit_id;
    std::int64_t website_id;
    int ingress = 0;
    int egress = 0;
  };
  std::unordered_map<std::string, SessionInfo> sessions;

  for (const auto& f : ds.flows) {
    if (!ids.insert(f.flow_id).second) out.push_back({f.flow_id, "duplicate flow_id"});

    bool time_ok = true, size_ok = true, dir_ok = true, order_ok = true;
    for (std::size_t i = 0; i < f.packets.size(); ++i) {
      const auto& p = f.packets[i];
      if (!std::isfinite(p.t) || p.t < 0.0) time_ok = false;
      if (p.size < 1) size_ok = false;
      if (p.dir != 1 && p.dir != -1) dir_ok = false;
      if (i > 0 && p.t < f.packets[i - 1].t) order_ok = false;
    }
    if (!time_ok) out.push_back({f.flow_id, "packet time must be finite and >= 0"});
    if (!size_ok) out.push_back({f.flow_id, "packet size must be >= 1"});
    if (!dir_ok) out.push_back({f.flow_id, "packet direction must be +1 or -1"});
    if (!order_ok) out.push_back({f.flow_id, "packets not sorted by time"});

    auto [it, inserted] = sessions.try_emplace(f.session_id, SessionInfo{f.circuit_id, f.website_id});
    auto& s = it->second;
    if (!inserted && (s.circuit_id != f.circuit_id || s.website_id != f.website_id))
      out.push_back({f.flow_id, "session spans multiple circuit/website ids"});
    int& count = f.role == Role::ingress ? s.ingress : s.egress;
    if (++count > 1) out.push_back({f.flow_id, std::string("session has more than one ") + to_string(f.role) + " trace"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace detail {

struct BurstProfile {
  double gap_s;        // mean idle time before the burst
  int packets;         // mean packet count
  double up_frac;      // probability a non-leading packet is upstream
  double request_mean; // upstream size mean
  double response_mean;
};

struct WebsiteProfile {
  std::vector<BurstProfile> bursts;
};

struct CircuitProfile {
  double rtt_scale;  // multiplies every idle gap
  double iat_mean;   // intra-burst packet spacing
};

inline WebsiteProfile website_profile(std::uint64_t seed, std::int64_t website_id) {
  Rng rng(derive_seed(seed, "website", static_cast<std::uint64_t>(website_id)));
  WebsiteProfile w;
  const std::size_t n = 4 + rng.below(7);
  for (std::size_t b = 0; b < n; ++b) {
    BurstProfile bp;
    bp.gap_s = b == 0 ? rng.uniform(0.05, 0.6) : rng.uniform(0.8, 6.0);
    bp.packets = 3 + static_cast<int>(rng.below(10));
    bp.up_frac = rng.uniform(0.05, 0.35);
    bp.request_mean = rng.uniform(80.0, 700.0);
    bp.response_mean = rng.uniform(500.0, 1500.0);
    w.bursts.push_back(bp);
  }
  return w;
}

inline CircuitProfile circuit_profile(std::uint64_t seed, std::int64_t circuit_id) {
  Rng rng(derive_seed(seed, "circuit", static_cast<std::uint64_t>(circuit_id)));
  return {rng.uniform(0.7, 1.5), rng.uniform(0.004, 0.03)};
}

inline int clamp_size(double v) { return static_cast<int>(std::clamp(std::lround(v), 40L, 1500L)); }

inline std::vector<PacketRecord> ingress_packets(const WebsiteProfile& web, const CircuitProfile& circ,
                                                 double cap, Rng& rng) {
  std::vector<PacketRecord> pkts;
  auto emit = [&](double start, const BurstProfile& b) {
    double t = start;
    const int count = std::max(1, static_cast<int>(std::lround(b.packets + 2.0 * rng.normal())));
    for (int i = 0; i < count; ++i) {
      if (i > 0) t += rng.exponential(circ.iat_mean);
      if (t >= cap) return;
      const bool up = i == 0 || rng.uniform() < b.up_frac;
      const int size = up ? clamp_size(rng.normal(b.request_mean, 60.0)) : clamp_size(rng.normal(b.response_mean, 180.0));
      pkts.push_back({t, size, up ? 1 : -1});
    }
  };

  // Per-visit variation around the website profile: idle gaps stretch and
  // shrink, non-leading bursts are occasionally absent (cache hits), and a
  // few third-party bursts land at random times.
  double t = 0.0;
  for (std::size_t b = 0; b < web.bursts.size(); ++b) {
    const auto& bp = web.bursts[b];
    t += bp.gap_s * circ.rtt_scale * std::exp(0.45 * rng.normal());
    if (b > 0 && rng.uniform() < 0.15) continue;
    emit(t, bp);
  }
  const double span = std::max(t, 1.0);
  const std::size_t extras = rng.below(4);
  for (std::size_t k = 0; k < extras; ++k) {
    const auto& bp = web.bursts[rng.below(web.bursts.size())];
    emit(rng.uniform(0.0, span), bp);
  }
  std::stable_sort(pkts.begin(), pkts.end(), [](const PacketRecord& a, const PacketRecord& b) { return a.t < b.t; });
  return pkts;
}

inline std::vector<PacketRecord> egress_packets(const std::vector<PacketRecord>& in, const SynthConfig& cfg, Rng& rng) {
  std::vector<PacketRecord> out;
  out.reserve(in.size());
  for (const auto& p : in) {
    const bool dropped = rng.uniform() < cfg.drop_prob;
    const double z = rng.normal();
    if (dropped) continue;
    double delay = cfg.mean_latency_s;
    if (cfg.latency_jitter_s > 0.0) delay += cfg.latency_jitter_s * std::exp(z);
    const double t = p.t + delay;
    if (t >= cfg.duration_cap_s) continue;
    const int cells = (p.size + cfg.cell_bytes - 1) / cfg.cell_bytes;
    out.push_back({t, cells * cfg.cell_bytes, p.dir});
  }
  std::stable_sort(out.begin(), out.end(), [](const PacketRecord& a, const PacketRecord& b) { return a.t < b.t; });
  return out;
}

}  // namespace detail

inline std::string session_name(std::int64_t c, std::int64_t w, std::int64_t v) {
  return "c" + std::to_string(c) + "_w" + std::to_string(w) + "_v" + std::to_string(v);
}

// One ingress and one egress trace per (circuit, website, visit). Profiles
// are keyed on (seed, id), so a corpus generated with more circuits is a
// superset of one generated with fewer.
inline Dataset gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.meta.source = "synthetic";
  ds.meta.seed = cfg.seed;
  ds.meta.config_hash = hex64(fnv1a64(cfg.canonical()));

  std::vector<detail::WebsiteProfile> webs;
  for (std::int64_t w = 0; w < cfg.n_websites; ++w) webs.push_back(detail::website_profile(cfg.seed, w));

  ds.flows.reserve(static_cast<std::size_t>(2 * cfg.n_circuits * cfg.n_websites * cfg.visits_per_pair));
  for (std::int64_t c = 0; c < cfg.n_circuits; ++c) {
    const auto circ = detail::circuit_profile(cfg.seed, c);
    for (std::int64_t w = 0; w < cfg.n_websites; ++w) {
      for (std::int64_t v = 0; v < cfg.visits_per_pair; ++v) {
        const auto uc = static_cast<std::uint64_t>(c);
        const auto uw = static_cast<std::uint64_t>(w);
        const auto uv = static_cast<std::uint64_t>(v);
        Rng visit_rng(derive_seed(cfg.seed, "visit", uc, uw, uv));
        Rng path_rng(derive_seed(cfg.seed, "path", uc, uw, uv));

        const std::string sid = session_name(c, w, v);
        FlowTrace in{sid + "_in", Role::ingress, c, w, sid, {}};
        in.packets = detail::ingress_packets(webs[static_cast<std::size_t>(w)], circ, cfg.duration_cap_s, visit_rng);
        FlowTrace out{sid + "_out", Role::egress, c, w, sid, detail::egress_packets(in.packets, cfg, path_rng)};
        ds.flows.push_back(std::move(in));
        ds.flows.push_back(std::move(out));
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

inline std::vector<std::int64_t> circuit_ids(const Dataset& ds) {
  std::set<std::int64_t> ids;
  for (const auto& f : ds.flows) ids.insert(f.circuit_id);
  return {ids.begin(), ids.end()};
}

struct SplitResult {
  Dataset train;
  Dataset test;
};

inline SplitResult split_by_circuit(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvariantError("split: train_fraction must lie strictly between 0 and 1");
  auto circuits = circuit_ids(ds);
  if (circuits.size() < 2)
    throw InvariantError("split: need at least 2 circuits, found " + std::to_string(circuits.size()));

  const auto n = static_cast<std::int64_t>(circuits.size());
  const auto n_train = std::clamp<std::int64_t>(std::llround(train_fraction * static_cast<double>(n)), 1, n - 1);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(circuits);
  const std::set<std::int64_t> train_set(circuits.begin(), circuits.begin() + n_train);

  SplitResult r;
  r.train.meta = r.test.meta = ds.meta;
  for (const auto& f : ds.flows) (train_set.count(f.circuit_id) ? r.train : r.test).flows.push_back(f);
  return r;
}

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json flow_to_json(const FlowTrace& f) {
  nlohmann::ordered_json j;
  j["flow_id"] = f.flow_id;
  j["role"] = to_string(f.role);
  j["circuit_id"] = f.circuit_id;
  j["website_id"] = f.website_id;
  j["session_id"] = f.session_id;
  auto pk = nlohmann::ordered_json::array();
  for (const auto& p : f.packets) pk.push_back({p.t, p.size, p.dir});
  j["packets"] = std::move(pk);
  return j;
}

inline FlowTrace flow_from_json(const nlohmann::json& j) {
  FlowTrace f;
  f.flow_id = j.at("flow_id").get<std::string>();
  f.role = role_from_string(j.at("role").get<std::string>());
  f.circuit_id = j.at("circuit_id").get<std::int64_t>();
  f.website_id = j.at("website_id").get<std::int64_t>();
  f.session_id = j.at("session_id").get<std::string>();
  for (const auto& p : j.at("packets")) {
    if (!p.is_array() || p.size() != 3) throw InvariantError("flow " + f.flow_id + ": packet must be [t, size, dir]");
    f.packets.push_back({p[0].get<double>(), p[1].get<int>(), p[2].get<int>()});
  }
  return f;
}

inline void write_flows_jsonl(std::ostream& os, const Dataset& ds) {
  for (const auto& f : ds.flows) os << flow_to_json(f).dump() << '\n';
}

inline Dataset read_flows_jsonl(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.flows.push_back(flow_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvariantError("flow JSONL line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace rector
