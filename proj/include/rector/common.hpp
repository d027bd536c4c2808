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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rector {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Exit-code classes used by the command-line driver.
enum class ErrorKind {
  internal = 1,
  missing_input = 2,
  invariant = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::internal)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Invalid configuration values (counts, probabilities, dimensions).
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config: " + w, ErrorKind::invariant) {}
};

// Caller broke a shape or range precondition.
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error("contract: " + w, ErrorKind::internal) {}
};

// A required artifact or file is absent.
struct MissingInputError : Error {
  explicit MissingInputError(const std::string& w) : Error("missing input: " + w, ErrorKind::missing_input) {}
};

// Data or artifact content violates a documented invariant.
struct InvariantError : Error {
  explicit InvariantError(const std::string& w) : Error(w, ErrorKind::invariant) {}
};

// ---------------------------------------------------------------------------
// Seeding and random numbers
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace detail {
constexpr std::uint64_t stream_key(std::uint64_t v) noexcept { return v; }
constexpr std::uint64_t stream_key(std::string_view v) noexcept { return fnv1a64(v); }
constexpr std::uint64_t stream_key(const char* v) noexcept { return fnv1a64(v); }
}  // namespace detail

// Counter-based seed splitting: every (seed, stream...) tuple maps to an
// independent 64-bit seed, so workers never share generator state.
template <typename... Streams>
constexpr std::uint64_t derive_seed(std::uint64_t seed, const Streams&... streams) noexcept {
  std::uint64_t s = splitmix64(seed);
  ((s = splitmix64(s ^ splitmix64(detail::stream_key(streams) + 0x632BE59BD9B4E019ULL))), ...);
  return s;
}

// Bit-exact generator: mt19937_64 output is fixed by the standard; the
// distributions below are written out so results do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n == 0) throw ContractError("Rng::below(0)");
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double mean) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Misc helpers
// ---------------------------------------------------------------------------

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Worker count: RECTOR_THREADS caps hardware concurrency.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RECTOR_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

// Runs fn(i) for i in [0, n) over up to `threads` workers with a static
// interleaved schedule. fn must only write to per-index state.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rector
