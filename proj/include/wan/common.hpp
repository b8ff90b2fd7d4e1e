#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace wan {

using Real = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Array = Eigen::ArrayXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// A non-finite value was produced; `layer` is the layer index when the
/// failure happened inside a network evaluation, -1 otherwise.
struct NonFiniteError : Error {
  int layer = -1;
  explicit NonFiniteError(const std::string& msg, int layer_index = -1)
      : Error(msg), layer(layer_index) {}
};

/// log() of a non-positive argument; `term` names the offending quantity.
struct LogDomainError : Error {
  std::string term;
  explicit LogDomainError(const std::string& term_name)
      : Error("log of non-positive argument in term '" + term_name + "'"),
        term(term_name) {}
};

/// The test-function norm estimate collapsed to zero.
struct DegenerateTestFunctionError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// RNG
//
// All randomness flows through Rng, a thin mt19937_64 wrapper that produces
// uniform doubles directly from the raw engine output so results do not
// depend on the standard library's distribution implementations.
// Independent streams are derived from (seed, stream tag) with SplitMix64.
// ---------------------------------------------------------------------------

enum class RngStream : std::uint64_t {
  Interior = 1,
  Boundary = 2,
  Initial = 3,
  ParamInit = 4,
  EvalSet = 5,
  Generic = 6,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes two seeds into one (stream/sub-run derivation).
inline std::uint64_t splitmix64_mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL * (b + 0x2545f4914f6cdd1dULL));
  return splitmix64(s);
}

class Rng {
 public:
  Rng() : Rng(0, RngStream::Generic) {}
  Rng(std::uint64_t seed, RngStream stream) : stream_(stream) {
    std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(stream));
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s))};
    engine_.seed(seq);
  }

  RngStream stream() const { return stream_; }

  /// Uniform in [0, 1), 53-bit resolution.
  Real uniform01() { return static_cast<Real>(engine_() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  std::mt19937_64& engine() { return engine_; }
  const std::mt19937_64& engine() const { return engine_; }

 private:
  std::mt19937_64 engine_;
  RngStream stream_;
};

// ---------------------------------------------------------------------------
// Parallelism
//
// Work is split into fixed-size chunks and chunk results land in per-chunk
// slots, so reductions happen in chunk order and results are independent of
// the worker count.
// ---------------------------------------------------------------------------

inline int hardware_threads() {
  if (const char* env = std::getenv("WAN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(i) for i in [0, count). Each index is processed exactly once; the
/// assignment of indices to workers is a static partition.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
  int threads = std::min(hardware_threads(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  auto worker = [&](int w) {
    for (int i = w; i < count; i += threads) fn(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int w = 1; w < threads; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit hash, used for config digests and RNG state digests.
inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

/// Relative difference with an absolute floor, used by gradient checks.
inline Real rel_diff(Real a, Real b, Real floor = 1.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace wan
