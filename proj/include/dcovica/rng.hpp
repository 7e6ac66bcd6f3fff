#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

// Deterministic RNG streams. All distribution transforms are implemented
// explicitly (std:: distributions are implementation-defined), so a given
// (seed, stream) pair yields the same draws on any platform. Parallel code
// derives one stream per work item from (seed, index) and never shares
// engines across items, making results independent of thread count.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// One derived seed per independent work item (replicate, simulation, start).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed_mix(seed, 0, 0)) {}
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : engine_(seed_mix(seed, stream, substream)) {}

  // uniform on [0, 1)
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller; second draw cached
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // standard exponential (rate 1)
  double exponential() {
    double u = uniform01();
    if (u < 0x1.0p-53) u = 0x1.0p-53;
    return -std::log(u);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // multiply-shift; bias < 2^-64, fine for permutation/index use
    const unsigned __int128 m =
        static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Fisher-Yates permutation of {0, ..., n-1}
  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (Index i = n - 1; i > 0; --i) {
      const Index j = static_cast<Index>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  template <typename Scalar>
  VectorX<Scalar> normal_vector(Index n) {
    VectorX<Scalar> v(n);
    for (Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>(normal());
    return v;
  }

  template <typename Scalar>
  MatrixX<Scalar> normal_matrix(Index rows, Index cols) {
    MatrixX<Scalar> m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(normal());
    return m;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t substream) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    s ^= stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
    h ^= splitmix64(s);
    s ^= substream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    h ^= splitmix64(s);
    return h == 0 ? 0x1ULL : h;
  }

  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace dcovica
