#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"

namespace pmdlab {

/**
 * Counter-based pseudo-random generator with cheap, collision-free substreams.
 *
 * A (master seed, stream id) pair is hashed once into a stream key; each draw
 * hashes `key + GOLDEN * counter` through a 64-bit finalizer.  Draws therefore
 * depend only on (seed, stream, counter), which makes runs reproducible and
 * lets independent components own independent streams without coordination.
 */
class SplitRng {
 public:
  SplitRng(std::uint64_t master_seed, std::uint64_t stream_id)
      : key_(mix64(master_seed + kGolden * (stream_id + 1))), counter_(0) {}

  /// Next raw 64-bit word.
  std::uint64_t next_u64() { return mix64(key_ + kGolden * (++counter_)); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in {0, ..., n-1}.  Requires n >= 1.
  int uniform_int(int n) {
    if (n < 1) throw ValidationError("uniform_int: n must be >= 1");
    int v = static_cast<int>(next_double() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

  /// Sample an index from the distribution {p[0], ..., p[n-1]} by walking the
  /// cumulative sums; falls back to the last index if rounding leaves the
  /// draw above the accumulated mass.
  int categorical(const double* p, int n) {
    if (n < 1) throw ValidationError("categorical: n must be >= 1");
    const double u = next_double();
    double cum = 0.0;
    for (int i = 0; i < n; ++i) {
      cum += p[i];
      if (u < cum) return i;
    }
    return n - 1;
  }

  /// Standard exponential variate (rate 1).
  double exponential() {
    // u in [0,1) so 1-u in (0,1] and the log is finite and <= 0.
    return -std::log1p(-next_double());
  }

  /// Number of draws consumed so far (diagnostic).
  std::uint64_t draws() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  /// SplitMix64 finalizer: a bijective 64-bit scramble with good avalanche.
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Uniform random point on the probability simplex of dimension n (normalized
/// exponentials).  Requires n >= 1.
inline std::vector<double> random_simplex(SplitRng& rng, int n) {
  if (n < 1) throw ValidationError("random_simplex: n must be >= 1");
  std::vector<double> x(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : x) {
    v = rng.exponential();
    sum += v;
  }
  if (sum <= 0.0) {  // astronomically unlikely: all draws were exactly zero
    for (double& v : x) v = 1.0 / static_cast<double>(n);
    return x;
  }
  for (double& v : x) v /= sum;
  return x;
}

}  // namespace pmdlab
