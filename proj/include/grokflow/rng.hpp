#pragma once

#include "grokflow/types.hpp"

#include <cmath>
#include <cstdint>

namespace grokflow {

/// Counter-based deterministic generator. Each draw is a pure function of
/// (seed, counter): the counter is hashed with the SplitMix64 finalizer and
/// Gaussians come from a Box-Muller transform of two hashed uniforms. Runs
/// with the same seed produce bit-identical streams regardless of call-site
/// interleaving elsewhere in the program.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return hash(seed_, counter_++); }

  /// Uniform in [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [a, b).
  Scalar uniform(Scalar a, Scalar b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller. Consumes two counter values per call.
  Scalar gaussian() {
    Scalar u1 = static_cast<Scalar>((next_u64() >> 11) + 1) * 0x1.0p-53;
    Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Scalar gaussian(Scalar stddev) { return stddev * gaussian(); }

  /// Index in [0, n).
  Index below(Index n) {
    return static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n));
  }

  VecX gaussian_vector(Index n, Scalar stddev = 1.0) {
    VecX v(n);
    for (Index i = 0; i < n; ++i) v[i] = gaussian(stddev);
    return v;
  }

  MatX gaussian_matrix(Index rows, Index cols, Scalar stddev = 1.0) {
    MatX m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = gaussian(stddev);
    return m;
  }

private:
  static std::uint64_t hash(std::uint64_t seed, std::uint64_t ctr) {
    // SplitMix64 finalizer applied to seed-offset counter.
    std::uint64_t z = ctr + seed * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace grokflow
