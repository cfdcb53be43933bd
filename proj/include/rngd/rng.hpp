#pragma once

#include "rngd/types.hpp"

#include <cstdint>
#include <random>

namespace rngd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(derive_seed(seed, stream)); }

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

inline Vec randn(Rng& rng, Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = std_normal(rng);
  return v;
}

inline Mat randn(Rng& rng, Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = std_normal(rng);
  return m;
}

/// Random SPD matrix Q diag(l) Q^T with eigenvalues in [lo, hi].
Mat random_spd(Rng& rng, Index d, double lo = 0.5, double hi = 2.0);
/// Random matrix with orthonormal columns.
Mat random_stiefel(Rng& rng, Index n, Index p);

}  // namespace rngd
