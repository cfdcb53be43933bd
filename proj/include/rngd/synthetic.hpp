#pragma once

#include "rngd/dataset.hpp"

#include <cstdint>
#include <optional>

namespace rngd {

struct LogisticGenParams {
  Index n = 500;
  Index d = 20;
  /// AR(1) feature correlation: cov(x_j, x_k) = rho^|j - k|.
  double rho = 0.0;
  /// True coefficients; drawn as N(0, beta_scale^2 I) when absent.
  std::optional<Vec> beta;
  double beta_scale = 1.0;
};

/// Binary logistic data: x ~ N(0, C_rho), y ~ Bernoulli(sigmoid(beta.x)).
Dataset gen_logistic(const LogisticGenParams& p, std::uint64_t seed);

struct LowRankGenParams {
  Index n = 10000;
  Index d = 20;
  int classes = 6;
  Index rank = 2;
  /// Singular values of the planted coefficient matrix are
  /// signal * (1, 1 - 1/(2r), ..., 1/2 + 1/(2r)).
  double signal = 3.0;
  double intercept_scale = 0.5;
};

/// Multiclass data with logits [alpha + B^T x; 0] and a planted rank-r
/// B (d x (K-1)); x ~ N(0, I).
Dataset gen_multiclass_lowrank(const LowRankGenParams& p, std::uint64_t seed);

/// The planted (B, alpha) for the same parameters and seed.
struct LowRankTruth {
  Mat B;
  Vec alpha;
};
LowRankTruth lowrank_truth(const LowRankGenParams& p, std::uint64_t seed);

}  // namespace rngd
