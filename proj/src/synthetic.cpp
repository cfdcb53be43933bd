#include "rngd/synthetic.hpp"

#include "rngd/error.hpp"
#include "rngd/objectives.hpp"
#include "rngd/rng.hpp"
#include "rngd/stiefel.hpp"

#include <cmath>

namespace rngd {

Dataset gen_logistic(const LogisticGenParams& p, std::uint64_t seed) {
  require(p.n >= 0 && p.d >= 1, ErrorKind::ConfigError, "logistic generator: need n >= 0 and d >= 1");
  require(p.rho > -1.0 && p.rho < 1.0, ErrorKind::ConfigError, "logistic generator: rho must lie in (-1, 1)");
  Mat C(p.d, p.d);
  for (Index i = 0; i < p.d; ++i)
    for (Index j = 0; j < p.d; ++j) C(i, j) = std::pow(p.rho, static_cast<double>(std::abs(i - j)));
  const Mat L = Eigen::LLT<Mat>(C).matrixL();
  Rng rng = make_rng(seed, 0);
  Dataset ds;
  ds.name = "logistic";
  ds.X = randn(rng, p.n, p.d) * L.transpose();
  Vec beta;
  if (p.beta) {
    require(p.beta->size() == p.d, ErrorKind::ConfigError, "logistic generator: beta length != d");
    beta = *p.beta;
  } else {
    beta = p.beta_scale * randn(rng, p.d);
  }
  ds.y.resize(p.n);
  const Vec t = ds.X * beta;
  for (Index i = 0; i < p.n; ++i) ds.y(i) = uniform01(rng) < 1.0 / (1.0 + std::exp(-t(i))) ? 1.0 : 0.0;
  ds.label_names = {"0", "1"};
  return ds;
}

LowRankTruth lowrank_truth(const LowRankGenParams& p, std::uint64_t seed) {
  require(p.classes >= 3 && p.d >= 1, ErrorKind::ConfigError, "lowrank generator: need K >= 3 and d >= 1");
  require(p.rank >= 1 && p.rank <= std::min<Index>(p.d, p.classes - 1), ErrorKind::ConfigError,
          "lowrank generator: need 1 <= r <= min(d, K - 1)");
  Rng rng = make_rng(seed, 0x10f4a);
  const Mat U = random_stiefel(rng, p.d, p.rank);
  const Mat V = random_stiefel(rng, p.classes - 1, p.rank);
  Vec s(p.rank);
  for (Index k = 0; k < p.rank; ++k) s(k) = p.signal * (1.0 - static_cast<double>(k) / (2.0 * p.rank));
  LowRankTruth t;
  t.B = U * s.asDiagonal() * V.transpose();
  t.alpha = p.intercept_scale * randn(rng, p.classes - 1);
  return t;
}

Dataset gen_multiclass_lowrank(const LowRankGenParams& p, std::uint64_t seed) {
  require(p.n >= 0, ErrorKind::ConfigError, "lowrank generator: need n >= 0");
  const LowRankTruth truth = lowrank_truth(p, seed);
  Rng rng = make_rng(seed, 0x10f4b);
  Dataset ds;
  ds.name = "multiclass-lowrank";
  ds.classes = p.classes;
  ds.X = randn(rng, p.n, p.d);
  ds.y.resize(p.n);
  for (Index i = 0; i < p.n; ++i) {
    const Vec prob = rr_forward(truth.B, truth.alpha, ds.X.row(i).transpose());
    const double u = uniform01(rng);
    double acc = 0.0;
    int label = p.classes - 1;
    for (Index k = 0; k < prob.size(); ++k) {
      acc += prob(k);
      if (u < acc) {
        label = static_cast<int>(k);
        break;
      }
    }
    ds.y(i) = label;
  }
  for (int k = 0; k < p.classes; ++k) ds.label_names.push_back(std::to_string(k));
  return ds;
}

}  // namespace rngd
