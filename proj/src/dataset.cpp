#include "rngd/dataset.hpp"

#include <cmath>

namespace rngd {

void standardize(Dataset& ds) {
  const Index n = ds.n(), d = ds.d();
  ds.feature_mean = Vec::Zero(d);
  ds.feature_std = Vec::Ones(d);
  if (n == 0) return;
  for (Index j = 0; j < d; ++j) {
    const double mean = ds.X.col(j).mean();
    const double var = (ds.X.col(j).array() - mean).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    ds.feature_mean(j) = mean;
    ds.X.col(j).array() -= mean;
    if (sd > 0.0) {
      ds.feature_std(j) = sd;
      ds.X.col(j) /= sd;
    }
  }
}

}  // namespace rngd
