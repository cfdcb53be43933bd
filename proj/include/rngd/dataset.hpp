#pragma once

#include "rngd/types.hpp"

#include <string>
#include <vector>

namespace rngd {

/// Dense feature matrix with numeric labels. Binary data uses labels {0, 1};
/// multiclass data uses {0, ..., classes - 1}.
struct Dataset {
  std::string name;
  Mat X;
  Vec y;
  int classes = 2;
  /// Original label text for each mapped class, when the source had one.
  std::vector<std::string> label_names;
  /// Per-feature standardization applied at load time (empty if none).
  Vec feature_mean;
  Vec feature_std;

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }
};

/// Standardizes features to zero mean and unit variance in place, recording
/// the transform. Constant columns are centered only.
void standardize(Dataset& ds);

}  // namespace rngd
