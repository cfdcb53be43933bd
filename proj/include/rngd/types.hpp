#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

namespace rngd {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Half-open coordinate range [offset, offset + size).
struct Range {
  Index offset = 0;
  Index size = 0;

  Index end() const { return offset + size; }
  bool operator==(const Range&) const = default;
};

/// Opaque manifold point: an ordered list of dense blocks whose meaning is
/// fixed by the owning backend (e.g. {mean, covariance} for Gaussians,
/// {U, sigma, V} for fixed-rank matrices). Product manifolds concatenate the
/// blocks of their factors.
class Point {
 public:
  Point() = default;
  explicit Point(std::vector<Mat> blocks) : blocks_(std::move(blocks)) {}

  std::size_t num_blocks() const { return blocks_.size(); }
  const Mat& block(std::size_t i) const { return blocks_.at(i); }
  Mat& block(std::size_t i) { return blocks_.at(i); }
  const std::vector<Mat>& blocks() const { return blocks_; }
  std::vector<Mat>& blocks() { return blocks_; }

  /// Sub-point made of blocks [first, first + count).
  Point slice(std::size_t first, std::size_t count) const {
    return Point(std::vector<Mat>(blocks_.begin() + static_cast<std::ptrdiff_t>(first),
                                  blocks_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

  bool operator==(const Point& other) const {
    if (blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i].rows() != other.blocks_[i].rows() || blocks_[i].cols() != other.blocks_[i].cols() ||
          blocks_[i] != other.blocks_[i])
        return false;
    }
    return true;
  }

 private:
  std::vector<Mat> blocks_;
};

/// Column-stacking vec() and its inverse.
inline Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unvec(const Eigen::Ref<const Vec>& v, Index rows, Index cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }
inline Mat skew(const Mat& a) { return 0.5 * (a - a.transpose()); }

}  // namespace rngd
