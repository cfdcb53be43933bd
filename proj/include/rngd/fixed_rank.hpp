#pragma once

#include "rngd/manifold.hpp"

namespace rngd {

/// X = U diag(sigma) V^T with U (m x r), V (n x r) orthonormal.
struct FixedRankPoint {
  Mat U;
  Vec sigma;
  Mat V;

  Mat dense() const { return U * sigma.asDiagonal() * V.transpose(); }
};

/// xi = U M V^T + Up V^T + U Vp^T with U^T Up = 0, V^T Vp = 0.
struct FixedRankTangent {
  Mat M;
  Mat Up;
  Mat Vp;
};

Mat fr_ambient(const FixedRankPoint& x, const FixedRankTangent& t);
double fr_inner(const FixedRankTangent& a, const FixedRankTangent& b);
FixedRankTangent fr_project(const FixedRankPoint& x, const Mat& Z);
/// Projection onto T_y of a tangent given at x, without forming the m x n
/// ambient matrix.
FixedRankTangent fr_transport(const FixedRankPoint& x, const FixedRankPoint& y, const FixedRankTangent& t);
/// Metric projection onto rank r of X + xi via the 2r-column factorization.
/// Throws RankCollapse when sigma_r < 1e-12 sigma_1. Sets *degenerate when
/// sigma_r and sigma_{r+1} tie.
FixedRankPoint fr_retract(const FixedRankPoint& x, const FixedRankTangent& t, bool* degenerate = nullptr);

FixedRankPoint to_fixed_rank(const Point& p);
Point from_fixed_rank(const FixedRankPoint& x);

/// Rank-r matrices of size m x n with the embedded (Frobenius) metric.
/// Chart: [vec M; vec Up; vec Vp] (redundant, length r(m + n + r)); the
/// metric is the identity on it, and project() enforces U^T Up = 0, V^T Vp = 0.
class FixedRankManifold final : public Manifold {
 public:
  FixedRankManifold(Index m, Index n, Index r);
  std::string name() const override { return "fixed-rank"; }
  Index dim() const override { return r_ * (m_ + n_ - r_); }
  Index coord_dim() const override { return r_ * (m_ + n_ + r_); }
  std::size_t point_blocks() const override { return 3; }
  double inner(const Point&, const Vec& u, const Vec& v) const override { return u.dot(v); }
  Vec metric_apply(const Point&, const Vec& u) const override { return u; }
  Vec metric_solve(const Point&, const Vec& w) const override { return w; }
  Point retract(const Point& x, const Vec& v) const override;
  /// Solves P(X + xi) = Y for tangent xi by alternating projections between
  /// T_X and the normal space at Y.
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point& x, const Point& y) const override;
  Vec project(const Point& x, const Vec& u) const override;
  Vec embed(const Point& x) const override { return to_fixed_rank(x).dense().reshaped(); }
  Vec embed_tangent(const Point& x, const Vec& v) const override;
  std::vector<Range> natural_blocks() const override;
  Point random_point(Rng& rng) const override;

  FixedRankTangent unpack(const Vec& v) const;
  Vec pack(const FixedRankTangent& t) const;
  /// Chart coordinates of the projection of an ambient m x n matrix.
  Vec project_ambient(const Point& x, const Mat& Z) const;
  Index m() const { return m_; }
  Index n() const { return n_; }
  Index r() const { return r_; }

 private:
  Index m_, n_, r_;
};

}  // namespace rngd
