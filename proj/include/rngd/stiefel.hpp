#pragma once

#include "rngd/manifold.hpp"

namespace rngd {

Mat st_project(const Mat& X, const Mat& M);

/// Cayley operator Q = (I - W/2)^{-1} (I + W/2) for W = P U X^T - X U^T P,
/// P = I - X X^T / 2. Q is orthogonal, so it serves both as retraction
/// (Q X) and as the associated isometric transport (Q V). Uses the rank-2p
/// Woodbury form when p <= n/4, a dense LU otherwise.
class CayleyOperator {
 public:
  CayleyOperator(const Mat& X, const Mat& U);

  Mat apply(const Mat& V) const;
  /// Q^T V = Q^{-1} V.
  Mat apply_transpose(const Mat& V) const;
  Index n() const { return n_; }

 private:
  Index n_ = 0;
  bool low_rank_ = false;
  Mat Q_;                 // dense path
  Mat L_, R_;             // W = L R^T
  Eigen::PartialPivLU<Mat> small_plus_, small_minus_;
};

/// Cayley retraction; re-orthonormalizes by sign-fixed thin QR when
/// ||Y^T Y - I||_F exceeds 1e-8. Throws RetractFail when I - W/2 is singular.
Mat st_cayley_retract(const Mat& X, const Mat& U);
Mat st_cayley_transport(const Mat& X, const Mat& U, const Mat& V);
/// Tangent U at X with st_cayley_retract(X, U) = Y; throws RadiusExceeded
/// when I + X^T Y is singular or the round trip misses Y.
Mat st_inverse_cayley(const Mat& X, const Mat& Y);

/// St(p, n) with the Euclidean metric. Tangent coordinates are vec(Z) of the
/// ambient n x p matrix; the Cayley transport acts on the whole ambient space
/// and is orthogonal there.
class StiefelManifold final : public Manifold {
 public:
  StiefelManifold(Index n, Index p);
  std::string name() const override { return "stiefel"; }
  Index dim() const override { return n_ * p_ - p_ * (p_ + 1) / 2; }
  Index coord_dim() const override { return n_ * p_; }
  std::size_t point_blocks() const override { return 1; }
  double inner(const Point&, const Vec& u, const Vec& v) const override { return u.dot(v); }
  Vec metric_apply(const Point&, const Vec& u) const override { return u; }
  Vec metric_solve(const Point&, const Vec& w) const override { return w; }
  Point retract(const Point& x, const Vec& v) const override;
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> step_transport_map(const Point& x, const Vec& step, const Point& y) const override;
  std::unique_ptr<TangentMap> step_back_transport_map(const Point& x, const Vec& step,
                                                      const Point& y) const override;
  bool isometric_transport() const override { return true; }
  Vec project(const Point& x, const Vec& u) const override;
  Vec embed(const Point& x) const override { return x.block(0).reshaped(); }
  Vec embed_tangent(const Point&, const Vec& v) const override { return v; }
  Point random_point(Rng& rng) const override { return Point({random_stiefel(rng, n_, p_)}); }

  Index n() const { return n_; }
  Index p() const { return p_; }

 private:
  Index n_, p_;
};

}  // namespace rngd
