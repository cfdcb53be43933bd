#pragma once

#include "rngd/rng.hpp"
#include "rngd/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rngd {

/// Linear map between two tangent spaces, acting on coordinate vectors.
/// Adjoints are taken with respect to the metrics at the two endpoints.
class TangentMap {
 public:
  virtual ~TangentMap() = default;

  virtual Index in_dim() const = 0;
  virtual Index out_dim() const = 0;
  virtual Vec apply(const Vec& u) const = 0;
  virtual Vec apply_adjoint(const Vec& w) const = 0;
  /// (T^*)^{-1}; throws NotInvertible when the map has no inverse.
  virtual Vec apply_inverse_adjoint(const Vec& w) const;
  virtual bool isometric() const { return false; }

  /// Column-wise versions; backends may batch them.
  virtual Mat apply_cols(const Mat& u) const;
  virtual Mat apply_adjoint_cols(const Mat& w) const;
  virtual Mat apply_inverse_adjoint_cols(const Mat& w) const;

  /// Coordinate matrix of the map.
  virtual Mat matrix() const;

  /// T^* o S o T for an operator S on the output space, returned as a matrix
  /// on the input space.
  virtual Mat congruence(const Mat& s) const;
};

class IdentityMap final : public TangentMap {
 public:
  explicit IdentityMap(Index n) : n_(n) {}
  Index in_dim() const override { return n_; }
  Index out_dim() const override { return n_; }
  Vec apply(const Vec& u) const override { return u; }
  Vec apply_adjoint(const Vec& w) const override { return w; }
  Vec apply_inverse_adjoint(const Vec& w) const override { return w; }
  bool isometric() const override { return true; }
  Mat matrix() const override { return Mat::Identity(n_, n_); }
  Mat congruence(const Mat& s) const override { return s; }

 private:
  Index n_;
};

/// Block-diagonal map assembled from per-factor maps.
class BlockDiagonalMap final : public TangentMap {
 public:
  explicit BlockDiagonalMap(std::vector<std::unique_ptr<TangentMap>> parts);
  Index in_dim() const override { return in_; }
  Index out_dim() const override { return out_; }
  Vec apply(const Vec& u) const override;
  Vec apply_adjoint(const Vec& w) const override;
  Vec apply_inverse_adjoint(const Vec& w) const override;
  bool isometric() const override;
  Mat congruence(const Mat& s) const override;

 private:
  std::vector<std::unique_ptr<TangentMap>> parts_;
  std::vector<Range> in_ranges_, out_ranges_;
  Index in_ = 0, out_ = 0;
};

/// A Riemannian manifold seen through a fixed coordinate chart on each
/// tangent space. Tangent vectors are flat coordinate vectors of length
/// coord_dim(); the chart may be redundant (coord_dim() > dim()), in which
/// case project() maps arbitrary coordinates onto the tangent space.
class Manifold {
 public:
  virtual ~Manifold() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual Index coord_dim() const = 0;
  /// Number of dense blocks in a point of this manifold.
  virtual std::size_t point_blocks() const = 0;

  virtual double inner(const Point& x, const Vec& u, const Vec& v) const { return u.dot(metric_apply(x, v)); }
  double norm(const Point& x, const Vec& u) const;
  /// Coordinate metric matrix G applied to u.
  virtual Vec metric_apply(const Point& x, const Vec& u) const = 0;
  /// G^{-1} w.
  virtual Vec metric_solve(const Point& x, const Vec& w) const = 0;

  virtual Point retract(const Point& x, const Vec& v) const = 0;
  /// Inverse of retract near x; throws RadiusExceeded when it cannot be
  /// computed reliably.
  virtual Vec inverse_retract(const Point& x, const Point& y) const = 0;

  /// Vector transport T_{x,y}: T_x -> T_y.
  virtual std::unique_ptr<TangentMap> transport_map(const Point& x, const Point& y) const = 0;
  /// Transport along the step y = retract(x, step). Backends with a
  /// step-based transport (Cayley) override this; the default ignores the step.
  virtual std::unique_ptr<TangentMap> step_transport_map(const Point& x, const Vec& step, const Point& y) const;
  /// A transport from y back to x for the same step. Defaults to
  /// transport_map(y, x).
  virtual std::unique_ptr<TangentMap> step_back_transport_map(const Point& x, const Vec& step, const Point& y) const;

  Vec transport(const Point& x, const Point& y, const Vec& u) const { return transport_map(x, y)->apply(u); }
  Vec transport_adjoint(const Point& x, const Point& y, const Vec& w) const {
    return transport_map(x, y)->apply_adjoint(w);
  }

  virtual bool isometric_transport() const { return false; }
  /// Orthogonal projection of chart coordinates onto the tangent space.
  virtual Vec project(const Point&, const Vec& u) const { return u; }

  /// Flat embedding of points and tangents into a Euclidean space, used for
  /// finite-difference diagnostics: d/dt embed(retract(x, t v)) at 0 must
  /// equal embed_tangent(x, v).
  virtual Vec embed(const Point& x) const = 0;
  virtual Vec embed_tangent(const Point& x, const Vec& v) const = 0;
  /// Distance-like discrepancy between points (Frobenius of embeddings).
  double embed_distance(const Point& x, const Point& y) const { return (embed(x) - embed(y)).norm(); }

  /// Partition of the chart used by block-diagonal Fisher states. The metric
  /// must be block-diagonal with respect to it.
  virtual std::vector<Range> natural_blocks() const { return {Range{0, coord_dim()}}; }

  virtual Point random_point(Rng& rng) const = 0;
  /// Random tangent at x (projected Gaussian coordinates).
  virtual Vec random_tangent(const Point& x, Rng& rng) const;
  virtual bool has_exact_exp() const { return false; }
};

class EuclideanManifold final : public Manifold {
 public:
  explicit EuclideanManifold(Index n) : n_(n) {}
  std::string name() const override { return "euclidean"; }
  Index dim() const override { return n_; }
  Index coord_dim() const override { return n_; }
  std::size_t point_blocks() const override { return 1; }
  double inner(const Point&, const Vec& u, const Vec& v) const override { return u.dot(v); }
  Vec metric_apply(const Point&, const Vec& u) const override { return u; }
  Vec metric_solve(const Point&, const Vec& w) const override { return w; }
  Point retract(const Point& x, const Vec& v) const override;
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point&, const Point&) const override {
    return std::make_unique<IdentityMap>(n_);
  }
  bool isometric_transport() const override { return true; }
  Vec embed(const Point& x) const override { return x.block(0).reshaped(); }
  Vec embed_tangent(const Point&, const Vec& v) const override { return v; }
  Point random_point(Rng& rng) const override { return Point({randn(rng, n_)}); }
  bool has_exact_exp() const override { return true; }

  static Point make_point(const Vec& v) { return Point({Mat(v)}); }

 private:
  Index n_;
};

/// Cartesian product; points concatenate factor blocks, tangent coordinates
/// concatenate factor coordinates.
class ProductManifold final : public Manifold {
 public:
  explicit ProductManifold(std::vector<std::shared_ptr<const Manifold>> factors);

  std::string name() const override;
  Index dim() const override;
  Index coord_dim() const override { return coord_dim_; }
  std::size_t point_blocks() const override { return blocks_; }
  double inner(const Point& x, const Vec& u, const Vec& v) const override;
  Vec metric_apply(const Point& x, const Vec& u) const override;
  Vec metric_solve(const Point& x, const Vec& w) const override;
  Point retract(const Point& x, const Vec& v) const override;
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> step_transport_map(const Point& x, const Vec& step, const Point& y) const override;
  std::unique_ptr<TangentMap> step_back_transport_map(const Point& x, const Vec& step,
                                                      const Point& y) const override;
  bool isometric_transport() const override;
  Vec project(const Point& x, const Vec& u) const override;
  Vec embed(const Point& x) const override;
  Vec embed_tangent(const Point& x, const Vec& v) const override;
  std::vector<Range> natural_blocks() const override;
  Point random_point(Rng& rng) const override;
  Vec random_tangent(const Point& x, Rng& rng) const override;
  bool has_exact_exp() const override;

  std::size_t num_factors() const { return factors_.size(); }
  const Manifold& factor(std::size_t i) const { return *factors_.at(i); }
  Range coord_range(std::size_t i) const { return coord_ranges_.at(i); }
  Point factor_point(const Point& x, std::size_t i) const;
  Point join(const std::vector<Point>& parts) const;

 private:
  std::vector<std::shared_ptr<const Manifold>> factors_;
  std::vector<Range> coord_ranges_;
  std::vector<std::size_t> block_offsets_;
  Index coord_dim_ = 0;
  std::size_t blocks_ = 0;
};

struct RetractionReport {
  double zero_error = 0.0;       ///< ||embed(R(x, 0)) - embed(x)||
  double differential_error = 0.0;  ///< relative FD error of DR(0)[v] vs v
  double second_order_slope = 0.0;  ///< NaN unless has_exact_exp()
  bool passed = false;
};

/// Finite-difference step h = 1e-6 max(1, ||embed(x)||) (central).
RetractionReport check_retraction_axioms(const Manifold& m, const Point& x, const Vec& v);

struct TransportReport {
  double identity_error = 0.0;   ///< ||T_{x,x} u - u|| / ||u||
  double adjoint_error = 0.0;    ///< |<Tu,w>_y - <u,T*w>_x| / (||u|| ||w||)
  double isometry_error = 0.0;   ///< | ||Tu|| - ||u|| | / ||u||, 0 if not isometric
  bool passed = false;
};

TransportReport check_transport_consistency(const Manifold& m, const Point& x, const Point& y, const Vec& u,
                                            const Vec& w);

}  // namespace rngd
