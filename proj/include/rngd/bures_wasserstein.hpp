#pragma once

#include "rngd/linalg.hpp"
#include "rngd/manifold.hpp"

namespace rngd {

/// Default eigenvalue floor applied after every covariance update.
inline constexpr double kCovarianceClip = 1e-8;

struct GaussPoint {
  Vec m;
  Mat sigma;
};

/// BW tangent: mean direction u and the symmetric covariance direction X,
/// where the covariance moves as (I + X) Sigma (I + X).
struct GaussTangent {
  Vec u;
  Mat X;
};

/// Half-vectorization with sqrt(2)-weighted off-diagonals, so that
/// svec(A).dot(svec(B)) == trace(A B) for symmetric A, B.
Vec svec(const Mat& a);
Mat svec_inv(const Eigen::Ref<const Vec>& v, Index d);
inline Index svec_dim(Index d) { return d * (d + 1) / 2; }

/// Eigenvalues clipped from below at eta. Reports whether anything moved.
Mat clip_eigenvalues(const Mat& a, double eta, bool* clipped = nullptr);

double bw_inner(const GaussPoint& x, const GaussTangent& a, const GaussTangent& b);
/// Throws ExpDomain unless X + I is positive definite (margin 1e-10).
GaussPoint bw_exp(const GaussPoint& x, const GaussTangent& v, double eta = kCovarianceClip);
GaussTangent bw_log(const GaussPoint& x, const GaussPoint& y);
/// Differentiated-exp transport of a covariance direction from Sigma1 to Sigma2.
Mat bw_transport(const Mat& sigma1, const Mat& sigma2, const Mat& X);
/// Adjoint of bw_transport w.r.t. tr(X Sigma Y) at both ends.
Mat bw_transport_adjoint(const Mat& sigma1, const Mat& sigma2, const Mat& W);
double w2_distance(const GaussPoint& a, const GaussPoint& b);

/// Euclidean partials of log N(y; m, Sigma).
GaussTangent gaussian_score(const GaussPoint& x, const Vec& y);

enum class GaussChart { Euclidean, BuresWasserstein };
/// Natural gradient from Euclidean partials (g_mu, g_Sigma):
/// Euclidean chart (Sigma g_mu, 2 Sigma g_Sigma Sigma), BW chart
/// (Sigma g_mu, 2 L_{Sigma^{-1}}(g_Sigma)).
GaussTangent gaussian_natgrad(const GaussPoint& x, const GaussTangent& g, GaussChart chart);

/// vec-space BW metric 1/2 (I (x) Sigma + Sigma (x) I) applied to vec(X)
/// without forming the Kronecker product.
Vec bw_vec_metric_apply(const Mat& sigma, const Vec& vecX);

double gaussian_kl(const GaussPoint& p, const GaussPoint& q);
/// Fisher quadratic form of the Gaussian family at x for a direction given
/// as (dm, dSigma) in ambient coordinates.
double gaussian_fisher_quadratic(const GaussPoint& x, const Vec& dm, const Mat& dsigma);

GaussPoint to_gauss(const Point& p);
Point from_gauss(const GaussPoint& g);

/// Shared base for the two Gaussian geometries: points are {m, Sigma},
/// tangent coordinates are [u; svec(.)] of length d + d(d+1)/2.
class GaussianManifoldBase : public Manifold {
 public:
  explicit GaussianManifoldBase(Index d, double eta = kCovarianceClip) : d_(d), eta_(eta) {}
  Index dim() const override { return d_ + svec_dim(d_); }
  Index coord_dim() const override { return d_ + svec_dim(d_); }
  std::size_t point_blocks() const override { return 2; }
  Index d() const { return d_; }
  double eta() const { return eta_; }
  Vec embed(const Point& x) const override;
  std::vector<Range> natural_blocks() const override { return {{0, d_}, {d_, svec_dim(d_)}}; }
  Point random_point(Rng& rng) const override;
  virtual GaussChart chart() const = 0;

  Vec pack(const Vec& u, const Mat& s) const;
  void unpack(const Vec& v, Vec& u, Mat& s) const;
  /// Coordinates of the Riemannian gradient for Euclidean partials.
  Vec gradient_coords(const GaussPoint& x, const Vec& g_mu, const Mat& g_sigma) const;
  /// Coordinates of the score (Riemannian gradient of log q at y).
  Vec score_coords(const GaussPoint& x, const Vec& y) const;
  /// Exact natural gradient coordinates for Euclidean partials.
  Vec natgrad_coords(const GaussPoint& x, const Vec& g_mu, const Mat& g_sigma) const;

 protected:
  Index d_;
  double eta_;
};

/// Bures-Wasserstein geometry in the X-chart: metric u.u' + tr(X Sigma X'),
/// retraction = exponential map followed by eigenvalue clipping, transport =
/// differentiated exponential map.
class BuresWassersteinManifold final : public GaussianManifoldBase {
 public:
  using GaussianManifoldBase::GaussianManifoldBase;
  std::string name() const override { return "bw"; }
  GaussChart chart() const override { return GaussChart::BuresWasserstein; }
  double inner(const Point& x, const Vec& a, const Vec& b) const override;
  Vec metric_apply(const Point& x, const Vec& u) const override;
  Vec metric_solve(const Point& x, const Vec& w) const override;
  Point retract(const Point& x, const Vec& v) const override;
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point& x, const Point& y) const override;
  Vec embed_tangent(const Point& x, const Vec& v) const override;
  bool has_exact_exp() const override { return true; }
};

/// Flat (mean, covariance) geometry: identity metric in [u; svec(dSigma)],
/// additive retraction with eigenvalue clipping, identity transport.
class GaussEuclideanManifold final : public GaussianManifoldBase {
 public:
  using GaussianManifoldBase::GaussianManifoldBase;
  std::string name() const override { return "gauss-euclidean"; }
  GaussChart chart() const override { return GaussChart::Euclidean; }
  double inner(const Point&, const Vec& a, const Vec& b) const override { return a.dot(b); }
  Vec metric_apply(const Point&, const Vec& u) const override { return u; }
  Vec metric_solve(const Point&, const Vec& w) const override { return w; }
  Point retract(const Point& x, const Vec& v) const override;
  Vec inverse_retract(const Point& x, const Point& y) const override;
  std::unique_ptr<TangentMap> transport_map(const Point&, const Point&) const override {
    return std::make_unique<IdentityMap>(coord_dim());
  }
  bool isometric_transport() const override { return true; }
  Vec embed_tangent(const Point& x, const Vec& v) const override;
  bool has_exact_exp() const override { return true; }
};

}  // namespace rngd
