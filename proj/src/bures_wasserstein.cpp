#include "rngd/bures_wasserstein.hpp"

#include "rngd/error.hpp"

#include <cmath>

namespace rngd {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

void require_gauss(const GaussPoint& x, const char* what) {
  require(x.sigma.rows() == x.m.size() && x.sigma.cols() == x.m.size(), ErrorKind::InvalidInput,
          std::string(what) + ": dimension mismatch");
}

}  // namespace

Vec svec(const Mat& a) {
  const Index d = a.rows();
  Vec v(svec_dim(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    v(k++) = a(j, j);
    for (Index i = j + 1; i < d; ++i) v(k++) = kSqrt2 * 0.5 * (a(i, j) + a(j, i));
  }
  return v;
}

Mat svec_inv(const Eigen::Ref<const Vec>& v, Index d) {
  require(v.size() == svec_dim(d), ErrorKind::InvalidInput, "svec_inv: length mismatch");
  Mat a(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    a(j, j) = v(k++);
    for (Index i = j + 1; i < d; ++i) {
      a(i, j) = a(j, i) = v(k++) / kSqrt2;
    }
  }
  return a;
}

Mat clip_eigenvalues(const Mat& a, double eta, bool* clipped) {
  auto e = linalg::sym_eig(a);
  bool any = false;
  for (Index i = 0; i < e.lambda.size(); ++i) {
    if (e.lambda(i) < eta) {
      e.lambda(i) = eta;
      any = true;
    }
  }
  if (clipped) *clipped = any;
  if (!any) return sym(a);
  return linalg::spectral_apply(e, [](double x) { return x; });
}

double bw_inner(const GaussPoint& x, const GaussTangent& a, const GaussTangent& b) {
  require_gauss(x, "bw_inner");
  require(a.u.size() == x.m.size() && b.u.size() == x.m.size() && a.X.rows() == x.m.size() &&
              b.X.rows() == x.m.size(),
          ErrorKind::InvalidInput, "bw_inner: dimension mismatch");
  return a.u.dot(b.u) + (a.X * x.sigma * b.X).trace();
}

GaussPoint bw_exp(const GaussPoint& x, const GaussTangent& v, double eta) {
  require_gauss(x, "bw_exp");
  const Index d = x.m.size();
  require(v.u.size() == d && v.X.rows() == d && v.X.cols() == d, ErrorKind::InvalidInput,
          "bw_exp: dimension mismatch");
  Mat ipx = Mat::Identity(d, d) + sym(v.X);
  if (d > 0) {
    auto e = linalg::sym_eig(ipx);
    if (!(e.lambda(d - 1) > 1e-10)) fail(ErrorKind::ExpDomain, "bw_exp: I + X is not positive definite");
  }
  GaussPoint y;
  y.m = x.m + v.u;
  y.sigma = clip_eigenvalues(sym(ipx * x.sigma * ipx), eta);
  return y;
}

GaussTangent bw_log(const GaussPoint& x, const GaussPoint& y) {
  require_gauss(x, "bw_log");
  require_gauss(y, "bw_log");
  const Index d = x.m.size();
  GaussTangent t;
  t.u = y.m - x.m;
  t.X = linalg::geometric_mean(linalg::spd_inverse(x.sigma), y.sigma) - Mat::Identity(d, d);
  return t;
}

namespace {

/// Pieces of the differentiated exponential map between two covariances.
struct BwTransportCore {
  Mat A;  // (Sigma1^{-1} # Sigma2) Sigma1
  linalg::SpectralDecomposition e1, e2;
  // Diagonalization A = V diag(a) V^{-1}; only built when inverses are needed.
  Mat V, Vinv;
  Vec a;
  bool have_inverse = false;

  BwTransportCore(const Mat& s1, const Mat& s2) {
    e1 = linalg::sym_eig(s1);
    e2 = linalg::sym_eig(s2);
    linalg::check_spd(e1, "bw_transport");
    linalg::check_spd(e2, "bw_transport");
    Mat s1h = linalg::spectral_apply(e1, [](double v) { return std::sqrt(v); });
    Mat s1ih = linalg::spectral_apply(e1, [](double v) { return 1.0 / std::sqrt(v); });
    // Sigma1^{-1} # Sigma2 = Sigma1^{-1/2} (Sigma1^{1/2} Sigma2 Sigma1^{1/2})^{1/2} Sigma1^{-1/2}.
    auto em = linalg::sym_eig(sym(s1h * s2 * s1h));
    Mat mid = linalg::spectral_apply(em, [](double v) { return std::sqrt(std::max(v, 0.0)); });
    Mat T = sym(s1ih * mid * s1ih);
    A = T * s1;
    // Sigma1^{1/2} T Sigma1^{1/2} = mid, so A = Sigma1^{-1/2} Q D Q^T Sigma1^{1/2}.
    auto ed = linalg::sym_eig(mid);
    a = ed.lambda;
    V = s1ih * ed.P;
    Vinv = ed.P.transpose() * s1h;
    have_inverse = true;
  }

  Mat forward(const Mat& X) const {
    Mat c = A * X;
    c += c.transpose().eval();
    return linalg::lyapunov_solve(e2, c);
  }
  Mat adjoint(const Mat& W) const {
    Mat c = A.transpose() * W;
    c += c.transpose().eval();
    return linalg::lyapunov_solve(e1, c);
  }
  // (T^*)^{-1}(Y): solve A^T W + W A = Sigma1 Y + Y Sigma1.
  Mat inverse_adjoint(const Mat& Y) const {
    const Index d = a.size();
    Mat s1 = e1.P * e1.lambda.asDiagonal() * e1.P.transpose();
    Mat c = s1 * Y;
    c += c.transpose().eval();
    Mat w = V.transpose() * c * V;
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < d; ++i) w(i, j) /= a(i) + a(j);
    return sym(Vinv.transpose() * w * Vinv);
  }

  // Every map above has the form X -> R [(L X K + (L X K)^T) ./ Delta] R^T.
  // The batched versions push all columns through four large products.
  Mat forward_cols(const Mat& C) const {
    return batched(C, e2.P.transpose() * A, e2.P, e2.P, pair_sums(e2.lambda));
  }
  Mat adjoint_cols(const Mat& C) const {
    return batched(C, e1.P.transpose() * A.transpose(), e1.P, e1.P, pair_sums(e1.lambda));
  }
  Mat inverse_adjoint_cols(const Mat& C) const {
    Mat s1 = e1.P * e1.lambda.asDiagonal() * e1.P.transpose();
    return batched(C, V.transpose() * s1, V, Vinv.transpose(), pair_sums(a));
  }

  static Mat pair_sums(const Vec& l) { return l.replicate(1, l.size()) + l.transpose().replicate(l.size(), 1); }

  /// C holds svec coordinates in its columns.
  static Mat batched(const Mat& C, const Mat& L, const Mat& K, const Mat& R, const Mat& delta) {
    const Index d = L.rows(), n = C.cols();
    Mat h(d, d * n);
    for (Index k = 0; k < n; ++k) h.middleCols(k * d, d) = svec_inv(C.col(k), d);
    Mat t = L * h;
    transpose_blocks(t, d);
    h.noalias() = K.transpose() * t;  // blocks (L X K)^T
    for (Index k = 0; k < n; ++k) {
      auto b = h.middleCols(k * d, d);
      Mat z = (b + b.transpose()).cwiseQuotient(delta);
      b = z;
    }
    t.noalias() = R * h;
    transpose_blocks(t, d);
    h.noalias() = R * t;
    Mat out(C.rows(), n);
    for (Index k = 0; k < n; ++k) out.col(k) = svec(h.middleCols(k * d, d));
    return out;
  }

  static void transpose_blocks(Mat& h, Index d) {
    for (Index k = 0; k < h.cols() / d; ++k) h.middleCols(k * d, d).transposeInPlace();
  }
};

class BwTransportMap final : public TangentMap {
 public:
  BwTransportMap(Index d, const Mat& s1, const Mat& s2) : d_(d), core_(s1, s2) {}
  Index in_dim() const override { return d_ + svec_dim(d_); }
  Index out_dim() const override { return d_ + svec_dim(d_); }

  Vec apply(const Vec& v) const override {
    return map(v, [&](const Mat& X) { return core_.forward(X); });
  }
  Vec apply_adjoint(const Vec& v) const override {
    return map(v, [&](const Mat& X) { return core_.adjoint(X); });
  }
  Vec apply_inverse_adjoint(const Vec& v) const override {
    return map(v, [&](const Mat& X) { return core_.inverse_adjoint(X); });
  }
  Mat apply_cols(const Mat& u) const override {
    return map_cols(u, [&](const Mat& c) { return core_.forward_cols(c); });
  }
  Mat apply_adjoint_cols(const Mat& w) const override {
    return map_cols(w, [&](const Mat& c) { return core_.adjoint_cols(c); });
  }
  Mat apply_inverse_adjoint_cols(const Mat& w) const override {
    return map_cols(w, [&](const Mat& c) { return core_.inverse_adjoint_cols(c); });
  }

 private:
  template <class F>
  Vec map(const Vec& v, F&& f) const {
    Vec out(v.size());
    out.head(d_) = v.head(d_);
    out.tail(svec_dim(d_)) = svec(f(svec_inv(v.tail(svec_dim(d_)), d_)));
    return out;
  }
  template <class F>
  Mat map_cols(const Mat& v, F&& f) const {
    Mat out(v.rows(), v.cols());
    out.topRows(d_) = v.topRows(d_);
    out.bottomRows(svec_dim(d_)) = f(v.bottomRows(svec_dim(d_)));
    return out;
  }

  Index d_;
  BwTransportCore core_;
};

}  // namespace

Mat bw_transport(const Mat& sigma1, const Mat& sigma2, const Mat& X) {
  return BwTransportCore(sigma1, sigma2).forward(X);
}

Mat bw_transport_adjoint(const Mat& sigma1, const Mat& sigma2, const Mat& W) {
  return BwTransportCore(sigma1, sigma2).adjoint(W);
}

double w2_distance(const GaussPoint& a, const GaussPoint& b) {
  Mat ah = linalg::sym_sqrt(a.sigma);
  auto e = linalg::sym_eig(sym(ah * b.sigma * ah));
  double cross = 0.0;
  for (Index i = 0; i < e.lambda.size(); ++i) cross += std::sqrt(std::max(e.lambda(i), 0.0));
  double d2 = (a.m - b.m).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  return std::sqrt(std::max(d2, 0.0));
}

GaussTangent gaussian_score(const GaussPoint& x, const Vec& y) {
  require_gauss(x, "gaussian_score");
  Mat si = linalg::spd_inverse(x.sigma);
  Vec a = si * (y - x.m);
  GaussTangent g;
  g.u = a;
  g.X = sym(0.5 * a * a.transpose() - 0.5 * si);
  return g;
}

GaussTangent gaussian_natgrad(const GaussPoint& x, const GaussTangent& g, GaussChart chart) {
  require_gauss(x, "gaussian_natgrad");
  GaussTangent out;
  out.u = x.sigma * g.u;
  if (chart == GaussChart::Euclidean) {
    out.X = sym(2.0 * x.sigma * g.X * x.sigma);
  } else {
    out.X = 2.0 * linalg::lyapunov_solve(linalg::spd_inverse(x.sigma), sym(g.X));
  }
  return out;
}

Vec bw_vec_metric_apply(const Mat& sigma, const Vec& vecX) {
  const Index d = sigma.rows();
  require(vecX.size() == d * d, ErrorKind::InvalidInput, "bw_vec_metric_apply: length mismatch");
  Mat X = unvec(vecX, d, d);
  return vec(0.5 * (sigma * X + X * sigma));
}

double gaussian_kl(const GaussPoint& p, const GaussPoint& q) {
  const Index d = p.m.size();
  Eigen::LLT<Mat> lq(q.sigma);
  require(lq.info() == Eigen::Success, ErrorKind::SingularMetric, "gaussian_kl: covariance not SPD");
  Vec dm = q.m - p.m;
  double tr = lq.solve(p.sigma).trace();
  double quad = dm.dot(lq.solve(dm));
  return 0.5 * (tr + quad - static_cast<double>(d) + linalg::logdet_spd(q.sigma) - linalg::logdet_spd(p.sigma));
}

double gaussian_fisher_quadratic(const GaussPoint& x, const Vec& dm, const Mat& dsigma) {
  Eigen::LLT<Mat> l(x.sigma);
  require(l.info() == Eigen::Success, ErrorKind::SingularMetric, "gaussian_fisher_quadratic: covariance not SPD");
  Mat a = l.solve(dsigma);
  return dm.dot(l.solve(dm)) + 0.5 * (a * a).trace();
}

GaussPoint to_gauss(const Point& p) {
  require(p.num_blocks() == 2, ErrorKind::InvalidInput, "to_gauss: expected {m, Sigma}");
  return GaussPoint{p.block(0).reshaped(), p.block(1)};
}

Point from_gauss(const GaussPoint& g) { return Point({Mat(g.m), g.sigma}); }

// -------------------------------------------------------------- base class

Vec GaussianManifoldBase::pack(const Vec& u, const Mat& s) const {
  Vec v(coord_dim());
  v.head(d_) = u;
  v.tail(svec_dim(d_)) = svec(s);
  return v;
}

void GaussianManifoldBase::unpack(const Vec& v, Vec& u, Mat& s) const {
  require(v.size() == coord_dim(), ErrorKind::InvalidInput, name() + ": tangent length mismatch");
  u = v.head(d_);
  s = svec_inv(v.tail(svec_dim(d_)), d_);
}

Vec GaussianManifoldBase::embed(const Point& x) const {
  Vec out(d_ + d_ * d_);
  out.head(d_) = x.block(0).reshaped();
  out.tail(d_ * d_) = x.block(1).reshaped();
  return out;
}

Point GaussianManifoldBase::random_point(Rng& rng) const {
  return from_gauss(GaussPoint{randn(rng, d_), random_spd(rng, d_)});
}

Vec GaussianManifoldBase::gradient_coords(const GaussPoint&, const Vec& g_mu, const Mat& g_sigma) const {
  if (chart() == GaussChart::Euclidean) return pack(g_mu, sym(g_sigma));
  return pack(g_mu, 2.0 * sym(g_sigma));
}

Vec GaussianManifoldBase::score_coords(const GaussPoint& x, const Vec& y) const {
  GaussTangent s = gaussian_score(x, y);
  return gradient_coords(x, s.u, s.X);
}

Vec GaussianManifoldBase::natgrad_coords(const GaussPoint& x, const Vec& g_mu, const Mat& g_sigma) const {
  GaussTangent n = gaussian_natgrad(x, GaussTangent{g_mu, g_sigma}, chart());
  return pack(n.u, n.X);
}

// ------------------------------------------------------------------------ BW

double BuresWassersteinManifold::inner(const Point& x, const Vec& a, const Vec& b) const {
  Vec ua, ub;
  Mat Xa, Xb;
  unpack(a, ua, Xa);
  unpack(b, ub, Xb);
  return ua.dot(ub) + (Xa * x.block(1) * Xb).trace();
}

Vec BuresWassersteinManifold::metric_apply(const Point& x, const Vec& v) const {
  Vec u;
  Mat X;
  unpack(v, u, X);
  const Mat& s = x.block(1);
  return pack(u, 0.5 * (s * X + X * s));
}

Vec BuresWassersteinManifold::metric_solve(const Point& x, const Vec& w) const {
  Vec u;
  Mat Z;
  unpack(w, u, Z);
  return pack(u, linalg::lyapunov_solve(x.block(1), 2.0 * Z));
}

Point BuresWassersteinManifold::retract(const Point& x, const Vec& v) const {
  Vec u;
  Mat X;
  unpack(v, u, X);
  return from_gauss(bw_exp(to_gauss(x), GaussTangent{u, X}, eta_));
}

Vec BuresWassersteinManifold::inverse_retract(const Point& x, const Point& y) const {
  GaussTangent t = bw_log(to_gauss(x), to_gauss(y));
  return pack(t.u, t.X);
}

std::unique_ptr<TangentMap> BuresWassersteinManifold::transport_map(const Point& x, const Point& y) const {
  return std::make_unique<BwTransportMap>(d_, x.block(1), y.block(1));
}

Vec BuresWassersteinManifold::embed_tangent(const Point& x, const Vec& v) const {
  Vec u;
  Mat X;
  unpack(v, u, X);
  const Mat& s = x.block(1);
  Vec out(d_ + d_ * d_);
  out.head(d_) = u;
  out.tail(d_ * d_) = (X * s + s * X).reshaped();
  return out;
}

// ----------------------------------------------------------------- Euclidean

Point GaussEuclideanManifold::retract(const Point& x, const Vec& v) const {
  Vec u;
  Mat S;
  unpack(v, u, S);
  GaussPoint g = to_gauss(x);
  g.m += u;
  g.sigma = clip_eigenvalues(sym(g.sigma + S), eta_);
  return from_gauss(g);
}

Vec GaussEuclideanManifold::inverse_retract(const Point& x, const Point& y) const {
  return pack(y.block(0).reshaped() - x.block(0).reshaped(), y.block(1) - x.block(1));
}

Vec GaussEuclideanManifold::embed_tangent(const Point&, const Vec& v) const {
  Vec u;
  Mat S;
  unpack(v, u, S);
  Vec out(d_ + d_ * d_);
  out.head(d_) = u;
  out.tail(d_ * d_) = S.reshaped();
  return out;
}

}  // namespace rngd
