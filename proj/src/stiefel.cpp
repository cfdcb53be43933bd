#include "rngd/stiefel.hpp"

#include "rngd/error.hpp"
#include "rngd/linalg.hpp"

#include <cmath>

namespace rngd {

Mat st_project(const Mat& X, const Mat& M) {
  require(X.rows() == M.rows() && X.cols() == M.cols(), ErrorKind::InvalidInput, "st_project: shape mismatch");
  return M - X * sym(X.transpose() * M);
}

CayleyOperator::CayleyOperator(const Mat& X, const Mat& U) : n_(X.rows()) {
  require(U.rows() == X.rows() && U.cols() == X.cols(), ErrorKind::InvalidInput, "cayley: shape mismatch");
  const Index p = X.cols();
  Mat PU = U - 0.5 * X * (X.transpose() * U);
  low_rank_ = 4 * p <= n_;
  if (low_rank_) {
    // W = L R^T with L = [P U, X], R = [X, -P U].
    L_.resize(n_, 2 * p);
    R_.resize(n_, 2 * p);
    L_ << PU, X;
    R_ << X, -PU;
    Mat rl = R_.transpose() * L_;
    Mat I = Mat::Identity(2 * p, 2 * p);
    small_minus_.compute(I - 0.5 * rl);
    small_plus_.compute(I + 0.5 * rl);
    const double dm = std::abs(small_minus_.determinant());
    const double dp = std::abs(small_plus_.determinant());
    if (!(dm > 1e-14) || !(dp > 1e-14) || !std::isfinite(dm) || !std::isfinite(dp))
      fail(ErrorKind::RetractFail, "cayley: I - W/2 is singular");
  } else {
    Mat W = PU * X.transpose() - X * PU.transpose();
    Mat I = Mat::Identity(n_, n_);
    Eigen::PartialPivLU<Mat> lu(I - 0.5 * W);
    const double det = std::abs(lu.determinant());
    if (!(det > 1e-14) || !std::isfinite(det)) fail(ErrorKind::RetractFail, "cayley: I - W/2 is singular");
    Q_ = lu.solve(I + 0.5 * W);
  }
}

Mat CayleyOperator::apply(const Mat& V) const {
  if (!low_rank_) return Q_ * V;
  // (I + W/2) V, then (I - W/2)^{-1} = I + 1/2 L (I - 1/2 R^T L)^{-1} R^T.
  Mat b = V + 0.5 * L_ * (R_.transpose() * V);
  return b + 0.5 * L_ * small_minus_.solve(R_.transpose() * b);
}

Mat CayleyOperator::apply_transpose(const Mat& V) const {
  if (!low_rank_) return Q_.transpose() * V;
  // Q^T = (I + W/2)^{-1} (I - W/2) since W is skew.
  Mat b = V - 0.5 * L_ * (R_.transpose() * V);
  return b - 0.5 * L_ * small_plus_.solve(R_.transpose() * b);
}

namespace {

Mat maybe_reorthonormalize(const Mat& Y) {
  const Index p = Y.cols();
  if ((Y.transpose() * Y - Mat::Identity(p, p)).norm() > 1e-8) return linalg::orthonormalize(Y);
  return Y;
}

class CayleyMap final : public TangentMap {
 public:
  CayleyMap(std::shared_ptr<const CayleyOperator> op, Index p, bool transpose)
      : op_(std::move(op)), p_(p), transpose_(transpose) {}
  Index in_dim() const override { return op_->n() * p_; }
  Index out_dim() const override { return op_->n() * p_; }
  Vec apply(const Vec& u) const override { return run(u, transpose_); }
  Vec apply_adjoint(const Vec& w) const override { return run(w, !transpose_); }
  Vec apply_inverse_adjoint(const Vec& w) const override { return run(w, transpose_); }
  bool isometric() const override { return true; }
  Mat matrix() const override {
    const Index n = op_->n();
    Mat q = transpose_ ? op_->apply_transpose(Mat::Identity(n, n)) : op_->apply(Mat::Identity(n, n));
    Mat out = Mat::Zero(n * p_, n * p_);
    for (Index k = 0; k < p_; ++k) out.block(k * n, k * n, n, n) = q;
    return out;
  }
  Mat congruence(const Mat& s) const override {
    // T^* S T with T = I_p (x) Q: rows of S T are T^T applied to rows of S.
    const Index N = op_->n() * p_;
    Mat st(N, N);
    for (Index j = 0; j < N; ++j) st.row(j) = run(s.row(j).transpose(), !transpose_).transpose();
    Mat out(N, N);
    for (Index j = 0; j < N; ++j) out.col(j) = run(st.col(j), !transpose_);
    return out;
  }

 private:
  Vec run(const Vec& v, bool transpose) const {
    const Index n = op_->n();
    Mat V = unvec(v, n, p_);
    Mat r = transpose ? op_->apply_transpose(V) : op_->apply(V);
    return r.reshaped();
  }

  std::shared_ptr<const CayleyOperator> op_;
  Index p_;
  bool transpose_;
};

}  // namespace

Mat st_cayley_retract(const Mat& X, const Mat& U) {
  if (U.isZero(0.0)) return X;
  CayleyOperator op(X, U);
  return maybe_reorthonormalize(op.apply(X));
}

Mat st_cayley_transport(const Mat& X, const Mat& U, const Mat& V) {
  if (U.isZero(0.0)) return V;
  return CayleyOperator(X, U).apply(V);
}

Mat st_inverse_cayley(const Mat& X, const Mat& Y) {
  require(X.rows() == Y.rows() && X.cols() == Y.cols(), ErrorKind::InvalidInput, "inverse cayley: shape mismatch");
  const Index n = X.rows(), p = X.cols();
  // Tangent U = X Omega + (I - X X^T) K'; the Cayley equation
  // W (X + Y) = 2 (Y - X) splits into its X and X-perp components.
  Mat XtY = X.transpose() * Y;
  Mat A = Mat::Identity(p, p) + XtY;
  Eigen::PartialPivLU<Mat> lu(A);
  const double det = std::abs(lu.determinant());
  if (!(det > 1e-10) || !std::isfinite(det)) fail(ErrorKind::RadiusExceeded, "inverse cayley: I + X^T Y singular");
  Mat Yperp = Y - X * XtY;
  Mat Ainv = lu.inverse();
  Mat omega = (2.0 * (XtY - Mat::Identity(p, p)) + 2.0 * Ainv.transpose() * (Yperp.transpose() * Yperp)) * Ainv;
  Mat U = X * skew(omega) + 2.0 * Yperp * Ainv;
  Mat back = st_cayley_retract(X, U);
  if ((back - Y).norm() > 1e-8 * std::max(1.0, Y.norm()))
    fail(ErrorKind::RadiusExceeded, "inverse cayley: round trip failed");
  (void)n;
  return U;
}

StiefelManifold::StiefelManifold(Index n, Index p) : n_(n), p_(p) {
  require(p >= 1 && p <= n, ErrorKind::InvalidInput, "stiefel: need 1 <= p <= n");
}

Point StiefelManifold::retract(const Point& x, const Vec& v) const {
  return Point({st_cayley_retract(x.block(0), unvec(v, n_, p_))});
}

Vec StiefelManifold::inverse_retract(const Point& x, const Point& y) const {
  return st_inverse_cayley(x.block(0), y.block(0)).reshaped();
}

Vec StiefelManifold::project(const Point& x, const Vec& u) const {
  return st_project(x.block(0), unvec(u, n_, p_)).reshaped();
}

std::unique_ptr<TangentMap> StiefelManifold::transport_map(const Point& x, const Point& y) const {
  return step_transport_map(x, inverse_retract(x, y), y);
}

std::unique_ptr<TangentMap> StiefelManifold::step_transport_map(const Point& x, const Vec& step, const Point&) const {
  auto op = std::make_shared<CayleyOperator>(x.block(0), unvec(step, n_, p_));
  return std::make_unique<CayleyMap>(op, p_, false);
}

std::unique_ptr<TangentMap> StiefelManifold::step_back_transport_map(const Point& x, const Vec& step,
                                                                     const Point&) const {
  auto op = std::make_shared<CayleyOperator>(x.block(0), unvec(step, n_, p_));
  return std::make_unique<CayleyMap>(op, p_, true);
}

}  // namespace rngd
