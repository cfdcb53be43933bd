#include "rngd/linalg.hpp"

#include "rngd/error.hpp"

#include <cmath>
#include <string>

namespace rngd::linalg {

namespace {

void require_square_finite(const Mat& a, const char* what) {
  require(a.rows() == a.cols(), ErrorKind::InvalidInput, std::string(what) + ": matrix not square");
  require(a.allFinite(), ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
}

}  // namespace

SpectralDecomposition sym_eig(const Mat& a) {
  require_square_finite(a, "sym_eig");
  SpectralDecomposition out;
  const Index d = a.rows();
  if (d == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a));
  require(es.info() == Eigen::Success, ErrorKind::InvalidInput, "sym_eig: solver failed");
  // Eigen sorts ascending; flip to non-increasing.
  out.lambda = es.eigenvalues().reverse();
  out.P = es.eigenvectors().rowwise().reverse();
  return out;
}

void check_spd(const SpectralDecomposition& e, const char* what) {
  if (e.lambda.size() == 0) return;
  const double top = e.lambda(0);
  const double bottom = e.lambda(e.lambda.size() - 1);
  if (!(top > 0.0) || !(bottom > kSpdRelFloor * top))
    fail(ErrorKind::SingularMetric, std::string(what) + ": matrix is not positive definite (min eigenvalue " +
                                        std::to_string(bottom) + ")");
}

Mat lyapunov_solve(const SpectralDecomposition& es, const Mat& u) {
  const Index d = es.lambda.size();
  require(u.rows() == d && u.cols() == d, ErrorKind::InvalidInput, "lyapunov_solve: shape mismatch");
  check_spd(es, "lyapunov_solve");
  Mat ut = es.P.transpose() * u * es.P;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) ut(i, j) /= es.lambda(i) + es.lambda(j);
  return sym(es.P * ut * es.P.transpose());
}

Mat lyapunov_solve(const Mat& sigma, const Mat& u) { return lyapunov_solve(sym_eig(sigma), u); }

Mat sym_sqrt(const Mat& a) {
  auto e = sym_eig(a);
  check_spd(e, "sym_sqrt");
  return spectral_apply(e, [](double x) { return std::sqrt(x); });
}

Mat sym_inv_sqrt(const Mat& a) {
  auto e = sym_eig(a);
  check_spd(e, "sym_inv_sqrt");
  return spectral_apply(e, [](double x) { return 1.0 / std::sqrt(x); });
}

Mat spd_inverse(const Mat& a) {
  auto e = sym_eig(a);
  check_spd(e, "spd_inverse");
  return spectral_apply(e, [](double x) { return 1.0 / x; });
}

Mat geometric_mean(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::InvalidInput, "geometric_mean: shape mismatch");
  auto ea = sym_eig(a);
  check_spd(ea, "geometric_mean");
  check_spd(sym_eig(b), "geometric_mean");
  Mat ah = spectral_apply(ea, [](double x) { return std::sqrt(x); });
  Mat aih = spectral_apply(ea, [](double x) { return 1.0 / std::sqrt(x); });
  Mat inner = sym(aih * b * aih);
  auto ei = sym_eig(inner);
  Mat inner_sqrt = spectral_apply(ei, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  return sym(ah * inner_sqrt * ah);
}

TruncatedSvd truncated_svd(const Mat& a, Index r) {
  require(a.allFinite(), ErrorKind::InvalidInput, "truncated_svd: non-finite entries");
  const Index k = std::min(a.rows(), a.cols());
  require(r >= 0 && r <= k, ErrorKind::InvalidInput, "truncated_svd: rank exceeds min(rows, cols)");
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(r);
  out.V = svd.matrixV().leftCols(r);
  out.sigma = svd.singularValues().head(r);
  if (r > 0 && r < k) {
    const Vec& s = svd.singularValues();
    const double scale = std::max(s(0), 1e-300);
    out.degenerate = std::abs(s(r - 1) - s(r)) <= 1e-12 * scale;
  }
  return out;
}

void thin_qr(const Mat& a, Mat& q, Mat& r) {
  const Index n = a.rows(), k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Mat> qr(a);
  q = qr.householderQ() * Mat::Identity(n, k);
  r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) {
      r.row(j) *= -1.0;
      q.col(j) *= -1.0;
    }
  }
}

Mat orthonormalize(const Mat& a) {
  Mat q, r;
  thin_qr(a, q, r);
  return q;
}

double logdet_spd(const Mat& a) {
  Eigen::LLT<Mat> llt(a);
  require(llt.info() == Eigen::Success, ErrorKind::SingularMetric, "logdet_spd: not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace rngd::linalg
