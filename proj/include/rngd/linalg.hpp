#pragma once

#include "rngd/types.hpp"

namespace rngd::linalg {

/// Eigendecomposition A = P diag(lambda) P^T with lambda non-increasing.
/// Ties keep the order produced by Eigen's self-adjoint solver (reversed),
/// which is deterministic for a given build.
struct SpectralDecomposition {
  Mat P;
  Vec lambda;
};

/// Relative eigenvalue floor used by every SPD check.
inline constexpr double kSpdRelFloor = 1e-12;

SpectralDecomposition sym_eig(const Mat& a);

/// Throws SingularMetric unless min eigenvalue > kSpdRelFloor * max eigenvalue.
void check_spd(const SpectralDecomposition& e, const char* what);

/// Solves S X + X S = U for symmetric X.
Mat lyapunov_solve(const Mat& sigma, const Mat& u);
/// Same, reusing a precomputed eigendecomposition of S.
Mat lyapunov_solve(const SpectralDecomposition& es, const Mat& u);

Mat sym_sqrt(const Mat& a);
Mat sym_inv_sqrt(const Mat& a);
Mat spd_inverse(const Mat& a);
/// Applies f to the eigenvalues: P f(lambda) P^T.
template <class F>
Mat spectral_apply(const SpectralDecomposition& e, F&& f) {
  Vec l = e.lambda.unaryExpr(f);
  Mat out = e.P * l.asDiagonal() * e.P.transpose();
  return sym(out);
}

/// Matrix geometric mean A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}.
Mat geometric_mean(const Mat& a, const Mat& b);

struct TruncatedSvd {
  Mat U;
  Vec sigma;
  Mat V;
  /// Set when sigma_r and sigma_{r+1} coincide to relative 1e-12, so the
  /// best rank-r approximation is not unique.
  bool degenerate = false;
};

TruncatedSvd truncated_svd(const Mat& a, Index r);

/// Thin QR with the diagonal of R made non-negative. Returns Q (n x k).
Mat orthonormalize(const Mat& a);
/// Same, also returning R.
void thin_qr(const Mat& a, Mat& q, Mat& r);

/// Log-determinant of an SPD matrix.
double logdet_spd(const Mat& a);

}  // namespace rngd::linalg
