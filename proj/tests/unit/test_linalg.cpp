#include "rngd/error.hpp"
#include "rngd/linalg.hpp"
#include "rngd/rng.hpp"

#include <gtest/gtest.h>

using namespace rngd;
using namespace rngd::linalg;

namespace {

Mat diag(std::initializer_list<double> v) {
  Vec d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

}  // namespace

TEST(SymEig, Identity) {
  const auto e = sym_eig(Mat::Identity(2, 2));
  EXPECT_NEAR((e.P * e.P.transpose() - Mat::Identity(2, 2)).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(e.lambda(0), 1.0);
  EXPECT_DOUBLE_EQ(e.lambda(1), 1.0);
}

TEST(SymEig, DiagonalIsSortedDescending) {
  const auto e = sym_eig(diag({1.0, 3.0}));
  EXPECT_DOUBLE_EQ(e.lambda(0), 3.0);
  EXPECT_DOUBLE_EQ(e.lambda(1), 1.0);
  EXPECT_NEAR(std::abs(e.P(1, 0)), 1.0, 1e-15);
}

TEST(SymEig, RandomReconstruction) {
  Rng rng = make_rng(1);
  const Mat a = sym(randn(rng, 5, 5));
  const auto e = sym_eig(a);
  EXPECT_LE((e.P * e.lambda.asDiagonal() * e.P.transpose() - a).norm(), 1e-10);
}

TEST(SymEig, NonFiniteThrows) {
  Mat a = Mat::Identity(2, 2);
  a(0, 1) = a(1, 0) = std::nan("");
  try {
    sym_eig(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Lyapunov, IdentityHalves) {
  Rng rng = make_rng(2);
  const Mat u = sym(randn(rng, 3, 3));
  EXPECT_LE((lyapunov_solve(Mat::Identity(3, 3), u) - 0.5 * u).norm(), 1e-14);
}

TEST(Lyapunov, Diagonal) {
  EXPECT_LE((lyapunov_solve(diag({1, 2}), Mat::Identity(2, 2)) - diag({0.5, 0.25})).norm(), 1e-15);
}

TEST(Lyapunov, RandomResidual) {
  Rng rng = make_rng(3);
  const Mat s = random_spd(rng, 6);
  const Mat u = sym(randn(rng, 6, 6));
  const Mat x = lyapunov_solve(s, u);
  EXPECT_LE((s * x + x * s - u).norm(), 1e-10 * u.norm());
}

TEST(Lyapunov, SingularThrows) {
  try {
    lyapunov_solve(diag({1.0, 0.0}), Mat::Identity(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularMetric);
  }
}

TEST(SymSqrt, ClosedForms) {
  EXPECT_LE((sym_sqrt(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LE((sym_sqrt(diag({4, 9})) - diag({2, 3})).norm(), 1e-14);
  Rng rng = make_rng(4);
  const Mat a = random_spd(rng, 5);
  const Mat r = sym_sqrt(a);
  EXPECT_LE((r * r - a).norm(), 1e-12);
  EXPECT_LE((sym_inv_sqrt(a) * r - Mat::Identity(5, 5)).norm(), 1e-12);
}

TEST(GeometricMean, Identities) {
  Rng rng = make_rng(5);
  const Mat a = random_spd(rng, 4), b = random_spd(rng, 4);
  EXPECT_LE((geometric_mean(a, a) - a).norm(), 1e-12);
  EXPECT_LE((geometric_mean(Mat::Identity(4, 4), b) - sym_sqrt(b)).norm(), 1e-12);
  // Commuting pair: A # B = (AB)^{1/2}.
  EXPECT_LE((geometric_mean(diag({2, 3}), diag({8, 12})) - diag({4, 6})).norm(), 1e-9);
  // A # B solves X A^{-1} X = B.
  const Mat g = geometric_mean(a, b);
  EXPECT_LE((g * a.inverse() * g - b).norm(), 1e-10 * b.norm());
}

TEST(TruncatedSvd, RankRInputIsExact) {
  Rng rng = make_rng(6);
  const Mat a = randn(rng, 7, 2) * randn(rng, 2, 5);
  const auto t = truncated_svd(a, 2);
  EXPECT_LE((t.U * t.sigma.asDiagonal() * t.V.transpose() - a).norm(), 1e-10);
}

TEST(TruncatedSvd, Diagonal) {
  const auto t = truncated_svd(diag({3, 2, 1}), 2);
  EXPECT_LE((t.U * t.sigma.asDiagonal() * t.V.transpose() - diag({3, 2, 0})).norm(), 1e-14);
  EXPECT_FALSE(t.degenerate);
}

TEST(TruncatedSvd, ResidualMatchesTail) {
  Rng rng = make_rng(7);
  const Mat a = randn(rng, 8, 5);
  const auto t = truncated_svd(a, 3);
  const Vec s = Eigen::JacobiSVD<Mat>(a).singularValues();
  const double tail = std::sqrt(s(3) * s(3) + s(4) * s(4));
  EXPECT_NEAR((a - t.U * t.sigma.asDiagonal() * t.V.transpose()).norm(), tail, 1e-10);
}

TEST(TruncatedSvd, TieIsFlagged) {
  EXPECT_TRUE(truncated_svd(diag({3, 1, 1}), 2).degenerate);
}

TEST(TruncatedSvd, RankTooLargeThrows) {
  EXPECT_THROW(truncated_svd(Mat::Identity(3, 2), 3), Error);
}

TEST(Qr, SignFixed) {
  Rng rng = make_rng(8);
  const Mat a = randn(rng, 6, 3);
  Mat q, r;
  thin_qr(a, q, r);
  EXPECT_LE((q * r - a).norm(), 1e-12);
  EXPECT_LE((q.transpose() * q - Mat::Identity(3, 3)).norm(), 1e-12);
  for (Index i = 0; i < 3; ++i) EXPECT_GE(r(i, i), 0.0);
}

TEST(LogDet, MatchesEigenvalues) {
  EXPECT_NEAR(logdet_spd(diag({2, 3, 5})), std::log(30.0), 1e-14);
}
