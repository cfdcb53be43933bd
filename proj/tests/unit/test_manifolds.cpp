#include "rngd/bures_wasserstein.hpp"
#include "rngd/error.hpp"
#include "rngd/fixed_rank.hpp"
#include "rngd/stiefel.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rngd;

namespace {

GaussPoint random_gauss(Rng& rng, Index d) { return {randn(rng, d), random_spd(rng, d)}; }

Mat rand_sym(Rng& rng, Index d, double scale) { return scale * sym(randn(rng, d, d)); }

}  // namespace

// ------------------------------------------------------------ Bures-Wasserstein

TEST(Svec, InnerProductIsTrace) {
  Rng rng = make_rng(10);
  const Mat a = rand_sym(rng, 4, 1.0), b = rand_sym(rng, 4, 1.0);
  EXPECT_NEAR(svec(a).dot(svec(b)), (a * b).trace(), 1e-12);
  EXPECT_LE((svec_inv(svec(a), 4) - a).norm(), 1e-14);
}

TEST(BwInner, ClosedForms) {
  GaussPoint x{Vec::Zero(3), Mat::Identity(3, 3)};
  GaussTangent a{Vec::Zero(3), Mat::Identity(3, 3)};
  EXPECT_DOUBLE_EQ(bw_inner(x, a, a), 3.0);
  GaussTangent z{Vec::Zero(3), Mat::Zero(3, 3)};
  EXPECT_DOUBLE_EQ(bw_inner(x, z, z), 0.0);
}

TEST(BwInner, MatchesUParametrization) {
  // With X = L_Sigma(U), tr(X Sigma Y) = tr(L(U) Sigma L(V)).
  Rng rng = make_rng(11);
  const GaussPoint x = random_gauss(rng, 4);
  const Mat U = rand_sym(rng, 4, 1.0), V = rand_sym(rng, 4, 1.0);
  const Mat LU = linalg::lyapunov_solve(x.sigma, U), LV = linalg::lyapunov_solve(x.sigma, V);
  const Vec u = randn(rng, 4), v = randn(rng, 4);
  EXPECT_NEAR(bw_inner(x, {u, LU}, {v, LV}), u.dot(v) + (LU * x.sigma * LV).trace(), 1e-10);
}

TEST(BwExp, ZeroAndDiagonal) {
  Rng rng = make_rng(12);
  const GaussPoint x = random_gauss(rng, 3);
  const GaussPoint y = bw_exp(x, {Vec::Zero(3), Mat::Zero(3, 3)});
  EXPECT_LE((y.sigma - x.sigma).norm(), 1e-14);
  Vec dx(3);
  dx << 0.5, -0.25, 1.0;
  const GaussPoint e = bw_exp({Vec::Zero(3), Mat::Identity(3, 3)}, {Vec::Zero(3), Mat(dx.asDiagonal())});
  const Vec expect = (Vec::Ones(3) + dx).array().square();
  EXPECT_LE((e.sigma - Mat(expect.asDiagonal())).norm(), 1e-14);
}

TEST(BwExp, DomainError) {
  GaussPoint x{Vec::Zero(2), Mat::Identity(2, 2)};
  Mat X = Mat::Zero(2, 2);
  X(0, 0) = -1.5;
  try {
    bw_exp(x, {Vec::Zero(2), X});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ExpDomain);
  }
}

TEST(BwExp, W2DistanceIsLinearInT) {
  Rng rng = make_rng(13);
  for (int k = 0; k < 5; ++k) {
    const GaussPoint x = random_gauss(rng, 4);
    const GaussTangent v{randn(rng, 4), rand_sym(rng, 4, 0.5)};
    const double t = 1e-3;
    const double dist = w2_distance(x, bw_exp(x, {t * v.u, t * v.X}));
    EXPECT_NEAR(dist / (t * std::sqrt(bw_inner(x, v, v))), 1.0, 1e-6);
  }
}

TEST(BwLog, ClosedFormsAndRoundTrip) {
  Rng rng = make_rng(14);
  const GaussPoint x = random_gauss(rng, 4);
  EXPECT_LE(bw_log(x, x).X.norm(), 1e-10);
  const GaussPoint id{Vec::Zero(4), Mat::Identity(4, 4)};
  const GaussPoint y = random_gauss(rng, 4);
  EXPECT_LE((bw_log(id, y).X - (linalg::sym_sqrt(y.sigma) - Mat::Identity(4, 4))).norm(), 1e-10);
  const GaussPoint z = bw_exp(x, bw_log(x, y));
  EXPECT_LE((z.sigma - y.sigma).norm(), 1e-8 * y.sigma.norm());
  EXPECT_LE((z.m - y.m).norm(), 1e-12);
}

TEST(BwTransport, MatchesDifferentiatedExp) {
  Rng rng = make_rng(15);
  const GaussPoint x = random_gauss(rng, 3), y = random_gauss(rng, 3);
  const Mat X = rand_sym(rng, 3, 1.0);
  EXPECT_LE((bw_transport(x.sigma, x.sigma, X) - X).norm(), 1e-10);
  // Transport along the geodesic x -> y is d/dh exp_x(log_x y + h X) pulled to the y-chart.
  const GaussTangent l = bw_log(x, y);
  const double h = 1e-5;
  const Mat sp = bw_exp(x, {l.u, l.X + h * X}).sigma;
  const Mat sm = bw_exp(x, {l.u, l.X - h * X}).sigma;
  const Mat dsigma = (sp - sm) / (2 * h);
  // In the y-chart a covariance direction D corresponds to L_{Sigma_y}(D).
  const Mat expect = linalg::lyapunov_solve(y.sigma, dsigma);
  EXPECT_LE((bw_transport(x.sigma, y.sigma, X) - expect).norm(), 1e-5 * expect.norm());
}

TEST(BwTransport, Adjoint) {
  Rng rng = make_rng(16);
  for (int k = 0; k < 3; ++k) {
    const Mat s1 = random_spd(rng, 4), s2 = random_spd(rng, 4);
    const Mat X = rand_sym(rng, 4, 1.0), W = rand_sym(rng, 4, 1.0);
    const double lhs = (bw_transport(s1, s2, X) * s2 * W).trace();
    const double rhs = (X * s1 * bw_transport_adjoint(s1, s2, W)).trace();
    EXPECT_NEAR(lhs, rhs, 1e-9 * X.norm() * W.norm() * s1.norm() * s2.norm());
  }
}

TEST(GaussianScore, ClosedForms) {
  Rng rng = make_rng(17);
  const GaussPoint x = random_gauss(rng, 3);
  const GaussTangent s = gaussian_score(x, x.m);
  EXPECT_LE(s.u.norm(), 1e-14);
  EXPECT_LE((s.X + 0.5 * x.sigma.inverse()).norm(), 1e-12);
  const GaussPoint std{Vec::Zero(2), Mat::Identity(2, 2)};
  const GaussTangent e = gaussian_score(std, Vec::Unit(2, 0));
  Mat expect = -0.5 * Mat::Identity(2, 2);
  expect(0, 0) = 0.0;
  EXPECT_LE((e.u - Vec::Unit(2, 0)).norm(), 1e-15);
  EXPECT_LE((e.X - expect).norm(), 1e-15);
}

TEST(GaussianScore, ZeroMean) {
  Rng rng = make_rng(18);
  const GaussPoint x = random_gauss(rng, 2);
  const Eigen::LLT<Mat> llt(x.sigma);
  const int n = 100000;
  Vec sum = Vec::Zero(2 + 4), sq = Vec::Zero(2 + 4);
  for (int i = 0; i < n; ++i) {
    const GaussTangent s = gaussian_score(x, x.m + Mat(llt.matrixL()) * randn(rng, 2));
    Vec f(6);
    f << s.u, s.X.reshaped();
    sum += f;
    sq += f.cwiseProduct(f);
  }
  const Vec mean = sum / n;
  const Vec sd = (sq / n - mean.cwiseProduct(mean)).cwiseSqrt();
  for (Index i = 0; i < 6; ++i) EXPECT_LE(std::abs(mean(i)), 4.0 / std::sqrt(double(n)) * sd(i));
}

TEST(GaussianNatgrad, IdentityCovariance) {
  Rng rng = make_rng(19);
  const GaussPoint x{randn(rng, 3), Mat::Identity(3, 3)};
  const GaussTangent g{randn(rng, 3), rand_sym(rng, 3, 1.0)};
  const GaussTangent bw = gaussian_natgrad(x, g, GaussChart::BuresWasserstein);
  const GaussTangent eu = gaussian_natgrad(x, g, GaussChart::Euclidean);
  EXPECT_LE((bw.u - g.u).norm(), 1e-14);
  EXPECT_LE((bw.X - g.X).norm(), 1e-14);
  EXPECT_LE((eu.X - 2.0 * g.X).norm(), 1e-14);
  const GaussTangent z = gaussian_natgrad(x, {Vec::Zero(3), Mat::Zero(3, 3)}, GaussChart::BuresWasserstein);
  EXPECT_EQ(z.X.norm(), 0.0);
}

TEST(BwVecMetric, MatchesInner) {
  Rng rng = make_rng(20);
  const Mat s = random_spd(rng, 3);
  const Mat X = rand_sym(rng, 3, 1.0), Y = rand_sym(rng, 3, 1.0);
  EXPECT_LE((bw_vec_metric_apply(Mat::Identity(3, 3), X.reshaped()) - X.reshaped()).norm(), 1e-15);
  EXPECT_LE((bw_vec_metric_apply(s, X.reshaped()) - (0.5 * (s * X + X * s)).reshaped()).norm(), 1e-14);
  EXPECT_NEAR(Y.reshaped().dot(bw_vec_metric_apply(s, X.reshaped())), (X * s * Y).trace(), 1e-10);
}

TEST(BwManifold, KlFisherExpansion) {
  Rng rng = make_rng(21);
  BuresWassersteinManifold m(3);
  for (int k = 0; k < 10; ++k) {
    const Point x = m.random_point(rng);
    Vec v = m.random_tangent(x, rng);
    v /= m.norm(x, v);
    Vec u;
    Mat X;
    m.unpack(v, u, X);
    const GaussPoint q = to_gauss(x);
    const double f = gaussian_fisher_quadratic(q, u, X * q.sigma + q.sigma * X);
    const double t = 1e-2;
    const double ratio = gaussian_kl(q, to_gauss(m.retract(x, t * v))) / (0.5 * t * t * f);
    EXPECT_GE(ratio, 0.95);
    EXPECT_LE(ratio, 1.05);
  }
}

TEST(BwManifold, ClipKeepsSpd) {
  BuresWassersteinManifold m(2, 1e-6);
  const Point x = from_gauss({Vec::Zero(2), Mat::Identity(2, 2)});
  Mat X = Mat::Zero(2, 2);
  X(0, 0) = -1.0 + 1e-9;
  const Point y = m.retract(x, m.pack(Vec::Zero(2), X));
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat>(to_gauss(y).sigma).eigenvalues().minCoeff(), 1e-6 * (1 - 1e-12));
}

// ------------------------------------------------------------------ Stiefel

TEST(Stiefel, ProjectionProperties) {
  Rng rng = make_rng(30);
  const Mat X = random_stiefel(rng, 6, 3);
  const Mat M = randn(rng, 6, 3);
  const Mat P = st_project(X, M);
  EXPECT_LE((st_project(X, P) - P).norm(), 1e-13);
  const Mat S = sym(randn(rng, 3, 3));
  EXPECT_LE(st_project(X, X * S).norm(), 1e-13);
  for (int k = 0; k < 10; ++k) {
    const Mat T = st_project(X, randn(rng, 6, 3));
    EXPECT_NEAR(((M - P).array() * T.array()).sum(), 0.0, 1e-12);
  }
}

TEST(Stiefel, CayleyRetraction) {
  Rng rng = make_rng(31);
  const Mat X = random_stiefel(rng, 3, 3);
  EXPECT_EQ(st_cayley_retract(X, Mat::Zero(3, 3)), X);
  const Mat U = st_project(X, randn(rng, 3, 3));
  const Mat Y = st_cayley_retract(X, U);
  EXPECT_LE((Y.transpose() * Y - Mat::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LE((st_inverse_cayley(X, Y) - U).norm(), 1e-8 * U.norm());
}

TEST(Stiefel, WoodburyMatchesDense) {
  Rng rng = make_rng(32);
  const Mat X = random_stiefel(rng, 16, 2);
  const Mat U = st_project(X, randn(rng, 16, 2));
  const Mat P = Mat::Identity(16, 16) - 0.5 * X * X.transpose();
  const Mat W = P * U * X.transpose() - X * U.transpose() * P;
  const Mat Q = (Mat::Identity(16, 16) - 0.5 * W).lu().solve(Mat::Identity(16, 16) + 0.5 * W);
  const Mat V = randn(rng, 16, 2);
  EXPECT_LE((st_cayley_transport(X, U, V) - Q * V).norm(), 1e-12);
  EXPECT_LE((st_cayley_transport(X, Mat::Zero(16, 2), V) - V).norm(), 0.0);
}

TEST(Stiefel, TransportIsometry) {
  Rng rng = make_rng(33);
  StiefelManifold m(7, 3);
  for (int k = 0; k < 20; ++k) {
    const Point x = m.random_point(rng);
    const Vec s = m.random_tangent(x, rng);
    const Point y = m.retract(x, s);
    const Vec u = m.random_tangent(x, rng);
    EXPECT_NEAR(m.step_transport_map(x, s, y)->apply(u).norm(), u.norm(), 1e-9);
  }
}

TEST(Stiefel, OrthogonalityOverManySteps) {
  Rng rng = make_rng(34);
  StiefelManifold m(8, 3);
  Point x = m.random_point(rng);
  for (int k = 0; k < 500; ++k) x = m.retract(x, 0.5 * m.random_tangent(x, rng));
  EXPECT_LE((x.block(0).transpose() * x.block(0) - Mat::Identity(3, 3)).norm(), 1e-8);
}

// --------------------------------------------------------------- fixed rank

TEST(FixedRank, InnerProduct) {
  FixedRankTangent a{Mat::Identity(2, 2), Mat::Zero(5, 2), Mat::Zero(4, 2)};
  EXPECT_DOUBLE_EQ(fr_inner(a, a), 2.0);
  Rng rng = make_rng(40);
  FixedRankManifold m(5, 4, 2);
  const Point x = m.random_point(rng);
  const FixedRankPoint p = to_fixed_rank(x);
  const FixedRankTangent s = m.unpack(m.random_tangent(x, rng)), t = m.unpack(m.random_tangent(x, rng));
  EXPECT_NEAR(fr_inner(s, t), (fr_ambient(p, s).array() * fr_ambient(p, t).array()).sum(), 1e-12);
}

TEST(FixedRank, Projection) {
  Rng rng = make_rng(41);
  FixedRankManifold m(6, 5, 2);
  const Point x = m.random_point(rng);
  const FixedRankPoint p = to_fixed_rank(x);
  const Mat Z = randn(rng, 6, 5);
  const Mat PZ = fr_ambient(p, fr_project(p, Z));
  EXPECT_LE((fr_ambient(p, fr_project(p, PZ)) - PZ).norm(), 1e-12);
  // Rows and columns in both complements are annihilated.
  const Mat Uc = Mat::Identity(6, 6) - p.U * p.U.transpose();
  const Mat Vc = Mat::Identity(5, 5) - p.V * p.V.transpose();
  EXPECT_LE(fr_ambient(p, fr_project(p, Uc * Z * Vc)).norm(), 1e-12);
  // Residual is orthogonal to the tangent space.
  for (int k = 0; k < 5; ++k) {
    const Mat T = fr_ambient(p, fr_project(p, randn(rng, 6, 5)));
    EXPECT_NEAR(((Z - PZ).array() * T.array()).sum(), 0.0, 1e-9);
  }
}

TEST(FixedRank, RetractionMatchesDenseSvd) {
  Rng rng = make_rng(42);
  FixedRankManifold m(7, 5, 2);
  const Point x = m.random_point(rng);
  const FixedRankPoint p = to_fixed_rank(x);
  const FixedRankTangent t = m.unpack(m.random_tangent(x, rng));
  EXPECT_LE((fr_retract(p, {Mat::Zero(2, 2), Mat::Zero(7, 2), Mat::Zero(5, 2)}).dense() - p.dense()).norm(), 1e-12);
  const Mat amb = p.dense() + fr_ambient(p, t);
  const auto svd = linalg::truncated_svd(amb, 2);
  EXPECT_LE((fr_retract(p, t).dense() - svd.U * svd.sigma.asDiagonal() * svd.V.transpose()).norm(), 1e-9);
}

TEST(FixedRank, RetractionIsSecondOrder) {
  Rng rng = make_rng(43);
  FixedRankManifold m(6, 4, 2);
  const Point x = m.random_point(rng);
  const FixedRankPoint p = to_fixed_rank(x);
  const FixedRankTangent t = m.unpack(m.random_tangent(x, rng));
  auto err = [&](double s) {
    const FixedRankTangent st{s * t.M, s * t.Up, s * t.Vp};
    return (fr_retract(p, st).dense() - (p.dense() + fr_ambient(p, st))).norm();
  };
  const double slope = std::log(err(1e-2) / err(1e-3)) / std::log(10.0);
  EXPECT_GE(slope, 1.9);
}

TEST(FixedRank, TransportContracts) {
  Rng rng = make_rng(44);
  FixedRankManifold m(6, 4, 2);
  for (int k = 0; k < 10; ++k) {
    const Point x = m.random_point(rng);
    const Point y = m.retract(x, m.random_tangent(x, rng));
    const Vec u = m.random_tangent(x, rng);
    EXPECT_LE(m.norm(y, m.transport(x, y, u)), m.norm(x, u) * (1 + 1e-12));
    EXPECT_LE((m.transport(x, x, u) - u).norm(), 1e-12 * u.norm());
  }
}

TEST(FixedRank, RankCollapse) {
  FixedRankPoint p{Mat::Identity(3, 1), Vec::Ones(1), Mat::Identity(3, 1)};
  FixedRankTangent t{-Mat::Ones(1, 1), Mat::Zero(3, 1), Mat::Zero(3, 1)};
  try {
    fr_retract(p, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankCollapse);
  }
}
