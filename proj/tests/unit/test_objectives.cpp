#include "rngd/objectives.hpp"
#include "rngd/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace rngd;

TEST(GaussHermite, ThreeNodes) {
  const GaussHermite gh = gauss_hermite(3);
  ASSERT_EQ(gh.nodes.size(), 3);
  std::vector<std::pair<double, double>> nw;
  for (Index i = 0; i < 3; ++i) nw.emplace_back(gh.nodes(i), gh.weights(i));
  std::sort(nw.begin(), nw.end());
  EXPECT_NEAR(nw[0].first, -std::sqrt(3.0), 1e-13);
  EXPECT_NEAR(nw[1].first, 0.0, 1e-13);
  EXPECT_NEAR(nw[2].first, std::sqrt(3.0), 1e-13);
  EXPECT_NEAR(nw[0].second, 1.0 / 6.0, 1e-13);
  EXPECT_NEAR(nw[1].second, 2.0 / 3.0, 1e-13);
}

TEST(GaussHermite, Moments) {
  const GaussHermite gh = gauss_hermite(20);
  EXPECT_NEAR(gh.weights.sum(), 1.0, 1e-13);
  EXPECT_NEAR(gh.weights.dot(gh.nodes.array().square().matrix()), 1.0, 1e-12);
  EXPECT_NEAR(gh.weights.dot(gh.nodes.array().pow(4).matrix()), 3.0, 1e-11);
}

TEST(VbPotential, PriorOnly) {
  Rng rng = make_rng(60);
  const Vec beta = randn(rng, 4);
  const LogisticPotential p = vb_potential(Mat(0, 4), Vec(0), 1.0, beta);
  EXPECT_LE((p.grad - beta).norm(), 1e-15);
  EXPECT_LE((p.hess - Mat::Identity(4, 4)).norm(), 1e-15);
  EXPECT_NEAR(p.value, 0.5 * beta.squaredNorm(), 1e-15);
}

TEST(VbPotential, SingleObservationAtZero) {
  Mat X(1, 3);
  X << 1.0, -2.0, 0.5;
  const LogisticPotential p = vb_potential(X, Vec::Ones(1), 1e300, Vec::Zero(3));
  EXPECT_LE((p.grad + 0.5 * X.row(0).transpose()).norm(), 1e-15);
  EXPECT_NEAR(p.value, std::log(2.0), 1e-15);
}

TEST(VbPotential, FiniteDifferences) {
  const Dataset ds = gen_logistic({100, 5, 0.2, std::nullopt, 1.0}, 3);
  Rng rng = make_rng(61);
  const Vec beta = randn(rng, 5);
  const LogisticPotential p = vb_potential(ds.X, ds.y, 4.0, beta);
  const double h = 1e-6;
  for (Index i = 0; i < 5; ++i) {
    const Vec e = Vec::Unit(5, i);
    const LogisticPotential pp = vb_potential(ds.X, ds.y, 4.0, beta + h * e);
    const LogisticPotential pm = vb_potential(ds.X, ds.y, 4.0, beta - h * e);
    EXPECT_NEAR(p.grad(i), (pp.value - pm.value) / (2 * h), 1e-6 * std::max(1.0, std::abs(p.grad(i))));
    EXPECT_LE((p.hess.col(i) - (pp.grad - pm.grad) / (2 * h)).norm(), 1e-5 * std::max(1.0, p.hess.col(i).norm()));
  }
}

TEST(LogisticVB, QuadratureMatchesMonteCarloNelbo) {
  const Dataset ds = gen_logistic({50, 3, 0.0, std::nullopt, 1.0}, 4);
  auto bw = std::make_shared<BuresWassersteinManifold>(3);
  LogisticVB vb(ds, 25.0, bw);
  Rng rng = make_rng(62);
  GaussPoint q{0.3 * randn(rng, 3), 0.2 * random_spd(rng, 3)};
  const Eigen::LLT<Mat> llt(q.sigma);
  // E V(beta) by Monte Carlo, entropy in closed form.
  const int n = 200000;
  double ev = 0.0, ev2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = vb_potential(ds.X, ds.y, 25.0, q.m + Mat(llt.matrixL()) * randn(rng, 3), false).value;
    ev += v;
    ev2 += v * v;
  }
  ev /= n;
  const double se = std::sqrt((ev2 / n - ev * ev) / n);
  const double entropy = 0.5 * linalg::logdet_spd(q.sigma) + 1.5 * (1.0 + std::log(2.0 * std::numbers::pi));
  // The potential drops the prior's normalizer; the KL form keeps it.
  const double mc = ev - entropy + 1.5 * std::log(2.0 * std::numbers::pi * 25.0);
  EXPECT_NEAR(vb.nelbo(q), mc, 5.0 * se + 1e-9);
}

TEST(LogisticVB, ScoreEstimatorAlignsWithKl) {
  const Dataset ds = gen_logistic({80, 3, 0.0, std::nullopt, 1.0}, 5);
  auto bw = std::make_shared<BuresWassersteinManifold>(3);
  LogisticVB vb(ds, 25.0, bw);
  Rng rng = make_rng(63);
  GaussPoint q{Vec::Constant(3, 0.1), 0.5 * Mat::Identity(3, 3)};
  const GaussGradient kl = vb.euclidean_gradient(q, rng, VbEstimator::Quadrature, 0);
  const GaussGradient sc = vb.euclidean_gradient(q, rng, VbEstimator::Score, 10000);
  Vec a(12), b(12);
  a << kl.g_mu, kl.g_sigma.reshaped();
  b << sc.g_mu, sc.g_sigma.reshaped();
  EXPECT_GE(a.dot(b) / (a.norm() * b.norm()), 0.9);
}

TEST(LogisticVB, EstimatorsAgreeInExpectation) {
  const Dataset ds = gen_logistic({60, 3, 0.0, std::nullopt, 1.0}, 6);
  auto bw = std::make_shared<BuresWassersteinManifold>(3);
  LogisticVB vb(ds, 25.0, bw);
  Rng rng = make_rng(64);
  GaussPoint q{Vec::Constant(3, -0.2), 0.1 * Mat::Identity(3, 3)};
  const int B = 100000;
  const Mat s = vb.per_draw_gradients(q, rng, VbEstimator::Score, B);
  const Mat r = vb.per_draw_gradients(q, rng, VbEstimator::Reparam, B);
  const Vec ms = s.rowwise().mean(), mr = r.rowwise().mean();
  const Vec vs = (s.colwise() - ms).array().square().rowwise().sum() / (B - 1.0);
  const Vec vr = (r.colwise() - mr).array().square().rowwise().sum() / (B - 1.0);
  for (Index i = 0; i < ms.size(); ++i)
    EXPECT_LE(std::abs(ms(i) - mr(i)), 5.0 * std::sqrt((vs(i) + vr(i)) / B)) << "coordinate " << i;
  // Informational: reparameterization has smaller total variance here.
  EXPECT_LE(vr.sum(), vs.sum());
}

TEST(RrForward, ClosedForms) {
  const Vec p = rr_forward(Mat::Zero(3, 4), Vec::Zero(4), Vec::Ones(3));
  for (Index j = 0; j < 4; ++j) EXPECT_NEAR(p(j), 0.2, 1e-15);
  EXPECT_NEAR(1.0 - p.sum(), 0.2, 1e-15);
  Vec a = Vec::Zero(4);
  a(2) = 30.0;
  EXPECT_GE(rr_forward(Mat::Zero(3, 4), a, Vec::Ones(3))(2), 1.0 - 1e-9);
}

TEST(RrForward, MatchesDirectFormula) {
  Rng rng = make_rng(65);
  const Mat B = randn(rng, 5, 3);
  const Vec a = randn(rng, 3), x = randn(rng, 5);
  const Vec l = a + B.transpose() * x;
  const double z = 1.0 + l.array().exp().sum();
  const Vec p = rr_forward(B, a, x);
  EXPECT_LE((p - l.array().exp().matrix() / z).norm(), 1e-14);
  EXPECT_NEAR(p.sum() + 1.0 / z, 1.0, 1e-12);
}

TEST(ReducedRank, ExpectedScoreIsZero) {
  LowRankGenParams gp;
  gp.n = 50;
  gp.d = 6;
  gp.classes = 5;
  const Dataset ds = gen_multiclass_lowrank(gp, 8);
  ReducedRankLogistic obj(ds, 2, 16);
  Rng rng = make_rng(66);
  const Point x = obj.manifold().random_point(rng);
  const Vec p = rr_forward(obj.dense_B(x), obj.alpha(x), ds.X.row(3).transpose());
  Vec e = (1.0 - p.sum()) * obj.ambient_score(x, 3, 4);
  for (int c = 0; c < 4; ++c) e += p(c) * obj.ambient_score(x, 3, c);
  EXPECT_LE(e.norm(), 1e-12);
}

TEST(ReducedRank, PerfectPredictionHasZeroGradient) {
  Dataset ds;
  ds.X = Mat::Zero(1, 2);
  ds.y = Vec::Constant(1, 0.0);
  ds.classes = 3;
  Vec a(2);
  a << 40.0, 0.0;
  const RrLoss l = rr_loss(Mat::Zero(2, 2), a, ds, {0});
  EXPECT_LE(l.grad_alpha.norm(), 1e-15);
  EXPECT_LE(l.grad_B.norm(), 1e-15);
}

TEST(ReducedRank, ProjectedGradientMatchesFiniteDifferences) {
  LowRankGenParams gp;
  gp.n = 200;
  gp.d = 6;
  gp.classes = 5;
  const Dataset ds = gen_multiclass_lowrank(gp, 9);
  ReducedRankLogistic obj(ds, 2, 200);
  Rng rng = make_rng(67);
  const Point x = obj.manifold().random_point(rng);
  obj.prepare(x, rng);
  const Vec g = obj.gradient(x, rng);
  const auto& idx = obj.current_batch();
  for (int k = 0; k < 5; ++k) {
    Vec v = obj.manifold().random_tangent(x, rng);
    v /= v.norm();
    const double h = 1e-6;
    auto f = [&](const Point& y) { return rr_loss(obj.dense_B(y), obj.alpha(y), ds, idx).nll; };
    const double fd = (f(obj.manifold().retract(x, h * v)) - f(obj.manifold().retract(x, -h * v))) / (2 * h);
    EXPECT_NEAR(obj.manifold().inner(x, g, v), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Flow, IdentityInitialDraw) {
  auto st = std::make_shared<StiefelManifold>(1, 1);
  auto eu = std::make_shared<EuclideanManifold>(1);
  ProductManifold m({st, st, eu, eu});
  const Point theta({Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Zero(1, 1)});
  const FlowSample s = flow_forward(theta, Vec::Zero(1));
  EXPECT_DOUBLE_EQ(s.z(0), 0.5);
  EXPECT_DOUBLE_EQ(s.y(0), 0.5);
  EXPECT_NEAR(s.log_q, -0.5 * std::log(2 * std::numbers::pi) - std::log(0.25), 1e-14);
  EXPECT_NEAR(flow_logq(theta, s.y), s.log_q, 1e-12);
}

TEST(Flow, DensityIntegratesToOne) {
  Point theta({-Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, -0.5)});
  const int n = 200000;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec y(1);
    y(0) = -0.5 + (i + 0.5) / n;
    mass += std::exp(flow_logq(theta, y)) / n;
  }
  EXPECT_GE(mass, 0.99);
  EXPECT_LE(mass, 1.01);
}

TEST(Flow, ParameterGradientFiniteDifferences) {
  const Index d = 3;
  auto st = std::make_shared<StiefelManifold>(d, d);
  auto eu = std::make_shared<EuclideanManifold>(d);
  ProductManifold m({st, st, eu, eu});
  Rng rng = make_rng(68);
  Point theta = m.random_point(rng);
  const Vec y = flow_forward(theta, randn(rng, d)).y;
  const Vec g = flow_logq_param_grad(theta, y);
  for (int k = 0; k < 10; ++k) {
    Vec v = m.random_tangent(theta, rng);
    v /= v.norm();
    const double h = 1e-5;
    const double fd = (flow_logq(m.retract(theta, h * v), y) - flow_logq(m.retract(theta, -h * v), y)) / (2 * h);
    EXPECT_NEAR(g.dot(v), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Bnn, PriorOnlyAndZeroWeights) {
  Dataset empty;
  empty.X = Mat(0, 3);
  empty.y = Vec(0);
  const BnnTarget prior(empty, 4, 2.0);
  Rng rng = make_rng(69);
  const Vec w = randn(rng, prior.dim());
  EXPECT_NEAR(prior.log_density(w), -w.squaredNorm() / 4.0, 1e-12);

  Dataset one;
  one.X = Mat::Ones(1, 3);
  one.y = Vec::Ones(1);
  const BnnTarget single(one, 4, 2.0);
  EXPECT_NEAR(single.log_density(Vec::Zero(single.dim())), std::log(0.5), 1e-15);
}

TEST(Bnn, GradientFiniteDifferences) {
  const Dataset ds = gen_logistic({40, 3, 0.0, std::nullopt, 1.0}, 10);
  const BnnTarget bnn(ds, 10, 10.0);
  Rng rng = make_rng(70);
  const Vec w = 0.5 * randn(rng, bnn.dim());
  Vec g;
  bnn.log_density(w, g);
  for (int k = 0; k < 10; ++k) {
    const Vec v = randn(rng, bnn.dim()).normalized();
    const double h = 1e-6;
    const double fd = (bnn.log_density(w + h * v) - bnn.log_density(w - h * v)) / (2 * h);
    EXPECT_NEAR(g.dot(v), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(GaussianMean, NaturalGradientIsCovTimesGradient) {
  Rng rng = make_rng(71);
  const Mat cov = random_spd(rng, 3);
  GaussianMeanObjective obj(Vec::Zero(3), cov, Vec::Ones(3));
  EXPECT_NEAR(obj.value(obj.initial_point()), 0.5 * Vec::Ones(3).dot(cov.inverse() * Vec::Ones(3)), 1e-12);
  EXPECT_NEAR(obj.reference_distance(obj.initial_point()), std::sqrt(3.0), 1e-15);
}
