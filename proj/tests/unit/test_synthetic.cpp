#include "rngd/objectives.hpp"
#include "rngd/synthetic.hpp"

#include <gtest/gtest.h>

using namespace rngd;

TEST(Synthetic, EmptyLogistic) {
  LogisticGenParams p;
  p.n = 0;
  const Dataset ds = gen_logistic(p, 1);
  EXPECT_EQ(ds.n(), 0);
  EXPECT_EQ(ds.d(), 20);
  EXPECT_EQ(ds.y.size(), 0);
}

TEST(Synthetic, Deterministic) {
  LogisticGenParams p;
  p.n = 30;
  p.rho = 0.9;
  EXPECT_EQ(gen_logistic(p, 7).X, gen_logistic(p, 7).X);
  EXPECT_NE(gen_logistic(p, 7).X, gen_logistic(p, 8).X);
  LowRankGenParams q;
  q.n = 30;
  EXPECT_EQ(gen_multiclass_lowrank(q, 7).y, gen_multiclass_lowrank(q, 7).y);
}

TEST(Synthetic, ArCorrelation) {
  LogisticGenParams p;
  p.n = 20000;
  p.d = 3;
  p.rho = 0.9;
  const Dataset ds = gen_logistic(p, 2);
  const Mat c = (ds.X.transpose() * ds.X) / static_cast<double>(p.n);
  EXPECT_NEAR(c(0, 1), 0.9, 0.03);
  EXPECT_NEAR(c(0, 2), 0.81, 0.03);
  EXPECT_NEAR(c(1, 1), 1.0, 0.03);
}

TEST(Synthetic, PlantedRankRecovery) {
  // A full-rank maximum-likelihood fit should put >= 90% of its energy in the
  // top r singular values.
  LowRankGenParams p;
  const Dataset ds = gen_multiclass_lowrank(p, 3);
  EXPECT_EQ(ds.classes, 6);
  std::vector<Index> all(static_cast<std::size_t>(ds.n()));
  for (Index i = 0; i < ds.n(); ++i) all[static_cast<std::size_t>(i)] = i;
  Mat B = Mat::Zero(p.d, p.classes - 1);
  Vec a = Vec::Zero(p.classes - 1);
  double prev = 1e300;
  for (int it = 0; it < 3000; ++it) {
    const RrLoss l = rr_loss(B, a, ds, all);
    B -= 1.0 * l.grad_B;
    a -= 1.0 * l.grad_alpha;
    if (prev - l.nll < 1e-12) break;
    prev = l.nll;
  }
  const Vec s = Eigen::JacobiSVD<Mat>(B).singularValues();
  const double mass = s.head(p.rank).squaredNorm() / s.squaredNorm();
  EXPECT_GE(mass, 0.9);
  const LowRankTruth truth = lowrank_truth(p, 3);
  EXPECT_LE((B - truth.B).norm() / truth.B.norm(), 0.2);
}
