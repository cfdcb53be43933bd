#pragma once

#include "rngd/bures_wasserstein.hpp"
#include "rngd/dataset.hpp"
#include "rngd/fixed_rank.hpp"
#include "rngd/manifold.hpp"
#include "rngd/rng.hpp"
#include "rngd/stiefel.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rngd {

/// Nodes and weights for E f(Z), Z ~ N(0, 1) (probabilists' Gauss-Hermite).
struct GaussHermite {
  Vec nodes;
  Vec weights;
};
GaussHermite gauss_hermite(int n);

/// Minimized objective with the samplers the optimizers need. One instance
/// belongs to one run: prepare() may cache per-iteration state (a minibatch)
/// that the following gradient and score calls share.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::string name() const = 0;
  virtual const Manifold& manifold() const = 0;
  virtual Point initial_point() const = 0;

  virtual void prepare(const Point&, Rng&) {}
  /// Stochastic Riemannian gradient in chart coordinates.
  virtual Vec gradient(const Point& x, Rng& rng) = 0;
  /// One score vector grad log q_x(y), y ~ q_x, in chart coordinates.
  virtual Vec score(const Point& x, Rng& rng) = 0;
  /// Objective used in traces; deterministic where the objective allows.
  virtual double value(const Point& x) const = 0;

  /// Closed-form natural gradient of the stochastic gradient, for families
  /// with a known Fisher operator.
  virtual bool has_exact_natural_gradient() const { return false; }
  virtual Vec natural_gradient(const Point& x, Rng& rng);
  /// Reference point for the distance column of traces, if known.
  virtual bool has_reference() const { return false; }
  virtual double reference_distance(const Point&) const { return 0.0; }
};

// --------------------------------------------------------------- logistic VB

struct LogisticPotential {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

/// V(beta) = -sum_i [y_i beta.x_i - log(1 + e^{beta.x_i})] + |beta|^2 / (2 s2).
LogisticPotential vb_potential(const Mat& X, const Vec& y, double prior_var, const Vec& beta, bool with_hessian = true);

enum class VbEstimator {
  Kl,          ///< E grad V and 1/2 E hess V - 1/2 Sigma^{-1}, Monte Carlo
  Score,       ///< score-function estimator
  Reparam,     ///< reparameterization estimator with beta = mu + Sigma^{1/2} eps
  Quadrature,  ///< exact expectations by 1-d Gauss-Hermite quadrature
};

VbEstimator parse_vb_estimator(const std::string& s);

/// Euclidean partials (g_mu, g_Sigma) of the negative ELBO, with per-draw
/// samples when requested (for variance estimates).
struct GaussGradient {
  Vec g_mu;
  Mat g_sigma;
};

/// Gaussian variational Bayes for Bayesian logistic regression; the
/// objective is the negative ELBO of q = N(mu, Sigma) against the posterior.
class LogisticVB final : public Objective {
 public:
  LogisticVB(Dataset data, double prior_var, std::shared_ptr<const GaussianManifoldBase> geometry,
             VbEstimator estimator = VbEstimator::Kl, int mc_batch = 100);

  std::string name() const override { return "logistic-vb"; }
  const Manifold& manifold() const override { return *geom_; }
  /// mu = 0, Sigma = I.
  Point initial_point() const override;
  Vec gradient(const Point& x, Rng& rng) override;
  Vec score(const Point& x, Rng& rng) override;
  double value(const Point& x) const override { return nelbo(to_gauss(x)); }
  bool has_exact_natural_gradient() const override { return true; }
  Vec natural_gradient(const Point& x, Rng& rng) override;

  /// Negative ELBO by Gauss-Hermite quadrature on each margin t_i = beta.x_i.
  double nelbo(const GaussPoint& q) const;
  GaussGradient euclidean_gradient(const GaussPoint& q, Rng& rng, VbEstimator est, int draws) const;
  /// Per-draw Euclidean partials, flattened as [g_mu; vec(g_Sigma)] columns.
  Mat per_draw_gradients(const GaussPoint& q, Rng& rng, VbEstimator est, int draws) const;
  /// log pi-bar(beta) = -V(beta).
  double log_target(const Vec& beta) const;

  const Dataset& data() const { return data_; }
  double prior_var() const { return prior_var_; }
  const GaussianManifoldBase& geometry() const { return *geom_; }
  VbEstimator estimator() const { return est_; }

 private:
  GaussGradient quadrature_gradient(const GaussPoint& q) const;

  Dataset data_;
  double prior_var_;
  std::shared_ptr<const GaussianManifoldBase> geom_;
  VbEstimator est_;
  int mc_batch_;
  GaussHermite gh_;
};

// -------------------------------------------------------------- reduced rank

/// Class probabilities of the first K-1 classes; class K-1 (0-based) is the
/// baseline with zero logit.
Vec rr_forward(const Mat& B, const Vec& alpha, const Vec& x);

/// Mean negative log-likelihood and its Euclidean gradients over rows idx.
struct RrLoss {
  double nll = 0.0;
  Mat grad_B;
  Vec grad_alpha;
};
RrLoss rr_loss(const Mat& B, const Vec& alpha, const Dataset& data, const std::vector<Index>& idx);
double rr_nll(const Mat& B, const Vec& alpha, const Dataset& data);

/// Reduced-rank multinomial logistic regression on M_r x R^{K-1}.
class ReducedRankLogistic final : public Objective {
 public:
  ReducedRankLogistic(Dataset data, Index rank, Index minibatch = 128);

  std::string name() const override { return "reduced-rank"; }
  const Manifold& manifold() const override { return *manifold_; }
  /// B = diag(1_r, 0), alpha = 0.
  Point initial_point() const override;
  void prepare(const Point& x, Rng& rng) override;
  Vec gradient(const Point& x, Rng& rng) override;
  /// Score of the next minibatch observation (cycling) with y ~ Mult(p(x)).
  Vec score(const Point& x, Rng& rng) override;
  double value(const Point& x) const override;

  /// Euclidean minibatch gradient [vec(grad_B); grad_alpha].
  Vec ambient_gradient(const Point& x) const;
  /// Euclidean score [vec(x (e - p)^T); e - p] for observation i and label c.
  Vec ambient_score(const Point& x, Index i, int label) const;
  /// Next raw ambient score from the shared minibatch.
  Vec next_ambient_score(const Point& x, Rng& rng);
  /// Projects ambient [vec B-part; alpha] onto the tangent chart.
  Vec project_ambient(const Point& x, const Vec& ambient) const;
  Mat dense_B(const Point& x) const;
  Vec alpha(const Point& x) const { return x.block(3).reshaped(); }

  const Dataset& data() const { return data_; }
  Index rank() const { return r_; }
  Index classes() const { return K_; }
  Index minibatch() const { return batch_; }
  const ProductManifold& product() const { return *manifold_; }
  const std::vector<Index>& current_batch() const { return idx_; }

 private:
  int sample_label(const Vec& p, Rng& rng) const;

  Dataset data_;
  Index r_, K_, batch_;
  std::shared_ptr<ProductManifold> manifold_;
  std::shared_ptr<FixedRankManifold> fr_;
  std::vector<Index> idx_;
  std::size_t score_cursor_ = 0;
};

// ---------------------------------------------------------------- BNN target

/// Single-hidden-layer sigmoid network for binary labels with a N(0, c I)
/// prior. Weight layout: [vec(W_h) (H x p); b_h (H); w_o (H); b_o].
class BnnTarget {
 public:
  BnnTarget(Dataset data, int hidden = 10, double prior_var = 10.0);
  Index dim() const { return hidden_ * (p_ + 2) + 1; }
  double log_density(const Vec& w) const;
  double log_density(const Vec& w, Vec& grad) const;
  const Dataset& data() const { return data_; }
  int hidden() const { return hidden_; }
  double prior_var() const { return c_; }

 private:
  Dataset data_;
  int hidden_;
  Index p_;
  double c_;
};

// ------------------------------------------------------------ Sylvester flow

/// y = W2 sigmoid(W1 eps + b1) + b2 with orthogonal W1, W2 on
/// St(d, d) x St(d, d) x R^d x R^d.
struct FlowSample {
  Vec eps, a, z, y;
  double log_q = 0.0;
  int clamped = 0;
};

FlowSample flow_forward(const Point& theta, const Vec& eps);
/// Euclidean gradient of log q_theta(y) in theta at fixed y, flattened as
/// [vec W1; vec W2; b1; b2]. Also returns grad_y log q_theta(y).
Vec flow_logq_param_grad(const Point& theta, const Vec& y, Vec* grad_y = nullptr);
double flow_logq(const Point& theta, const Vec& y);

class SylvesterFlowVB final : public Objective {
 public:
  SylvesterFlowVB(std::shared_ptr<const BnnTarget> target, int mc_batch = 10, std::uint64_t value_seed = 7,
                  int value_draws = 200);

  std::string name() const override { return "sylvester-flow"; }
  const Manifold& manifold() const override { return *manifold_; }
  /// W1 = W2 = I, b1 = 0, b2 = -1/2 (centers the initial draws).
  Point initial_point() const override;
  Vec gradient(const Point& x, Rng& rng) override;
  Vec score(const Point& x, Rng& rng) override;
  /// Monte-Carlo negative ELBO with fixed common random numbers.
  double value(const Point& x) const override;

  /// Euclidean per-draw negative-ELBO gradient (reparameterization).
  Vec euclidean_gradient_draw(const Point& x, const Vec& eps) const;
  Index d() const { return d_; }
  const BnnTarget& target() const { return *target_; }

 private:
  std::shared_ptr<const BnnTarget> target_;
  Index d_;
  int mc_batch_;
  std::shared_ptr<ProductManifold> manifold_;
  Mat value_eps_;
};

// ----------------------------------------------------------------- quadratic

/// Expected negative log-likelihood of a Gaussian mean with known covariance
/// S0: L(theta) = 1/2 (theta - theta*)^T S0^{-1} (theta - theta*) + const.
/// Gradients use fresh data y ~ N(theta*, S0); scores use y ~ N(theta, S0).
class GaussianMeanObjective final : public Objective {
 public:
  GaussianMeanObjective(Vec theta_star, Mat cov, Vec theta0, int batch = 1);
  std::string name() const override { return "gaussian-mean"; }
  const Manifold& manifold() const override { return manifold_; }
  Point initial_point() const override { return EuclideanManifold::make_point(theta0_); }
  Vec gradient(const Point& x, Rng& rng) override;
  Vec score(const Point& x, Rng& rng) override;
  double value(const Point& x) const override;
  bool has_exact_natural_gradient() const override { return true; }
  Vec natural_gradient(const Point& x, Rng& rng) override;
  bool has_reference() const override { return true; }
  double reference_distance(const Point& x) const override;
  const Vec& theta_star() const { return theta_star_; }

 private:
  Vec theta_star_, theta0_;
  Mat cov_, prec_, chol_;
  int batch_;
  EuclideanManifold manifold_;
};

}  // namespace rngd
