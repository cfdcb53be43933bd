#include "rngd/objectives.hpp"

#include "rngd/error.hpp"
#include "rngd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rngd {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log1pexp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

Vec sample_gaussian(const Vec& m, const Eigen::LLT<Mat>& chol, Rng& rng) {
  return m + chol.matrixL() * randn(rng, m.size());
}

}  // namespace

GaussHermite gauss_hermite(int n) {
  require(n >= 1, ErrorKind::InvalidInput, "gauss_hermite: need at least one node");
  Mat J = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = std::sqrt(static_cast<double>(i + 1));
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  GaussHermite gh;
  gh.nodes = es.eigenvalues();
  gh.weights = es.eigenvectors().row(0).transpose().array().square();
  return gh;
}

Vec Objective::natural_gradient(const Point&, Rng&) {
  fail(ErrorKind::ConfigError, name() + ": no closed-form natural gradient");
}

// --------------------------------------------------------------- logistic VB

LogisticPotential vb_potential(const Mat& X, const Vec& y, double prior_var, const Vec& beta, bool with_hessian) {
  require(X.cols() == beta.size() && X.rows() == y.size(), ErrorKind::InvalidInput, "vb_potential: shape mismatch");
  LogisticPotential out;
  const Vec t = X * beta;
  Vec s(t.size()), w(t.size());
  double v = 0.0;
  for (Index i = 0; i < t.size(); ++i) {
    s(i) = sigmoid(t(i));
    w(i) = s(i) * (1.0 - s(i));
    v += log1pexp(t(i)) - y(i) * t(i);
  }
  out.value = v + beta.squaredNorm() / (2.0 * prior_var);
  out.grad = X.transpose() * (s - y) + beta / prior_var;
  if (with_hessian) {
    out.hess = X.transpose() * w.asDiagonal() * X;
    out.hess.diagonal().array() += 1.0 / prior_var;
  }
  return out;
}

VbEstimator parse_vb_estimator(const std::string& s) {
  if (s == "kl") return VbEstimator::Kl;
  if (s == "score") return VbEstimator::Score;
  if (s == "reparam") return VbEstimator::Reparam;
  if (s == "quadrature") return VbEstimator::Quadrature;
  fail(ErrorKind::ConfigError, "unknown VB gradient estimator '" + s + "'");
}

LogisticVB::LogisticVB(Dataset data, double prior_var, std::shared_ptr<const GaussianManifoldBase> geometry,
                       VbEstimator estimator, int mc_batch)
    : data_(std::move(data)), prior_var_(prior_var), geom_(std::move(geometry)), est_(estimator),
      mc_batch_(mc_batch), gh_(gauss_hermite(40)) {
  require(prior_var_ > 0.0, ErrorKind::ConfigError, "logistic-vb: prior variance must be positive");
  require(mc_batch_ >= 1, ErrorKind::ConfigError, "logistic-vb: Monte-Carlo batch must be >= 1");
  require(geom_->d() == data_.d(), ErrorKind::ConfigError, "logistic-vb: geometry dimension != feature dimension");
  for (Index i = 0; i < data_.y.size(); ++i)
    require(data_.y(i) == 0.0 || data_.y(i) == 1.0, ErrorKind::InvalidInput, "logistic-vb: labels must be 0/1");
}

Point LogisticVB::initial_point() const {
  const Index d = data_.d();
  return from_gauss(GaussPoint{Vec::Zero(d), Mat::Identity(d, d)});
}

double LogisticVB::log_target(const Vec& beta) const {
  return -vb_potential(data_.X, data_.y, prior_var_, beta, false).value;
}

double LogisticVB::nelbo(const GaussPoint& q) const {
  const Index d = q.m.size();
  const Vec m = data_.X * q.m;
  const Vec s2 = (data_.X * q.sigma).cwiseProduct(data_.X).rowwise().sum();
  double lik = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    const double s = std::sqrt(std::max(s2(i), 0.0));
    double e = 0.0;
    for (Index k = 0; k < gh_.nodes.size(); ++k) e += gh_.weights(k) * log1pexp(m(i) + s * gh_.nodes(k));
    lik += e - data_.y(i) * m(i);
  }
  const double kl = 0.5 * (q.sigma.trace() / prior_var_ + q.m.squaredNorm() / prior_var_ - static_cast<double>(d) +
                           static_cast<double>(d) * std::log(prior_var_) - linalg::logdet_spd(q.sigma));
  return lik + kl;
}

GaussGradient LogisticVB::quadrature_gradient(const GaussPoint& q) const {
  const Vec m = data_.X * q.m;
  const Vec s2 = (data_.X * q.sigma).cwiseProduct(data_.X).rowwise().sum();
  Vec es(m.size()), ew(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    const double s = std::sqrt(std::max(s2(i), 0.0));
    double a = 0.0, b = 0.0;
    for (Index k = 0; k < gh_.nodes.size(); ++k) {
      const double p = sigmoid(m(i) + s * gh_.nodes(k));
      a += gh_.weights(k) * p;
      b += gh_.weights(k) * p * (1.0 - p);
    }
    es(i) = a;
    ew(i) = b;
  }
  GaussGradient g;
  g.g_mu = data_.X.transpose() * (es - data_.y) + q.m / prior_var_;
  Mat h = data_.X.transpose() * ew.asDiagonal() * data_.X;
  h.diagonal().array() += 1.0 / prior_var_;
  g.g_sigma = sym(0.5 * h - 0.5 * linalg::spd_inverse(q.sigma));
  return g;
}

Mat LogisticVB::per_draw_gradients(const GaussPoint& q, Rng& rng, VbEstimator est, int draws) const {
  const Index d = q.m.size();
  Mat out(d + d * d, draws);
  const Mat sinv = linalg::spd_inverse(q.sigma);
  if (est == VbEstimator::Score) {
    Eigen::LLT<Mat> chol(q.sigma);
    const double logdet = linalg::logdet_spd(q.sigma);
    for (int b = 0; b < draws; ++b) {
      const Vec beta = sample_gaussian(q.m, chol, rng);
      const Vec z = beta - q.m;
      const Vec a = sinv * z;
      const double logq = -0.5 * z.dot(a) - 0.5 * logdet - 0.5 * static_cast<double>(d) * kLog2Pi;
      const double h = logq + vb_potential(data_.X, data_.y, prior_var_, beta, false).value;
      out.col(b).head(d) = h * a;
      out.col(b).tail(d * d) = (h * sym(0.5 * a * a.transpose() - 0.5 * sinv)).reshaped();
    }
    return out;
  }
  if (est == VbEstimator::Reparam) {
    auto es = linalg::sym_eig(q.sigma);
    linalg::check_spd(es, "reparam gradient");
    const Mat root = linalg::spectral_apply(es, [](double v) { return std::sqrt(v); });
    const auto eroot = linalg::sym_eig(root);
    for (int b = 0; b < draws; ++b) {
      const Vec eps = randn(rng, d);
      const Vec beta = q.m + root * eps;
      // a = grad_y [log q(y) + V(y)] at y = beta.
      const Vec a = vb_potential(data_.X, data_.y, prior_var_, beta, false).grad - sinv * (beta - q.m);
      out.col(b).head(d) = a;
      out.col(b).tail(d * d) = linalg::lyapunov_solve(eroot, sym(a * eps.transpose())).reshaped();
    }
    return out;
  }
  fail(ErrorKind::InvalidInput, "per_draw_gradients: only score and reparam estimators have per-draw terms");
}

GaussGradient LogisticVB::euclidean_gradient(const GaussPoint& q, Rng& rng, VbEstimator est, int draws) const {
  const Index d = q.m.size();
  GaussGradient g;
  switch (est) {
    case VbEstimator::Quadrature:
      return quadrature_gradient(q);
    case VbEstimator::Kl: {
      Eigen::LLT<Mat> chol(q.sigma);
      require(chol.info() == Eigen::Success, ErrorKind::SingularMetric, "logistic-vb: covariance not SPD");
      Mat betas(d, draws);
      for (int b = 0; b < draws; ++b) betas.col(b) = sample_gaussian(q.m, chol, rng);
      const Mat t = data_.X * betas;
      Vec ms = Vec::Zero(t.rows()), mw = Vec::Zero(t.rows());
      for (Index b = 0; b < t.cols(); ++b)
        for (Index i = 0; i < t.rows(); ++i) {
          const double p = sigmoid(t(i, b));
          ms(i) += p;
          mw(i) += p * (1.0 - p);
        }
      ms /= draws;
      mw /= draws;
      g.g_mu = data_.X.transpose() * (ms - data_.y) + betas.rowwise().mean() / prior_var_;
      Mat h = data_.X.transpose() * mw.asDiagonal() * data_.X;
      h.diagonal().array() += 1.0 / prior_var_;
      g.g_sigma = sym(0.5 * h - 0.5 * linalg::spd_inverse(q.sigma));
      return g;
    }
    case VbEstimator::Score:
    case VbEstimator::Reparam: {
      const Mat per = per_draw_gradients(q, rng, est, draws);
      const Vec mean = per.rowwise().mean();
      g.g_mu = mean.head(d);
      g.g_sigma = sym(unvec(mean.tail(d * d), d, d));
      return g;
    }
  }
  fail(ErrorKind::InvalidInput, "unknown estimator");
}

Vec LogisticVB::gradient(const Point& x, Rng& rng) {
  const GaussPoint q = to_gauss(x);
  const GaussGradient g = euclidean_gradient(q, rng, est_, mc_batch_);
  return geom_->gradient_coords(q, g.g_mu, g.g_sigma);
}

Vec LogisticVB::natural_gradient(const Point& x, Rng& rng) {
  const GaussPoint q = to_gauss(x);
  const GaussGradient g = euclidean_gradient(q, rng, est_, mc_batch_);
  return geom_->natgrad_coords(q, g.g_mu, g.g_sigma);
}

Vec LogisticVB::score(const Point& x, Rng& rng) {
  const GaussPoint q = to_gauss(x);
  Eigen::LLT<Mat> chol(q.sigma);
  require(chol.info() == Eigen::Success, ErrorKind::SingularMetric, "logistic-vb: covariance not SPD");
  return geom_->score_coords(q, sample_gaussian(q.m, chol, rng));
}

// -------------------------------------------------------------- reduced rank

Vec rr_forward(const Mat& B, const Vec& alpha, const Vec& x) {
  require(B.rows() == x.size() && B.cols() == alpha.size(), ErrorKind::InvalidInput, "rr_forward: shape mismatch");
  const Vec l = alpha + B.transpose() * x;
  const double m = std::max(0.0, l.size() ? l.maxCoeff() : 0.0);
  const Vec e = (l.array() - m).exp().matrix();
  const double denom = std::exp(-m) + e.sum();
  return e / denom;
}

namespace {

/// Accumulates the NLL of one observation and returns p.
double rr_obs_nll(const Vec& l, int label, Vec& p) {
  const double m = std::max(0.0, l.maxCoeff());
  const Vec e = (l.array() - m).exp().matrix();
  const double denom = std::exp(-m) + e.sum();
  p = e / denom;
  const double logden = m + std::log(denom);
  return label < l.size() ? logden - l(label) : logden;
}

}  // namespace

RrLoss rr_loss(const Mat& B, const Vec& alpha, const Dataset& data, const std::vector<Index>& idx) {
  const Index K1 = alpha.size();
  RrLoss out;
  out.grad_B = Mat::Zero(B.rows(), K1);
  out.grad_alpha = Vec::Zero(K1);
  Vec p;
  for (Index i : idx) {
    const Vec x = data.X.row(i).transpose();
    const int label = static_cast<int>(data.y(i));
    out.nll += rr_obs_nll(alpha + B.transpose() * x, label, p);
    if (label < K1) p(label) -= 1.0;
    out.grad_B.noalias() += x * p.transpose();
    out.grad_alpha += p;
  }
  const double b = static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  out.nll /= b;
  out.grad_B /= b;
  out.grad_alpha /= b;
  return out;
}

double rr_nll(const Mat& B, const Vec& alpha, const Dataset& data) {
  const Mat logits = (data.X * B).rowwise() + alpha.transpose();
  double total = 0.0;
  Vec p;
  for (Index i = 0; i < logits.rows(); ++i)
    total += rr_obs_nll(logits.row(i).transpose(), static_cast<int>(data.y(i)), p);
  return total / static_cast<double>(std::max<Index>(logits.rows(), 1));
}

ReducedRankLogistic::ReducedRankLogistic(Dataset data, Index rank, Index minibatch)
    : data_(std::move(data)), r_(rank), K_(data_.classes), batch_(minibatch) {
  require(K_ >= 3, ErrorKind::ConfigError, "reduced-rank: need at least 3 classes");
  require(r_ >= 1 && r_ < std::min<Index>(data_.d(), K_ - 1), ErrorKind::ConfigError,
          "reduced-rank: need 1 <= r < min(d, K - 1)");
  require(batch_ >= 1, ErrorKind::ConfigError, "reduced-rank: minibatch must be >= 1");
  for (Index i = 0; i < data_.y.size(); ++i)
    require(data_.y(i) >= 0 && data_.y(i) < K_, ErrorKind::InvalidInput, "reduced-rank: label out of range");
  fr_ = std::make_shared<FixedRankManifold>(data_.d(), K_ - 1, r_);
  manifold_ = std::make_shared<ProductManifold>(
      std::vector<std::shared_ptr<const Manifold>>{fr_, std::make_shared<EuclideanManifold>(K_ - 1)});
}

Point ReducedRankLogistic::initial_point() const {
  FixedRankPoint p;
  p.U = Mat::Identity(data_.d(), r_);
  p.V = Mat::Identity(K_ - 1, r_);
  p.sigma = Vec::Ones(r_);
  Point fr = from_fixed_rank(p);
  return manifold_->join({fr, EuclideanManifold::make_point(Vec::Zero(K_ - 1))});
}

void ReducedRankLogistic::prepare(const Point&, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, data_.n() - 1);
  idx_.resize(batch_);
  for (Index& i : idx_) i = pick(rng);
  score_cursor_ = 0;
}

Mat ReducedRankLogistic::dense_B(const Point& x) const { return to_fixed_rank(x.slice(0, 3)).dense(); }

Vec ReducedRankLogistic::ambient_gradient(const Point& x) const {
  require(!idx_.empty(), ErrorKind::Runtime, "reduced-rank: gradient requested before prepare()");
  RrLoss l = rr_loss(dense_B(x), alpha(x), data_, idx_);
  Vec out(l.grad_B.size() + l.grad_alpha.size());
  out << l.grad_B.reshaped(), l.grad_alpha;
  return out;
}

Vec ReducedRankLogistic::project_ambient(const Point& x, const Vec& ambient) const {
  const Index m = data_.d(), n = K_ - 1;
  Vec out(manifold_->coord_dim());
  const Range fr = manifold_->coord_range(0);
  out.segment(fr.offset, fr.size) = fr_->project_ambient(x.slice(0, 3), unvec(ambient.head(m * n), m, n));
  out.tail(n) = ambient.tail(n);
  return out;
}

Vec ReducedRankLogistic::gradient(const Point& x, Rng& rng) {
  if (idx_.empty()) prepare(x, rng);
  return project_ambient(x, ambient_gradient(x));
}

int ReducedRankLogistic::sample_label(const Vec& p, Rng& rng) const {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    acc += p(j);
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(p.size());  // baseline class
}

Vec ReducedRankLogistic::ambient_score(const Point& x, Index i, int label) const {
  const Vec xi = data_.X.row(i).transpose();
  Vec g = -rr_forward(dense_B(x), alpha(x), xi);
  if (label < g.size()) g(label) += 1.0;
  Vec out(xi.size() * g.size() + g.size());
  out << (xi * g.transpose()).reshaped(), g;
  return out;
}

Vec ReducedRankLogistic::next_ambient_score(const Point& x, Rng& rng) {
  if (idx_.empty()) prepare(x, rng);
  const Index i = idx_[score_cursor_ % idx_.size()];
  ++score_cursor_;
  const Vec p = rr_forward(dense_B(x), alpha(x), data_.X.row(i).transpose());
  return ambient_score(x, i, sample_label(p, rng));
}

Vec ReducedRankLogistic::score(const Point& x, Rng& rng) { return project_ambient(x, next_ambient_score(x, rng)); }

double ReducedRankLogistic::value(const Point& x) const { return rr_nll(dense_B(x), alpha(x), data_); }

// ---------------------------------------------------------------- BNN target

BnnTarget::BnnTarget(Dataset data, int hidden, double prior_var)
    : data_(std::move(data)), hidden_(hidden), p_(data_.d()), c_(prior_var) {
  require(hidden_ >= 1, ErrorKind::ConfigError, "bnn: need at least one hidden unit");
  require(c_ > 0.0, ErrorKind::ConfigError, "bnn: prior variance must be positive");
}

double BnnTarget::log_density(const Vec& w) const {
  Vec g;
  return log_density(w, g);
}

double BnnTarget::log_density(const Vec& w, Vec& grad) const {
  require(w.size() == dim(), ErrorKind::InvalidInput, "bnn: weight length mismatch");
  const Index H = hidden_;
  const Mat Wh = unvec(w.segment(0, H * p_), H, p_);
  const Vec bh = w.segment(H * p_, H);
  const Vec wo = w.segment(H * p_ + H, H);
  const double bo = w(H * p_ + 2 * H);
  grad = -w / c_;
  double lp = -w.squaredNorm() / (2.0 * c_);
  if (data_.n() == 0) return lp;
  Mat A = (data_.X * Wh.transpose()).rowwise() + bh.transpose();
  Mat Hh = A.unaryExpr([](double t) { return sigmoid(t); });
  const Vec logit = (Hh * wo).array() + bo;
  Vec r(logit.size());
  for (Index i = 0; i < logit.size(); ++i) {
    lp += data_.y(i) * logit(i) - log1pexp(logit(i));
    r(i) = data_.y(i) - sigmoid(logit(i));
  }
  const Mat dA = (r * wo.transpose()).cwiseProduct(Hh.cwiseProduct((1.0 - Hh.array()).matrix()));
  grad.segment(0, H * p_) += (dA.transpose() * data_.X).reshaped();
  grad.segment(H * p_, H) += dA.colwise().sum().transpose();
  grad.segment(H * p_ + H, H) += Hh.transpose() * r;
  grad(H * p_ + 2 * H) += r.sum();
  return lp;
}

// ------------------------------------------------------------ Sylvester flow

namespace {

constexpr double kFlowClamp = 35.0;

double log_sigmoid_prime(double a) { return -log1pexp(-a) - log1pexp(a); }

struct FlowParams {
  Mat W1, W2;
  Vec b1, b2;
};

FlowParams flow_params(const Point& theta) {
  require(theta.num_blocks() == 4, ErrorKind::InvalidInput, "flow: expected {W1, W2, b1, b2}");
  return FlowParams{theta.block(0), theta.block(1), theta.block(2).reshaped(), theta.block(3).reshaped()};
}

}  // namespace

FlowSample flow_forward(const Point& theta, const Vec& eps) {
  const FlowParams p = flow_params(theta);
  const Index d = eps.size();
  FlowSample s;
  s.eps = eps;
  s.a = p.W1 * eps + p.b1;
  s.z.resize(d);
  s.log_q = -0.5 * eps.squaredNorm() - 0.5 * static_cast<double>(d) * kLog2Pi;
  for (Index i = 0; i < d; ++i) {
    if (std::abs(s.a(i)) > kFlowClamp) {
      s.a(i) = std::clamp(s.a(i), -kFlowClamp, kFlowClamp);
      ++s.clamped;
    }
    s.z(i) = sigmoid(s.a(i));
    s.log_q -= log_sigmoid_prime(s.a(i));
  }
  s.y = p.W2 * s.z + p.b2;
  return s;
}

double flow_logq(const Point& theta, const Vec& y) {
  const FlowParams p = flow_params(theta);
  const Index d = y.size();
  const Vec z = p.W2.transpose() * (y - p.b2);
  double out = -0.5 * static_cast<double>(d) * kLog2Pi;
  Vec a(d);
  for (Index i = 0; i < d; ++i) {
    if (!(z(i) > 0.0 && z(i) < 1.0)) return -std::numeric_limits<double>::infinity();
    a(i) = std::log(z(i)) - std::log1p(-z(i));
  }
  const Vec eps = p.W1.transpose() * (a - p.b1);
  out -= 0.5 * eps.squaredNorm();
  for (Index i = 0; i < d; ++i) out -= log_sigmoid_prime(a(i));
  return out;
}

Vec flow_logq_param_grad(const Point& theta, const Vec& y, Vec* grad_y) {
  const FlowParams p = flow_params(theta);
  const Index d = y.size();
  const Vec yc = y - p.b2;
  const Vec z = p.W2.transpose() * yc;
  Vec a(d);
  for (Index i = 0; i < d; ++i) {
    const double zi = std::clamp(z(i), 1e-300, 1.0 - 1e-16);
    a(i) = std::log(zi) - std::log1p(-zi);
  }
  const Vec am = a - p.b1;
  const Vec eps = p.W1.transpose() * am;
  const Vec w1e = p.W1 * eps;
  Vec ga = -w1e;
  for (Index i = 0; i < d; ++i) ga(i) -= 1.0 - 2.0 * z(i);
  Vec gz(d);
  for (Index i = 0; i < d; ++i) gz(i) = ga(i) / (z(i) * (1.0 - z(i)));
  Vec out(2 * d * d + 2 * d);
  out.segment(0, d * d) = (-am * eps.transpose()).reshaped();
  out.segment(d * d, d * d) = (yc * gz.transpose()).reshaped();
  out.segment(2 * d * d, d) = w1e;
  out.segment(2 * d * d + d, d) = -p.W2 * gz;
  if (grad_y) *grad_y = p.W2 * gz;
  return out;
}

SylvesterFlowVB::SylvesterFlowVB(std::shared_ptr<const BnnTarget> target, int mc_batch, std::uint64_t value_seed,
                                 int value_draws)
    : target_(std::move(target)), d_(target_->dim()), mc_batch_(mc_batch) {
  require(mc_batch_ >= 1, ErrorKind::ConfigError, "flow: Monte-Carlo batch must be >= 1");
  manifold_ = std::make_shared<ProductManifold>(std::vector<std::shared_ptr<const Manifold>>{
      std::make_shared<StiefelManifold>(d_, d_), std::make_shared<StiefelManifold>(d_, d_),
      std::make_shared<EuclideanManifold>(d_), std::make_shared<EuclideanManifold>(d_)});
  Rng rng = make_rng(value_seed, 0xf10);
  value_eps_ = randn(rng, d_, value_draws);
}

Point SylvesterFlowVB::initial_point() const {
  return Point({Mat::Identity(d_, d_), Mat::Identity(d_, d_), Mat(Vec::Zero(d_)), Mat(Vec::Constant(d_, -0.5))});
}

Vec SylvesterFlowVB::euclidean_gradient_draw(const Point& x, const Vec& eps) const {
  const FlowParams p = flow_params(x);
  const FlowSample s = flow_forward(x, eps);
  const Index d = d_;
  Vec grad_target;
  target_->log_density(s.y, grad_target);
  const Vec gy = -grad_target;
  // Entropy part: d/da of -sum log sigma'(a) along the sampler is 2 z - 1.
  Vec ga = (2.0 * s.z.array() - 1.0).matrix();
  ga += (p.W2.transpose() * gy).cwiseProduct((s.z.array() * (1.0 - s.z.array())).matrix());
  Vec out(2 * d * d + 2 * d);
  out.segment(0, d * d) = (ga * eps.transpose()).reshaped();
  out.segment(d * d, d * d) = (gy * s.z.transpose()).reshaped();
  out.segment(2 * d * d, d) = ga;
  out.segment(2 * d * d + d, d) = gy;
  return out;
}

Vec SylvesterFlowVB::gradient(const Point& x, Rng& rng) {
  Vec g = Vec::Zero(manifold_->coord_dim());
  for (int b = 0; b < mc_batch_; ++b) g += euclidean_gradient_draw(x, randn(rng, d_));
  g /= mc_batch_;
  return manifold_->project(x, g);
}

Vec SylvesterFlowVB::score(const Point& x, Rng& rng) {
  const FlowSample s = flow_forward(x, randn(rng, d_));
  return manifold_->project(x, flow_logq_param_grad(x, s.y));
}

double SylvesterFlowVB::value(const Point& x) const {
  double total = 0.0;
  for (Index b = 0; b < value_eps_.cols(); ++b) {
    const FlowSample s = flow_forward(x, value_eps_.col(b));
    total += s.log_q - target_->log_density(s.y);
  }
  return total / static_cast<double>(value_eps_.cols());
}

// ----------------------------------------------------------------- quadratic

GaussianMeanObjective::GaussianMeanObjective(Vec theta_star, Mat cov, Vec theta0, int batch)
    : theta_star_(std::move(theta_star)), theta0_(std::move(theta0)), cov_(std::move(cov)), batch_(batch),
      manifold_(theta_star_.size()) {
  require(cov_.rows() == theta_star_.size() && theta0_.size() == theta_star_.size(), ErrorKind::ConfigError,
          "gaussian-mean: dimension mismatch");
  require(batch_ >= 1, ErrorKind::ConfigError, "gaussian-mean: batch must be >= 1");
  prec_ = linalg::spd_inverse(cov_);
  Eigen::LLT<Mat> llt(cov_);
  chol_ = llt.matrixL();
}

Vec GaussianMeanObjective::gradient(const Point& x, Rng& rng) {
  const Vec theta = x.block(0).reshaped();
  Vec ybar = Vec::Zero(theta.size());
  for (int b = 0; b < batch_; ++b) ybar += theta_star_ + chol_ * randn(rng, theta.size());
  ybar /= batch_;
  return prec_ * (theta - ybar);
}

Vec GaussianMeanObjective::natural_gradient(const Point& x, Rng& rng) { return cov_ * gradient(x, rng); }

Vec GaussianMeanObjective::score(const Point& x, Rng& rng) {
  const Vec theta = x.block(0).reshaped();
  return prec_ * (chol_ * randn(rng, theta.size()));
}

double GaussianMeanObjective::value(const Point& x) const {
  const Vec e = x.block(0).reshaped() - theta_star_;
  return 0.5 * e.dot(prec_ * e);
}

double GaussianMeanObjective::reference_distance(const Point& x) const {
  return (x.block(0).reshaped() - theta_star_).norm();
}

}  // namespace rngd
