#include "rngd/checks.hpp"

#include "rngd/bures_wasserstein.hpp"
#include "rngd/error.hpp"
#include "rngd/fisher_state.hpp"
#include "rngd/fixed_rank.hpp"
#include "rngd/harness.hpp"
#include "rngd/io.hpp"
#include "rngd/objectives.hpp"
#include "rngd/stiefel.hpp"
#include "rngd/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace rngd {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

CheckResult bound_check(std::string id, std::string what, double value, double bound, std::string detail = "") {
  CheckResult r;
  r.id = std::move(id);
  r.what = std::move(what) + " <= " + fmt(bound);
  r.value = value;
  r.passed = std::isfinite(value) && value <= bound;
  r.detail = std::move(detail);
  return r;
}

Mat metric_matrix(const Manifold& m, const Point& x) {
  const Index n = m.coord_dim();
  Mat g(n, n);
  for (Index j = 0; j < n; ++j) g.col(j) = m.metric_apply(x, Vec::Unit(n, j));
  return g;
}

// ------------------------------------------------------------ fisher states

CheckResult check_sherman_morrison(const CheckOptions&) {
  double worst = 0.0;
  Rng rng = make_rng(101);
  auto run = [&](const Manifold& m, const Point& x) {
    const Index n = m.coord_dim();
    const Mat g = metric_matrix(m, x);
    DenseInvFisher st(n, 1.0);
    Mat h = Mat::Identity(n, n);
    for (int k = 0; k < 50; ++k) {
      const Vec phi = randn(rng, n);
      st.update(m, x, phi);
      h += phi * (g * phi).transpose();
      const Mat direct = h.inverse();
      worst = std::max(worst, (st.hinv() - direct).norm() / direct.norm());
    }
  };
  EuclideanManifold euc(20);
  run(euc, euc.random_point(rng));
  // d = 5 gives a 20-dimensional chart with a non-trivial metric.
  BuresWassersteinManifold bw(5);
  run(bw, bw.random_point(rng));
  return bound_check("sherman-morrison", "max rel. error vs direct inverse, 50 updates, dim 20", worst, 1e-9);
}

/// Dense model of a windowed Fisher: eps I + sum_k u_k v_k^T G, newest first.
struct DenseWindow {
  double eps;
  Index window;
  std::deque<std::pair<Vec, Vec>> terms;

  Vec solve(const Mat& g, const Vec& rhs) const {
    const Index n = g.rows();
    Mat h = eps * Mat::Identity(n, n);
    for (const auto& [u, v] : terms) h += u * (g * v).transpose();
    return h.partialPivLu().solve(rhs);
  }
};

/// Cayley factor Q for the step U at X, from its definition.
Mat cayley_q(const Mat& X, const Mat& U) {
  const Index n = X.rows();
  const Mat P = Mat::Identity(n, n) - 0.5 * X * X.transpose();
  const Mat W = P * U * X.transpose() - X * U.transpose() * P;
  return (Mat::Identity(n, n) - 0.5 * W).partialPivLu().solve(Mat::Identity(n, n) + 0.5 * W);
}

CheckResult check_window(const CheckOptions&) {
  double worst = 0.0;
  Rng rng = make_rng(202);
  const double eps = 0.5;
  for (Index K : {5, 10, 20, 35, 50}) {
    for (int backend = 0; backend < 2; ++backend) {
      std::unique_ptr<Manifold> m;
      if (backend == 0)
        m = std::make_unique<EuclideanManifold>(40);
      else
        m = std::make_unique<StiefelManifold>(10, 3);
      const Index n = m->coord_dim();
      Point x = m->random_point(rng);
      WindowInvFisher win(n, K, eps);
      DenseWindow dense{eps, K, {}};
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      for (int step = 0; step < 30; ++step) {
        const double c = coin(rng);
        if (c < 0.55 || dense.terms.empty()) {
          const Vec u = m->random_tangent(x, rng);
          Vec v = u;
          if (coin(rng) < 0.5) v += 0.3 * m->random_tangent(x, rng);
          win.add(*m, x, u, v);
          dense.terms.emplace_front(u, v);
          if (static_cast<Index>(dense.terms.size()) > K) dense.terms.pop_back();
        } else if (c < 0.7) {
          win.drop_oldest();
          dense.terms.pop_back();
        } else {
          Vec s = m->random_tangent(x, rng);
          s *= 0.3 / std::max(s.norm(), 1e-300);
          const Point y = m->retract(x, s);
          win.transport(*m, x, s, y);
          if (backend == 1) {
            const StiefelManifold& st = static_cast<const StiefelManifold&>(*m);
            const Mat q = cayley_q(x.block(0), unvec(s, st.n(), st.p()));
            for (auto& [u, v] : dense.terms) {
              u = (q * unvec(u, st.n(), st.p())).reshaped();
              v = (q * unvec(v, st.n(), st.p())).reshaped();
            }
          }
          x = y;
        }
        const Mat g = metric_matrix(*m, x);
        for (int t = 0; t < 3; ++t) {
          const Vec rhs = randn(rng, n);
          const Vec a = win.solve(*m, x, rhs);
          const Vec b = dense.solve(g, rhs);
          worst = std::max(worst, (a - b).norm() / b.norm());
        }
      }
    }
  }
  return bound_check("window", "max rel. error vs dense inverse, K = 5..50, 30 steps, euclidean + stiefel", worst,
                     1e-8);
}

CheckResult check_fisher_consistency(const CheckOptions&) {
  const Index d = 5;
  const int scores = 200000;
  double total = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng = make_rng(seed, 303);
    BuresWassersteinManifold bw(d);
    const Point x = bw.random_point(rng);
    const GaussPoint q = to_gauss(x);
    DenseInvFisher st(bw.coord_dim(), 1.0, bw.natural_blocks());
    const Eigen::LLT<Mat> llt(q.sigma);
    const Mat L = llt.matrixL();
    for (int k = 0; k < scores; ++k) st.update(bw, x, bw.score_coords(q, q.m + L * randn(rng, d)));
    const Mat est = (static_cast<double>(st.count()) * st.hinv().topLeftCorner(d, d)).inverse();
    const Mat fisher = q.sigma.inverse();
    const double err = Eigen::JacobiSVD<Mat>(est - fisher).singularValues()(0) /
                       Eigen::JacobiSVD<Mat>(fisher).singularValues()(0);
    total += err;
    detail += (detail.empty() ? "" : " ") + fmt(err);
  }
  return bound_check("fisher-consistency", "mean-block rel. operator-norm error, d = 5, 2e5 scores, mean of 5 seeds",
                     total / 5.0, 0.05, "per seed: " + detail);
}

// ---------------------------------------------------------------- geometry

struct GeometryStats {
  double zero = 0.0, diff = 0.0, ident = 0.0, adjoint = 0.0;
  int instances = 0;
};

CheckResult check_geometry(const CheckOptions&) {
  Rng rng = make_rng(404);
  std::vector<std::pair<std::string, std::shared_ptr<const Manifold>>> backends = {
      {"euclidean", std::make_shared<EuclideanManifold>(7)},
      {"bw", std::make_shared<BuresWassersteinManifold>(4)},
      {"gauss-euclidean", std::make_shared<GaussEuclideanManifold>(4)},
      {"stiefel-dense", std::make_shared<StiefelManifold>(5, 4)},
      {"stiefel-woodbury", std::make_shared<StiefelManifold>(12, 2)},
      {"fixed-rank", std::make_shared<FixedRankManifold>(7, 5, 2)},
  };
  backends.emplace_back("product", std::make_shared<ProductManifold>(std::vector<std::shared_ptr<const Manifold>>{
                                       backends[5].second, backends[3].second, backends[0].second}));
  const int per_backend = 20;
  double zero = 0.0, diff = 0.0, ident = 0.0, adj = 0.0, iso = 0.0, explog = 0.0, idem = 0.0;
  int instances = 0;
  for (const auto& [name, m] : backends) {
    for (int k = 0; k < per_backend; ++k) {
      const Point x = m->random_point(rng);
      Vec v = m->random_tangent(x, rng);
      v /= std::max(m->norm(x, v), 1e-300);
      const RetractionReport rr = check_retraction_axioms(*m, x, v);
      zero = std::max(zero, rr.zero_error / std::max(1.0, m->embed(x).norm()));
      diff = std::max(diff, rr.differential_error);

      const Vec u = m->random_tangent(x, rng);
      ident = std::max(ident, (m->transport_map(x, x)->apply(u) - u).norm() / u.norm());

      const Vec step = 0.3 * v;
      const Point y = m->retract(x, step);
      const Vec w = m->random_tangent(y, rng);
      for (int which = 0; which < 2; ++which) {
        auto t = which == 0 ? m->transport_map(x, y) : m->step_transport_map(x, step, y);
        const Vec tu = t->apply(u);
        const double lhs = m->inner(y, tu, w);
        const double rhs = m->inner(x, u, t->apply_adjoint(w));
        adj = std::max(adj, std::abs(lhs - rhs) / (m->norm(x, u) * m->norm(y, w)));
      }
      if (name.rfind("stiefel", 0) == 0) {
        auto t = m->step_transport_map(x, step, y);
        iso = std::max(iso, std::abs(t->apply(u).norm() - u.norm()) / u.norm());
        const Mat q = cayley_q(x.block(0), unvec(step, x.block(0).rows(), x.block(0).cols()));
        const Mat qx = q * x.block(0);
        iso = std::max(iso, (qx.transpose() * qx - Mat::Identity(qx.cols(), qx.cols())).norm());
      }
      if (name == "bw") {
        const auto* bw = static_cast<const BuresWassersteinManifold*>(m.get());
        GaussTangent t;
        Mat s;
        bw->unpack(v, t.u, s);
        // Keep I + X well inside the positive cone.
        const double scale = 0.5 / std::max(1.0, Eigen::SelfAdjointEigenSolver<Mat>(s).eigenvalues().cwiseAbs().maxCoeff());
        t.u *= scale;
        t.X = scale * s;
        const GaussPoint gx = to_gauss(x);
        const GaussPoint gy = bw_exp(gx, t);
        const GaussTangent back = bw_log(gx, gy);
        const double nt = std::sqrt(bw_inner(gx, t, t));
        const GaussTangent diffv{back.u - t.u, back.X - t.X};
        explog = std::max(explog, std::sqrt(bw_inner(gx, diffv, diffv)) / nt);
        const GaussPoint gz = bw_exp(gx, bw_log(gx, to_gauss(y)));
        explog = std::max(explog, ((gz.sigma - to_gauss(y).sigma).norm() + (gz.m - to_gauss(y).m).norm()) /
                                      std::max(1.0, to_gauss(y).sigma.norm()));
      }
      if (name == "fixed-rank") {
        const Vec raw = randn(rng, m->coord_dim());
        const Vec p1 = m->project(x, raw);
        idem = std::max(idem, (m->project(x, p1) - p1).norm() / raw.norm());
      }
      ++instances;
    }
  }
  const bool ok = zero <= 1e-5 && diff <= 1e-5 && ident <= 1e-9 && adj <= 1e-9 && iso <= 1e-9 && explog <= 1e-8 &&
                  idem <= 1e-10;
  CheckResult r;
  r.id = "geometry";
  r.what = "R(0)=x, DR(0)=Id <= 1e-5; T_0=Id, adjoint, Cayley isometry <= 1e-9; BW exp/log <= 1e-8; "
           "fixed-rank P^2=P <= 1e-10";
  r.passed = ok;
  r.value = std::max({zero / 1e-5, diff / 1e-5, ident / 1e-9, adj / 1e-9, iso / 1e-9, explog / 1e-8, idem / 1e-10});
  r.detail = std::to_string(instances) + " instances over " + std::to_string(backends.size()) +
             " backends; R(0) " + fmt(zero) + ", DR(0) " + fmt(diff) + ", T_0 " + fmt(ident) + ", adjoint " +
             fmt(adj) + ", isometry " + fmt(iso) + ", exp/log " + fmt(explog) + ", idempotence " + fmt(idem);
  return r;
}

// ---------------------------------------------------------------- KL ratio

double kl_gauss(const GaussPoint& p, const GaussPoint& q) {
  const Index d = p.m.size();
  const Eigen::LLT<Mat> lq(q.sigma), lp(p.sigma);
  const Vec dm = q.m - p.m;
  double logdet_q = 0.0, logdet_p = 0.0;
  for (Index i = 0; i < d; ++i) {
    logdet_q += 2.0 * std::log(Mat(lq.matrixL())(i, i));
    logdet_p += 2.0 * std::log(Mat(lp.matrixL())(i, i));
  }
  return 0.5 * (lq.solve(p.sigma).trace() + dm.dot(lq.solve(dm)) - static_cast<double>(d) + logdet_q - logdet_p);
}

CheckResult check_kl_ratio(const CheckOptions&) {
  Rng rng = make_rng(505);
  const double t = 1e-2;
  double lo = kInf, hi = -kInf;
  for (int geo = 0; geo < 2; ++geo) {
    std::unique_ptr<GaussianManifoldBase> m;
    if (geo == 0)
      m = std::make_unique<BuresWassersteinManifold>(3);
    else
      m = std::make_unique<GaussEuclideanManifold>(3);
    for (int k = 0; k < 10; ++k) {
      const Point x = m->random_point(rng);
      const GaussPoint q = to_gauss(x);
      const Vec v = m->random_tangent(x, rng);
      Vec u;
      Mat s;
      m->unpack(v, u, s);
      const Mat dsigma = geo == 0 ? Mat(s * q.sigma + q.sigma * s) : s;
      const Mat prec = q.sigma.inverse();
      const double fisher = u.dot(prec * u) + 0.5 * (prec * dsigma * prec * dsigma).trace();
      const double kl = kl_gauss(q, to_gauss(m->retract(x, t * v)));
      const double ratio = kl / (0.5 * t * t * fisher);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  CheckResult r;
  r.id = "kl-ratio";
  r.what = "KL / (t^2 F / 2) in [0.95, 1.05] at t = 1e-2, 10 draws per geometry";
  r.passed = lo >= 0.95 && hi <= 1.05;
  r.value = std::max(std::abs(lo - 1.0), std::abs(hi - 1.0));
  r.detail = "range [" + fmt(lo) + ", " + fmt(hi) + "] over bw and euclidean charts";
  return r;
}

// --------------------------------------------------------------- gradients

/// |a - b| / max(1, |b|).
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

CheckResult check_gradients(const CheckOptions&) {
  Rng rng = make_rng(606);
  const double h = 1e-5;
  std::map<std::string, double> worst;

  {  // logistic potential: gradient and Hessian
    const Dataset ds = gen_logistic({200, 6, 0.3, std::nullopt, 1.0}, 11);
    for (int k = 0; k < 10; ++k) {
      const Vec beta = 0.5 * randn(rng, 6);
      const Vec v = randn(rng, 6).normalized();
      const LogisticPotential p = vb_potential(ds.X, ds.y, 25.0, beta, true);
      const LogisticPotential pp = vb_potential(ds.X, ds.y, 25.0, beta + h * v, false);
      const LogisticPotential pm = vb_potential(ds.X, ds.y, 25.0, beta - h * v, false);
      worst["grad V"] = std::max(worst["grad V"], rel_err(p.grad.dot(v), (pp.value - pm.value) / (2 * h)));
      const Vec fd = (pp.grad - pm.grad) / (2 * h);
      worst["hess V"] = std::max(worst["hess V"], (p.hess * v - fd).norm() / std::max(1.0, fd.norm()));
    }
  }
  {  // reduced-rank multinomial NLL along fixed-rank tangents
    LowRankGenParams gp;
    gp.n = 300;
    gp.d = 6;
    gp.classes = 4;
    gp.rank = 2;
    const Dataset ds = gen_multiclass_lowrank(gp, 12);
    FixedRankManifold fr(6, 3, 2);
    std::vector<Index> idx(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < 10; ++k) {
      const Point x = fr.random_point(rng);
      const Mat B = to_fixed_rank(x).dense();
      const Vec alpha = randn(rng, 3);
      const Mat xi = fr_ambient(to_fixed_rank(x), fr.unpack(fr.random_tangent(x, rng)));
      const Vec eta = randn(rng, 3);
      const double nrm = std::sqrt(xi.squaredNorm() + eta.squaredNorm());
      const RrLoss l = rr_loss(B, alpha, ds, idx);
      const double fp = rr_loss(B + h * xi / nrm, alpha + h * eta / nrm, ds, idx).nll;
      const double fm = rr_loss(B - h * xi / nrm, alpha - h * eta / nrm, ds, idx).nll;
      const double an = ((l.grad_B.array() * xi.array()).sum() + l.grad_alpha.dot(eta)) / nrm;
      worst["reduced-rank NLL"] = std::max(worst["reduced-rank NLL"], rel_err(an, (fp - fm) / (2 * h)));
    }
  }
  {  // flow log-density in its parameters, along the product manifold
    const Index d = 4;
    auto st = std::make_shared<StiefelManifold>(d, d);
    auto eu = std::make_shared<EuclideanManifold>(d);
    ProductManifold m({st, st, eu, eu});
    for (int k = 0; k < 10; ++k) {
      Point theta = m.random_point(rng);
      theta.block(3) = -0.5 * Mat::Ones(d, 1) + 0.1 * randn(rng, d, 1);
      const Vec y = flow_forward(theta, randn(rng, d)).y;
      const Vec g = flow_logq_param_grad(theta, y);
      Vec v = m.random_tangent(theta, rng);
      v /= v.norm();
      const double fd = (flow_logq(m.retract(theta, h * v), y) - flow_logq(m.retract(theta, -h * v), y)) / (2 * h);
      worst["flow log q"] = std::max(worst["flow log q"], rel_err(g.dot(v), fd));
    }
  }
  {  // BNN log target
    const Dataset ds = gen_logistic({60, 4, 0.0, std::nullopt, 1.0}, 13);
    const BnnTarget bnn(ds, 5, 10.0);
    for (int k = 0; k < 10; ++k) {
      const Vec w = 0.5 * randn(rng, bnn.dim());
      const Vec v = randn(rng, bnn.dim()).normalized();
      Vec g;
      bnn.log_density(w, g);
      const double fd = (bnn.log_density(w + h * v) - bnn.log_density(w - h * v)) / (2 * h);
      worst["BNN target"] = std::max(worst["BNN target"], rel_err(g.dot(v), fd));
    }
  }
  double m = 0.0;
  std::string detail;
  for (const auto& [k, v] : worst) {
    m = std::max(m, v);
    detail += (detail.empty() ? "" : ", ") + k + " " + fmt(v);
  }
  return bound_check("gradients", "max rel. error vs central differences, 10 directions each", m, 1e-5, detail);
}

CheckResult check_estimators(const CheckOptions&) {
  const Dataset ds = gen_logistic({100, 3, 0.0, std::nullopt, 1.0}, 14);
  auto bw = std::make_shared<BuresWassersteinManifold>(3);
  LogisticVB vb(ds, 25.0, bw);
  GaussPoint q;
  q.m = Vec::Constant(3, 0.2);
  Rng rng = make_rng(707);
  q.sigma = random_spd(rng, 3, 0.05, 0.2);
  const int B = 100000;
  const Mat s = vb.per_draw_gradients(q, rng, VbEstimator::Score, B);
  const Mat r = vb.per_draw_gradients(q, rng, VbEstimator::Reparam, B);
  auto mean_se = [&](const Mat& a, Vec& mean, Vec& se) {
    mean = a.rowwise().mean();
    const Mat c = a.colwise() - mean;
    se = (c.array().square().rowwise().sum() / (B - 1.0) / B).sqrt().matrix();
  };
  Vec ms, ss, mr, sr;
  mean_se(s, ms, ss);
  mean_se(r, mr, sr);
  double worst = 0.0;
  for (Index i = 0; i < ms.size(); ++i) {
    const double z = std::abs(ms(i) - mr(i)) / std::sqrt(ss(i) * ss(i) + sr(i) * sr(i) + 1e-300);
    worst = std::max(worst, z);
  }
  return bound_check("estimators", "max |score - reparam| in combined MC std, B = 1e5, d = 3", worst, 5.0);
}

// ------------------------------------------------------------- experiments

/// First iteration where the replication-mean objective is within gap of f*.
double first_hit(const ExperimentResult& res, const std::string& method, double fstar, double gap) {
  std::map<long long, std::pair<double, int>> acc;
  int reps = 0;
  for (const auto& r : res.runs) {
    if (r.method != method) continue;
    ++reps;
    for (const auto& rec : r.trace.records) {
      auto& a = acc[rec.iter];
      a.first += rec.objective;
      a.second += 1;
    }
  }
  for (const auto& [iter, a] : acc)
    if (a.second == reps && a.first / reps - fstar <= gap) return static_cast<double>(iter);
  return kInf;
}

double mean_final(const ExperimentResult& res, const std::string& method, int* failures = nullptr) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : res.runs) {
    if (r.method != method) continue;
    if (!r.trace.ok()) {
      if (failures) ++*failures;
      s += kInf;
    } else {
      s += r.trace.final_objective();
    }
    ++n;
  }
  return n ? s / n : kInf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentResult run_embedded(const char* json, const CheckOptions& opt) {
  ExperimentSpec spec = parse_experiment(Json::parse(json), ".");
  if (opt.verbose) std::cerr << "  running " << spec.name << " (" << spec.methods.size() << " methods x "
                             << spec.replications << " replications)\n";
  return execute_experiment(spec, thread_cap());
}

}  // namespace

const char* const kLogisticVbExperiment = R"({
  "name": "logistic-vb",
  "objective": "logistic-vb",
  "data": {"generator": "logistic", "n": 500, "d": 20, "rho": 0.9, "seed": 42},
  "objective_params": {"prior_var": 25.0, "estimator": "kl", "mc_batch": 100},
  "iterations": 3000,
  "log_every": 10,
  "record_wall_time": false,
  "replications": 5,
  "seed": 2024,
  "methods": [
    {"label": "bw-gd", "precond": "gd", "objective_params": {"geometry": "bw"},
     "schedule": {"c0": 0.2, "alpha": 0.6}},
    {"label": "bw-ngd", "precond": "ngd", "objective_params": {"geometry": "bw"},
     "schedule": {"c0": 3.0}},
    {"label": "bw-ngd-approx", "precond": "ngd-approx", "objective_params": {"geometry": "bw"},
     "schedule": {"c0": 3.0, "alpha": 0.6}, "fisher": {"epsilon": 1000.0}},
    {"label": "euc-gd", "precond": "gd", "objective_params": {"geometry": "euclidean", "eta": 1e-4},
     "schedule": {"c0": 0.01, "alpha": 0.6}},
    {"label": "euc-ngd", "precond": "ngd", "objective_params": {"geometry": "euclidean", "eta": 1e-4},
     "schedule": {"c0": 3.0}},
    {"label": "euc-ngd-approx", "precond": "ngd-approx", "objective_params": {"geometry": "euclidean", "eta": 1e-4},
     "schedule": {"c0": 1.0, "alpha": 0.6}, "fisher": {"epsilon": 10000.0}}
  ],
  "reference": {"precond": "ngd", "iterations": 2000, "log_every": 100,
                "schedule": {"c0": 1.0, "c1": 1.0, "alpha": 0.51},
                "objective_params": {"geometry": "bw", "estimator": "quadrature"}}
})";

const char* const kReducedRankExperiment = R"({
  "name": "reduced-rank",
  "objective": "reduced-rank",
  "data": {"generator": "multiclass-lowrank", "n": 10000, "d": 20, "classes": 6, "rank": 2, "seed": 7},
  "objective_params": {"rank": 2, "minibatch": 128},
  "iterations": 5000,
  "log_every": 100,
  "record_wall_time": false,
  "replications": 5,
  "seed": 99,
  "schedule": {"c0": 1.0, "c1": 100.0, "alpha": 0.75},
  "fisher": {"epsilon": 1.0},
  "methods": [
    {"label": "if-rngd", "precond": "ngd-approx"},
    {"label": "extrinsic-if-ngd", "precond": "extrinsic-ngd-approx"},
    {"label": "rsgd", "precond": "gd"}
  ]
})";

const char* const kRateExperiment = R"({
  "name": "rate",
  "objective": "gaussian-mean",
  "objective_params": {"dim": 5, "cov_seed": 3, "cov_min": 0.5, "cov_max": 2.0, "theta0_scale": 1.0},
  "iterations": 100000,
  "log_every": 100,
  "record_wall_time": false,
  "replications": 200,
  "seed": 31337,
  "schedule": {"c0": 1.0, "c1": 100.0, "alpha": 0.75},
  "fisher": {"epsilon": 1.0},
  "methods": [{"label": "if-rngd", "precond": "ngd-approx"}]
})";

namespace {

CheckResult check_logistic_vb(const CheckOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_embedded(kLogisticVbExperiment, opt);
  const double secs = seconds_since(t0);
  const double fstar = res.reference_value;
  const double approx_gap = mean_final(res, "bw-ngd-approx") - fstar;
  std::map<std::string, double> hit;
  for (const char* m : {"bw-gd", "bw-ngd", "bw-ngd-approx", "euc-gd", "euc-ngd", "euc-ngd-approx"})
    hit[m] = first_hit(res, m, fstar, 0.1);
  const bool order = hit["bw-ngd"] < hit["bw-gd"] && hit["bw-ngd-approx"] < hit["bw-gd"] &&
                     hit["euc-ngd"] < hit["euc-gd"] && hit["euc-ngd-approx"] < hit["euc-gd"];
  CheckResult r;
  r.id = "logistic-vb";
  r.what = "BW NGD-approx gap at 3000 <= 0.05; NGD variants hit gap 0.1 before GD; runtime < 600 s";
  r.passed = approx_gap <= 0.05 && order && secs < 600.0;
  r.value = approx_gap;
  r.detail = "f* " + fmt(fstar) + ", approx gap " + fmt(approx_gap) + ", first iteration at gap 0.1:";
  for (const auto& [k, v] : hit) r.detail += " " + k + "=" + (std::isfinite(v) ? fmt(v) : std::string("never"));
  r.detail += ", " + fmt(secs) + " s";
  return r;
}

CheckResult check_reduced_rank(const CheckOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_embedded(kReducedRankExperiment, opt);
  const double secs = seconds_since(t0);
  int fails = 0;
  const double a = mean_final(res, "if-rngd", &fails);
  const double b = mean_final(res, "extrinsic-if-ngd", &fails);
  const double c = mean_final(res, "rsgd", &fails);
  CheckResult r;
  r.id = "reduced-rank";
  r.what = "mean NLL after 5000 iterations: IF-RNGD <= extrinsic <= RSGD; runtime < 600 s";
  r.passed = fails == 0 && a <= b && b <= c && secs < 600.0;
  r.value = a;
  r.detail = "if-rngd " + fmt(a) + ", extrinsic " + fmt(b) + ", rsgd " + fmt(c) + ", " + std::to_string(fails) +
             " failed runs, " + fmt(secs) + " s";
  return r;
}

CheckResult check_rate(const CheckOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_embedded(kRateExperiment, opt);
  const double secs = seconds_since(t0);
  const double alpha = 0.75;
  // Mean squared distance at recorded iterations in [1e3, 1e5].
  std::map<long long, std::pair<double, int>> acc;
  int reps = 0, fails = 0;
  for (const auto& run : res.runs) {
    ++reps;
    if (!run.trace.ok()) ++fails;
    for (const auto& rec : run.trace.records) {
      auto& a = acc[rec.iter];
      a.first += rec.ref_dist * rec.ref_dist;
      a.second += 1;
    }
  }
  // 41 log-spaced targets, each mapped to the nearest recorded iteration.
  std::vector<double> xs, ys;
  long long last = -1;
  for (int k = 0; k <= 40; ++k) {
    const double target = std::pow(10.0, 3.0 + 2.0 * k / 40.0);
    long long best = -1;
    for (const auto& [iter, a] : acc)
      if (iter > 0 && (best < 0 || std::abs(iter - target) < std::abs(best - target))) best = iter;
    if (best <= last || acc[best].second != reps) continue;
    last = best;
    const double s = static_cast<double>(best);
    xs.push_back(std::log(std::log(s) / std::pow(s, alpha)));
    ys.push_back(std::log(acc[best].first / reps));
  }
  double slope = std::numeric_limits<double>::quiet_NaN();
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    slope = sxy / sxx;
  }
  CheckResult r;
  r.id = "rate";
  r.what = "slope of log d^2 vs log(log s / s^0.75), s in [1e3, 1e5], in [0.8, 1.2]; runtime < 300 s";
  r.passed = fails == 0 && slope >= 0.8 && slope <= 1.2 && secs < 300.0;
  r.value = slope;
  r.detail = "slope " + fmt(slope) + " from " + std::to_string(xs.size()) + " points, " + std::to_string(reps) +
             " replications, " + fmt(secs) + " s";
  return r;
}

// ----------------------------------------------------- reproducibility, io

const char* const kReproExperiment = R"({
  "name": "repro",
  "objective": "logistic-vb",
  "data": {"generator": "logistic", "n": 120, "d": 4, "rho": 0.5, "seed": 5},
  "iterations": 150,
  "log_every": 5,
  "record_wall_time": false,
  "replications": 3,
  "seed": 77,
  "methods": [
    {"label": "bw-ngd-approx", "precond": "ngd-approx", "fisher": {"epsilon": 10.0}},
    {"label": "bw-window", "precond": "ngd-approx", "fisher": {"epsilon": 10.0, "window": true, "window_size": 20}},
    {"label": "bw-gd", "precond": "gd", "schedule": {"c0": 0.1}}
  ]
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  return a.X.rows() == b.X.rows() && a.X.cols() == b.X.cols() && a.X == b.X && a.y == b.y && a.classes == b.classes;
}

CheckResult check_repro_io(const CheckOptions& opt) {
  std::vector<std::string> problems;
  const fs::path scratch = opt.scratch_dir.empty() ? fs::temp_directory_path() / "rngd-check" : opt.scratch_dir;
  std::vector<std::string> traces[3];
  int variant = 0;
  for (int threads : {1, 1, 3}) {
    ExperimentSpec spec = parse_experiment(Json::parse(kReproExperiment), ".");
    spec.output = scratch / ("repro-" + std::to_string(variant));
    fs::remove_all(spec.output);
    const ExperimentResult res = execute_experiment(spec, threads);
    write_experiment(spec, res);
    for (const auto& run : res.runs) traces[variant].push_back(slurp(spec.output / "traces" / (run.run_id + ".csv")));
    traces[variant].push_back(slurp(spec.output / "summary.csv"));
    ++variant;
  }
  if (traces[0] != traces[1]) problems.push_back("re-run traces differ");
  if (traces[0] != traces[2]) problems.push_back("threaded traces differ");
  if (traces[0].size() != 10 || traces[0][0].size() < 100) problems.push_back("unexpected trace layout");

  // Inline fixtures with frozen parses.
  {
    std::istringstream in("1 1:0.5 3:2.0\n-1 2:-1.25e-3\n\n1 3:7\n");
    const Dataset ds = parse_libsvm(in);
    Mat X(3, 3);
    X << 0.5, 0, 2.0, 0, -1.25e-3, 0, 0, 0, 7;
    Vec y(3);
    y << 1, 0, 1;
    if (!(ds.X == X) || !(ds.y == y)) problems.push_back("libsvm inline fixture parse");
    std::ostringstream os;
    write_libsvm(os, ds);
    if (os.str() != "1 1:0.5 3:2\n-1 2:-0.00125\n1 3:7\n") problems.push_back("libsvm writer text: " + os.str());
    std::istringstream back(os.str());
    if (!same_dataset(parse_libsvm(back), ds)) problems.push_back("libsvm round trip");
  }
  {
    std::istringstream in("a,\"b, quoted\",class\n1.5,2,cat\n-3,4e-2,dog\n0,\"5\",cat\n");
    CsvOptions o;
    o.header = true;
    o.label_name = "class";
    const Dataset ds = parse_csv(in, o);
    Mat X(3, 2);
    X << 1.5, 2, -3, 0.04, 0, 5;
    Vec y(3);
    y << 0, 1, 0;
    if (!(ds.X == X) || !(ds.y == y)) problems.push_back("csv inline fixture parse");
    std::ostringstream os;
    write_csv(os, ds, true);
    std::istringstream back(os.str());
    CsvOptions ob;
    ob.header = true;
    ob.label_column = 0;
    if (!same_dataset(parse_csv(back, ob), ds)) problems.push_back("csv round trip");
  }
  {
    Rng rng = make_rng(808);
    Dataset ds;
    ds.X = randn(rng, 25, 6);
    for (Index i = 0; i < ds.X.size(); ++i)
      if (uniform01(rng) < 0.4) ds.X.data()[i] = 0.0;
    ds.y = Vec(25);
    for (Index i = 0; i < 25; ++i) ds.y(i) = uniform01(rng) < 0.5 ? 0 : 1;
    ds.y(0) = 0;
    ds.y(1) = 1;
    ds.X(0, 5) = 1.0;
    std::ostringstream os;
    write_libsvm(os, ds);
    std::istringstream back(os.str());
    if (!same_dataset(parse_libsvm(back), ds)) problems.push_back("random libsvm round trip");
    std::ostringstream oc;
    write_csv(oc, ds, true);
    std::istringstream bc(oc.str());
    CsvOptions ob;
    ob.header = true;
    ob.label_column = 0;
    if (!same_dataset(parse_csv(bc, ob), ds)) problems.push_back("random csv round trip");
  }
  int files = 0;
  if (!opt.fixtures_dir.empty() && fs::is_directory(opt.fixtures_dir)) {
    for (const auto& entry : fs::directory_iterator(opt.fixtures_dir)) {
      const fs::path p = entry.path();
      const std::string ext = p.extension().string();
      if (p.stem().string().rfind("bad", 0) == 0) {
        bool threw = false;
        try {
          if (ext == ".csv")
            parse_csv(p);
          else
            parse_libsvm(p);
        } catch (const Error& e) {
          threw = e.kind() == ErrorKind::ParseError;
        }
        if (!threw) problems.push_back(p.filename().string() + " was accepted");
        ++files;
        continue;
      }
      if (ext == ".libsvm") {
        const Dataset ds = parse_libsvm(p);
        std::ostringstream os;
        write_libsvm(os, ds);
        std::istringstream back(os.str());
        if (!same_dataset(parse_libsvm(back, ds.d()), ds)) problems.push_back(p.filename().string() + " round trip");
        ++files;
      } else if (ext == ".csv") {
        CsvOptions o;
        o.header = true;
        const Dataset ds = parse_csv(p, o);
        std::ostringstream os;
        write_csv(os, ds, true);
        std::istringstream back(os.str());
        CsvOptions ob;
        ob.header = true;
        ob.label_column = 0;
        if (!same_dataset(parse_csv(back, ob), ds)) problems.push_back(p.filename().string() + " round trip");
        ++files;
      }
    }
  }
  CheckResult r;
  r.id = "repro-io";
  r.what = "identical traces across re-runs and thread counts; LIBSVM/CSV round trips";
  r.passed = problems.empty();
  r.value = static_cast<double>(problems.size());
  r.detail = std::to_string(files) + " fixture files";
  for (const auto& p : problems) r.detail += "; " + p;
  return r;
}

using CheckFn = std::function<CheckResult(const CheckOptions&)>;

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> r = {
      {"sherman-morrison", check_sherman_morrison},
      {"window", check_window},
      {"fisher-consistency", check_fisher_consistency},
      {"geometry", check_geometry},
      {"kl-ratio", check_kl_ratio},
      {"gradients", check_gradients},
      {"estimators", check_estimators},
      {"logistic-vb", check_logistic_vb},
      {"reduced-rank", check_reduced_rank},
      {"rate", check_rate},
      {"repro-io", check_repro_io},
  };
  return r;
}

bool is_slow(const std::string& id) { return id == "logistic-vb" || id == "reduced-rank" || id == "rate"; }

}  // namespace

std::vector<std::string> check_suites() {
  std::vector<std::string> s = {"fast", "all"};
  for (const auto& [id, fn] : registry()) s.push_back(id);
  return s;
}

std::vector<CheckResult> run_checks(const std::string& suite, const CheckOptions& options) {
  std::vector<CheckResult> out;
  bool known = false;
  for (const auto& [id, fn] : registry()) {
    const bool selected = suite == "all" || suite == id || (suite == "fast" && !is_slow(id));
    if (!selected) continue;
    known = true;
    if (options.verbose) std::cerr << "check " << id << "...\n";
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = fn(options);
    } catch (const std::exception& e) {
      r.id = id;
      r.what = "completes without error";
      r.passed = false;
      r.detail = e.what();
    }
    r.seconds = seconds_since(t0);
    out.push_back(std::move(r));
  }
  if (!known) fail(ErrorKind::ConfigError, "unknown check suite '" + suite + "'");
  return out;
}

std::string format_check(const CheckResult& r) {
  std::string s = r.passed ? "PASS " : "FAIL ";
  s += r.id + ": " + r.what + " | " + r.detail;
  s += " [" + fmt(r.seconds) + " s]";
  return s;
}

}  // namespace rngd
