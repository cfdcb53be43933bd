#include "rngd/fixed_rank.hpp"

#include "rngd/error.hpp"
#include "rngd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace rngd {

Mat fr_ambient(const FixedRankPoint& x, const FixedRankTangent& t) {
  return x.U * t.M * x.V.transpose() + t.Up * x.V.transpose() + x.U * t.Vp.transpose();
}

double fr_inner(const FixedRankTangent& a, const FixedRankTangent& b) {
  return (a.M.array() * b.M.array()).sum() + (a.Up.array() * b.Up.array()).sum() +
         (a.Vp.array() * b.Vp.array()).sum();
}

FixedRankTangent fr_project(const FixedRankPoint& x, const Mat& Z) {
  require(Z.rows() == x.U.rows() && Z.cols() == x.V.rows(), ErrorKind::InvalidInput, "fr_project: shape mismatch");
  FixedRankTangent t;
  Mat ZV = Z * x.V;
  Mat ZtU = Z.transpose() * x.U;
  t.M = x.U.transpose() * ZV;
  t.Up = ZV - x.U * t.M;
  t.Vp = ZtU - x.V * t.M.transpose();
  return t;
}

FixedRankTangent fr_transport(const FixedRankPoint& x, const FixedRankPoint& y, const FixedRankTangent& t) {
  // xi = U1 M V1^T + Up1 V1^T + U1 Vp1^T; every product with U2, V2 reduces
  // to r x r cross-Gram matrices.
  Mat v12 = x.V.transpose() * y.V;    // r x r
  Mat u21 = y.U.transpose() * x.U;    // r x r
  Mat xiV2 = x.U * (t.M * v12) + t.Up * v12 + x.U * (t.Vp.transpose() * y.V);
  Mat xitU2 = x.V * (t.M.transpose() * u21.transpose()) + x.V * (t.Up.transpose() * y.U) + t.Vp * u21.transpose();
  FixedRankTangent out;
  out.M = y.U.transpose() * xiV2;
  out.Up = xiV2 - y.U * out.M;
  out.Vp = xitU2 - y.V * out.M.transpose();
  return out;
}

FixedRankPoint fr_retract(const FixedRankPoint& x, const FixedRankTangent& t, bool* degenerate) {
  const Index r = x.sigma.size();
  const Index m = x.U.rows(), n = x.V.rows();
  // X + xi = [U Up] [[S + M, I], [I, 0]] [V Vp]^T.
  Mat left(m, 2 * r), right(n, 2 * r);
  left << x.U, t.Up;
  right << x.V, t.Vp;
  Mat core = Mat::Zero(2 * r, 2 * r);
  core.topLeftCorner(r, r) = Mat(x.sigma.asDiagonal()) + t.M;
  core.topRightCorner(r, r) = Mat::Identity(r, r);
  core.bottomLeftCorner(r, r) = Mat::Identity(r, r);
  Mat q1, r1, q2, r2;
  linalg::thin_qr(left, q1, r1);
  linalg::thin_qr(right, q2, r2);
  Mat small = r1 * core * r2.transpose();
  const Index k = std::min(small.rows(), small.cols());
  require(r <= k, ErrorKind::InvalidInput, "fr_retract: rank exceeds factor size");
  Eigen::JacobiSVD<Mat> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  if (!(s(r - 1) > 1e-12 * std::max(s(0), 1e-300)) || !std::isfinite(s(0)))
    fail(ErrorKind::RankCollapse, "fr_retract: sigma_r collapsed");
  if (degenerate) *degenerate = r < k && std::abs(s(r - 1) - s(r)) <= 1e-12 * s(0);
  FixedRankPoint y;
  y.U = q1 * svd.matrixU().leftCols(r);
  y.V = q2 * svd.matrixV().leftCols(r);
  y.sigma = s.head(r);
  const Mat I = Mat::Identity(r, r);
  if ((y.U.transpose() * y.U - I).norm() > 1e-8) y.U = linalg::orthonormalize(y.U);
  if ((y.V.transpose() * y.V - I).norm() > 1e-8) y.V = linalg::orthonormalize(y.V);
  return y;
}

FixedRankPoint to_fixed_rank(const Point& p) {
  require(p.num_blocks() == 3, ErrorKind::InvalidInput, "to_fixed_rank: expected {U, sigma, V}");
  return FixedRankPoint{p.block(0), p.block(1).reshaped(), p.block(2)};
}

Point from_fixed_rank(const FixedRankPoint& x) { return Point({x.U, Mat(x.sigma), x.V}); }

namespace {

class ProjectionTransport final : public TangentMap {
 public:
  ProjectionTransport(const FixedRankManifold& man, FixedRankPoint x, FixedRankPoint y)
      : man_(man), x_(std::move(x)), y_(std::move(y)) {}
  Index in_dim() const override { return man_.coord_dim(); }
  Index out_dim() const override { return man_.coord_dim(); }
  Vec apply(const Vec& u) const override { return man_.pack(fr_transport(x_, y_, man_.unpack(u))); }
  // Orthogonal projections are self-adjoint in the ambient inner product, so
  // on tangent vectors the adjoint is the projection back onto T_x.
  Vec apply_adjoint(const Vec& w) const override { return man_.pack(fr_transport(y_, x_, man_.unpack(w))); }

 private:
  const FixedRankManifold& man_;
  FixedRankPoint x_, y_;
};

}  // namespace

FixedRankManifold::FixedRankManifold(Index m, Index n, Index r) : m_(m), n_(n), r_(r) {
  require(r >= 1 && r <= std::min(m, n), ErrorKind::InvalidInput, "fixed-rank: need 1 <= r <= min(m, n)");
}

FixedRankTangent FixedRankManifold::unpack(const Vec& v) const {
  require(v.size() == coord_dim(), ErrorKind::InvalidInput, "fixed-rank: tangent length mismatch");
  FixedRankTangent t;
  t.M = unvec(v.segment(0, r_ * r_), r_, r_);
  t.Up = unvec(v.segment(r_ * r_, m_ * r_), m_, r_);
  t.Vp = unvec(v.segment(r_ * r_ + m_ * r_, n_ * r_), n_, r_);
  return t;
}

Vec FixedRankManifold::pack(const FixedRankTangent& t) const {
  Vec v(coord_dim());
  v.segment(0, r_ * r_) = t.M.reshaped();
  v.segment(r_ * r_, m_ * r_) = t.Up.reshaped();
  v.segment(r_ * r_ + m_ * r_, n_ * r_) = t.Vp.reshaped();
  return v;
}

Vec FixedRankManifold::project_ambient(const Point& x, const Mat& Z) const {
  return pack(fr_project(to_fixed_rank(x), Z));
}

Vec FixedRankManifold::project(const Point& x, const Vec& u) const {
  FixedRankPoint p = to_fixed_rank(x);
  FixedRankTangent t = unpack(u);
  t.Up -= p.U * (p.U.transpose() * t.Up);
  t.Vp -= p.V * (p.V.transpose() * t.Vp);
  return pack(t);
}

Point FixedRankManifold::retract(const Point& x, const Vec& v) const {
  return from_fixed_rank(fr_retract(to_fixed_rank(x), unpack(v)));
}

Vec FixedRankManifold::inverse_retract(const Point& x, const Point& y) const {
  FixedRankPoint px = to_fixed_rank(x), py = to_fixed_rank(y);
  const Mat D = py.dense() - px.dense();
  const Mat Pu = Mat::Identity(m_, m_) - py.U * py.U.transpose();
  const Mat Pv = Mat::Identity(n_, n_) - py.V * py.V.transpose();
  // Find tangent xi at X and normal N at Y with X + xi = Y + N.
  Mat N = Mat::Zero(m_, n_);
  FixedRankTangent xi;
  for (int it = 0; it < 500; ++it) {
    xi = fr_project(px, D + N);
    Mat Nn = Pu * (fr_ambient(px, xi) - D) * Pv;
    const double change = (Nn - N).norm();
    N = Nn;
    if (change <= 1e-14 * std::max(1.0, D.norm())) break;
  }
  xi = fr_project(px, D + N);
  FixedRankPoint back = fr_retract(px, xi);
  if ((back.dense() - py.dense()).norm() > 1e-8 * std::max(1.0, py.dense().norm()))
    fail(ErrorKind::RadiusExceeded, "fixed-rank inverse retraction did not converge");
  return pack(xi);
}

std::unique_ptr<TangentMap> FixedRankManifold::transport_map(const Point& x, const Point& y) const {
  return std::make_unique<ProjectionTransport>(*this, to_fixed_rank(x), to_fixed_rank(y));
}

Vec FixedRankManifold::embed_tangent(const Point& x, const Vec& v) const {
  return fr_ambient(to_fixed_rank(x), unpack(v)).reshaped();
}

std::vector<Range> FixedRankManifold::natural_blocks() const {
  return {{0, r_ * r_}, {r_ * r_, m_ * r_}, {r_ * r_ + m_ * r_, n_ * r_}};
}

Point FixedRankManifold::random_point(Rng& rng) const {
  FixedRankPoint p;
  p.U = random_stiefel(rng, m_, r_);
  p.V = random_stiefel(rng, n_, r_);
  p.sigma.resize(r_);
  for (Index i = 0; i < r_; ++i) p.sigma(i) = 1.0 + 2.0 * uniform01(rng);
  std::sort(p.sigma.data(), p.sigma.data() + r_, std::greater<double>());
  return from_fixed_rank(p);
}

}  // namespace rngd
