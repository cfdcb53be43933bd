#include "rngd/manifold.hpp"

#include "rngd/error.hpp"
#include "rngd/linalg.hpp"

#include <cmath>
#include <limits>

namespace rngd {

Mat random_spd(Rng& rng, Index d, double lo, double hi) {
  Mat q = linalg::orthonormalize(randn(rng, d, d));
  Vec l(d);
  for (Index i = 0; i < d; ++i) l(i) = lo + (hi - lo) * uniform01(rng);
  return sym(q * l.asDiagonal() * q.transpose());
}

Mat random_stiefel(Rng& rng, Index n, Index p) { return linalg::orthonormalize(randn(rng, n, p)); }

// ---------------------------------------------------------------- TangentMap

Vec TangentMap::apply_inverse_adjoint(const Vec&) const {
  fail(ErrorKind::NotInvertible, "transport map has no inverse adjoint");
}

Mat TangentMap::apply_cols(const Mat& u) const {
  Mat out(out_dim(), u.cols());
  for (Index j = 0; j < u.cols(); ++j) out.col(j) = apply(u.col(j));
  return out;
}

Mat TangentMap::apply_adjoint_cols(const Mat& w) const {
  Mat out(in_dim(), w.cols());
  for (Index j = 0; j < w.cols(); ++j) out.col(j) = apply_adjoint(w.col(j));
  return out;
}

Mat TangentMap::apply_inverse_adjoint_cols(const Mat& w) const {
  Mat out(in_dim(), w.cols());
  for (Index j = 0; j < w.cols(); ++j) out.col(j) = apply_inverse_adjoint(w.col(j));
  return out;
}

Mat TangentMap::matrix() const { return apply_cols(Mat::Identity(in_dim(), in_dim())); }

Mat TangentMap::congruence(const Mat& s) const {
  Mat st = s * matrix();
  return apply_adjoint_cols(st);
}

BlockDiagonalMap::BlockDiagonalMap(std::vector<std::unique_ptr<TangentMap>> parts) : parts_(std::move(parts)) {
  for (const auto& p : parts_) {
    in_ranges_.push_back({in_, p->in_dim()});
    out_ranges_.push_back({out_, p->out_dim()});
    in_ += p->in_dim();
    out_ += p->out_dim();
  }
}

Vec BlockDiagonalMap::apply(const Vec& u) const {
  Vec out(out_);
  for (std::size_t i = 0; i < parts_.size(); ++i)
    out.segment(out_ranges_[i].offset, out_ranges_[i].size) =
        parts_[i]->apply(u.segment(in_ranges_[i].offset, in_ranges_[i].size));
  return out;
}

Vec BlockDiagonalMap::apply_adjoint(const Vec& w) const {
  Vec out(in_);
  for (std::size_t i = 0; i < parts_.size(); ++i)
    out.segment(in_ranges_[i].offset, in_ranges_[i].size) =
        parts_[i]->apply_adjoint(w.segment(out_ranges_[i].offset, out_ranges_[i].size));
  return out;
}

Vec BlockDiagonalMap::apply_inverse_adjoint(const Vec& w) const {
  Vec out(in_);
  for (std::size_t i = 0; i < parts_.size(); ++i)
    out.segment(in_ranges_[i].offset, in_ranges_[i].size) =
        parts_[i]->apply_inverse_adjoint(w.segment(out_ranges_[i].offset, out_ranges_[i].size));
  return out;
}

bool BlockDiagonalMap::isometric() const {
  for (const auto& p : parts_)
    if (!p->isometric()) return false;
  return true;
}

Mat BlockDiagonalMap::congruence(const Mat& s) const {
  // Diagonal blocks use each factor's own congruence; off-diagonal blocks
  // need T_i^* S_ij T_j.
  Mat out(in_, in_);
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const Range ri = in_ranges_[i], oi = out_ranges_[i];
    out.block(ri.offset, ri.offset, ri.size, ri.size) =
        parts_[i]->congruence(s.block(oi.offset, oi.offset, oi.size, oi.size));
  }
  if (parts_.size() > 1) {
    std::vector<Mat> tm(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) tm[j] = parts_[j]->matrix();
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      for (std::size_t j = 0; j < parts_.size(); ++j) {
        if (i == j) continue;
        const Range ri = in_ranges_[i], oi = out_ranges_[i], rj = in_ranges_[j], oj = out_ranges_[j];
        Mat sij = s.block(oi.offset, oj.offset, oi.size, oj.size);
        if (sij.isZero(0.0)) {
          out.block(ri.offset, rj.offset, ri.size, rj.size).setZero();
          continue;
        }
        out.block(ri.offset, rj.offset, ri.size, rj.size) = parts_[i]->apply_adjoint_cols(sij * tm[j]);
      }
    }
  }
  return out;
}

// ------------------------------------------------------------------ Manifold

double Manifold::norm(const Point& x, const Vec& u) const { return std::sqrt(std::max(0.0, inner(x, u, u))); }

std::unique_ptr<TangentMap> Manifold::step_transport_map(const Point& x, const Vec&, const Point& y) const {
  return transport_map(x, y);
}

std::unique_ptr<TangentMap> Manifold::step_back_transport_map(const Point& x, const Vec&, const Point& y) const {
  return transport_map(y, x);
}

Vec Manifold::random_tangent(const Point& x, Rng& rng) const { return project(x, randn(rng, coord_dim())); }

// ----------------------------------------------------------------- Euclidean

Point EuclideanManifold::retract(const Point& x, const Vec& v) const {
  require(v.size() == n_, ErrorKind::InvalidInput, "euclidean retract: dimension mismatch");
  return make_point(x.block(0).reshaped() + v);
}

Vec EuclideanManifold::inverse_retract(const Point& x, const Point& y) const {
  return y.block(0).reshaped() - x.block(0).reshaped();
}

// ------------------------------------------------------------------- Product

ProductManifold::ProductManifold(std::vector<std::shared_ptr<const Manifold>> factors)
    : factors_(std::move(factors)) {
  for (const auto& f : factors_) {
    coord_ranges_.push_back({coord_dim_, f->coord_dim()});
    coord_dim_ += f->coord_dim();
    block_offsets_.push_back(blocks_);
    blocks_ += f->point_blocks();
  }
}

std::string ProductManifold::name() const {
  std::string s = "product(";
  for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? "," : "") + factors_[i]->name();
  return s + ")";
}

Index ProductManifold::dim() const {
  Index d = 0;
  for (const auto& f : factors_) d += f->dim();
  return d;
}

Point ProductManifold::factor_point(const Point& x, std::size_t i) const {
  return x.slice(block_offsets_.at(i), factors_.at(i)->point_blocks());
}

Point ProductManifold::join(const std::vector<Point>& parts) const {
  std::vector<Mat> blocks;
  for (const auto& p : parts)
    for (const auto& b : p.blocks()) blocks.push_back(b);
  return Point(std::move(blocks));
}

double ProductManifold::inner(const Point& x, const Vec& u, const Vec& v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Range r = coord_ranges_[i];
    s += factors_[i]->inner(factor_point(x, i), u.segment(r.offset, r.size), v.segment(r.offset, r.size));
  }
  return s;
}

#define RNGD_PRODUCT_MAP(expr)                                          \
  Vec out(coord_dim_);                                                  \
  for (std::size_t i = 0; i < factors_.size(); ++i) {                   \
    const Range r = coord_ranges_[i];                                   \
    out.segment(r.offset, r.size) = (expr);                             \
  }                                                                     \
  return out;

Vec ProductManifold::metric_apply(const Point& x, const Vec& u) const {
  RNGD_PRODUCT_MAP(factors_[i]->metric_apply(factor_point(x, i), u.segment(r.offset, r.size)))
}

Vec ProductManifold::metric_solve(const Point& x, const Vec& w) const {
  RNGD_PRODUCT_MAP(factors_[i]->metric_solve(factor_point(x, i), w.segment(r.offset, r.size)))
}

Vec ProductManifold::inverse_retract(const Point& x, const Point& y) const {
  RNGD_PRODUCT_MAP(factors_[i]->inverse_retract(factor_point(x, i), factor_point(y, i)))
}

Vec ProductManifold::project(const Point& x, const Vec& u) const {
  RNGD_PRODUCT_MAP(factors_[i]->project(factor_point(x, i), u.segment(r.offset, r.size)))
}

Vec ProductManifold::random_tangent(const Point& x, Rng& rng) const {
  RNGD_PRODUCT_MAP(factors_[i]->random_tangent(factor_point(x, i), rng))
}

#undef RNGD_PRODUCT_MAP

Point ProductManifold::retract(const Point& x, const Vec& v) const {
  require(v.size() == coord_dim_, ErrorKind::InvalidInput, "product retract: dimension mismatch");
  std::vector<Point> parts;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Range r = coord_ranges_[i];
    parts.push_back(factors_[i]->retract(factor_point(x, i), v.segment(r.offset, r.size)));
  }
  return join(parts);
}

std::unique_ptr<TangentMap> ProductManifold::transport_map(const Point& x, const Point& y) const {
  std::vector<std::unique_ptr<TangentMap>> parts;
  for (std::size_t i = 0; i < factors_.size(); ++i)
    parts.push_back(factors_[i]->transport_map(factor_point(x, i), factor_point(y, i)));
  return std::make_unique<BlockDiagonalMap>(std::move(parts));
}

std::unique_ptr<TangentMap> ProductManifold::step_transport_map(const Point& x, const Vec& step,
                                                                const Point& y) const {
  std::vector<std::unique_ptr<TangentMap>> parts;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Range r = coord_ranges_[i];
    parts.push_back(factors_[i]->step_transport_map(factor_point(x, i), step.segment(r.offset, r.size),
                                                    factor_point(y, i)));
  }
  return std::make_unique<BlockDiagonalMap>(std::move(parts));
}

std::unique_ptr<TangentMap> ProductManifold::step_back_transport_map(const Point& x, const Vec& step,
                                                                     const Point& y) const {
  std::vector<std::unique_ptr<TangentMap>> parts;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Range r = coord_ranges_[i];
    parts.push_back(factors_[i]->step_back_transport_map(factor_point(x, i), step.segment(r.offset, r.size),
                                                         factor_point(y, i)));
  }
  return std::make_unique<BlockDiagonalMap>(std::move(parts));
}

bool ProductManifold::isometric_transport() const {
  for (const auto& f : factors_)
    if (!f->isometric_transport()) return false;
  return true;
}

bool ProductManifold::has_exact_exp() const {
  for (const auto& f : factors_)
    if (!f->has_exact_exp()) return false;
  return true;
}

Vec ProductManifold::embed(const Point& x) const {
  std::vector<Vec> parts;
  Index n = 0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    parts.push_back(factors_[i]->embed(factor_point(x, i)));
    n += parts.back().size();
  }
  Vec out(n);
  Index o = 0;
  for (const auto& p : parts) {
    out.segment(o, p.size()) = p;
    o += p.size();
  }
  return out;
}

Vec ProductManifold::embed_tangent(const Point& x, const Vec& v) const {
  std::vector<Vec> parts;
  Index n = 0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Range r = coord_ranges_[i];
    parts.push_back(factors_[i]->embed_tangent(factor_point(x, i), v.segment(r.offset, r.size)));
    n += parts.back().size();
  }
  Vec out(n);
  Index o = 0;
  for (const auto& p : parts) {
    out.segment(o, p.size()) = p;
    o += p.size();
  }
  return out;
}

std::vector<Range> ProductManifold::natural_blocks() const {
  std::vector<Range> out;
  for (std::size_t i = 0; i < factors_.size(); ++i)
    for (Range r : factors_[i]->natural_blocks()) out.push_back({r.offset + coord_ranges_[i].offset, r.size});
  return out;
}

Point ProductManifold::random_point(Rng& rng) const {
  std::vector<Point> parts;
  for (const auto& f : factors_) parts.push_back(f->random_point(rng));
  return join(parts);
}

// --------------------------------------------------------------- Diagnostics

RetractionReport check_retraction_axioms(const Manifold& m, const Point& x, const Vec& v) {
  RetractionReport rep;
  const Vec ex = m.embed(x);
  rep.zero_error = (m.embed(m.retract(x, Vec::Zero(v.size()))) - ex).norm();

  const double h = 1e-6 * std::max(1.0, ex.norm());
  const Vec fd = (m.embed(m.retract(x, h * v)) - m.embed(m.retract(x, -h * v))) / (2.0 * h);
  const Vec exact = m.embed_tangent(x, v);
  rep.differential_error = (fd - exact).norm() / std::max(exact.norm(), 1e-300);

  // The backends that declare an exact exponential use it as their
  // retraction, so the retraction-vs-exp discrepancy is identically zero.
  rep.second_order_slope = m.has_exact_exp() ? std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::quiet_NaN();
  rep.passed = rep.zero_error <= 1e-12 * std::max(1.0, ex.norm()) && rep.differential_error <= 1e-5;
  return rep;
}

TransportReport check_transport_consistency(const Manifold& m, const Point& x, const Point& y, const Vec& u,
                                            const Vec& w) {
  TransportReport rep;
  const double nu = std::max(m.norm(x, u), 1e-300);
  rep.identity_error = (m.transport(x, x, u) - u).norm() / std::max(u.norm(), 1e-300);
  auto t = m.transport_map(x, y);
  const Vec tu = t->apply(u);
  const Vec tsw = t->apply_adjoint(w);
  const double nw = std::max(m.norm(y, w), 1e-300);
  rep.adjoint_error = std::abs(m.inner(y, tu, w) - m.inner(x, u, tsw)) / (nu * nw);
  if (t->isometric()) rep.isometry_error = std::abs(m.norm(y, tu) - nu) / nu;
  rep.passed = rep.identity_error <= 1e-9 && rep.adjoint_error <= 1e-9 && rep.isometry_error <= 1e-9;
  return rep;
}

}  // namespace rngd
