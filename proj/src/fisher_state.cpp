#include "rngd/fisher_state.hpp"

#include "rngd/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace rngd {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'N', 'G', 'D', 'F', 'I', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kTagDense = 0;
constexpr std::uint32_t kTagWindow = 1;

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  os.write(buf.data(), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  std::array<char, sizeof(T)> buf;
  is.read(buf.data(), sizeof(T));
  if (!is) fail(ErrorKind::IoError, "fisher checkpoint: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  T value;
  std::memcpy(&value, buf.data(), sizeof(T));
  return value;
}

void put_header(std::ostream& os, std::uint32_t tag, std::int64_t dim, std::int64_t window, double eps,
                std::int64_t count) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, tag);
  put<std::int64_t>(os, dim);
  put<std::int64_t>(os, window);
  put<double>(os, eps);
  put<std::int64_t>(os, count);
}

}  // namespace

Mat InvFisherState::matrix(const Manifold& m, const Point& x) const {
  const Index n = dim();
  Mat out(n, n);
  for (Index j = 0; j < n; ++j) out.col(j) = solve(m, x, Vec::Unit(n, j));
  return out;
}

// --------------------------------------------------------------------- dense

DenseInvFisher::DenseInvFisher(Index dim, double epsilon, std::vector<Range> blocks)
    : hinv_(Mat::Identity(dim, dim) / epsilon), eps_(epsilon), blocks_(std::move(blocks)) {
  require(epsilon > 0.0, ErrorKind::InvalidInput, "inverse Fisher: damping must be positive");
  Index covered = 0;
  for (const Range& r : blocks_) {
    require(r.offset == covered && r.size > 0, ErrorKind::InvalidInput, "inverse Fisher: blocks must tile the chart");
    covered += r.size;
  }
  require(blocks_.empty() || covered == dim, ErrorKind::InvalidInput, "inverse Fisher: blocks must tile the chart");
}

DenseInvFisher DenseInvFisher::from_parts(Mat hinv, double eps, long long count, std::vector<Range> blocks) {
  DenseInvFisher s(hinv.rows(), eps, std::move(blocks));
  s.hinv_ = std::move(hinv);
  s.count_ = count;
  return s;
}

void DenseInvFisher::update(const Manifold& m, const Point& x, const Vec& phi) {
  require(phi.size() == dim(), ErrorKind::InvalidInput, "inverse Fisher: score length mismatch");
  require(phi.allFinite(), ErrorKind::InvalidInput, "inverse Fisher: non-finite score");
  const Vec gphi = m.metric_apply(x, phi);
  auto rank_one = [&](Range r) {
    auto H = hinv_.block(r.offset, r.offset, r.size, r.size);
    const auto p = phi.segment(r.offset, r.size);
    const auto gp = gphi.segment(r.offset, r.size);
    const Vec h = H * p;
    const double denom = 1.0 + gp.dot(h);
    if (!(denom >= 1.0 - 1e-9))
      fail(ErrorKind::BrokenInvariant,
           "inverse Fisher lost metric positivity (denominator " + std::to_string(denom) + ")");
    const Vec row = H.transpose() * gp;
    H.noalias() -= (h / denom) * row.transpose();
  };
  if (blocks_.empty()) {
    rank_one(Range{0, dim()});
  } else {
    for (const Range& r : blocks_) rank_one(r);
  }
  ++count_;
}

void DenseInvFisher::transport_with(const TangentMap& back) {
  require(back.out_dim() == dim(), ErrorKind::InvalidInput, "inverse Fisher: transport dimension mismatch");
  hinv_ = back.congruence(hinv_);
  zero_cross_blocks();
}

void DenseInvFisher::transport(const Manifold& m, const Point& old_point, const Vec& step, const Point& new_point) {
  auto back = m.step_back_transport_map(old_point, step, new_point);
  transport_with(*back);
}

void DenseInvFisher::zero_cross_blocks() {
  if (blocks_.size() < 2) return;
  for (const Range& a : blocks_)
    for (const Range& b : blocks_)
      if (a.offset != b.offset) hinv_.block(a.offset, b.offset, a.size, b.size).setZero();
}

Vec DenseInvFisher::solve(const Manifold&, const Point&, const Vec& g) const {
  require(g.size() == dim(), ErrorKind::InvalidInput, "inverse Fisher: gradient length mismatch");
  return hinv_ * g;
}

void DenseInvFisher::save(std::ostream& os) const {
  put_header(os, kTagDense, dim(), 0, eps_, count_);
  put<std::int64_t>(os, static_cast<std::int64_t>(blocks_.size()));
  for (const Range& r : blocks_) {
    put<std::int64_t>(os, r.offset);
    put<std::int64_t>(os, r.size);
  }
  for (Index i = 0; i < dim(); ++i)
    for (Index j = 0; j < dim(); ++j) put<double>(os, hinv_(i, j));
}

// -------------------------------------------------------------------- window

WindowInvFisher::WindowInvFisher(Index dim, Index window, double epsilon) : dim_(dim), window_(window), eps_(epsilon) {
  require(epsilon > 0.0, ErrorKind::InvalidInput, "inverse Fisher: damping must be positive");
  require(window >= 1, ErrorKind::InvalidInput, "inverse Fisher: window must be at least 1");
}

WindowInvFisher WindowInvFisher::from_parts(Index dim, Index window, double eps, long long count,
                                            std::deque<Triple> triples) {
  WindowInvFisher s(dim, window, eps);
  s.count_ = count;
  s.triples_ = std::move(triples);
  return s;
}

void WindowInvFisher::drop_oldest() {
  if (!triples_.empty()) triples_.pop_back();
}

void WindowInvFisher::add(const Manifold& m, const Point& x, const Vec& u0, const Vec& v0) {
  require(u0.size() == dim_ && v0.size() == dim_, ErrorKind::InvalidInput, "inverse Fisher: score length mismatch");
  require(u0.allFinite() && v0.allFinite(), ErrorKind::InvalidInput, "inverse Fisher: non-finite score");
  if (static_cast<Index>(triples_.size()) >= window_) drop_oldest();

  const Vec gu0 = m.metric_apply(x, u0);
  const Vec gv0 = m.metric_apply(x, v0);
  // z_s = H_s^{-1} u0 and z*_s = H_s^{-*} v0 for the old prefix of length s.
  Vec z = u0 / eps_;
  Vec zs = v0 / eps_;
  const double head_denom = 1.0 + z.dot(gv0);
  if (!(head_denom > 1e-12)) fail(ErrorKind::BrokenInvariant, "sliding window: non-positive denominator");

  for (Triple& t : triples_) {
    const double a = 1.0 + z.dot(gv0);  // 1 + <v0, z_s> = 1 + <u0, z*_s>
    if (!(a > 1e-12)) fail(ErrorKind::BrokenInvariant, "sliding window: non-positive denominator");
    const double nu_u0 = t.nu.dot(gu0);  // <nu_s, u0>
    const double mu_v0 = t.mu.dot(gv0);  // <mu_s, v0>
    // Advance z with the old triple before rewriting it.
    Vec z_next = z - t.c * nu_u0 * t.mu;
    Vec zs_next = zs - t.c * mu_v0 * t.nu;
    const double cinv = 1.0 / t.c - nu_u0 * mu_v0 / a;
    t.mu -= (mu_v0 / a) * z;
    t.nu -= (nu_u0 / a) * zs;
    if (!(cinv > 1e-12)) fail(ErrorKind::BrokenInvariant, "sliding window: non-positive denominator");
    t.c = 1.0 / cinv;
    z = std::move(z_next);
    zs = std::move(zs_next);
  }
  triples_.push_front(Triple{1.0 / head_denom, u0 / eps_, v0 / eps_});
  ++count_;
}

void WindowInvFisher::transport_with(const TangentMap& forward) {
  const bool iso = forward.isometric();
  for (Triple& t : triples_) {
    t.mu = forward.apply(t.mu);
    t.nu = iso ? forward.apply(t.nu) : forward.apply_inverse_adjoint(t.nu);
  }
}

void WindowInvFisher::transport(const Manifold& m, const Point& old_point, const Vec& step, const Point& new_point) {
  if (triples_.empty()) return;
  auto fwd = m.step_transport_map(old_point, step, new_point);
  transport_with(*fwd);
}

Vec WindowInvFisher::solve(const Manifold& m, const Point& x, const Vec& g) const {
  require(g.size() == dim_, ErrorKind::InvalidInput, "inverse Fisher: gradient length mismatch");
  Vec out = g / eps_;
  if (triples_.empty()) return out;
  const Vec gg = m.metric_apply(x, g);
  for (const Triple& t : triples_) out -= (t.c * t.nu.dot(gg)) * t.mu;
  return out;
}

double WindowInvFisher::scale() const { return static_cast<double>(std::max<std::size_t>(triples_.size(), 1)); }

void WindowInvFisher::save(std::ostream& os) const {
  put_header(os, kTagWindow, dim_, window_, eps_, count_);
  put<std::int64_t>(os, static_cast<std::int64_t>(triples_.size()));
  for (const Triple& t : triples_) {
    put<double>(os, t.c);
    for (Index i = 0; i < dim_; ++i) put<double>(os, t.mu(i));
    for (Index i = 0; i < dim_; ++i) put<double>(os, t.nu(i));
  }
}

// ---------------------------------------------------------------------- load

std::unique_ptr<InvFisherState> load_inv_fisher(std::istream& is) {
  std::array<char, 8> magic;
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) fail(ErrorKind::ParseError, "fisher checkpoint: bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) fail(ErrorKind::ParseError, "fisher checkpoint: unsupported version");
  const auto tag = get<std::uint32_t>(is);
  const auto dim = get<std::int64_t>(is);
  const auto window = get<std::int64_t>(is);
  const auto eps = get<double>(is);
  const auto count = get<std::int64_t>(is);
  if (dim < 0 || dim > (1 << 20)) fail(ErrorKind::ParseError, "fisher checkpoint: bad dimension");
  if (tag == kTagDense) {
    const auto nb = get<std::int64_t>(is);
    std::vector<Range> blocks;
    for (std::int64_t i = 0; i < nb; ++i) {
      Range r;
      r.offset = get<std::int64_t>(is);
      r.size = get<std::int64_t>(is);
      blocks.push_back(r);
    }
    Mat h(dim, dim);
    for (Index i = 0; i < dim; ++i)
      for (Index j = 0; j < dim; ++j) h(i, j) = get<double>(is);
    return std::make_unique<DenseInvFisher>(DenseInvFisher::from_parts(std::move(h), eps, count, std::move(blocks)));
  }
  if (tag == kTagWindow) {
    const auto n = get<std::int64_t>(is);
    std::deque<WindowInvFisher::Triple> triples;
    for (std::int64_t k = 0; k < n; ++k) {
      WindowInvFisher::Triple t;
      t.c = get<double>(is);
      t.mu.resize(dim);
      t.nu.resize(dim);
      for (Index i = 0; i < dim; ++i) t.mu(i) = get<double>(is);
      for (Index i = 0; i < dim; ++i) t.nu(i) = get<double>(is);
      triples.push_back(std::move(t));
    }
    return std::make_unique<WindowInvFisher>(WindowInvFisher::from_parts(dim, window, eps, count, std::move(triples)));
  }
  fail(ErrorKind::ParseError, "fisher checkpoint: unknown representation tag");
}

}  // namespace rngd
