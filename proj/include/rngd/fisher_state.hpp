#pragma once

#include "rngd/manifold.hpp"

#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rngd {

/// Approximate inverse Fisher operator H^{-1} on the current tangent space,
/// with H = eps I + sum_k u_k v_k^T G. The stored operator is un-normalized;
/// apply() multiplies by the number of incorporated scores.
class InvFisherState {
 public:
  virtual ~InvFisherState() = default;
  virtual std::string kind() const = 0;
  virtual Index dim() const = 0;
  virtual double epsilon() const = 0;
  /// Number of score vectors incorporated so far.
  virtual long long count() const = 0;

  /// Rank-one update with the score phi at x (u = v = phi).
  virtual void update(const Manifold& m, const Point& x, const Vec& phi) = 0;
  /// Moves the state from T_old to T_new, where new = retract(old, step).
  virtual void transport(const Manifold& m, const Point& old_point, const Vec& step, const Point& new_point) = 0;
  /// H^{-1} g.
  virtual Vec solve(const Manifold& m, const Point& x, const Vec& g) const = 0;
  /// Normalization applied by apply(): the number of scores represented.
  virtual double scale() const = 0;
  /// scale() * H^{-1} g, the preconditioned direction.
  Vec apply(const Manifold& m, const Point& x, const Vec& g) const { return scale() * solve(m, x, g); }
  /// Dense coordinate matrix of H^{-1}.
  virtual Mat matrix(const Manifold& m, const Point& x) const;

  virtual void save(std::ostream& os) const = 0;
  virtual std::unique_ptr<InvFisherState> clone() const = 0;
};

/// Loads either representation from a checkpoint stream.
std::unique_ptr<InvFisherState> load_inv_fisher(std::istream& is);

class DenseInvFisher final : public InvFisherState {
 public:
  /// blocks: optional partition of the chart; when non-empty the operator is
  /// kept block-diagonal (updates act per block, transports drop cross terms).
  DenseInvFisher(Index dim, double epsilon, std::vector<Range> blocks = {});

  std::string kind() const override { return "dense"; }
  Index dim() const override { return hinv_.rows(); }
  double epsilon() const override { return eps_; }
  long long count() const override { return count_; }
  void update(const Manifold& m, const Point& x, const Vec& phi) override;
  void transport(const Manifold& m, const Point& old_point, const Vec& step, const Point& new_point) override;
  /// Congruence with a transport from the new tangent space back to the old one.
  void transport_with(const TangentMap& back);
  Vec solve(const Manifold& m, const Point& x, const Vec& g) const override;
  double scale() const override { return static_cast<double>(std::max<long long>(count_, 1)); }
  Mat matrix(const Manifold&, const Point&) const override { return hinv_; }
  void save(std::ostream& os) const override;
  std::unique_ptr<InvFisherState> clone() const override { return std::make_unique<DenseInvFisher>(*this); }

  const Mat& hinv() const { return hinv_; }
  const std::vector<Range>& blocks() const { return blocks_; }
  static DenseInvFisher from_parts(Mat hinv, double eps, long long count, std::vector<Range> blocks);

 private:
  void zero_cross_blocks();

  Mat hinv_;
  double eps_;
  long long count_ = 0;
  std::vector<Range> blocks_;
};

/// Exact inverse of eps I + sum of the K most recent u v^T G terms, stored as
/// newest-first triples (c, mu, nu) with H^{-1} = I/eps - sum c mu nu^T G.
class WindowInvFisher final : public InvFisherState {
 public:
  struct Triple {
    double c;
    Vec mu;
    Vec nu;
  };

  WindowInvFisher(Index dim, Index window, double epsilon);

  std::string kind() const override { return "window"; }
  Index dim() const override { return dim_; }
  double epsilon() const override { return eps_; }
  long long count() const override { return count_; }
  Index window() const { return window_; }
  std::size_t size() const { return triples_.size(); }
  const std::deque<Triple>& triples() const { return triples_; }

  void update(const Manifold& m, const Point& x, const Vec& phi) override { add(m, x, phi, phi); }
  /// Adds u v^T G at the head and drops the oldest term when full.
  void add(const Manifold& m, const Point& x, const Vec& u, const Vec& v);
  /// Removes the oldest term.
  void drop_oldest();
  void transport(const Manifold& m, const Point& old_point, const Vec& step, const Point& new_point) override;
  /// (mu, nu) -> (T mu, T^{-*} nu); c unchanged.
  void transport_with(const TangentMap& forward);
  Vec solve(const Manifold& m, const Point& x, const Vec& g) const override;
  double scale() const override;
  void save(std::ostream& os) const override;
  std::unique_ptr<InvFisherState> clone() const override { return std::make_unique<WindowInvFisher>(*this); }

  static WindowInvFisher from_parts(Index dim, Index window, double eps, long long count,
                                    std::deque<Triple> triples);

 private:
  Index dim_;
  Index window_;
  double eps_;
  long long count_ = 0;
  std::deque<Triple> triples_;
};

}  // namespace rngd
