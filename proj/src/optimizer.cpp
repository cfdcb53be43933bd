#include "rngd/optimizer.hpp"

#include "rngd/error.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace rngd {

void StepSchedule::validate() const {
  require(c0 > 0.0 && c1 > 0.0, ErrorKind::ConfigError, "schedule: c0 and c1 must be positive");
  require(alpha > 0.5 && alpha < 1.0, ErrorKind::ConfigError, "schedule: alpha must lie in (1/2, 1)");
}

double step_size(const StepSchedule& schedule, long long s) {
  require(s >= 0, ErrorKind::InvalidInput, "step_size: negative iteration");
  return schedule.c0 / std::pow(schedule.c1 + static_cast<double>(s), schedule.alpha);
}

Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "gd" || s == "GD") return Preconditioner::GD;
  if (s == "ngd" || s == "NGD") return Preconditioner::NGD;
  if (s == "ngd-approx" || s == "NGD-Approx") return Preconditioner::NGDApprox;
  if (s == "extrinsic-ngd-approx" || s == "Extrinsic-NGD-Approx") return Preconditioner::ExtrinsicNGDApprox;
  fail(ErrorKind::ConfigError, "unknown preconditioner '" + s + "'");
}

std::string to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::GD: return "gd";
    case Preconditioner::NGD: return "ngd";
    case Preconditioner::NGDApprox: return "ngd-approx";
    case Preconditioner::ExtrinsicNGDApprox: return "extrinsic-ngd-approx";
  }
  return "?";
}

FisherBlocks parse_fisher_blocks(const std::string& s) {
  if (s == "none") return FisherBlocks::None;
  if (s == "factors") return FisherBlocks::Factors;
  if (s == "natural") return FisherBlocks::Natural;
  fail(ErrorKind::ConfigError, "unknown fisher block mode '" + s + "'");
}

std::string to_string(FisherBlocks b) {
  switch (b) {
    case FisherBlocks::None: return "none";
    case FisherBlocks::Factors: return "factors";
    case FisherBlocks::Natural: return "natural";
  }
  return "?";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Transport: return "transport";
    case EventKind::ScoreUpdate: return "score-update";
    case EventKind::Gradient: return "gradient";
    case EventKind::Step: return "step";
    case EventKind::Halving: return "halving";
  }
  return "?";
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NonFinite: return "non-finite";
    case RunStatus::StepFailure: return "step-failure";
    case RunStatus::BrokenInvariant: return "broken-invariant";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

std::vector<Range> fisher_block_ranges(const Manifold& m, FisherBlocks mode) {
  switch (mode) {
    case FisherBlocks::None:
      return {};
    case FisherBlocks::Natural:
      return m.natural_blocks();
    case FisherBlocks::Factors: {
      const auto* prod = dynamic_cast<const ProductManifold*>(&m);
      if (!prod) return {};
      std::vector<Range> out;
      for (std::size_t i = 0; i < prod->num_factors(); ++i) out.push_back(prod->coord_range(i));
      return out;
    }
  }
  return {};
}

std::unique_ptr<InvFisherState> make_fisher_state(const Manifold& m, const FisherConfig& cfg) {
  require(cfg.epsilon > 0.0, ErrorKind::ConfigError, "fisher: epsilon must be positive");
  require(cfg.scores_per_iter >= 1, ErrorKind::ConfigError, "fisher: scores_per_iter must be >= 1");
  if (cfg.window) {
    require(cfg.window_size >= 1, ErrorKind::ConfigError, "fisher: window must be >= 1");
    return std::make_unique<WindowInvFisher>(m.coord_dim(), cfg.window_size, cfg.epsilon);
  }
  return std::make_unique<DenseInvFisher>(m.coord_dim(), cfg.epsilon, fisher_block_ranges(m, cfg.blocks));
}

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

bool halvable(ErrorKind k) {
  return k == ErrorKind::ExpDomain || k == ErrorKind::RetractFail || k == ErrorKind::RankCollapse;
}

struct Aborted {};

/// Shared loop: the method callback returns the (unscaled) descent direction
/// at x; the driver scales, retracts with step halving and records traces.
class Driver {
 public:
  using Method = std::function<Vec(long long s, const Point& x, Rng& rng)>;
  using Transport = std::function<void(long long s, const Point& old_x, const Vec& step, const Point& new_x)>;

  Driver(Objective& obj, const RunConfig& cfg) : obj_(obj), cfg_(cfg), m_(obj.manifold()) {
    cfg.schedule.validate();
    require(cfg.iterations >= 0, ErrorKind::ConfigError, "iterations must be >= 0");
    require(cfg.log_every >= 1, ErrorKind::ConfigError, "log_every must be >= 1");
    require(cfg.max_halvings >= 0, ErrorKind::ConfigError, "max_halvings must be >= 0");
    trace_.has_ref = obj.has_reference();
  }

  void event(long long s, EventKind k) {
    if (cfg_.record_events) trace_.events.push_back({s, k});
  }

  RunTrace run(const Method& method, const Transport& transport = nullptr) {
    Rng rng = make_rng(cfg_.seed, 1);
    start_ = std::chrono::steady_clock::now();
    Point x = obj_.initial_point();
    long long s = 0;
    try {
      record(0, x, 0.0);
      Point prev;
      Vec prev_step;
      for (; s < cfg_.iterations; ++s) {
        if (transport && s > 0) {
          transport(s, prev, prev_step, x);
          event(s, EventKind::Transport);
        }
        const Vec dir = method(s, x, rng);
        if (!all_finite(dir)) abort(s, RunStatus::NonFinite, "non-finite update direction");
        const double gnorm = m_.norm(x, dir);
        Vec step = -step_size(cfg_.schedule, s) * dir;
        Point next;
        for (int h = 0;; ++h) {
          try {
            next = m_.retract(x, step);
            break;
          } catch (const Error& e) {
            if (!halvable(e.kind())) throw;
            if (h >= cfg_.max_halvings)
              abort(s, RunStatus::StepFailure, std::string("retraction failed after step halving: ") + e.what());
            step *= 0.5;
            ++trace_.halvings;
            event(s, EventKind::Halving);
          }
        }
        event(s, EventKind::Step);
        prev = std::move(x);
        prev_step = std::move(step);
        x = std::move(next);
        if ((s + 1) % cfg_.log_every == 0 || s + 1 == cfg_.iterations) record(s + 1, x, gnorm);
      }
    } catch (const Aborted&) {
      x = Point();
    } catch (const Error& e) {
      trace_.status = e.kind() == ErrorKind::BrokenInvariant ? RunStatus::BrokenInvariant : RunStatus::Failed;
      trace_.message = e.what();
      trace_.failed_iter = s;
    } catch (const std::exception& e) {
      trace_.status = RunStatus::Failed;
      trace_.message = e.what();
      trace_.failed_iter = s;
    }
    trace_.final_point = x;
    return std::move(trace_);
  }

  RunTrace& trace() { return trace_; }

  [[noreturn]] void abort(long long s, RunStatus status, const std::string& msg) {
    trace_.status = status;
    trace_.message = msg;
    trace_.failed_iter = s;
    throw Aborted{};
  }

 private:
  void record(long long iter, const Point& x, double gnorm) {
    TraceRecord r;
    r.iter = iter;
    r.objective = obj_.value(x);
    r.grad_norm = gnorm;
    if (cfg_.record_wall_time)
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    if (trace_.has_ref) r.ref_dist = obj_.reference_distance(x);
    trace_.records.push_back(r);
    if (!std::isfinite(r.objective)) abort(iter, RunStatus::NonFinite, "non-finite objective");
  }

  Objective& obj_;
  const RunConfig& cfg_;
  const Manifold& m_;
  RunTrace trace_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

RunTrace run_rsgd(Objective& objective, const RunConfig& config) {
  Driver drv(objective, config);
  return drv.run([&](long long s, const Point& x, Rng& rng) {
    objective.prepare(x, rng);
    Vec g = objective.gradient(x, rng);
    drv.event(s, EventKind::Gradient);
    return g;
  });
}

RunTrace run_exact_ngd_gaussian(Objective& objective, const RunConfig& config) {
  require(objective.has_exact_natural_gradient(), ErrorKind::ConfigError,
          objective.name() + ": exact NGD needs a closed-form Fisher operator");
  Driver drv(objective, config);
  return drv.run([&](long long s, const Point& x, Rng& rng) {
    objective.prepare(x, rng);
    Vec g = objective.natural_gradient(x, rng);
    drv.event(s, EventKind::Gradient);
    return g;
  });
}

RunTrace run_if_rngd(Objective& objective, const RunConfig& config) {
  const Manifold& m = objective.manifold();
  std::shared_ptr<InvFisherState> state = make_fisher_state(m, config.fisher);
  Driver drv(objective, config);
  auto transport = [&](long long, const Point& old_x, const Vec& step, const Point& new_x) {
    state->transport(m, old_x, step, new_x);
  };
  RunTrace t = drv.run(
      [&](long long s, const Point& x, Rng& rng) {
        objective.prepare(x, rng);
        for (int k = 0; k < config.fisher.scores_per_iter; ++k) {
          const Vec phi = objective.score(x, rng);
          if (!all_finite(phi)) drv.abort(s, RunStatus::NonFinite, "non-finite score");
          state->update(m, x, phi);
        }
        drv.event(s, EventKind::ScoreUpdate);
        const Vec g = objective.gradient(x, rng);
        drv.event(s, EventKind::Gradient);
        if (!all_finite(g)) drv.abort(s, RunStatus::NonFinite, "non-finite gradient");
        return state->apply(m, x, g);
      },
      transport);
  t.fisher = state;
  return t;
}

RunTrace run_extrinsic_ifngd(ReducedRankLogistic& problem, const RunConfig& config) {
  const Index nb = problem.data().d() * (problem.classes() - 1);
  const Index na = problem.classes() - 1;
  EuclideanManifold ambient(nb + na);
  const Point anchor;
  std::shared_ptr<InvFisherState> state;
  if (config.fisher.window) {
    state = make_fisher_state(ambient, config.fisher);
  } else {
    std::vector<Range> blocks;
    if (config.fisher.blocks != FisherBlocks::None) blocks = {Range{0, nb}, Range{nb, na}};
    require(config.fisher.epsilon > 0.0, ErrorKind::ConfigError, "fisher: epsilon must be positive");
    state = std::make_shared<DenseInvFisher>(nb + na, config.fisher.epsilon, blocks);
  }
  Driver drv(problem, config);
  RunTrace t = drv.run([&](long long s, const Point& x, Rng& rng) {
    problem.prepare(x, rng);
    for (int k = 0; k < config.fisher.scores_per_iter; ++k) state->update(ambient, anchor, problem.next_ambient_score(x, rng));
    drv.event(s, EventKind::ScoreUpdate);
    const Vec g = problem.ambient_gradient(x);
    drv.event(s, EventKind::Gradient);
    return problem.project_ambient(x, state->apply(ambient, anchor, g));
  });
  t.fisher = state;
  return t;
}

RunTrace run_optimizer(Objective& objective, const RunConfig& config) {
  switch (config.precond) {
    case Preconditioner::GD: return run_rsgd(objective, config);
    case Preconditioner::NGD: return run_exact_ngd_gaussian(objective, config);
    case Preconditioner::NGDApprox: return run_if_rngd(objective, config);
    case Preconditioner::ExtrinsicNGDApprox: {
      auto* rr = dynamic_cast<ReducedRankLogistic*>(&objective);
      require(rr != nullptr, ErrorKind::ConfigError, "extrinsic-ngd-approx needs the reduced-rank objective");
      return run_extrinsic_ifngd(*rr, config);
    }
  }
  fail(ErrorKind::ConfigError, "unknown preconditioner");
}

}  // namespace rngd
