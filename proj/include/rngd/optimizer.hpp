#pragma once

#include "rngd/fisher_state.hpp"
#include "rngd/objectives.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rngd {

/// tau_s = c0 / (c1 + s)^alpha.
struct StepSchedule {
  double c0 = 1.0;
  double c1 = 100.0;
  double alpha = 0.75;
  void validate() const;
};

double step_size(const StepSchedule& schedule, long long s);

enum class Preconditioner { GD, NGD, NGDApprox, ExtrinsicNGDApprox };
Preconditioner parse_preconditioner(const std::string& s);
std::string to_string(Preconditioner p);

/// How the dense inverse-Fisher state is partitioned.
enum class FisherBlocks {
  None,     ///< one dense operator on the whole chart
  Factors,  ///< one block per product factor
  Natural,  ///< the manifold's natural_blocks()
};
FisherBlocks parse_fisher_blocks(const std::string& s);
std::string to_string(FisherBlocks b);

struct FisherConfig {
  double epsilon = 1.0;
  bool window = false;
  Index window_size = 200;
  int scores_per_iter = 1;
  FisherBlocks blocks = FisherBlocks::None;
};

struct RunConfig {
  Preconditioner precond = Preconditioner::NGDApprox;
  StepSchedule schedule;
  long long iterations = 1000;
  FisherConfig fisher;
  std::uint64_t seed = 0;
  /// Trace cadence; iteration 0 and the last iteration are always recorded.
  long long log_every = 10;
  /// When false the wall_ms column is written as 0 so traces are reproducible
  /// byte for byte.
  bool record_wall_time = true;
  bool record_events = false;
  int max_halvings = 30;
};

struct TraceRecord {
  long long iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  double ref_dist = 0.0;
};

enum class EventKind { Transport, ScoreUpdate, Gradient, Step, Halving };
std::string to_string(EventKind k);

struct TraceEvent {
  long long iter;
  EventKind kind;
};

enum class RunStatus { Ok, NonFinite, StepFailure, BrokenInvariant, Failed };
std::string to_string(RunStatus s);

struct RunTrace {
  std::vector<TraceRecord> records;
  std::vector<TraceEvent> events;
  bool has_ref = false;
  RunStatus status = RunStatus::Ok;
  std::string message;
  long long failed_iter = -1;
  long long halvings = 0;
  Point final_point;
  /// Inverse-Fisher state at exit (null for methods without one); kept for
  /// diagnostic dumps when a run aborts.
  std::shared_ptr<InvFisherState> fisher;

  bool ok() const { return status == RunStatus::Ok; }
  double final_objective() const { return records.empty() ? 0.0 : records.back().objective; }
};

/// Partition of the chart of m for the given mode.
std::vector<Range> fisher_block_ranges(const Manifold& m, FisherBlocks mode);
std::unique_ptr<InvFisherState> make_fisher_state(const Manifold& m, const FisherConfig& cfg);

RunTrace run_rsgd(Objective& objective, const RunConfig& config);
RunTrace run_exact_ngd_gaussian(Objective& objective, const RunConfig& config);
/// Transport state, sample scores and update, stochastic gradient, step, retract.
RunTrace run_if_rngd(Objective& objective, const RunConfig& config);
/// Ambient-space inverse Fisher from raw Euclidean scores; the preconditioned
/// Euclidean gradient is projected before the retraction.
RunTrace run_extrinsic_ifngd(ReducedRankLogistic& problem, const RunConfig& config);

/// Dispatches on config.precond.
RunTrace run_optimizer(Objective& objective, const RunConfig& config);

}  // namespace rngd
