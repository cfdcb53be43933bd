#pragma once

#include "rngd/checks.hpp"
#include "rngd/dataset.hpp"
#include "rngd/error.hpp"
#include "rngd/objectives.hpp"
#include "rngd/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace rngd {

using Json = nlohmann::ordered_json;

struct MethodSpec {
  std::string label;
  RunConfig config;
  /// Merged over the experiment's objective parameters for this method.
  Json objective_params = Json::object();
};

/// Optional exact reference run (logistic VB): its final objective is
/// reported so traces can be read as gaps.
struct ReferenceSpec {
  bool enabled = false;
  RunConfig config;
  Json objective_params = Json::object();
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::string objective;
  Json objective_params = Json::object();
  Json data = Json::object();
  std::vector<MethodSpec> methods;
  int replications = 1;
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  ReferenceSpec reference;
  /// Directory relative paths in the experiment file are resolved against.
  std::filesystem::path base_dir = ".";
};

ExperimentSpec parse_experiment(const Json& j, const std::filesystem::path& base_dir = ".");
ExperimentSpec load_experiment(const std::filesystem::path& path);
/// The experiment with every default filled in.
Json resolved_json(const ExperimentSpec& spec);

Dataset load_dataset(const Json& data, const std::filesystem::path& base_dir, std::uint64_t default_seed);
/// Objective for a tag; params missing from the JSON take their defaults.
std::unique_ptr<Objective> build_objective(const std::string& tag, const Json& params, const Dataset& data);
/// Fisher block layout used when a method does not set one.
FisherBlocks default_fisher_blocks(const std::string& objective_tag);

struct RunResult {
  std::string run_id;
  std::string method;
  int replication = 0;
  std::uint64_t seed = 0;
  RunTrace trace;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  bool has_reference = false;
  double reference_value = 0.0;
  RunTrace reference_trace;
};

/// Worker count: RNGD_THREADS when set (>= 1), otherwise the hardware count.
int thread_cap();

ExperimentResult execute_experiment(const ExperimentSpec& spec, int threads);
/// Writes traces/<run-id>.csv, runs.csv, summary.csv, plot.gp and
/// resolved-config.json under spec.output.
void write_experiment(const ExperimentSpec& spec, const ExperimentResult& result);

std::string trace_csv(const RunTrace& trace);
/// Rows "method,iter,n,mean,stderr" over iterations every replication reached.
std::string summary_csv(const ExperimentResult& result);

/// Expands a sweep grid into one experiment whose methods are the base
/// methods crossed with the grid points.
ExperimentSpec expand_sweep(const Json& grid, const std::filesystem::path& base_dir);

// CLI entry points; they return process exit codes.
int cmd_run(const std::filesystem::path& spec_path);
int cmd_sweep(const std::filesystem::path& grid_path);
int cmd_check(const std::string& suite, const CheckOptions& options);
int cmd_gen_data(const std::string& kind, const std::vector<std::string>& params, const std::filesystem::path& out);

enum ExitCode { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitRuntime = 3 };
int exit_code_for(const Error& e);

}  // namespace rngd
