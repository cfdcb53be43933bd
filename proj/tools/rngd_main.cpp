#include "rngd/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"rngd: Riemannian natural-gradient experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "Run every method and replication of an experiment spec");
  run->add_option("spec", spec_path, "experiment JSON")->required();

  std::string grid_path;
  auto* sweep = app.add_subcommand("sweep", "Grid search over step-size and Fisher settings");
  sweep->add_option("grid", grid_path, "sweep JSON")->required();

  std::string suite = "fast";
  rngd::CheckOptions check_opts;
  std::string fixtures, scratch;
  auto* check = app.add_subcommand("check", "Run built-in numerical checks");
  check->add_option("suite", suite, "fast | all | a single check id")->capture_default_str();
  check->add_option("--fixtures", fixtures, "directory of parser fixtures");
  check->add_option("--scratch", scratch, "directory for temporary outputs");
  check->add_flag("-v,--verbose", check_opts.verbose, "progress on stderr");
  bool list_checks = false;
  check->add_flag("--list", list_checks, "print suite names and exit");

  std::string kind, out_path;
  std::vector<std::string> params;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset (LIBSVM, or CSV for *.csv)");
  gen->add_option("kind", kind, "logistic | multiclass-lowrank")->required();
  gen->add_option("params", params, "key=value generator parameters");
  gen->add_option("-o,--output", out_path, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? rngd::kExitOk : rngd::kExitConfig;
  }

  if (*run) return rngd::cmd_run(spec_path);
  if (*sweep) return rngd::cmd_sweep(grid_path);
  if (*check) {
    if (list_checks) {
      for (const auto& s : rngd::check_suites()) std::cout << s << "\n";
      return rngd::kExitOk;
    }
    check_opts.fixtures_dir = fixtures;
    check_opts.scratch_dir = scratch;
    return rngd::cmd_check(suite, check_opts);
  }
  if (*gen) return rngd::cmd_gen_data(kind, params, out_path);
  return rngd::kExitConfig;
}
