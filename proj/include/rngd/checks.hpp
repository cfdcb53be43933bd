#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rngd {

/// One pass/fail line of the acceptance suite.
struct CheckResult {
  std::string id;    ///< short stable name, e.g. "sherman-morrison"
  std::string what;  ///< measured quantity and its bound
  bool passed = false;
  double value = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct CheckOptions {
  /// Extra parser fixtures (*.libsvm, *.csv); skipped when empty or missing.
  std::filesystem::path fixtures_dir;
  /// Where the reproducibility check writes its two runs.
  std::filesystem::path scratch_dir;
  /// Progress messages go to stderr when set.
  bool verbose = false;
};

/// Names accepted by run_checks: each check id, "fast" (everything that
/// runs in seconds) and "all".
std::vector<std::string> check_suites();
std::vector<CheckResult> run_checks(const std::string& suite, const CheckOptions& options);
std::string format_check(const CheckResult& r);

}  // namespace rngd
