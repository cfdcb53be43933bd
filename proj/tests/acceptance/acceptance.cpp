// Acceptance run: one line per criterion, tolerances fixed in the checks.
#include "rngd/checks.hpp"

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  rngd::CheckOptions opt;
  if (argc > 1) opt.fixtures_dir = argv[1];
  if (argc > 2) opt.scratch_dir = argv[2];
  opt.verbose = true;
  const std::string suite = argc > 3 ? argv[3] : "all";
  const auto results = rngd::run_checks(suite, opt);
  int failed = 0, n = 0;
  for (const auto& r : results) {
    std::cout << "[" << ++n << "] " << rngd::format_check(r) << std::endl;
    if (!r.passed) ++failed;
  }
  std::cout << (failed ? "FAILED " : "OK ") << results.size() - failed << "/" << results.size() << std::endl;
  return failed ? 1 : 0;
}
