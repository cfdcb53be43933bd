#include "rngd/error.hpp"
#include "rngd/harness.hpp"
#include "rngd/io.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace rngd;
namespace fs = std::filesystem;

namespace {

Json minimal() {
  return Json::parse(R"({
    "objective": "logistic-vb",
    "data": {"generator": "logistic", "n": 60, "d": 3, "seed": 1},
    "iterations": 40,
    "log_every": 10,
    "record_wall_time": false
  })");
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / "rngd-harness-test" / name;
  fs::remove_all(p);
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Runtime;
}

}  // namespace

TEST(Harness, DefaultsResolve) {
  const ExperimentSpec s = parse_experiment(minimal());
  ASSERT_EQ(s.methods.size(), 1u);
  EXPECT_EQ(s.methods[0].config.precond, Preconditioner::NGDApprox);
  EXPECT_EQ(s.methods[0].config.fisher.blocks, FisherBlocks::Natural);
  EXPECT_EQ(s.objective_params.at("geometry"), "bw");
  const Json r = resolved_json(s);
  EXPECT_EQ(r.at("methods").at(0).at("schedule").at("c1"), 100.0);
  EXPECT_EQ(r.at("replication_seeds").size(), 1u);
}

TEST(Harness, ConfigErrors) {
  auto with = [](const char* key, Json v) {
    Json j = minimal();
    j[key] = std::move(v);
    return j;
  };
  EXPECT_EQ(kind_of([&] { parse_experiment(with("objective", "nope")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { parse_experiment(with("bogus", 1)); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { parse_experiment(with("precond", "newton")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { parse_experiment(with("schedule", Json{{"alpha", 0.4}})); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { parse_experiment(with("precond", "extrinsic-ngd-approx")); }), ErrorKind::ConfigError);
  Json bad_data = minimal();
  bad_data["data"] = Json{{"generator", "mystery"}};
  EXPECT_EQ(kind_of([&] { execute_experiment(parse_experiment(bad_data), 1); }), ErrorKind::ConfigError);
  Json dup = minimal();
  dup["methods"] = Json::parse(R"([{"label": "a"}, {"label": "a"}])");
  EXPECT_EQ(kind_of([&] { parse_experiment(dup); }), ErrorKind::ConfigError);
}

TEST(Harness, MinimalRunWritesSchemaValidCsv) {
  ExperimentSpec s = parse_experiment(minimal());
  s.output = scratch("minimal");
  const ExperimentResult r = execute_experiment(s, 1);
  write_experiment(s, r);
  const auto trace = lines(s.output / "traces" / (r.runs[0].run_id + ".csv"));
  ASSERT_EQ(trace.size(), 6u);
  EXPECT_EQ(trace[0], "iter,objective,grad_norm,wall_ms");
  EXPECT_EQ(trace[1].substr(0, 2), "0,");
  EXPECT_EQ(trace[5].substr(0, 3), "40,");
  EXPECT_TRUE(fs::exists(s.output / "summary.csv"));
  EXPECT_TRUE(fs::exists(s.output / "plot.gp"));
  EXPECT_TRUE(fs::exists(s.output / "resolved-config.json"));
  EXPECT_EQ(lines(s.output / "summary.csv")[0], "method,iter,n,mean,stderr");
}

TEST(Harness, SweepTwoMethodsTwoSeeds) {
  Json grid;
  grid["base"] = minimal();
  grid["base"]["methods"] = Json::parse(R"([{"label": "approx"}, {"label": "gd", "precond": "gd"}])");
  grid["grid"] = Json{{"c0", {0.5}}};
  grid["replications"] = 2;
  grid["output"] = scratch("sweep").string();
  ExperimentSpec s = expand_sweep(grid, ".");
  ASSERT_EQ(s.methods.size(), 2u);
  EXPECT_EQ(s.methods[0].config.schedule.c0, 0.5);
  const ExperimentResult r = execute_experiment(s, 2);
  write_experiment(s, r);
  int traces = 0;
  for (const auto& e : fs::directory_iterator(s.output / "traces"))
    if (e.path().extension() == ".csv") ++traces;
  EXPECT_EQ(traces, 4);
  EXPECT_TRUE(fs::exists(s.output / "summary.csv"));
}

TEST(Harness, DefaultSweepGrid) {
  Json grid;
  grid["base"] = minimal();
  const ExperimentSpec s = expand_sweep(grid, ".");
  EXPECT_EQ(s.methods.size(), 12u);
}

TEST(Harness, SummaryUsesMatchingIterationsOnly) {
  ExperimentResult r;
  for (int k = 0; k < 2; ++k) {
    RunResult run;
    run.method = "m";
    run.run_id = "m-r" + std::to_string(k);
    run.trace.records.push_back({0, 1.0 + k, 0, 0, 0});
    run.trace.records.push_back({10, 3.0 + 2 * k, 0, 0, 0});
    if (k == 0) run.trace.records.push_back({20, 9.0, 0, 0, 0});
    r.runs.push_back(run);
  }
  EXPECT_EQ(summary_csv(r), "method,iter,n,mean,stderr\nm,0,2,1.5,0.5\nm,10,2,4,1\n");
}

TEST(Harness, SeedsArePairedAcrossMethods) {
  Json j = minimal();
  j["replications"] = 2;
  j["methods"] = Json::parse(R"([{"label": "a"}, {"label": "b", "precond": "gd"}])");
  const ExperimentResult r = execute_experiment(parse_experiment(j), 1);
  ASSERT_EQ(r.runs.size(), 4u);
  EXPECT_EQ(r.runs[0].seed, r.runs[2].seed);
  EXPECT_NE(r.runs[0].seed, r.runs[1].seed);
}

TEST(Harness, ThreadCapFromEnvironment) {
  setenv("RNGD_THREADS", "3", 1);
  EXPECT_EQ(thread_cap(), 3);
  setenv("RNGD_THREADS", "zero", 1);
  EXPECT_THROW(thread_cap(), Error);
  unsetenv("RNGD_THREADS");
  EXPECT_GE(thread_cap(), 1);
}

TEST(Harness, LoadsLibsvmRelativeToSpec) {
  const Dataset ds = load_dataset(Json{{"path", "sample100.libsvm"}}, RNGD_FIXTURES_DIR, 0);
  EXPECT_EQ(ds.n(), 100);
}

TEST(Harness, GoldenReducedRankTrace) {
  // First-run golden trace of a small extrinsic run; compared to 1e-9 relative
  // so that compiler flags cannot break it.
  const fs::path dir = RNGD_FIXTURES_DIR;
  const ExperimentSpec s = load_experiment(dir / "golden_extrinsic.json");
  const ExperimentResult r = execute_experiment(s, 1);
  const std::string got = trace_csv(r.runs.at(0).trace);
  std::ifstream in(dir / "golden_extrinsic.csv");
  std::istringstream gs(got);
  std::string want_line, got_line;
  int n = 0;
  while (std::getline(in, want_line)) {
    ASSERT_TRUE(std::getline(gs, got_line));
    if (n++ == 0) {
      EXPECT_EQ(got_line, want_line);
      continue;
    }
    std::istringstream a(want_line), b(got_line);
    for (std::string x, y; std::getline(a, x, ',') && std::getline(b, y, ',');)
      EXPECT_NEAR(std::stod(y), std::stod(x), 1e-9 * std::max(1.0, std::abs(std::stod(x)))) << "line " << n;
  }
  EXPECT_GT(n, 5);
}
