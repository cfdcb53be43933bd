#include "rngd/harness.hpp"

#include "rngd/checks.hpp"
#include "rngd/error.hpp"
#include "rngd/io.hpp"
#include "rngd/synthetic.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace rngd {

namespace fs = std::filesystem;

namespace {

/// Reads key from j with a default, reporting type errors as ConfigError.
template <class T>
T get_or(const Json& j, const char* key, T def) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return def;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception& e) {
    fail(ErrorKind::ConfigError, std::string("field '") + key + "': " + e.what());
  }
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(ErrorKind::ConfigError, "unknown key '" + it.key() + "' in " + where);
}

Json merge(Json base, const Json& over) {
  if (!over.is_object()) return base;
  for (auto it = over.begin(); it != over.end(); ++it) base[it.key()] = it.value();
  return base;
}

StepSchedule parse_schedule(const Json& j, StepSchedule s) {
  if (j.is_null()) return s;
  check_keys(j, {"c0", "c1", "alpha"}, "schedule");
  s.c0 = get_or(j, "c0", s.c0);
  s.c1 = get_or(j, "c1", s.c1);
  s.alpha = get_or(j, "alpha", s.alpha);
  s.validate();
  return s;
}

FisherConfig parse_fisher(const Json& j, FisherConfig f) {
  if (j.is_null()) return f;
  check_keys(j, {"epsilon", "window", "window_size", "scores_per_iter", "blocks"}, "fisher");
  f.epsilon = get_or(j, "epsilon", f.epsilon);
  f.window = get_or(j, "window", f.window);
  f.window_size = get_or<Index>(j, "window_size", f.window_size);
  f.scores_per_iter = get_or(j, "scores_per_iter", f.scores_per_iter);
  if (j.contains("blocks")) f.blocks = parse_fisher_blocks(j.at("blocks").get<std::string>());
  require(f.epsilon > 0.0, ErrorKind::ConfigError, "fisher.epsilon must be positive");
  require(f.window_size >= 1, ErrorKind::ConfigError, "fisher.window_size must be >= 1");
  require(f.scores_per_iter >= 1, ErrorKind::ConfigError, "fisher.scores_per_iter must be >= 1");
  return f;
}

/// Run settings shared by the top level, methods and the reference block.
RunConfig parse_run_fields(const Json& j, RunConfig c) {
  if (j.contains("precond")) c.precond = parse_preconditioner(j.at("precond").get<std::string>());
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"), c.schedule);
  if (j.contains("fisher")) c.fisher = parse_fisher(j.at("fisher"), c.fisher);
  c.iterations = get_or<long long>(j, "iterations", c.iterations);
  c.log_every = get_or<long long>(j, "log_every", c.log_every);
  c.record_wall_time = get_or(j, "record_wall_time", c.record_wall_time);
  c.record_events = get_or(j, "record_events", c.record_events);
  c.max_halvings = get_or(j, "max_halvings", c.max_halvings);
  require(c.iterations >= 0, ErrorKind::ConfigError, "iterations must be >= 0");
  require(c.log_every >= 1, ErrorKind::ConfigError, "log_every must be >= 1");
  return c;
}

Json run_fields_json(const RunConfig& c) {
  Json j;
  j["precond"] = to_string(c.precond);
  j["schedule"] = {{"c0", c.schedule.c0}, {"c1", c.schedule.c1}, {"alpha", c.schedule.alpha}};
  j["fisher"] = {{"epsilon", c.fisher.epsilon},
                 {"window", c.fisher.window},
                 {"window_size", c.fisher.window_size},
                 {"scores_per_iter", c.fisher.scores_per_iter},
                 {"blocks", to_string(c.fisher.blocks)}};
  j["iterations"] = c.iterations;
  j["log_every"] = c.log_every;
  j["record_wall_time"] = c.record_wall_time;
  j["record_events"] = c.record_events;
  j["max_halvings"] = c.max_halvings;
  return j;
}

const std::set<std::string> kRunKeys = {"precond", "schedule", "fisher", "iterations", "log_every",
                                        "record_wall_time", "record_events", "max_halvings"};

std::set<std::string> with(std::set<std::string> s, std::initializer_list<const char*> extra) {
  for (const char* e : extra) s.insert(e);
  return s;
}

Json objective_defaults(const std::string& tag) {
  if (tag == "logistic-vb")
    return {{"geometry", "bw"}, {"prior_var", 25.0}, {"estimator", "kl"}, {"mc_batch", 100}, {"eta", kCovarianceClip}};
  if (tag == "reduced-rank") return {{"rank", 2}, {"minibatch", 128}};
  if (tag == "sylvester-flow")
    return {{"hidden", 10}, {"prior_var", 10.0}, {"mc_batch", 10}, {"value_draws", 200}, {"value_seed", 7}};
  if (tag == "gaussian-mean")
    return {{"dim", 5}, {"cov_seed", 0}, {"cov_min", 0.5}, {"cov_max", 2.0}, {"theta0_scale", 1.0}, {"batch", 1}};
  fail(ErrorKind::ConfigError, "unknown objective '" + tag + "'");
}

bool objective_needs_data(const std::string& tag) { return tag != "gaussian-mean"; }

}  // namespace

FisherBlocks default_fisher_blocks(const std::string& tag) {
  if (tag == "logistic-vb") return FisherBlocks::Natural;
  if (tag == "reduced-rank") return FisherBlocks::Factors;
  return FisherBlocks::None;
}

ExperimentSpec parse_experiment(const Json& j, const fs::path& base_dir) {
  check_keys(j,
             with(kRunKeys, {"name", "objective", "objective_params", "data", "methods", "replications", "seed",
                             "output", "reference", "comment"}),
             "experiment");
  ExperimentSpec s;
  s.base_dir = base_dir;
  s.name = get_or<std::string>(j, "name", s.name);
  if (!j.contains("objective")) fail(ErrorKind::ConfigError, "experiment: missing 'objective'");
  s.objective = j.at("objective").get<std::string>();
  s.objective_params = merge(objective_defaults(s.objective), j.value("objective_params", Json::object()));
  s.data = j.value("data", Json::object());
  s.replications = get_or(j, "replications", 1);
  require(s.replications >= 1, ErrorKind::ConfigError, "replications must be >= 1");
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  s.output = get_or<std::string>(j, "output", s.output.string());
  if (s.output.is_relative()) s.output = base_dir / s.output;

  RunConfig defaults;
  defaults.fisher.blocks = default_fisher_blocks(s.objective);
  defaults = parse_run_fields(j, defaults);

  const Json methods = j.value("methods", Json::array());
  if (!methods.is_array()) fail(ErrorKind::ConfigError, "'methods' must be an array");
  if (methods.empty()) {
    s.methods.push_back({to_string(defaults.precond), defaults, Json::object()});
  }
  std::set<std::string> labels;
  for (const Json& m : methods) {
    check_keys(m, with(kRunKeys, {"label", "objective_params"}), "method");
    MethodSpec ms;
    ms.config = parse_run_fields(m, defaults);
    ms.label = get_or<std::string>(m, "label", to_string(ms.config.precond));
    ms.objective_params = m.value("objective_params", Json::object());
    if (!labels.insert(ms.label).second) fail(ErrorKind::ConfigError, "duplicate method label '" + ms.label + "'");
    for (char c : ms.label)
      if (c == '/' || c == '\\' || c == ',' || c == '"')
        fail(ErrorKind::ConfigError, "method label '" + ms.label + "' may not contain / \\ , or quotes");
    s.methods.push_back(std::move(ms));
  }
  if (j.contains("reference") && !j.at("reference").is_null()) {
    const Json& r = j.at("reference");
    check_keys(r, with(kRunKeys, {"objective_params"}), "reference");
    RunConfig rc = defaults;
    rc.precond = Preconditioner::NGD;
    rc.record_wall_time = false;
    s.reference.config = parse_run_fields(r, rc);
    s.reference.objective_params = r.value("objective_params", Json::object());
    s.reference.enabled = true;
  }
  // Build one objective now so bad tags and parameters surface as config errors.
  for (const auto& m : s.methods) {
    const Json p = merge(s.objective_params, m.objective_params);
    if (m.config.precond == Preconditioner::ExtrinsicNGDApprox)
      require(s.objective == "reduced-rank", ErrorKind::ConfigError,
              "method '" + m.label + "': extrinsic-ngd-approx needs the reduced-rank objective");
    if (m.config.precond == Preconditioner::NGD)
      require(s.objective == "logistic-vb" || s.objective == "gaussian-mean", ErrorKind::ConfigError,
              "method '" + m.label + "': exact ngd needs a Gaussian family");
    (void)p;
  }
  return s;
}

ExperimentSpec load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return parse_experiment(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Json resolved_json(const ExperimentSpec& s) {
  Json j;
  j["name"] = s.name;
  j["objective"] = s.objective;
  j["objective_params"] = s.objective_params;
  Json data = s.data;
  if (objective_needs_data(s.objective) && !data.contains("seed") && data.contains("generator")) data["seed"] = s.seed;
  j["data"] = data;
  j["replications"] = s.replications;
  j["seed"] = s.seed;
  Json seeds = Json::array();
  for (int r = 0; r < s.replications; ++r) seeds.push_back(derive_seed(s.seed, static_cast<std::uint64_t>(r)));
  j["replication_seeds"] = seeds;
  j["output"] = s.output.string();
  Json methods = Json::array();
  for (const auto& m : s.methods) {
    Json mj = run_fields_json(m.config);
    mj["label"] = m.label;
    mj["objective_params"] = merge(s.objective_params, m.objective_params);
    methods.push_back(mj);
  }
  j["methods"] = methods;
  if (s.reference.enabled) {
    Json r = run_fields_json(s.reference.config);
    r["objective_params"] = merge(s.objective_params, s.reference.objective_params);
    j["reference"] = r;
  }
  return j;
}

Dataset load_dataset(const Json& data, const fs::path& base_dir, std::uint64_t default_seed) {
  Dataset ds;
  if (data.contains("generator")) {
    const std::string kind = data.at("generator").get<std::string>();
    const std::uint64_t seed = get_or<std::uint64_t>(data, "seed", default_seed);
    if (kind == "logistic") {
      check_keys(data, {"generator", "seed", "n", "d", "rho", "beta", "beta_scale", "standardize"}, "data");
      LogisticGenParams p;
      p.n = get_or<Index>(data, "n", p.n);
      p.d = get_or<Index>(data, "d", p.d);
      p.rho = get_or(data, "rho", p.rho);
      p.beta_scale = get_or(data, "beta_scale", p.beta_scale);
      if (data.contains("beta")) {
        const auto b = data.at("beta").get<std::vector<double>>();
        p.beta = Eigen::Map<const Vec>(b.data(), static_cast<Index>(b.size()));
      }
      ds = gen_logistic(p, seed);
    } else if (kind == "multiclass-lowrank") {
      check_keys(data,
                 {"generator", "seed", "n", "d", "classes", "rank", "signal", "intercept_scale", "standardize"},
                 "data");
      LowRankGenParams p;
      p.n = get_or<Index>(data, "n", p.n);
      p.d = get_or<Index>(data, "d", p.d);
      p.classes = get_or(data, "classes", p.classes);
      p.rank = get_or<Index>(data, "rank", p.rank);
      p.signal = get_or(data, "signal", p.signal);
      p.intercept_scale = get_or(data, "intercept_scale", p.intercept_scale);
      ds = gen_multiclass_lowrank(p, seed);
    } else {
      fail(ErrorKind::ConfigError, "unknown data generator '" + kind + "'");
    }
  } else if (data.contains("path")) {
    check_keys(data, {"path", "format", "d", "header", "label_column", "label_name", "labels", "max_rows", "standardize"},
               "data");
    fs::path path = data.at("path").get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    std::string format = get_or<std::string>(data, "format", "");
    if (format.empty()) {
      const auto ext = path.extension().string();
      format = ext == ".csv" ? "csv" : "libsvm";
    }
    if (format == "libsvm") {
      ds = parse_libsvm(path, get_or<Index>(data, "d", 0));
    } else if (format == "csv") {
      CsvOptions o;
      o.header = get_or(data, "header", false);
      o.label_column = get_or(data, "label_column", -1);
      o.label_name = get_or<std::string>(data, "label_name", "");
      ds = parse_csv(path, o);
    } else if (format == "idx") {
      if (!data.contains("labels")) fail(ErrorKind::ConfigError, "idx data needs a 'labels' path");
      fs::path labels = data.at("labels").get<std::string>();
      if (labels.is_relative()) labels = base_dir / labels;
      ds = parse_idx(path, labels, get_or<Index>(data, "max_rows", 0));
    } else {
      fail(ErrorKind::ConfigError, "unknown data format '" + format + "'");
    }
  } else {
    fail(ErrorKind::ConfigError, "data needs either 'generator' or 'path'");
  }
  if (get_or(data, "standardize", false)) standardize(ds);
  return ds;
}

std::unique_ptr<Objective> build_objective(const std::string& tag, const Json& params_in, const Dataset& data) {
  const Json params = merge(objective_defaults(tag), params_in);
  if (tag == "logistic-vb") {
    check_keys(params, {"geometry", "prior_var", "estimator", "mc_batch", "eta"}, "objective_params");
    require(data.classes == 2 && data.label_names.size() <= 2, ErrorKind::ConfigError,
            "logistic-vb needs binary labels");
    const std::string geo = params.at("geometry").get<std::string>();
    const double eta = params.at("eta").get<double>();
    std::shared_ptr<const GaussianManifoldBase> m;
    if (geo == "bw")
      m = std::make_shared<BuresWassersteinManifold>(data.d(), eta);
    else if (geo == "euclidean" || geo == "euc")
      m = std::make_shared<GaussEuclideanManifold>(data.d(), eta);
    else
      fail(ErrorKind::ConfigError, "unknown geometry '" + geo + "' (bw | euclidean)");
    return std::make_unique<LogisticVB>(data, params.at("prior_var").get<double>(), m,
                                        parse_vb_estimator(params.at("estimator").get<std::string>()),
                                        params.at("mc_batch").get<int>());
  }
  if (tag == "reduced-rank") {
    check_keys(params, {"rank", "minibatch"}, "objective_params");
    return std::make_unique<ReducedRankLogistic>(data, params.at("rank").get<Index>(),
                                                 params.at("minibatch").get<Index>());
  }
  if (tag == "sylvester-flow") {
    check_keys(params, {"hidden", "prior_var", "mc_batch", "value_draws", "value_seed"}, "objective_params");
    require(data.classes == 2 && data.label_names.size() <= 2, ErrorKind::ConfigError,
            "sylvester-flow needs binary labels");
    auto target = std::make_shared<BnnTarget>(data, params.at("hidden").get<int>(), params.at("prior_var").get<double>());
    return std::make_unique<SylvesterFlowVB>(target, params.at("mc_batch").get<int>(),
                                             params.at("value_seed").get<std::uint64_t>(),
                                             params.at("value_draws").get<int>());
  }
  if (tag == "gaussian-mean") {
    check_keys(params, {"dim", "cov_seed", "cov_min", "cov_max", "theta0_scale", "batch"}, "objective_params");
    const Index d = params.at("dim").get<Index>();
    require(d >= 1, ErrorKind::ConfigError, "gaussian-mean: dim must be >= 1");
    Rng rng = make_rng(params.at("cov_seed").get<std::uint64_t>(), 0x6a);
    const Mat cov = random_spd(rng, d, params.at("cov_min").get<double>(), params.at("cov_max").get<double>());
    const Vec theta0 = params.at("theta0_scale").get<double>() * Vec::Ones(d);
    return std::make_unique<GaussianMeanObjective>(Vec::Zero(d), cov, theta0, params.at("batch").get<int>());
  }
  fail(ErrorKind::ConfigError, "unknown objective '" + tag + "'");
}

int thread_cap() {
  if (const char* env = std::getenv("RNGD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    fail(ErrorKind::ConfigError, std::string("RNGD_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult execute_experiment(const ExperimentSpec& spec, int threads) {
  Dataset data;
  if (objective_needs_data(spec.objective)) data = load_dataset(spec.data, spec.base_dir, spec.seed);
  ExperimentResult result;

  struct Task {
    std::size_t method;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < spec.methods.size(); ++m)
    for (int r = 0; r < spec.replications; ++r) tasks.push_back({m, r});
  result.runs.resize(tasks.size());

  // Validate every method's objective up front so config errors abort cleanly.
  for (const auto& m : spec.methods) build_objective(spec.objective, merge(spec.objective_params, m.objective_params), data);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= tasks.size()) return;
      const MethodSpec& m = spec.methods[tasks[i].method];
      RunResult& out = result.runs[i];
      out.method = m.label;
      out.replication = tasks[i].rep;
      out.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(tasks[i].rep));
      out.run_id = m.label + "-r" + std::to_string(tasks[i].rep);
      RunConfig cfg = m.config;
      cfg.seed = out.seed;
      try {
        auto obj = build_objective(spec.objective, merge(spec.objective_params, m.objective_params), data);
        out.trace = run_optimizer(*obj, cfg);
      } catch (const std::exception& e) {
        out.trace.status = RunStatus::Failed;
        out.trace.message = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (spec.reference.enabled) {
    RunConfig rc = spec.reference.config;
    rc.seed = derive_seed(spec.seed, 0xfe7);
    auto obj = build_objective(spec.objective, merge(spec.objective_params, spec.reference.objective_params), data);
    result.reference_trace = run_optimizer(*obj, rc);
    if (!result.reference_trace.ok())
      fail(ErrorKind::Runtime, "reference run failed: " + result.reference_trace.message);
    result.has_reference = true;
    result.reference_value = result.reference_trace.final_objective();
  }
  return result;
}

std::string trace_csv(const RunTrace& t) {
  std::string s = t.has_ref ? "iter,objective,grad_norm,wall_ms,ref_dist\n" : "iter,objective,grad_norm,wall_ms\n";
  for (const auto& r : t.records) {
    s += std::to_string(r.iter);
    s += ',' + format_double(r.objective);
    s += ',' + format_double(r.grad_norm);
    s += ',' + format_double(r.wall_ms);
    if (t.has_ref) s += ',' + format_double(r.ref_dist);
    s += '\n';
  }
  return s;
}

std::string summary_csv(const ExperimentResult& result) {
  std::string s = "method,iter,n,mean,stderr\n";
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunTrace*>> by_method;
  for (const auto& r : result.runs) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(&r.trace);
  }
  for (const auto& name : order) {
    const auto& traces = by_method[name];
    std::map<long long, std::vector<double>> values;
    for (const RunTrace* t : traces)
      for (const auto& rec : t->records) values[rec.iter].push_back(rec.objective);
    for (const auto& [iter, v] : values) {
      if (v.size() != traces.size()) continue;
      const double n = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
      s += name + ',' + std::to_string(iter) + ',' + std::to_string(v.size()) + ',' + format_double(mean) + ',' +
           format_double(se) + '\n';
    }
  }
  return s;
}

namespace {

std::string runs_csv(const ExperimentResult& result) {
  std::string s = "run_id,method,replication,seed,status,failed_iter,final_iter,final_objective,halvings,message\n";
  for (const auto& r : result.runs) {
    std::string msg = r.trace.message;
    for (char& c : msg)
      if (c == '"' || c == '\n' || c == ',') c = ' ';
    const auto& recs = r.trace.records;
    s += r.run_id + ',' + r.method + ',' + std::to_string(r.replication) + ',' + std::to_string(r.seed) + ',' +
         to_string(r.trace.status) + ',' + std::to_string(r.trace.failed_iter) + ',' +
         (recs.empty() ? std::string("") : std::to_string(recs.back().iter)) + ',' +
         (recs.empty() ? std::string("") : format_double(recs.back().objective)) + ',' +
         std::to_string(r.trace.halvings) + ',' + msg + '\n';
  }
  return s;
}

std::string plot_script(const ExperimentSpec& spec, const ExperimentResult& result) {
  std::ostringstream g;
  g << "# gnuplot script; run from this directory: gnuplot -p plot.gp\n";
  g << "set datafile separator ','\n";
  g << "set key outside right\n";
  g << "set xlabel 'iteration'\n";
  g << "set ylabel 'objective'\n";
  g << "set title '" << spec.name << " (" << spec.objective << ")'\n";
  if (result.has_reference) g << "fstar = " << format_double(result.reference_value) << "\n";
  g << "plot \\\n";
  for (std::size_t i = 0; i < spec.methods.size(); ++i) {
    const std::string& m = spec.methods[i].label;
    g << "  'summary.csv' using 2:(strcol(1) eq '" << m << "' ? $4 : NaN) with lines lw 2 title '" << m << "'";
    g << (i + 1 < spec.methods.size() ? ", \\\n" : "\n");
  }
  g << "\n# Individual runs\n# plot ";
  for (std::size_t i = 0; i < result.runs.size(); ++i)
    g << (i ? ", " : "") << "'traces/" << result.runs[i].run_id << ".csv' using 1:2 with lines notitle";
  g << "\n";
  return g.str();
}

}  // namespace

void write_experiment(const ExperimentSpec& spec, const ExperimentResult& result) {
  fs::create_directories(spec.output / "traces");
  for (const auto& r : result.runs) {
    write_file_atomic(spec.output / "traces" / (r.run_id + ".csv"), trace_csv(r.trace));
    if (r.trace.status == RunStatus::BrokenInvariant && r.trace.fisher) {
      std::ostringstream os;
      r.trace.fisher->save(os);
      write_file_atomic(spec.output / "traces" / (r.run_id + ".fisher.bin"), os.str());
    }
  }
  write_file_atomic(spec.output / "runs.csv", runs_csv(result));
  write_file_atomic(spec.output / "summary.csv", summary_csv(result));
  write_file_atomic(spec.output / "plot.gp", plot_script(spec, result));
  Json resolved = resolved_json(spec);
  if (result.has_reference) {
    write_file_atomic(spec.output / "traces" / "reference.csv", trace_csv(result.reference_trace));
    resolved["reference_value"] = result.reference_value;
  }
  write_file_atomic(spec.output / "resolved-config.json", resolved.dump(2) + "\n");
}

ExperimentSpec expand_sweep(const Json& grid_json, const fs::path& base_dir) {
  check_keys(grid_json, {"base", "grid", "output", "replications", "comment"}, "sweep");
  if (!grid_json.contains("base")) fail(ErrorKind::ConfigError, "sweep: missing 'base'");
  Json base;
  fs::path dir = base_dir;
  if (grid_json.at("base").is_string()) {
    fs::path p = grid_json.at("base").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) fail(ErrorKind::IoError, "cannot open " + p.string());
    try {
      base = Json::parse(in);
    } catch (const std::exception& e) {
      fail(ErrorKind::ConfigError, p.string() + ": " + e.what());
    }
    dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  } else {
    base = grid_json.at("base");
  }
  if (grid_json.contains("output")) base["output"] = (base_dir / grid_json.at("output").get<std::string>()).string();
  if (grid_json.contains("replications")) base["replications"] = grid_json.at("replications");

  // Default grid: c0 log-spaced over [1e-3, 1], alpha in {0.6, 0.75, 0.9}.
  Json grid = grid_json.value("grid", Json{{"c0", {1e-3, 1e-2, 1e-1, 1.0}}, {"alpha", {0.6, 0.75, 0.9}}});
  check_keys(grid, {"c0", "c1", "alpha", "epsilon", "window_size", "scores_per_iter"}, "sweep grid");
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    auto vals = it.value().get<std::vector<double>>();
    if (vals.empty()) fail(ErrorKind::ConfigError, "sweep grid axis '" + it.key() + "' is empty");
    axes.emplace_back(it.key(), vals);
  }
  Json methods = base.value("methods", Json::array());
  if (methods.empty()) methods.push_back(Json::object());
  Json expanded = Json::array();
  for (const Json& m : methods) {
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
      Json mm = m;
      std::string label = m.value("label", base.value("precond", std::string("ngd-approx")));
      if (!m.contains("label") && m.contains("precond")) label = m.at("precond").get<std::string>();
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& key = axes[a].first;
        const double v = axes[a].second[idx[a]];
        label += "@" + key + "=" + format_double(v);
        if (key == "c0" || key == "c1" || key == "alpha") {
          Json sched = mm.value("schedule", base.value("schedule", Json::object()));
          sched[key] = v;
          mm["schedule"] = sched;
        } else {
          Json f = mm.value("fisher", base.value("fisher", Json::object()));
          if (key == "epsilon")
            f[key] = v;
          else
            f[key] = static_cast<long long>(v);
          mm["fisher"] = f;
        }
      }
      mm["label"] = label;
      expanded.push_back(mm);
      std::size_t a = 0;
      while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
      if (a == axes.size()) break;
    }
  }
  base["methods"] = expanded;
  ExperimentSpec spec = parse_experiment(base, dir);
  if (grid_json.contains("output")) spec.output = base_dir / grid_json.at("output").get<std::string>();
  return spec;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

namespace {

int report_runs(const ExperimentSpec& spec, const ExperimentResult& result) {
  int failed = 0;
  for (const auto& r : result.runs) {
    if (!r.trace.ok()) {
      ++failed;
      std::cerr << "run " << r.run_id << ": " << to_string(r.trace.status) << " at iteration " << r.trace.failed_iter
                << ": " << r.trace.message << "\n";
    }
  }
  std::cout << "wrote " << result.runs.size() << " traces to " << spec.output.string() << "\n";
  return failed ? kExitRuntime : kExitOk;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int cmd_run(const fs::path& spec_path) {
  return guarded([&] {
    const ExperimentSpec spec = load_experiment(spec_path);
    const ExperimentResult result = execute_experiment(spec, thread_cap());
    write_experiment(spec, result);
    return report_runs(spec, result);
  });
}

int cmd_sweep(const fs::path& grid_path) {
  return guarded([&] {
    std::ifstream in(grid_path);
    if (!in) fail(ErrorKind::IoError, "cannot open " + grid_path.string());
    Json g;
    try {
      g = Json::parse(in);
    } catch (const std::exception& e) {
      fail(ErrorKind::ConfigError, grid_path.string() + ": " + e.what());
    }
    const ExperimentSpec spec =
        expand_sweep(g, grid_path.has_parent_path() ? grid_path.parent_path() : fs::path("."));
    const ExperimentResult result = execute_experiment(spec, thread_cap());
    write_experiment(spec, result);

    // Rank grid points by the mean final objective of each base method.
    std::map<std::string, std::pair<double, int>> finals;
    std::vector<std::string> order;
    for (const auto& r : result.runs) {
      if (!finals.count(r.method)) order.push_back(r.method);
      auto& f = finals[r.method];
      const double v = r.trace.ok() ? r.trace.final_objective() : std::numeric_limits<double>::infinity();
      f.first += v;
      f.second += 1;
    }
    std::string best = "method,grid_point,mean_final_objective\n";
    std::map<std::string, std::pair<std::string, double>> best_by_base;
    std::vector<std::string> bases;
    for (const auto& m : order) {
      const std::string base = m.substr(0, m.find('@'));
      const double mean = finals[m].first / finals[m].second;
      if (!best_by_base.count(base)) {
        bases.push_back(base);
        best_by_base[base] = {m, mean};
      } else if (mean < best_by_base[base].second) {
        best_by_base[base] = {m, mean};
      }
    }
    for (const auto& b : bases)
      best += b + ',' + best_by_base[b].first + ',' + format_double(best_by_base[b].second) + '\n';
    write_file_atomic(spec.output / "best.csv", best);
    std::cout << best;
    return report_runs(spec, result);
  });
}

int cmd_check(const std::string& suite, const CheckOptions& options) {
  return guarded([&] {
    const auto results = run_checks(suite, options);
    bool all = true;
    for (const auto& r : results) {
      std::cout << format_check(r) << "\n";
      all = all && r.passed;
    }
    return all ? kExitOk : kExitCheckFailed;
  });
}

int cmd_gen_data(const std::string& kind, const std::vector<std::string>& params, const fs::path& out) {
  return guarded([&] {
    Json j;
    j["generator"] = kind;
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) fail(ErrorKind::ConfigError, "expected key=value, got '" + p + "'");
      const std::string key = p.substr(0, eq), val = p.substr(eq + 1);
      try {
        j[key] = Json::parse(val);
      } catch (const std::exception&) {
        j[key] = val;
      }
    }
    const Dataset ds = load_dataset(j, ".", 0);
    std::ostringstream os;
    if (out.extension() == ".csv")
      write_csv(os, ds, true);
    else
      write_libsvm(os, ds);
    write_file_atomic(out, os.str());
    std::cout << "wrote " << ds.n() << " rows x " << ds.d() << " features to " << out.string() << "\n";
    return kExitOk;
  });
}

}  // namespace rngd
