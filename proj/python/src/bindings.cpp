#include "rngd/bures_wasserstein.hpp"
#include "rngd/checks.hpp"
#include "rngd/harness.hpp"
#include "rngd/io.hpp"
#include "rngd/optimizer.hpp"
#include "rngd/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace rngd;

namespace {

py::dict dataset_dict(const Dataset& ds) {
  py::dict d;
  d["name"] = ds.name;
  d["X"] = ds.X;
  d["y"] = ds.y;
  d["classes"] = ds.classes;
  d["label_names"] = ds.label_names;
  return d;
}

py::dict trace_dict(const RunTrace& t) {
  std::vector<long long> iter;
  std::vector<double> obj, gnorm, dist;
  for (const auto& r : t.records) {
    iter.push_back(r.iter);
    obj.push_back(r.objective);
    gnorm.push_back(r.grad_norm);
    dist.push_back(r.ref_dist);
  }
  py::dict d;
  d["iter"] = iter;
  d["objective"] = obj;
  d["grad_norm"] = gnorm;
  if (t.has_ref) d["ref_dist"] = dist;
  d["status"] = to_string(t.status);
  d["message"] = t.message;
  d["halvings"] = t.halvings;
  return d;
}

// Library errors surface as ValueError (bad input) or RuntimeError.
template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (exit_code_for(e) == kExitConfig) throw py::value_error(e.what());
    throw std::runtime_error(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_rngd, m) {
  m.doc() = "Inverse-free Riemannian natural gradient descent";

  m.def("step_size", [](double c0, double c1, double alpha, long long s) {
    StepSchedule sch{c0, c1, alpha};
    guarded([&] { sch.validate(); return 0; });
    return step_size(sch, s);
  }, py::arg("c0"), py::arg("c1"), py::arg("alpha"), py::arg("s"));

  m.def("bw_exp", [](const Vec& m_, const Mat& sigma, const Vec& u, const Mat& X) {
    return guarded([&] {
      const GaussPoint y = bw_exp({m_, sigma}, {u, X});
      return py::make_tuple(y.m, y.sigma);
    });
  }, py::arg("m"), py::arg("sigma"), py::arg("u"), py::arg("X"));
  m.def("bw_log", [](const Vec& m1, const Mat& s1, const Vec& m2, const Mat& s2) {
    return guarded([&] {
      const GaussTangent v = bw_log({m1, s1}, {m2, s2});
      return py::make_tuple(v.u, v.X);
    });
  });
  m.def("w2_distance", [](const Vec& m1, const Mat& s1, const Vec& m2, const Mat& s2) {
    return guarded([&] { return w2_distance({m1, s1}, {m2, s2}); });
  });
  m.def("gaussian_kl", [](const Vec& m1, const Mat& s1, const Vec& m2, const Mat& s2) {
    return guarded([&] { return gaussian_kl({m1, s1}, {m2, s2}); });
  });

  m.def("parse_libsvm", [](const std::string& text, Index d) {
    return guarded([&] {
      std::istringstream in(text);
      return dataset_dict(parse_libsvm(in, d));
    });
  }, py::arg("text"), py::arg("d") = 0);
  m.def("parse_csv", [](const std::string& text, bool header, int label_column) {
    return guarded([&] {
      std::istringstream in(text);
      CsvOptions opt;
      opt.header = header;
      opt.label_column = label_column;
      return dataset_dict(parse_csv(in, opt));
    });
  }, py::arg("text"), py::arg("header") = false, py::arg("label_column") = -1);
  m.def("gen_logistic", [](Index n, Index d, double rho, std::uint64_t seed) {
    return guarded([&] {
      LogisticGenParams p;
      p.n = n;
      p.d = d;
      p.rho = rho;
      return dataset_dict(gen_logistic(p, seed));
    });
  }, py::arg("n") = 500, py::arg("d") = 20, py::arg("rho") = 0.0, py::arg("seed") = 0);

  m.def("run_experiment", [](const std::string& spec_json, int threads) {
    ExperimentResult res;
    guarded([&] {
      const ExperimentSpec spec = parse_experiment(Json::parse(spec_json));
      py::gil_scoped_release release;
      res = execute_experiment(spec, threads);
      return 0;
    });
    py::dict out;
    py::list runs;
    for (const auto& r : res.runs) {
      py::dict d = trace_dict(r.trace);
      d["run_id"] = r.run_id;
      d["method"] = r.method;
      d["replication"] = r.replication;
      d["seed"] = r.seed;
      runs.append(d);
    }
    out["runs"] = runs;
    if (res.has_reference) out["reference_value"] = res.reference_value;
    return out;
  }, py::arg("spec_json"), py::arg("threads") = 1,
     "Runs an experiment given as a JSON string; nothing is written to disk.");

  m.def("check_suites", &check_suites);
  m.def("run_checks", [](const std::string& suite, const std::string& fixtures, const std::string& scratch) {
    CheckOptions opt;
    opt.fixtures_dir = fixtures;
    opt.scratch_dir = scratch;
    std::vector<CheckResult> rs;
    guarded([&] {
      py::gil_scoped_release release;
      rs = run_checks(suite, opt);
      return 0;
    });
    py::list out;
    for (const auto& r : rs) {
      py::dict d;
      d["id"] = r.id;
      d["passed"] = r.passed;
      d["value"] = r.value;
      d["detail"] = r.detail;
      d["line"] = format_check(r);
      out.append(d);
    }
    return out;
  }, py::arg("suite") = "fast", py::arg("fixtures") = "", py::arg("scratch") = "");
}
