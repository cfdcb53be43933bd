import math

import numpy as np
import pytest

import rngd


def test_step_size():
    assert rngd.step_size(1.0, 100.0, 0.75, 0) == pytest.approx(100.0 ** -0.75)
    assert rngd.step_size(3.0, 7.0, 0.75, 9) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        rngd.step_size(1.0, 100.0, 1.5, 0)


def test_bw_exp_log_round_trip():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    sigma = a @ a.T + 4 * np.eye(4)
    m = rng.standard_normal(4)
    b = rng.standard_normal((4, 4))
    X = 0.1 * (b + b.T)
    u = rng.standard_normal(4)
    m2, s2 = rngd.bw_exp(m, sigma, u, X)
    assert np.allclose(s2, (np.eye(4) + X) @ sigma @ (np.eye(4) + X))
    u2, X2 = rngd.bw_log(m, sigma, m2, s2)
    assert np.allclose(u2, u, atol=1e-8)
    assert np.allclose(X2, X, atol=1e-8)
    assert rngd.w2_distance(m, sigma, m, sigma) == pytest.approx(0.0, abs=1e-6)


def test_gaussian_kl_one_dimensional():
    kl = rngd.gaussian_kl(np.array([0.0]), np.array([[1.0]]), np.array([1.0]), np.array([[2.0]]))
    expected = 0.5 * (0.5 + 0.5 - 1.0 + math.log(2.0))
    assert kl == pytest.approx(expected)


def test_parsers():
    ds = rngd.parse_libsvm("+1 1:0.5 3:2\n-1 2:1\n")
    assert ds["X"].shape == (2, 3)
    assert list(ds["y"]) == [1.0, 0.0]
    assert ds["X"][0, 2] == 2.0
    csv = rngd.parse_csv("a,b,label\n1,2,x\n3,4,y\n5,6,x\n", header=True)
    assert csv["X"].shape == (3, 2)
    assert csv["label_names"] == ["x", "y"]
    with pytest.raises(ValueError):
        rngd.parse_libsvm("1 0:3\n")


def test_generator_is_deterministic():
    a = rngd.gen_logistic(n=50, d=4, rho=0.5, seed=9)
    b = rngd.gen_logistic(n=50, d=4, rho=0.5, seed=9)
    assert np.array_equal(a["X"], b["X"])
    assert set(np.unique(a["y"])) <= {0.0, 1.0}


def test_run_small_experiment():
    spec = {
        "name": "py-smoke",
        "objective": "gaussian-mean",
        "objective_params": {"dim": 3},
        "iterations": 300,
        "log_every": 50,
        "replications": 2,
        "seed": 5,
        "methods": [
            {"label": "gd", "precond": "gd", "schedule": {"c0": 1.0, "c1": 10, "alpha": 0.75}},
            {"label": "ngd-approx", "precond": "ngd-approx", "schedule": {"c0": 1.0, "c1": 10, "alpha": 0.75}},
        ],
    }
    out = rngd.run_experiment(spec)
    assert len(out["runs"]) == 4
    for run in out["runs"]:
        assert run["status"] == "ok"
        assert run["iter"][0] == 0 and run["iter"][-1] == 300
        assert run["objective"][-1] < run["objective"][0]
    again = rngd.run_experiment(spec)
    assert again["runs"][0]["objective"] == out["runs"][0]["objective"]


def test_bad_spec_is_value_error():
    with pytest.raises(ValueError):
        rngd.run_experiment({"objective": "nope", "methods": []})


def test_fast_checks_listed():
    suites = rngd.check_suites()
    assert "fast" in suites and "all" in suites
    res = rngd.run_checks("sherman-morrison")
    assert len(res) == 1 and res[0]["passed"]
