"""Python bindings for the rngd optimizers and experiment harness."""

import json

from ._rngd import (
    bw_exp,
    bw_log,
    check_suites,
    gaussian_kl,
    gen_logistic,
    parse_csv,
    parse_libsvm,
    run_checks,
    step_size,
    w2_distance,
)
from ._rngd import run_experiment as _run_experiment

__all__ = [
    "bw_exp",
    "bw_log",
    "check_suites",
    "gaussian_kl",
    "gen_logistic",
    "parse_csv",
    "parse_libsvm",
    "run_checks",
    "run_experiment",
    "step_size",
    "w2_distance",
]


def run_experiment(spec, threads=1):
    """Run an experiment spec (dict or JSON string) and return its traces."""
    if not isinstance(spec, str):
        spec = json.dumps(spec)
    return _run_experiment(spec, threads)
