"""Consensus-based optimization and its relaxations (C++ core)."""

import json

from ._core import (
    InvalidArgument,
    NumericalError,
    Objective,
    RunRecord,
    SchemeConfig,
    canyon_objective,
    cbo_run,
    ch_run,
    consensus_point,
    consensus_weights,
    evaluate_rows,
    gd_run,
    gibbs_free_energy,
    implicit_ch_run,
    langevin_run,
    make_objective,
    mms_run,
    prox,
    set_worker_threads,
)
from . import _core


def config(**settings):
    """SchemeConfig from keyword settings, e.g. config(tau=0.05, sigma_tilde="coupled")."""
    c = SchemeConfig()
    for key, value in settings.items():
        if key == "init_mean":
            value = ",".join(str(v) for v in value)
        c.set(key, str(value).lower() if isinstance(value, bool) else str(value))
    return c


def decompose(objective, cfg):
    return json.loads(_core.decompose_json(objective, cfg))


def scaling_sweep(axis, objective, base, grid, seeds):
    return json.loads(_core.scaling_sweep_json(axis, objective, base, list(grid), seeds))


def validate_config(raw):
    return json.loads(_core.validate_config_json(raw))


def run_experiment(preset, output_dir, runs=0, seed=0, overrides=None):
    pairs = [(k, str(v)) for k, v in (overrides or {}).items()]
    return json.loads(_core.run_experiment_json(preset, str(output_dir), runs, seed, pairs))


def objective_export(name):
    return json.loads(_core.objective_export_json(name))


def validate_assumptions(objective, samples=10000, seed=0):
    return json.loads(_core.validate_assumptions_json(objective, samples, seed))
