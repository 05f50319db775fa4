import math

import numpy as np
import pytest

import pycbo


def test_two_point_consensus():
    pts = np.array([[0.0], [1.0]])
    c = pycbo.consensus_point(pts, np.array([0.0, 1.0]), 1.0)
    assert c[0] == pytest.approx(math.exp(-1) / (1 + math.exp(-1)), rel=1e-14)


def test_objective_registry():
    q = pycbo.make_objective("quadratic-3")
    assert q.dim == 3
    assert q(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.5)
    canyon = pycbo.make_objective("canyon3")
    assert np.allclose(canyon.minimizer, [0.0, 0.0])
    with pytest.raises(ValueError):
        pycbo.make_objective("nope")


def test_cbo_run_shapes_and_determinism():
    obj = pycbo.make_objective("canyon3")
    cfg = pycbo.config(n_steps=30, seed=4)
    a = pycbo.cbo_run(obj, cfg)
    b = pycbo.cbo_run(obj, cfg)
    assert a.iterates.shape == (31, 2)
    assert np.array_equal(a.iterates, b.iterates)
    assert "max_fourth_moment" in a.diagnostics


def test_prox_closed_form():
    q = pycbo.make_objective("quadratic-2")
    x, res = pycbo.prox(q, np.array([1.0, -2.0]), 0.5)
    assert np.allclose(x, np.array([1.0, -2.0]) / 1.5, atol=1e-9)
    assert res <= 1e-10


def test_decompose_reconstruction():
    obj = pycbo.make_objective("canyon3")
    cfg = pycbo.config(tau=0.05, sigma_tilde="coupled", n_steps=40)
    rec = pycbo.decompose(obj, cfg)
    assert max(rec["reconstruction_residual"]) <= 1e-10
    assert len(rec["g"]) == 40


def test_gd_matches_geometric_decay():
    q = pycbo.make_objective("quadratic-1")
    r = pycbo.gd_run(q, np.array([1.0]), 0.1, 10)
    assert np.allclose(r.iterates[:, 0], 0.9 ** np.arange(11), rtol=1e-12)


def test_config_validation():
    assert pycbo.validate_config("preset = fig1\n")["ok"]
    bad = pycbo.validate_config("dt = 0.1\nlambda = 15\n")
    assert not bad["ok"]
    assert "drift overshoot" in bad["errors"][0]
    with pytest.raises(ValueError):
        pycbo.config(alpha="abc")


def test_run_experiment(tmp_path):
    out = pycbo.run_experiment("fig1", tmp_path, runs=2, overrides={"n_steps": 10})
    assert 0.0 <= out["summary"]["success_rate"] <= 1.0
    names = {f["path"] for f in out["files"]}
    assert {"fig1_seed0.csv", "fig1_seed1.csv", "fig1_summary.json", "objective_canyon3.json"} <= names
    assert (tmp_path / "manifest.json").exists()
    export = pycbo.objective_export("canyon3")
    assert export["name"] == "canyon3"
