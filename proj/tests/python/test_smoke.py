import math
import os

import numpy as np
import pytest

import ergocov

DATA = os.environ.get("ERGOCOV_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def test_one_by_one_objectives():
    w = np.array([[0.0, 0.0]])
    s = np.array([[1.0, 0.0]])
    value, grad = ergocov.emmd(w, s, 1.0)
    assert value == pytest.approx(2 * (1 - math.exp(-1)), rel=1e-14)
    assert grad.shape == (1, 2)
    value, _ = ergocov.log_emmd(w, s, 1.0)
    assert value == pytest.approx(2.0, rel=1e-14)


def test_log_emmd_gradient_matches_differences():
    rng = np.random.default_rng(3)
    x, s = rng.random((6, 2)), rng.random((11, 2))
    _, grad = ergocov.log_emmd(x, s, 0.1)
    fd = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += 1e-6
        xm[idx] -= 1e-6
        fd[idx] = (ergocov.log_emmd(xp, s, 0.1)[0] - ergocov.log_emmd(xm, s, 0.1)[0]) / 2e-6
    assert np.abs(grad - fd).max() / np.abs(fd).max() < 1e-5


def test_domain_helpers():
    pts, w = ergocov.load_samples(os.path.join(DATA, "unit_square_grid.csv"))
    assert pts.shape == (100, 2)
    assert w.sum() == pytest.approx(1.0)
    assert ergocov.compute_extent(np.array([[-1.0, -1.0], [3.0, 2.0]])) == 4.0
    norm, extent, offset = ergocov.normalize(np.array([[0.0, 0.0], [1000.0, 10.0]]), np.array([[500.0, 250.0]]))
    assert extent == 1000.0
    assert norm[0] == pytest.approx([0.5, 0.25])
    with pytest.raises(ValueError):
        ergocov.compute_extent(np.array([[5.0, 5.0], [5.0, 5.0]]))


def test_schedule_and_baselines():
    h = ergocov.anneal_sequence(0.05, 1.5, 10, 1000.0)
    assert h[0] == 0.05 and h[-1] == pytest.approx(1.5e-6, rel=1e-12)
    cov = ergocov.coverage(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 0.5], [1.0, 2.0]]), 1.0)
    assert cov["covered_fraction"] == 0.5
    assert cov["per_sample_covered"] == [True, False]
    tour = ergocov.tsp_nearest_neighbor(np.array([[3.0], [0.0], [1.0]]), np.array([0.0]))
    assert tour[:, 0].tolist() == [0.0, 0.0, 1.0, 3.0]


def test_plan_is_feasible_and_deterministic():
    pts, _ = ergocov.load_samples(os.path.join(DATA, "unit_square_grid.csv"))
    model = ergocov.DynamicsModel()
    model.L_max = 3.0
    cfg = ergocov.SolverConfig()
    cfg.horizon = 20
    cfg.K = 4
    cfg.h_phys_star = 0.01
    cfg.inner_max_iterations = 60
    cfg.rng_seed = 4
    a = ergocov.plan(pts, model, cfg)
    b = ergocov.plan(pts, model, cfg)
    assert a.converged
    assert a.max_eq_violation <= 1e-6 and a.max_ineq_violation <= 1e-6
    assert np.array_equal(a.states, b.states)
    assert a.states.shape == (20, 4)
    assert (a.dt > 0).all()
    assert len(a.schedule) == 4
    with pytest.raises(ValueError):
        model.kind = "unicycle"
