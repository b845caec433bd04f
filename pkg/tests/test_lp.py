import numpy as np
import pytest
from scipy.optimize import linprog

from artifact.lp import InfeasibleLP, UnboundedLP, linprog_max


def test_matches_scipy_on_random_feasible_lps():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k, n = rng.integers(1, 6), rng.integers(1, 6)
        A = rng.uniform(-1, 2, (k, n))
        b = rng.uniform(0.5, 3, k)
        c = rng.uniform(-1, 2, n)
        box = np.eye(n)
        A_ub = np.vstack([A, box])
        b_ub = np.concatenate([b, np.full(n, 5.0)])
        ref = linprog(-c, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs")
        got = linprog_max(c, A_ub, b_ub)
        assert got.objective == pytest.approx(-ref.fun, abs=1e-7)
        assert np.all(A_ub @ got.x <= b_ub + 1e-7)
        assert got.certificate["gap"] <= 1e-7


def test_equality_constraints():
    # max x + y, x + y = 1, x <= 0.3
    got = linprog_max(np.array([1.0, 2.0]), np.array([[1.0, 0.0]]), np.array([0.3]), np.array([[1.0, 1.0]]), np.array([1.0]))
    assert got.objective == pytest.approx(2.0)
    assert got.x == pytest.approx([0.0, 1.0])


def test_infeasible_and_unbounded():
    with pytest.raises(InfeasibleLP):
        linprog_max(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))
    with pytest.raises(UnboundedLP):
        linprog_max(np.array([1.0]), np.array([[-1.0]]), np.array([1.0]))
