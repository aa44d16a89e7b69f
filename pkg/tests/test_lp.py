import numpy as np
import pytest

from tensarm.optimize import enumerate_vertices, solve_nonneg_lp


def test_dominant_column():
    res = solve_nonneg_lp(np.array([[1.0, 1.0]]), np.array([1.0]), np.array([1.0, 2.0]))
    assert res.ok
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-12)
    assert res.objective == pytest.approx(1.0)


def test_infeasible_outside_cone():
    # x1 + x2 = -1 has no nonnegative solution
    res = solve_nonneg_lp(np.array([[1.0, 1.0]]), np.array([-1.0]), np.array([1.0, 1.0]))
    assert res.status == "infeasible"


def test_unbounded():
    # minimize -x1 with x1 - x2 = 0: ray (t, t)
    res = solve_nonneg_lp(np.array([[1.0, -1.0]]), np.array([0.0]), np.array([-1.0, 0.0]))
    assert res.status == "unbounded"


def test_equality_residual_small():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 7))
    x0 = rng.uniform(0.5, 2.0, size=7)
    b = A @ x0
    res = solve_nonneg_lp(A, b, rng.uniform(0.1, 1.0, size=7))
    assert res.ok
    assert res.residual < 1e-9 * max(1.0, np.abs(b).max())


def test_matches_vertex_enumeration_oracle():
    # random feasible instances vs exhaustive vertex enumeration
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(60):
        m, n = int(rng.integers(1, 5)), int(rng.integers(2, 7))
        A = rng.normal(size=(m, n))
        x_feas = rng.uniform(0.0, 2.0, size=n)
        b = A @ x_feas
        c = rng.uniform(0.05, 1.0, size=n)
        res = solve_nonneg_lp(A, b, c)
        verts = enumerate_vertices(A, b)
        if not verts:
            continue
        best = min(float(c @ v) for v in verts)
        assert res.ok
        assert res.objective == pytest.approx(best, abs=1e-9 * max(1.0, abs(best)))
        checked += 1
    assert checked >= 30


def test_determinism():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(3, 8))
    b = A @ rng.uniform(0.2, 1.0, size=8)
    c = rng.uniform(0.1, 1.0, size=8)
    r1 = solve_nonneg_lp(A, b, c)
    r2 = solve_nonneg_lp(A.copy(), b.copy(), c.copy())
    assert r1.basis == r2.basis
    np.testing.assert_array_equal(r1.x, r2.x)


def test_upper_bounds():
    # min -x with x = y (free split), x <= 0.7
    A = np.array([[1.0, -1.0]])
    res = solve_nonneg_lp(A, np.array([0.0]), np.array([-1.0, 0.0]), upper=np.array([0.7, np.inf]))
    assert res.ok
    assert res.x[0] == pytest.approx(0.7)


def test_redundant_rows_handled():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    b = np.array([1.0, 2.0])
    res = solve_nonneg_lp(A, b, np.array([2.0, 1.0]))
    assert res.ok
    assert res.objective == pytest.approx(1.0)
