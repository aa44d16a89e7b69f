import numpy as np
import pytest
import scipy.optimize

from tensarm.optimize import min_norm_nonneg, solve_nnls


def test_consistent_nonnegative_solution_recovered():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 4))
    x0 = rng.uniform(0.2, 1.5, size=4)
    res = solve_nnls(A, A @ x0)
    np.testing.assert_allclose(res.x, x0, atol=1e-9)
    assert res.residual < 1e-10


def test_clamped_coordinate():
    res = solve_nnls(np.eye(2), np.array([-1.0, 2.0]))
    np.testing.assert_allclose(res.x, [0.0, 2.0], atol=1e-12)


def test_kkt_conditions_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m, n = int(rng.integers(2, 9)), int(rng.integers(2, 7))
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        res = solve_nnls(A, b)
        g = A.T @ (A @ res.x - b)
        scale = max(1.0, np.abs(A).max() * np.abs(b).max())
        assert np.all(res.x >= 0)
        # gradient nonnegative on active set, ~zero on passive set
        assert np.all(g >= -1e-8 * scale)
        assert np.abs(g * res.x).max() < 1e-8 * scale


def test_matches_scipy_oracle():
    rng = np.random.default_rng(21)
    for _ in range(40):
        m, n = int(rng.integers(3, 10)), int(rng.integers(2, 8))
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        res = solve_nnls(A, b)
        x_ref, r_ref = scipy.optimize.nnls(A, b)
        assert res.residual == pytest.approx(r_ref, abs=1e-8)


def test_min_norm_nonneg_basic():
    # x1 + x2 = 1, minimum norm nonnegative point is (0.5, 0.5)
    x = min_norm_nonneg(np.array([[1.0, 1.0]]), np.array([1.0]))
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-9)


def test_min_norm_nonneg_active_bound():
    # x1 - x2 = 1: unconstrained min-norm is (0.5, -0.5); clamped to (1, 0)
    x = min_norm_nonneg(np.array([[1.0, -1.0]]), np.array([1.0]))
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-8)


def test_min_norm_nonneg_infeasible():
    assert min_norm_nonneg(np.array([[1.0, 1.0]]), np.array([-1.0])) is None


def test_min_norm_permutation_equivariance():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(2, 6))
    x_feas = rng.uniform(0.1, 1.0, size=6)
    b = A @ x_feas
    perm = rng.permutation(6)
    x = min_norm_nonneg(A, b)
    xp = min_norm_nonneg(A[:, perm], b)
    np.testing.assert_allclose(x[perm], xp, atol=1e-8)
