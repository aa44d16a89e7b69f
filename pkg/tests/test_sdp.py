import numpy as np
import pytest

from tensarm.optimize import (
    Expr,
    SDProblem,
    block,
    feasibility_margin,
    solve_nonneg_lp,
)


def _lyap_feasibility(A):
    """Strict Lyapunov feasibility A.T P + P A < 0, P > 0 via margin phase."""
    prob = SDProblem()
    n = A.shape[0]
    P = prob.sym_var("P", n)
    prob.add_psd(P - np.eye(n))
    prob.add_nsd((A.T @ P) + (P @ A))
    feasible, t_star, _ = feasibility_margin(prob)
    return feasible, t_star


def test_min_eps_equals_lambda_max():
    rng = np.random.default_rng(1)
    for _ in range(8):
        n = int(rng.integers(2, 6))
        M = rng.normal(size=(n, n))
        M = 0.5 * (M + M.T)
        prob = SDProblem()
        eps = prob.scalar_var("eps")
        prob.add_psd(eps.scaled_eye(n) - Expr.constant(M))
        prob.minimize(eps)
        res = prob.solve()
        assert res.ok
        lam = float(np.linalg.eigvalsh(M)[-1])
        assert res.objective == pytest.approx(lam, abs=1e-7 * max(1.0, abs(lam)))


def test_lyapunov_feasibility_matches_spectral_abscissa():
    rng = np.random.default_rng(9)
    n_checked = 0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        A = rng.normal(size=(n, n))
        abscissa = float(np.max(np.linalg.eigvals(A).real))
        if abs(abscissa) < 1e-6:
            continue  # margin cases excluded by construction
        feasible, _ = _lyap_feasibility(A)
        assert feasible == (abscissa < 0), f"A={A}, abscissa={abscissa}"
        n_checked += 1
    assert n_checked >= 45


def test_one_by_one_blocks_match_lp():
    # min c.x with a.x <= b, x >= 0 encoded as 1x1 PSD blocks
    a = np.array([2.0, 1.0])
    bb = 4.0
    c = np.array([-1.0, -1.0])
    prob = SDProblem()
    x1 = prob.scalar_var("x1")
    x2 = prob.scalar_var("x2")
    prob.add_psd(x1)
    prob.add_psd(x2)
    prob.add_psd(-(a[0] * x1 + a[1] * x2) + Expr.constant([[bb]]))
    prob.minimize(c[0] * x1 + c[1] * x2)
    res = prob.solve()
    assert res.ok
    # same LP in equality form with a slack
    lp = solve_nonneg_lp(np.array([[2.0, 1.0, 1.0]]), np.array([4.0]), np.array([-1.0, -1.0, 0.0]))
    assert res.objective == pytest.approx(lp.objective, abs=1e-6)


def test_block_margins_reverified():
    prob = SDProblem()
    P = prob.sym_var("P", 2)
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    prob.add_psd(P - 0.01 * np.eye(2))
    prob.add_nsd((A.T @ P) + (P @ A) + 1e-4 * np.eye(2))
    prob.minimize(Expr.constant([[1.0]]) @ np.ones((1, 1)) * 0.0 + _trace_expr(P))
    res = prob.solve()
    assert res.ok
    Pv = res.value("P")
    assert np.linalg.eigvalsh(Pv)[0] > 0
    M = A.T @ Pv + Pv @ A
    assert np.linalg.eigvalsh(M)[-1] < 0
    assert min(res.block_margins) > -1e-7


def _trace_expr(var_expr):
    n = var_expr.shape[0]
    total = None
    for i in range(n):
        ei = np.zeros((1, n))
        ei[0, i] = 1.0
        term = ei @ var_expr @ ei.T
        total = term if total is None else total + term
    return total


def test_equality_coupling():
    # minimize x + y with x - y == 1, x >= 0 as 1x1 blocks, y >= 0
    prob = SDProblem()
    x = prob.scalar_var("x")
    y = prob.scalar_var("y")
    prob.add_psd(x)
    prob.add_psd(y)
    prob.add_eq(x - y - Expr.constant([[1.0]]))
    prob.minimize(x + y)
    res = prob.solve()
    assert res.ok
    assert res.objective == pytest.approx(1.0, abs=1e-6)
    assert res.value("x")[0, 0] == pytest.approx(1.0, abs=1e-5)


def test_block_helper_layout():
    prob = SDProblem()
    Q = prob.sym_var("Q", 2)
    C = np.array([[1.0, 0.0]])
    e = prob.scalar_var("e")
    big = block([[e.scaled_eye(1), C @ Q], [(C @ Q).T, Q]])
    assert big.shape == (3, 3)
    prob.add_psd(big - 1e-9 * np.eye(3))
    prob.add_nsd(Q - 5.0 * np.eye(2))
    prob.minimize(e)
    res = prob.solve()
    assert res.ok


def test_infeasible_detected():
    prob = SDProblem()
    x = prob.scalar_var("x")
    prob.add_psd(x - Expr.constant([[1.0]]))  # x >= 1
    prob.add_psd(-x - Expr.constant([[1.0]]))  # x <= -1
    feasible, t_star, _ = feasibility_margin(prob)
    assert not feasible
