"""Nonnegative least squares and derived projections.

`solve_nnls` is a dense Lawson-Hanson active-set solver for

    minimize ||A x - b||_2   subject to  x >= 0,

used as the infeasibility fallback for force-density commands.
`min_norm_nonneg` solves the least-distance problem

    minimize ||x||_2         subject to  A x = b,  x >= 0,

whose unique optimum makes command selection equivariant under structure
symmetries (plain LP vertices are not unique on degenerate optimal faces).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class NNLSResult:
    x: np.ndarray
    residual: float
    iterations: int


def solve_nnls(A, b, max_iter=None, tol=None) -> NNLSResult:
    """Lawson-Hanson active-set nonnegative least squares.

    Returns the KKT point: x >= 0, gradient A.T (A x - b) >= 0 on the active
    set and ~0 on the passive set.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    if b.shape[0] != m:
        raise ValueError("inconsistent NNLS dimensions")
    if max_iter is None:
        max_iter = 3 * n + 30
    if tol is None:
        tol = 10 * max(m, n) * np.finfo(float).eps * max(
            1.0, float(np.abs(A).max(initial=0.0))
        ) * max(1.0, float(np.abs(b).max(initial=0.0)))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ b
    iters = 0
    while iters < max_iter:
        if passive.all():
            break
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        if w[j] <= tol:
            break
        passive[j] = True
        while True:
            iters += 1
            cols = np.where(passive)[0]
            z = np.zeros(n)
            z[cols], *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            if np.all(z[cols] > tol):
                x = z
                break
            # step toward z until the first passive coordinate hits zero
            mask = (z <= tol) & passive
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask, x / (x - z), np.inf)
            alpha = float(np.min(ratios))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return NNLSResult(x=x, residual=float(np.linalg.norm(A @ x - b)), iterations=iters)


def min_norm_nonneg(A, b, extra_row=None, extra_rhs=None) -> np.ndarray | None:
    """Minimum-Euclidean-norm point of {x >= 0 : A x = b (, extra x = rhs)}.

    Solved by parameterizing the equality set as x = x_p + Z q over the
    nullspace of the constraints and converting the resulting least-distance
    problem to NNLS (the classical LDP reduction).  Returns None when the
    equalities are inconsistent or the set is empty.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if extra_row is not None:
        A = np.vstack([A, np.atleast_2d(np.asarray(extra_row, dtype=float))])
        b = np.concatenate([b, np.atleast_1d(float(extra_rhs))])
    m, n = A.shape
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))

    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > 1e-11 * (s[0] if s.size else 1.0)))
    # consistency of the equalities
    x_p = Vt[:rank].T @ ((U[:, :rank].T @ b) / s[:rank])
    if np.linalg.norm(A @ x_p - b) > 1e-7 * scale:
        return None
    Z = Vt[rank:].T  # n x (n - rank), orthonormal columns
    if Z.shape[1] == 0:
        return x_p if np.all(x_p >= -1e-8 * scale) else None

    # least-distance: min ||q + Z.T x_p|| s.t. Z q >= -x_p, then x = x_p + Z q.
    # Since Z has orthonormal columns, ||x||^2 = ||x_p_perp||^2 + ||q + Z.T x_p||^2
    # with the fixed part constant; the LDP below minimizes ||x|| directly.
    G = Z
    h = -x_p
    k = G.shape[1]
    E = np.vstack([G.T, h])  # (k+1) x n
    f = np.zeros(k + 1)
    f[-1] = 1.0
    res = solve_nnls(E, f)
    r = E @ res.x - f
    if abs(r[-1]) < 1e-12:
        return None  # incompatible inequalities
    q = -r[:-1] / r[-1]
    x = x_p + Z @ q
    x = np.where(x < 0, 0.0, x)
    if np.linalg.norm(A @ x - b) > 1e-6 * scale:
        return None
    return x
