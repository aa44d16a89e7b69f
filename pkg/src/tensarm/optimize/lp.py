"""Dense linear programming in equality standard form.

Solves

    minimize    c @ x
    subject to  A @ x = b,  0 <= x (<= ub, optionally)

with a two-phase revised simplex method.  Bland's smallest-index rule is
used for every pivot, which guarantees finite termination and makes the
solver fully deterministic: the same input bytes always produce the same
basis sequence and the same optimal vertex.

Problems here are small and dense (tens of variables), so the basis system
is re-solved from scratch at each iteration instead of maintaining a
factorization update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-10
_FEAS_TOL = 1e-9


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float = np.nan
    residual: float = np.nan
    iterations: int = 0
    basis: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _bland_simplex(A, b, c, basis, n_struct, max_iter):
    """Run revised simplex from a feasible basis; returns (status, basis, iters).

    Columns with index >= n_struct are artificials and are never allowed to
    re-enter the basis.
    """
    m, n = A.shape
    iters = 0
    while True:
        if iters > max_iter:
            raise RuntimeError("simplex cycling guard exceeded")
        iters += 1
        Ab = A[:, basis]
        try:
            xb = np.linalg.solve(Ab, b)
            y = np.linalg.solve(Ab.T, c[basis])
        except np.linalg.LinAlgError:
            raise RuntimeError("singular basis matrix")
        reduced = c - y @ A
        entering = -1
        for j in range(n_struct):
            if j not in basis and reduced[j] < -_PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return OPTIMAL, basis, xb, iters
        d = np.linalg.solve(Ab, A[:, entering])
        # ratio test, Bland tie-break on smallest basis variable index
        leave_pos = -1
        best = np.inf
        for i in range(m):
            if d[i] > _PIVOT_TOL:
                ratio = xb[i] / d[i]
                if ratio < best - _PIVOT_TOL or (
                    abs(ratio - best) <= _PIVOT_TOL
                    and (leave_pos < 0 or basis[i] < basis[leave_pos])
                ):
                    best = ratio
                    leave_pos = i
        if leave_pos < 0:
            return UNBOUNDED, basis, xb, iters
        basis[leave_pos] = entering


def solve_nonneg_lp(A, b, c, upper=None, max_iter=20000) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x = b`` and ``x >= 0``.

    Parameters
    ----------
    A : (m, n) array
    b : (m,) array
    c : (n,) array
    upper : (n,) array, optional
        Per-variable upper bounds; handled by slack augmentation
        ``x + s = upper`` so the solver stays in standard form.

    Returns
    -------
    LPResult with status "optimal", "infeasible" or "unbounded".
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    m, n = A.shape
    if b.shape[0] != m or c.shape[0] != n:
        raise ValueError("inconsistent LP dimensions")
    if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
        raise ValueError("LP data must be finite")

    n_orig = n
    if upper is not None:
        upper = np.asarray(upper, dtype=float).ravel()
        bounded = np.where(np.isfinite(upper))[0]
        k = bounded.size
        if k:
            Aug = np.zeros((m + k, n + k))
            Aug[:m, :n] = A
            for r, j in enumerate(bounded):
                Aug[m + r, j] = 1.0
                Aug[m + r, n + r] = 1.0
            A = Aug
            b = np.concatenate([b, upper[bounded]])
            c = np.concatenate([c, np.zeros(k)])
            m, n = A.shape

    # flip rows so b >= 0, then append artificial columns
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = A * sign[:, None]
    b1 = b * sign
    scale = max(1.0, np.abs(b1).max(initial=0.0))

    full = np.hstack([A1, np.eye(m)])
    basis = list(range(n, n + m))
    c_phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    status, basis, xb, it1 = _bland_simplex(full, b1, c_phase1, basis, n + m, max_iter)
    phase1_obj = float(np.sum(xb[[i for i, j in enumerate(basis) if j >= n]]))
    if status != OPTIMAL or phase1_obj > _FEAS_TOL * scale:
        return LPResult(status=INFEASIBLE, iterations=it1)

    # drive remaining artificials out of the basis or drop redundant rows
    keep_rows = list(range(m))
    for i in range(m):
        if basis[i] >= n:
            Ab = full[np.ix_(keep_rows, [basis[k] for k in keep_rows])]
            row = np.linalg.solve(Ab.T, np.eye(len(keep_rows))[keep_rows.index(i)])
            coeffs = row @ full[keep_rows, :n]
            cand = np.where(np.abs(coeffs) > 1e-8)[0]
            cand = [j for j in cand if j not in basis]
            if cand:
                basis[i] = int(cand[0])
            else:
                keep_rows.remove(i)  # redundant constraint row

    rows = keep_rows
    A2 = full[np.ix_(rows, list(range(n)))]
    b2 = b1[rows]
    basis2 = [basis[i] for i in rows]
    c2 = c
    status, basis2, xb, it2 = _bland_simplex(A2, b2, c2, basis2, n, max_iter)
    if status == UNBOUNDED:
        return LPResult(status=UNBOUNDED, iterations=it1 + it2)
    x = np.zeros(n)
    x[basis2] = np.maximum(xb, 0.0)
    x_out = x[:n_orig]
    res = float(np.linalg.norm(A[: len(b), :] @ x - b, ord=np.inf)) if m else 0.0
    return LPResult(
        status=OPTIMAL,
        x=x_out,
        objective=float(c[:n_orig] @ x_out),
        residual=res,
        iterations=it1 + it2,
        basis=sorted(int(j) for j in basis2),
    )


def enumerate_vertices(A, b):
    """Brute-force vertex enumeration of {x >= 0 : Ax = b} for tiny instances.

    Intended as a test oracle; complexity is combinatorial in the number of
    columns.
    """
    from itertools import combinations

    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    r = int(np.linalg.matrix_rank(A))
    verts = []
    for cols in combinations(range(n), min(r, n)):
        sub = A[:, cols]
        sol, res, rank, _ = np.linalg.lstsq(sub, b, rcond=None)
        x = np.zeros(n)
        x[list(cols)] = sol
        if np.all(x >= -1e-9) and np.linalg.norm(A @ x - b, ord=np.inf) < 1e-8:
            verts.append(np.maximum(x, 0.0))
    return verts
