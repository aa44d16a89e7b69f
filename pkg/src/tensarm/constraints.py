"""Linear node constraints (joints, pins, planarity) and their reduction.

Constraints come in two granularities.  Whole-node constraints N P = D tie a
linear combination of node positions in all three axes at once (joint
coincidence, pinned nodes).  Axis rows tie a single coordinate (planar
builds pin every y coordinate).  Everything is flattened to A n = d over the
stacked coordinate vector n = [n_x; n_y; n_z], redundancy is pruned to full
row rank, and the SVD split n = V1 eta1 + V2 eta2 drives the reduced-order
dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_RANK_TOL = 1e-10  # singular values below tol * sigma_max count as zero


@dataclass
class ConstraintSet:
    P: np.ndarray  # n_nodes x c whole-node constraint combinations
    D: np.ndarray  # 3 x c targets for N P = D
    A: np.ndarray  # N_c x 3n flattened rows (full row rank)
    d: np.ndarray  # N_c
    U: np.ndarray
    S1: np.ndarray  # nonzero singular values
    V1: np.ndarray  # 3n x r
    V2: np.ndarray  # 3n x (3n - r)
    eta1: np.ndarray  # fixed coordinate S1^-1 U^T d

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def residual(self, n_vec: np.ndarray) -> float:
        if self.n_rows == 0:
            return 0.0
        return float(np.abs(self.A @ n_vec - self.d).max())

    def project_positions(self, n_vec: np.ndarray) -> np.ndarray:
        """Least-squares restore of A n = d (used after drift corrections)."""
        if self.n_rows == 0:
            return n_vec
        corr = self.A.T @ np.linalg.solve(self.A @ self.A.T, self.A @ n_vec - self.d)
        return n_vec - corr

    def project_velocities(self, v_vec: np.ndarray) -> np.ndarray:
        if self.n_rows == 0:
            return v_vec
        corr = self.A.T @ np.linalg.solve(self.A @ self.A.T, self.A @ v_vec)
        return v_vec - corr


def _axis_row(n_nodes, axis, node_coeffs):
    row = np.zeros(3 * n_nodes)
    for node, coeff in node_coeffs:
        row[axis * n_nodes + node] = coeff
    return row


def empty_constraints(n_nodes: int) -> ConstraintSet:
    three_n = 3 * n_nodes
    return ConstraintSet(
        P=np.zeros((n_nodes, 0)),
        D=np.zeros((3, 0)),
        A=np.zeros((0, three_n)),
        d=np.zeros(0),
        U=np.zeros((0, 0)),
        S1=np.zeros(0),
        V1=np.zeros((three_n, 0)),
        V2=np.eye(three_n),
        eta1=np.zeros(0),
    )


def build_constraints(n_nodes, coincidences=(), pins=(), axis_pins=(), N0=None) -> ConstraintSet:
    """Assemble a constraint set.

    coincidences: (node_i, node_j) pairs tied in all three axes.
    pins: (node, position 3-vector) held fixed in all three axes.
    axis_pins: (node, axis, value) single-coordinate rows.
    N0 optional initial positions for a consistency check.
    """
    cols = []
    targets = []
    for i, j in coincidences:
        p = np.zeros(n_nodes)
        p[i], p[j] = 1.0, -1.0
        cols.append(p)
        targets.append(np.zeros(3))
    for node, pos in pins:
        p = np.zeros(n_nodes)
        p[node] = 1.0
        cols.append(p)
        targets.append(np.asarray(pos, dtype=float))
    P = np.stack(cols, axis=1) if cols else np.zeros((n_nodes, 0))
    D = np.stack(targets, axis=1) if targets else np.zeros((3, 0))

    rows = []
    rhs = []
    for c in range(P.shape[1]):
        for axis in range(3):
            rows.append(_axis_row(n_nodes, axis, [(k, P[k, c]) for k in np.nonzero(P[:, c])[0]]))
            rhs.append(D[axis, c])
    for node, axis, value in axis_pins:
        rows.append(_axis_row(n_nodes, axis, [(node, 1.0)]))
        rhs.append(float(value))

    A = np.stack(rows, axis=0) if rows else np.zeros((0, 3 * n_nodes))
    d = np.asarray(rhs, dtype=float)
    A, d = _prune_redundant(A, d)
    cs = _with_svd(P, D, A, d)
    if N0 is not None and cs.n_rows:
        res = cs.residual(np.asarray(N0, dtype=float).reshape(-1))
        if res > 1e-8 * max(1.0, np.abs(N0).max()):
            raise ValueError(f"initial positions violate constraints (residual {res:.2e})")
    return cs


def _prune_redundant(A, d):
    """Keep a maximal independent subset of rows (consistency preserved)."""
    if A.shape[0] == 0:
        return A, d
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv > _RANK_TOL * sv[0]))
    if rank == A.shape[0]:
        return A, d
    # pivoted QR on A^T picks independent rows deterministically
    try:
        from scipy.linalg import qr

        _, _, piv = qr(A.T, pivoting=True, mode="economic")
        keep = np.sort(piv[:rank])
    except ImportError:  # pragma: no cover
        keep = np.arange(rank)
    A_red, d_red = A[keep], d[keep]
    # dropped rows must be implied (consistent redundancy only)
    x, *_ = np.linalg.lstsq(A_red, d_red, rcond=None)
    if np.abs(A @ x - d).max() > 1e-8 * max(1.0, np.abs(d).max()):
        raise ValueError("inconsistent constraint rows")
    return A_red, d_red


def _with_svd(P, D, A, d) -> ConstraintSet:
    three_n = A.shape[1]
    if A.shape[0] == 0:
        cs = empty_constraints(three_n // 3)
        return ConstraintSet(P=P, D=D, A=cs.A, d=cs.d, U=cs.U, S1=cs.S1,
                             V1=cs.V1, V2=cs.V2, eta1=cs.eta1)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(s > _RANK_TOL * s[0]))
    assert r == A.shape[0], "rows are independent after pruning"
    V = Vt.T
    V1, V2 = V[:, :r], V[:, r:]
    eta1 = (U.T @ d) / s[:r]
    return ConstraintSet(P=P, D=D, A=A, d=d, U=U, S1=s[:r], V1=V1, V2=V2, eta1=eta1)


def structure_constraints(built, pinned_points=(), extra_axis_pins=()) -> ConstraintSet:
    """Constraints implied by a compiled structure.

    Joint coincidences always; y-axis pins on every node for planar builds;
    whole-node pins at the representative node of each listed point id.
    """
    n = built.n_nodes
    pins = [(built.rep_node(p), built.N0[:, built.rep_node(p)]) for p in pinned_points]
    axis_pins = list(extra_axis_pins)
    if built.planar:
        axis_pins += [(node, 1, built.N0[1, node]) for node in range(n)]
    return build_constraints(
        n, coincidences=built.coincidences, pins=pins, axis_pins=axis_pins, N0=built.N0
    )
