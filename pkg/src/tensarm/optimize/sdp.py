"""Dense semidefinite programming for small LMI problems.

The modeling layer (`SDProblem` / `Expr`) builds affine symmetric-matrix
expressions in declared matrix variables and compiles them to the standard
linear-matrix-inequality form

    minimize    c @ x
    subject to  F0_k + sum_i x_i F_ik  is PSD   for every block k,

which is solved by an infeasible-start primal-dual path-following method
with Nesterov-Todd scaling and a predictor-corrector step that reuses the
Schur-complement factorization.  Everything is dense: the blocks arising
from the gain syntheses are at most a few hundred rows.

Scalar equality couplings between variable entries are eliminated at
compile time by reparameterizing over the nullspace of the equality system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
ILL_CONDITIONED = "ill_conditioned"


# ---------------------------------------------------------------------------
# affine matrix expressions


class Expr:
    """Affine matrix expression: const + sum over vars of linear terms.

    `coeffs[name]` has shape (nv_name, rows, cols): the derivative of the
    expression with respect to each packed scalar entry of that variable.
    """

    __slots__ = ("shape", "const", "coeffs", "_sd_name")

    # make ndarray @ Expr / ndarray + Expr defer to the reflected methods
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, shape, const=None, coeffs=None):
        self.shape = tuple(shape)
        self.const = (
            np.zeros(self.shape) if const is None else np.asarray(const, dtype=float)
        )
        self.coeffs = {} if coeffs is None else coeffs

    # -- helpers ---------------------------------------------------------
    @staticmethod
    def constant(M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return Expr(M.shape, M)

    def _zeros_like_coeffs(self):
        return {k: np.zeros_like(v) for k, v in self.coeffs.items()}

    def copy(self):
        return Expr(self.shape, self.const.copy(), {k: v.copy() for k, v in self.coeffs.items()})

    # -- algebra ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Expr):
            other = Expr.constant(np.broadcast_to(other, self.shape))
        if other.shape != self.shape:
            raise ValueError("shape mismatch in Expr addition")
        coeffs = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0) + v
        return Expr(self.shape, self.const + other.const, coeffs)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return Expr(
            self.shape, -self.const, {k: -v for k, v in self.coeffs.items()}
        )

    def __sub__(self, other):
        if not isinstance(other, Expr):
            other = Expr.constant(np.broadcast_to(other, self.shape))
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return self.__neg__().__add__(other)

    def __mul__(self, a):
        a = float(a)
        return Expr(
            self.shape, a * self.const, {k: a * v for k, v in self.coeffs.items()}
        )

    __rmul__ = __mul__

    def __matmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        coeffs = {k: np.einsum("vij,jk->vik", v, M) for k, v in self.coeffs.items()}
        return Expr((self.shape[0], M.shape[1]), self.const @ M, coeffs)

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        coeffs = {k: np.einsum("ij,vjk->vik", M, v) for k, v in self.coeffs.items()}
        return Expr((M.shape[0], self.shape[1]), M @ self.const, coeffs)

    @property
    def T(self):
        coeffs = {k: np.swapaxes(v, 1, 2) for k, v in self.coeffs.items()}
        return Expr((self.shape[1], self.shape[0]), self.const.T, coeffs)

    def sym(self):
        """expr + expr.T for square expressions."""
        return self + self.T

    def scaled_eye(self, n):
        """For a 1x1 expression, return expr * I_n."""
        if self.shape != (1, 1):
            raise ValueError("scaled_eye requires a scalar expression")
        eye = np.eye(n)
        coeffs = {k: v[:, 0, 0][:, None, None] * eye for k, v in self.coeffs.items()}
        return Expr((n, n), float(self.const[0, 0]) * eye, coeffs)


def block(rows):
    """Assemble a block matrix of Expr / ndarray entries (like np.block)."""
    rows = [[e if isinstance(e, Expr) else Expr.constant(e) for e in r] for r in rows]
    heights = [r[0].shape[0] for r in rows]
    widths = [e.shape[1] for e in rows[0]]
    total = (sum(heights), sum(widths))
    out = Expr(total)
    names = {k for r in rows for e in r for k in e.coeffs}
    i0 = 0
    for r, h in zip(rows, heights):
        j0 = 0
        for e in r:
            if e.shape[0] != h:
                raise ValueError("ragged block row")
            w = e.shape[1]
            out.const[i0 : i0 + h, j0 : j0 + w] = e.const
            for k, v in e.coeffs.items():
                if k not in out.coeffs:
                    nv = v.shape[0]
                    out.coeffs[k] = np.zeros((nv, *total))
                out.coeffs[k][:, i0 : i0 + h, j0 : j0 + w] = v
            j0 += w
        i0 += h
    return out


# ---------------------------------------------------------------------------
# problem container


@dataclass
class SDResult:
    status: str
    values: dict = field(default_factory=dict)
    objective: float = np.nan
    iterations: int = 0
    gap: float = np.nan
    block_margins: list = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def value(self, var):
        return self.values[var if isinstance(var, str) else var._sd_name]


class SDProblem:
    """Container for matrix variables, PSD blocks, equalities and objective."""

    def __init__(self):
        self._vars = {}  # name -> (kind, dims)
        self._lmis = []  # list of Expr, meaning expr >= 0 (PSD)
        self._eqs = []  # list of scalar Expr, meaning expr == 0
        self._objective = None

    # -- variables -------------------------------------------------------
    def sym_var(self, name, n):
        """Symmetric n x n matrix variable."""
        self._check_name(name)
        self._vars[name] = ("sym", (n, n))
        nv = n * (n + 1) // 2
        basis = np.zeros((nv, n, n))
        k = 0
        for i in range(n):
            for j in range(i, n):
                basis[k, i, j] = 1.0
                basis[k, j, i] = 1.0
                k += 1
        e = Expr((n, n), coeffs={name: basis})
        e._sd_name = name
        return e

    def var(self, name, rows, cols):
        """General rows x cols matrix variable."""
        self._check_name(name)
        self._vars[name] = ("gen", (rows, cols))
        nv = rows * cols
        basis = np.zeros((nv, rows, cols))
        for k in range(nv):
            basis[k, k // cols, k % cols] = 1.0
        e = Expr((rows, cols), coeffs={name: basis})
        e._sd_name = name
        return e

    def scalar_var(self, name):
        e = self.var(name, 1, 1)
        return e

    def _check_name(self, name):
        if name in self._vars:
            raise ValueError(f"duplicate variable name {name!r}")

    # -- constraints / objective -----------------------------------------
    def add_psd(self, expr):
        """Constrain expr >= 0 (positive semidefinite)."""
        if expr.shape[0] != expr.shape[1]:
            raise ValueError("LMI block must be square")
        self._lmis.append(expr)

    def add_nsd(self, expr):
        """Constrain expr <= 0."""
        self.add_psd(-expr)

    def add_eq(self, expr):
        """Constrain a 1x1 expression to equal zero."""
        if expr.shape != (1, 1):
            raise ValueError("equalities must be scalar expressions")
        self._eqs.append(expr)

    def minimize(self, expr):
        if expr.shape != (1, 1):
            raise ValueError("objective must be a scalar expression")
        self._objective = expr

    def maximize(self, expr):
        self.minimize(-1.0 * expr)

    # -- compilation -------------------------------------------------------
    def _layout(self):
        offsets = {}
        total = 0
        for name, (kind, (r, c)) in self._vars.items():
            nv = r * (r + 1) // 2 if kind == "sym" else r * c
            offsets[name] = (total, nv)
            total += nv
        return offsets, total

    def _vector(self, expr, offsets, total):
        v = np.zeros(total)
        for name, coef in expr.coeffs.items():
            off, nv = offsets[name]
            v[off : off + nv] = coef[:, 0, 0]
        return v

    def _block_data(self, expr, offsets, total):
        k = expr.shape[0]
        F0 = 0.5 * (expr.const + expr.const.T)
        F = np.zeros((total, k, k))
        for name, coef in expr.coeffs.items():
            off, nv = offsets[name]
            F[off : off + nv] = 0.5 * (coef + np.swapaxes(coef, 1, 2))
        return F0, F

    def _unpack(self, x, offsets):
        values = {}
        for name, (kind, (r, c)) in self._vars.items():
            off, nv = offsets[name]
            seg = x[off : off + nv]
            if kind == "sym":
                M = np.zeros((r, r))
                k = 0
                for i in range(r):
                    for j in range(i, r):
                        M[i, j] = M[j, i] = seg[k]
                        k += 1
            else:
                M = seg.reshape(r, c)
            values[name] = M
        return values

    # -- solving -----------------------------------------------------------
    def solve(self, tol=1e-9, max_iter=120) -> SDResult:
        offsets, total = self._layout()
        if self._objective is not None:
            c = self._vector(self._objective, offsets, total)
            obj0 = float(self._objective.const[0, 0])
        else:
            c = np.zeros(total)
            obj0 = 0.0
        blocks = [self._block_data(e, offsets, total) for e in self._lmis]

        # eliminate scalar equalities by nullspace reparameterization
        x_part = np.zeros(total)
        basis = np.eye(total)
        if self._eqs:
            E = np.vstack([self._vector(e, offsets, total) for e in self._eqs])
            g = -np.array([float(e.const[0, 0]) for e in self._eqs])
            U, s, Vt = np.linalg.svd(E, full_matrices=True)
            rank = int(np.sum(s > 1e-12 * s[0])) if s.size else 0
            x_part = Vt[:rank].T @ ((U[:, :rank].T @ g) / s[:rank])
            if np.linalg.norm(E @ x_part - g) > 1e-8 * (1 + np.abs(g).max(initial=0)):
                return SDResult(status=INFEASIBLE, message="inconsistent equalities")
            basis = Vt[rank:].T
            blocks = [
                (F0 + np.tensordot(x_part, F, axes=1),
                 np.einsum("vkl,vr->rkl", F, basis))
                for F0, F in blocks
            ]
            obj0 += float(c @ x_part)
            c = basis.T @ c

        status, x_red, iters, gap, msg = _ipm(c, blocks, tol=tol, max_iter=max_iter)
        x = x_part + basis @ x_red
        values = self._unpack(x, offsets)
        margins = []
        for expr in self._lmis:
            F0, F = self._block_data(expr, offsets, total)
            M = F0 + np.tensordot(x, F, axes=1)
            margins.append(float(np.linalg.eigvalsh(M)[0]))
        obj = obj0 + float(c @ x_red)
        return SDResult(
            status=status,
            values=values,
            objective=obj,
            iterations=iters,
            gap=gap,
            block_margins=margins,
            message=msg,
        )


# ---------------------------------------------------------------------------
# interior-point core


def _sqrtm_psd(M):
    w, V = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    r = np.sqrt(w)
    return (V * r) @ V.T, (V * np.where(r > 0, 1.0 / np.maximum(r, 1e-300), 0.0)) @ V.T


def _nt_scaling(S, Z):
    """Return Winv with Winv S Winv = Z (inverse NT scaling point)."""
    Sh, Sih = _sqrtm_psd(S)
    T = Sh @ Z @ Sh
    Th, Tih = _sqrtm_psd(T)
    Winv = Sih @ Th @ Sih
    return 0.5 * (Winv + Winv.T)


def _max_step(M, dM):
    """Largest alpha in (0, 1] with M + alpha*dM staying PD (0.98 fraction)."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return 0.0
    A = np.linalg.solve(L, np.linalg.solve(L, dM).T).T
    lam = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    if lam >= 0:
        return 1.0
    return min(1.0, -0.98 / lam)


def _ipm(c, blocks, tol=1e-9, max_iter=120):
    nv = c.shape[0]
    if not blocks:
        return OPTIMAL, np.zeros(nv), 0, 0.0, "no constraints"
    if nv == 0:
        feas = all(np.linalg.eigvalsh(F0)[0] >= -1e-10 for F0, _ in blocks)
        return (OPTIMAL if feas else INFEASIBLE), np.zeros(0), 0, 0.0, "constant problem"
    # normalize each block for conditioning (uniform positive factor)
    norm_blocks = []
    for F0, F in blocks:
        s = max(1.0, np.linalg.norm(F0), np.max(np.sqrt(np.einsum("vij,vij->v", F, F))) if nv else 1.0)
        norm_blocks.append((F0 / s, F / s))
    blocks = norm_blocks
    dims = [F0.shape[0] for F0, _ in blocks]
    ntot = sum(dims)
    cnorm = 1.0 + np.linalg.norm(c)

    x = np.zeros(nv)
    S = [np.eye(d) * (1.0 + np.linalg.norm(F0)) for (F0, _), d in zip(blocks, dims)]
    Z = [np.eye(d) for d in dims]

    accept_tol = max(100 * tol, 1e-7)
    best_merit = np.inf
    best_x = x.copy()
    best_gap = np.nan
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        Fx = [F0 + np.tensordot(x, F, axes=1) for F0, F in blocks]
        Rp = [Fxk - Sk for Fxk, Sk in zip(Fx, S)]
        AtZ = np.zeros(nv)
        for (F0, F), Zk in zip(blocks, Z):
            AtZ += np.einsum("vij,ij->v", F, Zk)
        rd = c - AtZ
        gap = sum(float(np.sum(Sk * Zk)) for Sk, Zk in zip(S, Z))
        mu = gap / ntot
        pobj = float(c @ x)
        dobj = -sum(float(np.sum(F0 * Zk)) for (F0, _), Zk in zip(blocks, Z))
        pinf = max(
            np.linalg.norm(R) / (1.0 + np.linalg.norm(F0))
            for R, (F0, _) in zip(Rp, blocks)
        )
        dinf = np.linalg.norm(rd) / cnorm
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        merit = max(pinf, dinf, relgap)
        if merit < best_merit * 0.9:
            best_merit, best_x, best_gap = merit, x.copy(), relgap
            stall = 0
        else:
            stall += 1
        if merit < tol:
            return OPTIMAL, x, it, relgap, ""
        if stall >= 8:
            break  # numerical floor reached; fall through to best iterate

        # primal infeasibility certificate: Z ray with A*(Z)=0, <F0,Z> < 0
        znorm = np.sqrt(sum(np.sum(Zk * Zk) for Zk in Z))
        if znorm > 1e-12:
            ip = sum(float(np.sum(F0 * Zk)) for (F0, _), Zk in zip(blocks, Z)) / znorm
            if np.linalg.norm(AtZ) / znorm < 1e-9 and ip < -1e-9:
                return INFEASIBLE, x, it, relgap, "dual improving ray"

        Winv = [_nt_scaling(Sk, Zk) for Sk, Zk in zip(S, Z)]
        Zinv = []
        for Zk in Z:
            w, V = np.linalg.eigh(Zk)
            Zinv.append((V / np.maximum(w, 1e-300)) @ V.T)

        # Schur complement B_ij = sum_k tr(F_i Winv F_j Winv)
        B = np.zeros((nv, nv))
        Gs = []
        for (F0, F), Wk in zip(blocks, Winv):
            G = np.einsum("ab,vbc,cd->vad", Wk, F, Wk, optimize=True)
            Gs.append(G)
            B += np.tensordot(F, G, axes=([1, 2], [1, 2]))
        B = 0.5 * (B + B.T)
        jitter = 1e-13 * (1.0 + np.trace(B) / max(nv, 1))
        try:
            Lch = np.linalg.cholesky(B + jitter * np.eye(nv))
        except np.linalg.LinAlgError:
            try:
                Lch = np.linalg.cholesky(B + 1e-8 * (1.0 + np.trace(B) / nv) * np.eye(nv))
            except np.linalg.LinAlgError:
                return ILL_CONDITIONED, x, it, relgap, "Schur factorization failed"

        def solve_dir(sigma):
            rhs = -rd.copy()
            for (F0, F), Wk, Zik, Sk, R in zip(blocks, Winv, Zinv, S, Rp):
                X = sigma * mu * Zik - Sk - R
                rhs += np.einsum("vij,ij->v", F, Wk @ X @ Wk)
            dx = np.linalg.solve(Lch.T, np.linalg.solve(Lch, rhs))
            dS = [np.tensordot(dx, F, axes=1) + R for (_, F), R in zip(blocks, Rp)]
            dZ = [
                Wk @ (sigma * mu * Zik - Sk - dSk) @ Wk
                for Wk, Zik, Sk, dSk in zip(Winv, Zinv, S, dS)
            ]
            dZ = [0.5 * (d + d.T) for d in dZ]
            dS = [0.5 * (d + d.T) for d in dS]
            return dx, dS, dZ

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                # predictor
                dx, dS, dZ = solve_dir(0.0)
                ap = min(_max_step(Sk, dSk) for Sk, dSk in zip(S, dS))
                ad = min(_max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ))
                gap_aff = sum(
                    float(np.sum((Sk + ap * dSk) * (Zk + ad * dZk)))
                    for Sk, dSk, Zk, dZk in zip(S, dS, Z, dZ)
                )
                sigma = min(1.0, max((max(gap_aff, 0.0) / gap) ** 3, 1e-4))
                # corrector
                dx, dS, dZ = solve_dir(sigma)
                ap = min(_max_step(Sk, dSk) for Sk, dSk in zip(S, dS))
                ad = min(_max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ))
            if not (
                np.isfinite(dx).all()
                and all(np.isfinite(d).all() for d in dS)
                and all(np.isfinite(d).all() for d in dZ)
            ):
                break
        except (np.linalg.LinAlgError, FloatingPointError):
            break  # numerical breakdown; fall back to the best iterate
        x = x + ap * dx
        S = [Sk + ap * dSk for Sk, dSk in zip(S, dS)]
        Z = [Zk + ad * dZk for Zk, dZk in zip(Z, dZ)]

        # heuristic infeasibility: iterates diverging with stalled residuals
        if np.linalg.norm(x) > 1e12 and best_merit > accept_tol:
            return INFEASIBLE, best_x, it, best_gap, "primal iterates diverging"

    if best_merit < accept_tol:
        return OPTIMAL, best_x, it, best_gap, "converged to numerical floor"
    return MAX_ITERATIONS, best_x, it, best_gap, "no convergence within iteration budget"


# ---------------------------------------------------------------------------
# feasibility phase


def feasibility_margin(problem: SDProblem, t_cap=1.0):
    """Decide strict feasibility of all PSD blocks of `problem`.

    Solves min t subject to (block + t I >= 0 for every block, t >= -t_cap);
    the optimum is (minus) the largest uniform margin, clipped at t_cap.
    Returns (feasible, t_star, result).  `problem` is not mutated.
    """
    aux = SDProblem()
    aux._vars = dict(problem._vars)
    t = aux.scalar_var("_margin_t")
    for expr in problem._lmis:
        aux.add_psd(expr + t.scaled_eye(expr.shape[0]))
    for eq in problem._eqs:
        aux.add_eq(eq)
    aux.add_psd(t + Expr.constant([[t_cap]]))
    aux.minimize(t)
    res = aux.solve()
    t_star = float(res.objective) if res.ok else np.nan
    feasible = res.ok and t_star < -1e-9
    return feasible, t_star, res
