"""Feedback gain synthesis with linear matrix inequalities.

The reduced shape-error dynamics close into the first-order system

    x_dot = (A_p + B_p G) x + B_cl w,    y = C x,

with x = [e; e_dot], the double-integrator blocks A_p = [[0, I], [0, 0]],
B_p = [[0], [I]], disturbance input B_cl = [[0], [B1]] and gain
G = [-Theta  -Psi].  Each synthesis routine poses a small dense semidefinite
program whose feasibility certifies a bound on one disturbance-to-output
gain; the returned certificate matrices let the bound be re-verified by a
direct eigenvalue check on the original matrix inequalities.

The decision variables are kept inside a trust region (delta*I <= Q <= rho*I
and ||R|| <= rho) because the unconstrained infimum over feedback gains is
typically not attained: ever larger gains keep shrinking the certified
bound.  Any finite solution inside the region is still a sound certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optimize import SDProblem, Expr, block, feasibility_margin
from .optimize.sdp import OPTIMAL

_trapz = getattr(np, "trapezoid", None) or np.trapz

ENERGY_TO_PEAK = "energy_to_peak"
ENERGY_TO_ENERGY = "energy_to_energy"
IMPULSE_TO_ENERGY = "impulse_to_energy"
COVARIANCE = "covariance"
STABILIZING = "stabilizing"


class SynthesisError(RuntimeError):
    """SDP solve failed (iteration budget, conditioning)."""


class InfeasibleError(SynthesisError):
    """The requested bound admits no certificate."""


# ---------------------------------------------------------------------------
# problem / result containers


@dataclass
class GainProblem:
    """Closed-loop data x_dot = (A_p + B_p G) x + B_cl w, y = C x.

    Constructed from the acceleration-level disturbance map B1 (the default
    builds the double-integrator companion form), or from explicit system
    matrices for generic second-order-free tests.  C defaults to [I 0],
    the position-error half of the state.
    """

    B1: np.ndarray = None
    C: np.ndarray = None
    W: np.ndarray = None  # white-noise intensity, covariance synthesis only
    A_p: np.ndarray = None
    B_p: np.ndarray = None
    B_cl: np.ndarray = None

    def __post_init__(self):
        self.companion = False
        if self.B1 is not None:
            self.B1 = np.atleast_2d(np.asarray(self.B1, dtype=float))
            m = self.B1.shape[0]
            if self.A_p is None:
                Z, I = np.zeros((m, m)), np.eye(m)
                self.A_p = np.block([[Z, I], [Z, Z]])
                self.B_p = np.vstack([Z, I])
                self.companion = True
            if self.B_cl is None:
                self.B_cl = np.vstack([np.zeros_like(self.B1), self.B1])
        if self.A_p is None:
            raise ValueError("provide B1 or explicit A_p/B_p/B_cl")
        self.A_p = np.atleast_2d(np.asarray(self.A_p, dtype=float))
        self.B_p = np.atleast_2d(np.asarray(self.B_p, dtype=float))
        self.B_cl = np.atleast_2d(np.asarray(self.B_cl, dtype=float))
        n = self.A_p.shape[0]
        if self.A_p.shape != (n, n):
            raise ValueError("A_p must be square")
        if self.B_p.shape[0] != n or self.B_cl.shape[0] != n:
            raise ValueError("B_p and B_cl must have as many rows as A_p")
        if self.C is None:
            if self.companion:
                m = n // 2
                self.C = np.hstack([np.eye(m), np.zeros((m, m))])
            else:
                self.C = np.eye(n)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if self.C.shape[1] != n:
            raise ValueError("C must have as many columns as states")
        if self.W is not None:
            self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
            nw = self.B_cl.shape[1]
            if self.W.shape != (nw, nw):
                raise ValueError("noise intensity must match disturbance width")

    @classmethod
    def from_controller(cls, controller, C=None, W=None):
        """Build from a reduced controller's disturbance input map B1."""
        return cls(B1=controller.B1, C=C, W=W)

    @property
    def n_states(self) -> int:
        return self.A_p.shape[0]

    def closed_loop(self, G) -> np.ndarray:
        return self.A_p + self.B_p @ G


@dataclass
class GainResult:
    kind: str
    status: str
    G: np.ndarray
    epsilon: float = None  # certified gain bound (None for covariance/stabilizing)
    Theta: np.ndarray = None
    Psi: np.ndarray = None
    certificates: dict = field(default_factory=dict)
    margins: list = field(default_factory=list)
    iterations: int = 0
    objective: float = np.nan

    @property
    def theta_sym(self):
        return None if self.Theta is None else 0.5 * (self.Theta + self.Theta.T)

    @property
    def psi_sym(self):
        return None if self.Psi is None else 0.5 * (self.Psi + self.Psi.T)

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else np.nan


def _sym(M):
    return M + M.T


def certificate_blocks(problem: GainProblem, result: GainResult):
    """Numeric re-substitution of (G, certificates) into the source matrix
    inequalities.  Every returned block must be PSD (strict blocks carry a
    positive margin from the synthesis); inequality directions are already
    sign-adjusted."""
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    G = result.G
    Acl = problem.closed_loop(G)
    c = result.certificates
    nw, p = Bcl.shape[1], C.shape[0]
    if result.kind == ENERGY_TO_PEAK:
        Q = c["Q"]
        eps_sq = c["epsilon_sq"]
        m1 = np.block([[eps_sq * np.eye(p), C @ Q], [Q @ C.T, Q]])
        m2 = np.block([[_sym(Acl @ Q), Bcl], [Bcl.T, -np.eye(nw)]])
        return [m1, -m2]
    if result.kind == ENERGY_TO_ENERGY:
        Y = c["Y"]
        eps = result.epsilon
        zero = np.zeros((nw, p))
        m = np.block([
            [_sym(Acl @ Y), Bcl, Y @ C.T],
            [Bcl.T, -eps**2 * np.eye(nw), zero],
            [C @ Y, zero.T, -np.eye(p)],
        ])
        return [Y, -m]
    if result.kind == IMPULSE_TO_ENERGY:
        Y = c["Y"]
        eps_sq = c["epsilon_sq"]
        m1 = np.block([[eps_sq * np.eye(nw), Bcl.T], [Bcl, Y]])
        m2 = np.block([[_sym(Acl @ Y), Y @ C.T], [C @ Y, -np.eye(p)]])
        return [m1, -m2]
    if result.kind == COVARIANCE:
        X = c["X"]
        Y_bar = c["Y_bar"]
        Winv = np.linalg.inv(problem.W)
        m1 = np.block([[Y_bar, C @ X], [X @ C.T, X]])
        m2 = np.block([[_sym(Acl @ X), Bcl], [Bcl.T, -Winv]])
        return [m1, -m2]
    if result.kind == STABILIZING:
        X = c["X"]
        return [X, -_sym(Acl @ X)]
    raise ValueError(f"unknown bound kind {result.kind!r}")


def _package(problem, kind, status, G, epsilon, certs, res):
    Theta = Psi = None
    if problem.companion:
        m = problem.B_p.shape[1]
        Theta, Psi = -G[:, :m], -G[:, m:]
    result = GainResult(
        kind=kind,
        status=status,
        G=G,
        epsilon=epsilon,
        Theta=Theta,
        Psi=Psi,
        certificates=certs,
        iterations=res.iterations,
        objective=res.objective,
    )
    result.margins = [
        float(np.linalg.eigvalsh(M)[0]) for M in certificate_blocks(problem, result)
    ]
    return result


def _gain_from(R, Q):
    """G = R Q^{-1} without forming the inverse."""
    return np.linalg.solve(Q.T, R.T).T


def _hurwitz(A) -> bool:
    return bool(np.real(np.linalg.eigvals(A)).max() < 0.0)


def _lyap(A, RHS):
    """Solve A X + X A^T + RHS = 0 for symmetric RHS (A Hurwitz, dense)."""
    n = A.shape[0]
    K = np.kron(A, np.eye(n)) + np.kron(np.eye(n), A)
    X = np.linalg.solve(K, -RHS.reshape(-1)).reshape(n, n)
    return 0.5 * (X + X.T)


def _usable_gain(problem, res, R_name, Q_name, what):
    """Extract G from an SDP iterate, insisting on a stable closed loop.

    The minimization problems push against the trust region where the
    interior-point iteration can stall short of full tolerance; the iterate's
    gain is still usable because the certificate is rebuilt exactly from
    Lyapunov equations afterwards.
    """
    if res.status == "infeasible":
        raise InfeasibleError(f"{what}: {res.message or 'infeasible'}")
    Qv, Rv = res.value(Q_name), res.value(R_name)
    if not (np.isfinite(Qv).all() and np.isfinite(Rv).all()):
        raise SynthesisError(f"{what}: solver status {res.status} ({res.message})")
    try:
        G = _gain_from(Rv, Qv)
    except np.linalg.LinAlgError:
        raise SynthesisError(f"{what}: singular certificate iterate") from None
    if not (np.isfinite(G).all() and _hurwitz(problem.closed_loop(G))):
        _require_optimal(res, what)
        raise SynthesisError(f"{what}: returned gain does not stabilize")
    return G


def _trust_region(prob, R, m, n, rho):
    # ||R|| <= rho via a Schur block; the Q/Y/X cap is added by the caller
    prob.add_psd(block([[rho * np.eye(m), R], [R.T, rho * np.eye(n)]]))


def _require_optimal(res, what):
    if res.status == OPTIMAL:
        return
    if res.status == "infeasible":
        raise InfeasibleError(f"{what}: {res.message or 'infeasible'}")
    raise SynthesisError(f"{what}: solver status {res.status} ({res.message})")


# ---------------------------------------------------------------------------
# synthesis routines


def _bisect_min_level(feas_fn, rel_tol, hi0=1.0, eps_max=1e10, what=""):
    """Smallest certified level by bisection over feasibility solves."""
    hi = hi0
    feasible, _, res = feas_fn(hi)
    while not feasible:
        hi *= 10.0
        if hi > eps_max:
            raise InfeasibleError(f"{what}: no certificate found")
        feasible, _, res = feas_fn(hi)
    eps_star, res_star = hi, res
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        feasible, _, res = feas_fn(mid)
        if feasible:
            hi, eps_star, res_star = mid, mid, res
        else:
            lo = mid
    return eps_star, res_star


def _ep_feasibility(problem, eps_sq, delta, rho):
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n, m = A.shape[0], Bp.shape[1]
    nw, p = Bcl.shape[1], C.shape[0]
    prob = SDProblem()
    Q = prob.sym_var("Q", n)
    R = prob.var("R", m, n)
    CQ = C @ Q
    prob.add_psd(block([[eps_sq * np.eye(p), CQ], [CQ.T, Q]]) - delta * np.eye(p + n))
    lin = (A @ Q + Bp @ R).sym()
    prob.add_nsd(block([[lin, Bcl], [Bcl.T, -np.eye(nw)]]) + delta * np.eye(n + nw))
    prob.add_psd(rho * np.eye(n) - Q)
    _trust_region(prob, R, m, n, rho)
    return feasibility_margin(prob)


def synth_energy_to_peak(problem: GainProblem, delta=1e-8, rho=1e2,
                         peak_sq_max=None, rel_tol=1e-3) -> GainResult:
    """Minimize the certified finite-energy-disturbance-to-peak-output gain.

    The certified `epsilon` bounds sup_t ||y(t)|| over all disturbances of
    unit energy; the matrix-inequality scalar bounds its square and is kept
    in the certificates as `epsilon_sq`.  `peak_sq_max` optionally caps that
    scalar, which is how a bar-length error budget composes in (see
    `bar_length_bound`).  The gain level is located by bisection over
    feasibility solves, then the certificate is rebuilt exactly around the
    found gain.
    """
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n = A.shape[0]

    def feas(eps):
        return _ep_feasibility(problem, eps**2, delta, rho)

    _, res = _bisect_min_level(feas, rel_tol, what="energy-to-peak synthesis")
    G = _usable_gain(problem, res, "R", "Q", "energy-to-peak synthesis")
    # rebuild an exact strictly-feasible certificate around the found gain
    Acl = problem.closed_loop(G)
    Qc = _lyap(Acl, Bcl @ Bcl.T + delta * np.eye(n))
    eps_sq = float(np.linalg.norm(C @ Qc @ C.T, ord=2)) + delta
    if peak_sq_max is not None and eps_sq > float(peak_sq_max) + delta:
        raise InfeasibleError(
            f"energy-to-peak synthesis: certified peak {eps_sq:.3e} exceeds the budget")
    certs = {"Q": Qc, "R": G @ Qc, "epsilon_sq": eps_sq}
    return _package(problem, ENERGY_TO_PEAK, res.status, G, float(np.sqrt(eps_sq)), certs, res)


def _ee_feasibility(problem, epsilon, delta, rho):
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n, m = A.shape[0], Bp.shape[1]
    nw, p = Bcl.shape[1], C.shape[0]
    prob = SDProblem()
    Y = prob.sym_var("Y", n)
    L = prob.var("L", m, n)
    prob.add_psd(Y - delta * np.eye(n))
    prob.add_psd(rho * np.eye(n) - Y)
    _trust_region(prob, L, m, n, rho)
    lin = (A @ Y + Bp @ L).sym()
    zero = np.zeros((nw, p))
    big = block([
        [lin, Bcl, Y @ C.T],
        [Bcl.T, -(epsilon**2) * np.eye(nw), zero],
        [C @ Y, zero.T, -np.eye(p)],
    ])
    prob.add_nsd(big + delta * np.eye(n + nw + p))
    return feasibility_margin(prob)


def synth_energy_to_energy(problem: GainProblem, epsilon=None, rel_tol=1e-4,
                           delta=1e-8, rho=1e2, eps_max=1e10) -> GainResult:
    """Certify an energy-to-energy (worst-case frequency response) bound.

    With `epsilon` given, solve the feasibility problem at that level and
    fail if no certificate exists.  With `epsilon=None`, bisect on the level
    to relative tolerance `rel_tol` and return the smallest certified one.
    """
    if epsilon is not None:
        feasible, _, res = _ee_feasibility(problem, float(epsilon), delta, rho)
        if not feasible:
            raise InfeasibleError(
                f"no energy-to-energy certificate at epsilon={epsilon:g}")
        eps_star, res_star = float(epsilon), res
    else:
        hi = 1.0
        feasible, _, res = _ee_feasibility(problem, hi, delta, rho)
        while not feasible:
            hi *= 10.0
            if hi > eps_max:
                raise InfeasibleError("no energy-to-energy certificate found")
            feasible, _, res = _ee_feasibility(problem, hi, delta, rho)
        eps_star, res_star = hi, res
        lo = 0.0
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            feasible, _, res = _ee_feasibility(problem, mid, delta, rho)
            if feasible:
                hi, eps_star, res_star = mid, mid, res
            else:
                lo = mid
    Yv, Lv = res_star.value("Y"), res_star.value("L")
    G = _gain_from(Lv, Yv)
    certs = {"Y": Yv, "L": Lv}
    return _package(problem, ENERGY_TO_ENERGY, res_star.status, G, eps_star, certs, res_star)


def _ie_feasibility(problem, eps_sq, delta, rho):
    # scaled variable Z = eps^2 * Y keeps the blocks order-one at small
    # levels; G = R Z^{-1} is unchanged by the scaling
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n, m = A.shape[0], Bp.shape[1]
    nw, p = Bcl.shape[1], C.shape[0]
    prob = SDProblem()
    Z = prob.sym_var("Y", n)
    R = prob.var("R", m, n)
    prob.add_psd(block([[np.eye(nw), Bcl.T], [Bcl, Z]]) - delta * np.eye(nw + n))
    lin = (A @ Z + Bp @ R).sym()
    ZCt = Z @ C.T
    prob.add_nsd(block([[lin, ZCt], [ZCt.T, -eps_sq * np.eye(p)]]) + delta * np.eye(n + p))
    prob.add_psd(rho * np.eye(n) - Z)
    _trust_region(prob, R, m, n, rho)
    return feasibility_margin(prob)


def synth_impulse_to_energy(problem: GainProblem, delta=1e-8, rho=1e2,
                            rel_tol=1e-3) -> GainResult:
    """Minimize the certified impulsive-disturbance-to-output-energy gain.

    `epsilon` bounds ||y||_L2 over unit impulse directions; the
    matrix-inequality scalar bounds its square (kept as `epsilon_sq`).
    Bisection over feasibility solves locates the level; the certificate is
    rebuilt exactly around the found gain.
    """
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n = A.shape[0]

    def feas(eps):
        return _ie_feasibility(problem, eps**2, delta, rho)

    _, res = _bisect_min_level(feas, rel_tol, what="impulse-to-energy synthesis")
    G = _usable_gain(problem, res, "R", "Y", "impulse-to-energy synthesis")
    Acl = problem.closed_loop(G)
    P = _lyap(Acl.T, C.T @ C + delta * np.eye(n))
    Yc = np.linalg.inv(P)
    Yc = 0.5 * (Yc + Yc.T)
    eps_sq = float(np.linalg.norm(Bcl.T @ P @ Bcl, ord=2)) + delta
    certs = {"Y": Yc, "P": P, "R": G @ Yc, "epsilon_sq": eps_sq}
    return _package(problem, IMPULSE_TO_ENERGY, res.status, G, float(np.sqrt(eps_sq)), certs, res)


def synth_covariance(problem: GainProblem, Y_bar, delta=1e-8, rho=1e2) -> GainResult:
    """Bound the stationary output covariance under white noise.

    Requires `problem.W` (noise intensity).  Certifies C X C^T < Y_bar for
    the stationary state covariance X of the closed loop.
    """
    if problem.W is None:
        raise ValueError("covariance synthesis needs the noise intensity W")
    Y_bar = np.atleast_2d(np.asarray(Y_bar, dtype=float))
    A, Bp, Bcl, C = problem.A_p, problem.B_p, problem.B_cl, problem.C
    n, m = A.shape[0], Bp.shape[1]
    nw, p = Bcl.shape[1], C.shape[0]
    if Y_bar.shape != (p, p):
        raise ValueError("output covariance bound must be square, output-sized")
    Winv = np.linalg.inv(problem.W)
    prob = SDProblem()
    X = prob.sym_var("X", n)
    R = prob.var("R", m, n)
    CX = C @ X
    prob.add_psd(block([[Y_bar, CX], [CX.T, X]]) - delta * np.eye(p + n))
    lin = (A @ X + Bp @ R).sym()
    prob.add_nsd(block([[lin, Bcl], [Bcl.T, -Winv]]) + delta * np.eye(n + nw))
    prob.add_psd(rho * np.eye(n) - X)
    _trust_region(prob, R, m, n, rho)
    feasible, _, res = feasibility_margin(prob)
    G = None
    if feasible:
        try:
            G = _usable_gain(problem, res, "R", "X", "covariance synthesis")
        except SynthesisError:
            G = None
    if G is None:
        # margin solve gave nothing usable; any stabilizing gain may still
        # meet the bound, checked exactly below
        G = synth_stabilizing(problem, delta=delta, rho=rho).G
    Acl = problem.closed_loop(G)
    Xc = _lyap(Acl, Bcl @ problem.W @ Bcl.T + delta * np.eye(n))
    gap = float(np.linalg.eigvalsh(Y_bar - C @ Xc @ C.T)[0])
    if gap <= 0.0:
        raise InfeasibleError(
            f"no covariance certificate at the requested bound (short by {-gap:.3e})")
    certs = {"X": Xc, "R": G @ Xc, "Y_bar": Y_bar}
    return _package(problem, COVARIANCE, res.status, G, None, certs, res)


def synth_stabilizing(problem: GainProblem, delta=1e-8, rho=1e2) -> GainResult:
    """Find any gain rendering the closed loop Hurwitz (Lyapunov feasibility)."""
    A, Bp = problem.A_p, problem.B_p
    n, m = A.shape[0], Bp.shape[1]
    prob = SDProblem()
    X = prob.sym_var("X", n)
    R = prob.var("R", m, n)
    prob.add_psd(X - delta * np.eye(n))
    prob.add_psd(rho * np.eye(n) - X)
    _trust_region(prob, R, m, n, rho)
    prob.add_nsd((A @ X + Bp @ R).sym() + delta * np.eye(n))
    feasible, _, res = feasibility_margin(prob)
    if not feasible:
        raise InfeasibleError("no stabilizing gain exists (uncontrollable unstable modes?)")
    Xv, Rv = res.value("X"), res.value("R")
    G = _gain_from(Rv, Xv)
    certs = {"X": Xv, "R": Rv}
    return _package(problem, STABILIZING, res.status, G, None, certs, res)


# ---------------------------------------------------------------------------
# bar-length error budget


@dataclass
class BarLengthBound:
    """Peak budget translation for one bar.

    If the bar-end position error y satisfies sup_t y^T y < eps_bar then the
    bar length error z = y^T y + 2 b_bar^T y stays below eps_b; eps_bar is
    the largest such budget, so it can cap `peak_sq_max` in
    `synth_energy_to_peak` with output rows picking y.
    """

    eps_bar: float
    kappa: float
    eps_b: float
    b_bar: np.ndarray
    margin: float
    iterations: int

    @property
    def lam(self) -> float:
        # multiplier of the implication certificate in its 1/kappa form
        return np.inf if self.kappa == 0 else 1.0 / self.kappa

    def certificate_block(self) -> np.ndarray:
        d = self.b_bar.size
        b = self.b_bar.reshape(d, 1)
        corner = np.array([[self.kappa * self.eps_b - self.eps_bar]])
        return np.block([
            [(1.0 - self.kappa) * np.eye(d), -self.kappa * b],
            [-self.kappa * b.T, corner],
        ])


def bar_length_bound(b_bar, eps_b, tol=1e-9) -> BarLengthBound:
    """Largest eps_bar with (y^T y < eps_bar) implying (y^T y + 2 b_bar^T y < eps_b)."""
    eps_b = float(eps_b)
    if eps_b <= 0:
        raise ValueError("bar length error budget must be positive")
    b = np.asarray(b_bar, dtype=float).reshape(-1, 1)
    d = b.shape[0]
    prob = SDProblem()
    kappa = prob.scalar_var("kappa")
    ebar = prob.scalar_var("ebar")
    prob.add_psd(kappa)
    top_right = -((kappa @ b.T).T)
    corner = eps_b * kappa - ebar
    prob.add_psd(block([[np.eye(d) - kappa.scaled_eye(d), top_right],
                        [top_right.T, corner]]))
    prob.maximize(ebar)
    res = prob.solve(tol=tol)
    _require_optimal(res, "bar length budget")
    kv = max(float(res.value("kappa")[0, 0]), 0.0)
    ev = float(res.value("ebar")[0, 0])
    out = BarLengthBound(eps_bar=ev, kappa=kv, eps_b=eps_b, b_bar=b.ravel(),
                         margin=0.0, iterations=res.iterations)
    out.margin = float(np.linalg.eigvalsh(out.certificate_block())[0])
    return out


# ---------------------------------------------------------------------------
# empirical gains from simulation traces


def empirical_gains(t, y, w=None, w0=None) -> dict:
    """Measured disturbance-to-output gains from a sampled trace.

    t: sample times; y: outputs (samples x dims); w: sampled finite-energy
    disturbance (enables energy_to_peak and energy_to_energy); w0: impulse
    direction vector (enables impulse_to_energy).  Norms use trapezoid
    quadrature on the trace.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if t.ndim != 1 or y.shape[0] != t.size:
        raise ValueError("y must have one row per sample time")
    y_sq = np.einsum("ij,ij->i", y, y)
    y_peak = float(np.sqrt(y_sq.max()))
    y_l2 = float(np.sqrt(_trapz(y_sq, t)))
    gains = {}
    if w is not None:
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape[0] != t.size:
            raise ValueError("w must have one row per sample time")
        w_l2 = float(np.sqrt(_trapz(np.einsum("ij,ij->i", w, w), t)))
        if w_l2 <= 0.0:
            raise ValueError("disturbance record has zero energy")
        gains[ENERGY_TO_PEAK] = y_peak / w_l2
        gains[ENERGY_TO_ENERGY] = y_l2 / w_l2
    if w0 is not None:
        w0_norm = float(np.linalg.norm(np.asarray(w0, dtype=float)))
        if w0_norm <= 0.0:
            raise ValueError("impulse direction has zero norm")
        gains[IMPULSE_TO_ENERGY] = y_l2 / w0_norm
    if not gains:
        raise ValueError("supply a disturbance record (w) or impulse direction (w0)")
    return gains
