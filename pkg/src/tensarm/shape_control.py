"""Linear-in-gamma shape regulation.

Because the bar force densities are an affine function of the string force
densities (lambda = Lambda gamma + tau), prescribing second-order error
dynamics E_ddot + E_dot Psi + E Theta = 0 on any selected output Y = L N R
turns into a linear equality Gamma gamma = mu + Upsilon omega_w that is
solved for gamma >= 0 each step.  Velocity and acceleration outputs follow
the same pattern and stack row-wise.  A reduced variant works in the
null-space coordinates of the joint constraints with multipliers eliminated
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dynamics import StructureSystem, ReducedOrder, assemble_Ms, vectorize
from .model import MaterialSpec, StructureState, Wrench
from .optimize import min_norm_nonneg, solve_nnls, solve_nonneg_lp
from .topology import Topology


@dataclass
class LambdaAffineMap:
    Lambda: np.ndarray  # beta x alpha
    tau: np.ndarray  # beta

    def __call__(self, gamma):
        return self.Lambda @ gamma + self.tau


def lambda_affine_map(state: StructureState, topology: Topology, material: MaterialSpec,
                      wrench: Wrench | None = None, lagrange=None) -> LambdaAffineMap:
    """Bar force densities as an affine function of string force densities.

    Lambda_i = (1/2) l_i^-2 b_i^T S hat(C_s C_b^T e_i)
    tau_i    = -J_i l_i^-2 ||b_dot_i||^2
               - (1/2) l_i^-2 b_i^T (W_T + W_c) C_b^T e_i
    `lagrange` is the constraint reaction matrix W_c if present.
    """
    from .dynamics import gyro_wrench

    t = topology
    wrench = wrench or Wrench()
    B = state.N @ t.C_b.T
    Bd = state.N_dot @ t.C_b.T
    S = state.N @ t.C_s.T
    W_eff = wrench.total_force(t.n_nodes) + gyro_wrench(state, t, material)
    if lagrange is not None:
        W_eff = W_eff + lagrange
    linv2 = 1.0 / material.l**2
    Lambda = np.zeros((t.beta, t.alpha))
    tau = np.zeros(t.beta)
    for i in range(t.beta):
        h = t.C_s @ t.C_b[i]  # string membership on bar i's nodes, signed
        Lambda[i] = 0.5 * linv2[i] * (B[:, i] @ S) * h
        tau[i] = (
            -material.J[i] * linv2[i] * (Bd[:, i] @ Bd[:, i])
            - 0.5 * linv2[i] * B[:, i] @ (W_eff @ t.C_b[i])
        )
    return LambdaAffineMap(Lambda=Lambda, tau=tau)


@dataclass
class ShapeObjective:
    """Selected outputs with their targets and PD gains.

    The position block is mandatory; velocity and acceleration blocks are
    enabled by setting their selectors.  Gains right-multiply the error
    matrices (E Theta, E_dot Psi).
    """

    L: np.ndarray  # n_l x 3 coordinate selector
    R: np.ndarray  # n_nodes x n_r node selector
    Y_bar: np.ndarray  # n_l x n_r
    Theta: np.ndarray  # n_r x n_r
    Psi: np.ndarray  # n_r x n_r
    L_v: np.ndarray | None = None
    R_v: np.ndarray | None = None
    Ydot_bar: np.ndarray | None = None
    Psi_v: np.ndarray | None = None
    L_a: np.ndarray | None = None
    R_a: np.ndarray | None = None
    Yddot_bar: np.ndarray | None = None

    def __post_init__(self):
        for M, name in ((self.Theta, "Theta"), (self.Psi, "Psi")):
            M = np.asarray(M, dtype=float)
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(0.5 * (M + M.T))[0] <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")


@dataclass
class ControlSystem:
    Gamma: np.ndarray  # rows x alpha
    mu: np.ndarray  # rows
    Upsilon: np.ndarray  # rows x beta (gyro channel)

    @property
    def rows(self) -> int:
        return self.Gamma.shape[0]


def _common_pieces(state, topology, material, wrench, lagrange):
    t = topology
    wrench = wrench or Wrench()
    B = state.N @ t.C_b.T
    Bd = state.N_dot @ t.C_b.T
    S = state.N @ t.C_s.T
    W_eff = wrench.total_force(t.n_nodes)
    if lagrange is not None:
        W_eff = W_eff + lagrange
    lam_map = lambda_affine_map(state, t, material, wrench, lagrange)
    gyro_cols = np.cross(B, Bd, axis=0) * (material.J_a / material.l)[None, :]  # 3 x beta
    Ms = assemble_Ms(t, material)
    cho = cho_factor(Ms)
    return B, S, W_eff, lam_map, gyro_cols, cho


def _blocks(Lm, Rm, extra_mu, state, topology, material, pieces):
    """Per-column equality blocks shared by all three regulation modes.

    Block i:  (L S hat(a_i) - L B hat(u_i) Lambda) gamma
              = (L W_eff Minv R + extra_mu)e_i + L B hat(u_i) tau
                + (L gyro_cols hat(u_i)) omega_w
    with a_i = C_s Minv R e_i, u_i = C_b Minv R e_i.
    """
    t = topology
    B, S, W_eff, lam_map, gyro_cols, cho = pieces
    Minv_R = cho_solve(cho, Rm)
    LS = Lm @ S
    LB = Lm @ B
    LG = Lm @ gyro_cols
    W_term = Lm @ W_eff @ Minv_R
    n_r = Rm.shape[1]
    G_rows, mu_rows, U_rows = [], [], []
    for i in range(n_r):
        a_i = t.C_s @ Minv_R[:, i]
        u_i = t.C_b @ Minv_R[:, i]
        LBu = LB * u_i
        G_rows.append(LS * a_i - LBu @ lam_map.Lambda)
        mu_rows.append(W_term[:, i] + extra_mu[:, i] + LBu @ lam_map.tau)
        U_rows.append(LG * u_i)
    return ControlSystem(
        Gamma=np.vstack(G_rows), mu=np.concatenate(mu_rows), Upsilon=np.vstack(U_rows)
    )


def position_control_system(state: StructureState, topology: Topology,
                            material: MaterialSpec, objective: ShapeObjective,
                            wrench: Wrench | None = None, lagrange=None) -> ControlSystem:
    pieces = _common_pieces(state, topology, material, wrench, lagrange)
    L, R = objective.L, objective.R
    E = L @ state.N @ R - objective.Y_bar
    Ed = L @ state.N_dot @ R
    extra = Ed @ objective.Psi + E @ objective.Theta
    return _blocks(L, R, extra, state, topology, material, pieces)


def velocity_control_system(state: StructureState, topology: Topology,
                            material: MaterialSpec, objective: ShapeObjective,
                            wrench: Wrench | None = None, lagrange=None) -> ControlSystem:
    if objective.L_v is None:
        raise ValueError("objective has no velocity block")
    pieces = _common_pieces(state, topology, material, wrench, lagrange)
    L, R = objective.L_v, objective.R_v
    Ev = L @ state.N_dot @ R - objective.Ydot_bar
    return _blocks(L, R, Ev @ objective.Psi_v, state, topology, material, pieces)


def acceleration_control_system(state: StructureState, topology: Topology,
                                material: MaterialSpec, objective: ShapeObjective,
                                wrench: Wrench | None = None, lagrange=None) -> ControlSystem:
    if objective.L_a is None:
        raise ValueError("objective has no acceleration block")
    pieces = _common_pieces(state, topology, material, wrench, lagrange)
    L, R = objective.L_a, objective.R_a
    return _blocks(L, R, -objective.Yddot_bar, state, topology, material, pieces)


def stack(*systems: ControlSystem) -> ControlSystem:
    return ControlSystem(
        Gamma=np.vstack([s.Gamma for s in systems]),
        mu=np.concatenate([s.mu for s in systems]),
        Upsilon=np.vstack([s.Upsilon for s in systems]),
    )


def selector_system(L, R, n_nodes):
    """Stacked-coordinate selector: row (i, il) = kron(L[il], R[:, i])."""
    L = np.asarray(L, dtype=float)
    R = np.asarray(R, dtype=float)
    rows = []
    for i in range(R.shape[1]):
        for il in range(L.shape[0]):
            rows.append(np.kron(L[il], R[:, i]))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# exact-elimination and reduced-order controllers


def effective_control_system(system: StructureSystem, state: StructureState,
                             objective: ShapeObjective,
                             wrench: Wrench | None = None) -> ControlSystem:
    """Position regulation with joint multipliers eliminated exactly.

    Identical to position_control_system for unconstrained structures; for
    constrained ones the reaction forces' dependence on gamma and omega_w is
    folded in, so the solved command achieves the prescribed error dynamics
    on the constraint manifold without iteration.
    """
    t = system.topology
    n0, Dg, Dw = system.acceleration_affine_map(state, wrench)
    Phi = selector_system(objective.L, objective.R, t.n_nodes)
    E = objective.L @ state.N @ objective.R - objective.Y_bar
    Ed = objective.L @ state.N_dot @ objective.R
    extra = (Ed @ objective.Psi + E @ objective.Theta).T.reshape(-1)
    return ControlSystem(
        Gamma=-(Phi @ Dg),
        mu=extra + Phi @ n0,
        Upsilon=Phi @ Dw,
    )


@dataclass
class ReducedController:
    Aeq: np.ndarray  # (A - B Lambda) in the paper's notation
    beq: np.ndarray  # B tau + C
    Upsilon: np.ndarray  # wheel-speed channel
    B1: np.ndarray  # disturbance input map script-L V2 M2^-1 V2^T
    G: np.ndarray  # [-Theta -Psi]

    def equality(self, omega_w=None):
        rhs = self.beq
        if omega_w is not None and self.Upsilon.shape[1]:
            rhs = rhs + self.Upsilon @ omega_w
        return self.Aeq, rhs


def reduced_controller(system: StructureSystem, red: ReducedOrder, state: StructureState,
                       Lscript: np.ndarray, n_bar: np.ndarray, Theta: np.ndarray,
                       Psi: np.ndarray, wrench: Wrench | None = None,
                       n_bar_dot=None, n_bar_ddot=None) -> ReducedController:
    """Null-space regulator: solve Aeq gamma = beq + Upsilon omega_w.

    Enforces e_ddot + Psi e_dot + Theta e = 0 for e = Lscript n - n_bar with
    gains acting on the left of the stacked error vector.  The equality is
    exact on the constraint manifold (multipliers eliminated analytically).
    Reference velocity and acceleration, when given, are fed forward so a
    moving target is tracked instead of repeatedly braked against.
    """
    Lscript = np.asarray(Lscript, dtype=float)
    if Lscript.shape[1] != 3 * system.topology.n_nodes:
        raise ValueError("selector width inconsistent with the structure")
    n0, Dg, Dw = system.acceleration_affine_map(state, wrench)
    e = Lscript @ vectorize(state.N) - np.asarray(n_bar, dtype=float)
    edot = Lscript @ vectorize(state.N_dot)
    if n_bar_dot is not None:
        edot = edot - np.asarray(n_bar_dot, dtype=float)
    Aeq = -(Lscript @ Dg)
    beq = Lscript @ n0 + Psi @ edot + Theta @ e
    if n_bar_ddot is not None:
        beq = beq - np.asarray(n_bar_ddot, dtype=float)
    Upsilon = Lscript @ Dw
    Msn = red.V2 @ cho_solve(red.cho_M2, red.V2.T)
    B1 = Lscript @ Msn
    G = np.hstack([-Theta, -Psi])
    return ReducedController(Aeq=Aeq, beq=beq, Upsilon=Upsilon, B1=B1, G=G)


# ---------------------------------------------------------------------------
# command computation


@dataclass
class ControlResult:
    gamma: np.ndarray
    omega_w: np.ndarray | None  # commanded wheel speeds when jointly solved
    status: str  # "optimal" | "fallback"
    residual: float
    objective: float


def compute_control(system: ControlSystem, omega_w=None, policy: str = "min_sum_unique",
                    wheel_channel: bool = False, gamma_max=None,
                    omega_max=None) -> ControlResult:
    """Nonnegative force densities satisfying the control equality.

    policy: "min_sum" (least total density, simplex vertex), "min_sum_unique"
    (same objective value, minimum-norm point of the optimal face — invariant
    under string relabeling and structure symmetries), or "min_norm".
    With wheel_channel=True the wheel speeds become free decision variables
    solved jointly with gamma.  Infeasible equalities fall back to
    nonnegative least squares, flagged in the status.
    """
    Gamma, mu, Ups = system.Gamma, system.mu, system.Upsilon
    alpha = Gamma.shape[1]
    beta = Ups.shape[1]
    if wheel_channel:
        A = np.hstack([Gamma, -Ups, Ups])
        rhs = mu.copy()
        nvar = alpha + 2 * beta
    else:
        A = Gamma
        rhs = mu + (Ups @ omega_w if omega_w is not None and beta else 0.0)
        nvar = alpha
    cost = np.zeros(nvar)
    cost[:alpha] = 1.0
    upper = None
    if gamma_max is not None or (wheel_channel and omega_max is not None):
        upper = np.full(nvar, np.inf)
        if gamma_max is not None:
            upper[:alpha] = gamma_max
        if wheel_channel and omega_max is not None:
            upper[alpha:] = omega_max

    def refine(x):
        # minimal-norm correction on the support to undo basis ill-conditioning
        S = x > 0
        if not S.any():
            return x
        r = rhs - A @ x
        dx, *_ = np.linalg.lstsq(A[:, S], r, rcond=None)
        y = x.copy()
        y[S] = y[S] + dx
        if (y >= 0).all() and np.linalg.norm(A @ y - rhs) < np.linalg.norm(r):
            return y
        return x

    def unpack(x, status, residual, objective):
        w_cmd = x[alpha : alpha + beta] - x[alpha + beta :] if wheel_channel else None
        return ControlResult(
            gamma=x[:alpha], omega_w=w_cmd, status=status, residual=residual,
            objective=objective,
        )

    try:
        if policy == "min_norm":
            x = min_norm_nonneg(A, rhs)
            if x is not None:
                x = refine(x)
                return unpack(x, "optimal", float(np.linalg.norm(A @ x - rhs)),
                              float(cost @ x))
        else:
            lp = solve_nonneg_lp(A, rhs, cost, upper=upper)
            if lp.ok:
                x = lp.x
                if policy == "min_sum_unique":
                    polished = min_norm_nonneg(A, rhs, extra_row=cost, extra_rhs=lp.objective)
                    if polished is not None and np.linalg.norm(A @ polished - rhs) <= max(
                        1e-9, 3.0 * lp.residual
                    ):
                        x = polished
                x = refine(x)
                resid = float(np.linalg.norm(A @ x - rhs))
                if resid > 1e-9 * (1.0 + np.linalg.norm(rhs)):
                    # ill-conditioned vertex basis: a least-squares point that
                    # actually meets the equality beats the optimal objective
                    rescue = solve_nnls(A, rhs)
                    if rescue.residual < resid:
                        x, resid = rescue.x, rescue.residual
                return unpack(x, "optimal", resid, float(cost @ x))
    except (RuntimeError, np.linalg.LinAlgError):
        pass  # degenerate equality (rank drop mid-trajectory): use the fallback

    res = solve_nnls(A, rhs)
    return unpack(res.x, "fallback", res.residual, float(cost @ res.x))


def rest_lengths(gamma, lengths, stiffness):
    """Hookean rest lengths realizing the given force densities."""
    gamma = np.asarray(gamma, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    stiffness = np.asarray(stiffness, dtype=float)
    return lengths * stiffness / (stiffness + gamma * lengths)
