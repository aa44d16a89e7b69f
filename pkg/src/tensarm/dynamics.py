"""Rigid-bar/elastic-string dynamics with joint constraints and spin wheels.

The equations of motion are N_ddot M_s + N K_s = W_T + W_c where M_s is the
constant mass matrix, K_s = C_s^T gamma_hat C_s - C_b^T lambda_hat C_b the
force-density stiffness operator, W_T the applied plus gyroscopic wrench and
W_c the constraint reaction.  Bar force densities lambda follow from the
rigidity condition in closed form; constraint multipliers from a small dense
linear solve.  Everything is exact in gamma, the wheel speeds and the
multipliers, which the control layer exploits as an affine map.

Coordinate stacking convention: vec(N) = [n_x; n_y; n_z] (row-major reshape
of the 3 x n matrix), so the vectorized mass operator is I_3 (x) M_s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .constraints import ConstraintSet, empty_constraints
from .model import MaterialSpec, StructureState, Wrench
from .topology import Topology


class DynamicsError(RuntimeError):
    pass


class ConstraintDegeneracyError(DynamicsError):
    pass


class IntegrationDivergedError(DynamicsError):
    pass


# ---------------------------------------------------------------------------
# vectorization


def vectorize(M: np.ndarray) -> np.ndarray:
    """3 x n matrix -> stacked coordinates [rows of M]."""
    return np.asarray(M, dtype=float).reshape(-1)


def devectorize(v: np.ndarray, n_nodes: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(3, n_nodes)


def mass_operator(M_s: np.ndarray) -> np.ndarray:
    """I_3 (x) M_s, acting on stacked coordinates."""
    return np.kron(np.eye(3), M_s)


# ---------------------------------------------------------------------------
# constant assembly


def assemble_Ms(topology: Topology, material: MaterialSpec) -> np.ndarray:
    """Mass matrix under the [bar nodes | string nodes] ordering."""
    t = topology
    Jt = np.diag(material.J)
    mt = np.diag(material.m_b)
    Cbb, Cr = t.C_bb, t.C_r
    Mb = Cbb.T @ Jt @ Cbb + Cr.T @ mt @ Cr
    Ms = np.zeros((t.n_nodes, t.n_nodes))
    Ms[: 2 * t.beta, : 2 * t.beta] = Mb
    if t.sigma:
        if np.any(material.m_s <= 0):
            raise ValueError("string nodes need positive mass for a nonsingular mass matrix")
        Ms[2 * t.beta :, 2 * t.beta :] = np.diag(material.m_s)
    return Ms


def assemble_Ks(topology: Topology, gamma: np.ndarray, lam: np.ndarray) -> np.ndarray:
    t = topology
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if len(gamma) != t.alpha or len(lam) != t.beta:
        raise ValueError("force density vectors inconsistent with member counts")
    return t.C_s.T @ (gamma[:, None] * t.C_s) - t.C_b.T @ (lam[:, None] * t.C_b)


def _bar_rows(B: np.ndarray, C_b: np.ndarray) -> np.ndarray:
    """Rows m_i = kron(b_i, C_b[i,:]) so that m_i . vec(F) = b_i^T F C_b^T e_i."""
    beta, n = C_b.shape
    return (B.T[:, :, None] * C_b[:, None, :]).reshape(beta, 3 * n)


def _string_cols(S: np.ndarray, C_s: np.ndarray) -> np.ndarray:
    """Columns g_j = vec(s_j C_s[j,:]) so that G_s gamma = vec(S gamma_hat C_s)."""
    alpha, n = C_s.shape
    return (S.T[:, :, None] * C_s[:, None, :]).reshape(alpha, 3 * n).T


def gyro_wrench(state: StructureState, topology: Topology, material: MaterialSpec,
                tau_B=None) -> np.ndarray:
    """Gyroscopic nodal forces of the spinning wheels.

    Per bar i the wheel contributes the force pair +/- J_a,i w_i (b_i x
    b_dot_i) / l_i at the bar ends.  The drive torque acts along b_i, so its
    cross product with the bar vanishes and it produces no nodal force; it
    only accelerates the wheel (tau_B = J_a l^2 omega_w_dot).
    """
    t = topology
    B = state.N @ t.C_b.T
    Bd = state.N_dot @ t.C_b.T
    w = state.wheels(t.beta)
    T = np.cross(B, Bd, axis=0) * (material.J_a * w / material.l)[None, :]
    return T @ t.C_b


def compute_lambda(state: StructureState, topology: Topology, material: MaterialSpec,
                   wrench: Wrench | None, gamma, lagrange=None) -> np.ndarray:
    """Bar force densities enforcing rigidity.

    lambda_i = -J_i ||b_dot_i||^2 / l_i^2
               - (1/2) l_i^-2 b_i^T (W_T + W_c - S gamma_hat C_s) C_b^T e_i
    `lagrange` is the constraint reaction matrix W_c (3 x n), if any.
    """
    t = topology
    wrench = wrench or Wrench()
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    B = state.N @ t.C_b.T
    Bd = state.N_dot @ t.C_b.T
    S = state.N @ t.C_s.T
    F = wrench.total_force(t.n_nodes) + gyro_wrench(state, t, material)
    if lagrange is not None:
        F = F + lagrange
    F = F - (S * gamma[None, :]) @ t.C_s
    linv2 = 1.0 / material.l**2
    lam = -material.J * linv2 * np.einsum("ai,ai->i", Bd, Bd)
    lam -= 0.5 * linv2 * np.einsum("ai,ai->i", B, F @ t.C_b.T)
    return lam


# ---------------------------------------------------------------------------
# compiled system


@dataclass
class ReducedOrder:
    """Null-space coordinates of the constraint manifold."""

    V1: np.ndarray
    V2: np.ndarray
    eta1: np.ndarray
    M2: np.ndarray
    cho_M2: tuple

    @property
    def dim(self) -> int:
        return self.V2.shape[1]

    def to_full(self, eta2: np.ndarray) -> np.ndarray:
        n = self.V2 @ eta2
        if self.eta1.size:
            n = n + self.V1 @ self.eta1
        return n

    def project(self, n_vec: np.ndarray) -> np.ndarray:
        return self.V2.T @ n_vec


def reduce_order(constraints: ConstraintSet, M_s: np.ndarray) -> ReducedOrder:
    V1, V2, eta1 = constraints.V1, constraints.V2, constraints.eta1
    Mcal = mass_operator(M_s)
    M2 = V2.T @ Mcal @ V2
    return ReducedOrder(V1=V1, V2=V2, eta1=eta1, M2=M2, cho_M2=cho_factor(M2))


class StructureSystem:
    """Topology + material + constraints with cached factorizations."""

    def __init__(self, topology: Topology, material: MaterialSpec,
                 constraints: ConstraintSet | None = None):
        self.topology = topology
        self.material = material
        self.constraints = constraints if constraints is not None else empty_constraints(
            topology.n_nodes
        )
        self.Ms = assemble_Ms(topology, material)
        try:
            self._cho = cho_factor(self.Ms)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular mass matrix") from exc
        self._AT = self.constraints.A.T

    # --- linear algebra helpers

    def _minv(self, X: np.ndarray) -> np.ndarray:
        """Apply (I_3 (x) M_s)^-1 to stacked columns."""
        if X.ndim == 1:
            return self._minv(X[:, None])[:, 0]
        n = self.topology.n_nodes
        k = X.shape[1]
        Xr = X.reshape(3, n, k).transpose(1, 0, 2).reshape(n, 3 * k)
        Y = cho_solve(self._cho, Xr)
        return Y.reshape(n, 3, k).transpose(1, 0, 2).reshape(3 * n, k)

    def reduced(self) -> ReducedOrder:
        return reduce_order(self.constraints, self.Ms)

    # --- force assembly

    def _force_pieces(self, state: StructureState, wrench: Wrench | None):
        """State-dependent operators of the affine force map.

        f(gamma, omega_w, omega) = Pi (w_ext + G_w omega_w + A^T omega
                                        - G_s gamma) + c_spin
        with Pi = I - (1/2) M_b^T l^-2 M_b folding the rigidity lambda back
        into the nodal forces.
        """
        t = self.topology
        mat = self.material
        wrench = wrench or Wrench()
        B = state.N @ t.C_b.T
        Bd = state.N_dot @ t.C_b.T
        S = state.N @ t.C_s.T
        Mb = _bar_rows(B, t.C_b)
        Gs = _string_cols(S, t.C_s)
        cross = np.cross(B, Bd, axis=0) * (mat.J_a / mat.l)[None, :]
        Gw = _string_cols(cross, t.C_b)  # same kron layout, bar incidence
        w_ext = vectorize(wrench.total_force(t.n_nodes))
        linv2 = 1.0 / mat.l**2
        lam_spin = -mat.J * linv2 * np.einsum("ai,ai->i", Bd, Bd)
        c_spin = Mb.T @ lam_spin
        return Mb, Gs, Gw, w_ext, c_spin, linv2

    @staticmethod
    def _pi_impl(Mb, linv2, X):
        if X.ndim == 1:
            return X - 0.5 * Mb.T @ (linv2 * (Mb @ X))
        return X - 0.5 * Mb.T @ (linv2[:, None] * (Mb @ X))

    def force_and_multipliers(self, state: StructureState, wrench: Wrench | None, gamma):
        """Total stacked force (including constraint reactions) and omega."""
        t = self.topology
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            Mb, Gs, Gw, w_ext, c_spin, linv2 = self._force_pieces(state, wrench)
            w_gyro = Gw @ state.wheels(t.beta)
            v = w_ext + w_gyro - Gs @ gamma
            f0 = self._pi_impl(Mb, linv2, v) + c_spin
        if not np.isfinite(f0).all():
            raise IntegrationDivergedError("non-finite nodal forces")
        A = self.constraints.A
        if A.shape[0] == 0:
            return f0, np.zeros(0)
        Pi_AT = self._pi_impl(Mb, linv2, self._AT)
        K = A @ self._minv(Pi_AT)
        rhs = -A @ self._minv(f0)
        try:
            omega = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConstraintDegeneracyError("constraint multiplier system singular") from exc
        return f0 + Pi_AT @ omega, omega

    def accelerations(self, state: StructureState, wrench: Wrench | None, gamma):
        f, omega = self.force_and_multipliers(state, wrench, gamma)
        Ndd = devectorize(self._minv(f), self.topology.n_nodes)
        return Ndd, omega

    def lambda_at(self, state: StructureState, wrench: Wrench | None, gamma):
        """Bar force densities consistent with the constrained dynamics."""
        _, omega = self.force_and_multipliers(state, wrench, gamma)
        Wc = devectorize(self.constraints.A.T @ omega, self.topology.n_nodes) \
            if omega.size else None
        return compute_lambda(state, self.topology, self.material, wrench, gamma, Wc)

    def acceleration_affine_map(self, state: StructureState, wrench: Wrench | None = None):
        """Exact affine map vec(N_ddot) = n0 + D_gamma gamma + D_w omega_w.

        Constraint multipliers are eliminated exactly, so A @ (anything in
        the range of this map) = 0 to machine precision.
        """
        t = self.topology
        Mb, Gs, Gw, w_ext, c_spin, linv2 = self._force_pieces(state, wrench)
        A = self.constraints.A

        def solve_all(F):  # F: 3n x k stacked force columns -> accelerations
            if A.shape[0] == 0:
                return self._minv(F)
            Pi_AT = self._pi_impl(Mb, linv2, self._AT)
            Minv_PiAT = self._minv(Pi_AT)
            K = A @ Minv_PiAT
            MinvF = self._minv(F)
            omega = np.linalg.solve(K, -A @ MinvF)
            return MinvF + Minv_PiAT @ omega

        base = self._pi_impl(Mb, linv2, w_ext) + c_spin
        cols = np.hstack([
            base[:, None],
            -self._pi_impl(Mb, linv2, Gs),
            self._pi_impl(Mb, linv2, Gw),
        ])
        acc = solve_all(cols)
        n0 = acc[:, 0]
        D_gamma = acc[:, 1 : 1 + t.alpha]
        D_w = acc[:, 1 + t.alpha :]
        return n0, D_gamma, D_w


def accelerations(state: StructureState, topology: Topology, material: MaterialSpec,
                  wrench: Wrench | None, gamma, constraints: ConstraintSet | None = None):
    """One-shot acceleration evaluation (see StructureSystem for the cached path)."""
    return StructureSystem(topology, material, constraints).accelerations(state, wrench, gamma)


# ---------------------------------------------------------------------------
# integration


def _renormalize(system: StructureSystem, N, Nd):
    """Project bars back to length and strip radial relative velocity."""
    t, mat = system.topology, system.material
    N = N.copy()
    Nd = Nd.copy()
    for i in range(t.beta):
        a, b = 2 * i, 2 * i + 1
        mid = 0.5 * (N[:, a] + N[:, b])
        u = N[:, b] - N[:, a]
        L = np.linalg.norm(u)
        if L == 0.0:
            raise IntegrationDivergedError("bar collapsed to zero length")
        u /= L
        N[:, a] = mid - 0.5 * mat.l[i] * u
        N[:, b] = mid + 0.5 * mat.l[i] * u
        radial = 0.5 * ((Nd[:, b] - Nd[:, a]) @ u) * u
        Nd[:, a] += radial
        Nd[:, b] -= radial
    cs = system.constraints
    if cs.n_rows:
        N = devectorize(cs.project_positions(vectorize(N)), t.n_nodes)
        Nd = devectorize(cs.project_velocities(vectorize(Nd)), t.n_nodes)
    return N, Nd


def step(system: StructureSystem, state: StructureState, gamma, wrench: Wrench | None,
         dt: float, renormalize: bool = True) -> StructureState:
    """Classical fixed-step 4th-order Runge-Kutta advance."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t = system.topology
    mat = system.material
    wrench = wrench or Wrench()
    owd = wrench.omega_w_dot(mat)

    def deriv(N, Nd, ow, tt):
        if not (np.isfinite(N).all() and np.isfinite(Nd).all()):
            raise IntegrationDivergedError(f"non-finite state at t={tt:.6g}")
        st = StructureState(N=N, N_dot=Nd, t=tt, omega_w=ow)
        Ndd, _ = system.accelerations(st, wrench, gamma)
        return Nd, Ndd, owd

    N, Nd, ow, t0 = state.N, state.N_dot, state.wheels(t.beta), state.t
    k1 = deriv(N, Nd, ow, t0)
    k2 = deriv(N + 0.5 * dt * k1[0], Nd + 0.5 * dt * k1[1], ow + 0.5 * dt * k1[2], t0 + 0.5 * dt)
    k3 = deriv(N + 0.5 * dt * k2[0], Nd + 0.5 * dt * k2[1], ow + 0.5 * dt * k2[2], t0 + 0.5 * dt)
    k4 = deriv(N + dt * k3[0], Nd + dt * k3[1], ow + dt * k3[2], t0 + dt)
    N1 = N + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    Nd1 = Nd + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    ow1 = ow + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if not (np.isfinite(N1).all() and np.isfinite(Nd1).all()):
        raise IntegrationDivergedError(f"non-finite state at t={t0 + dt:.6g}")
    if renormalize:
        N1, Nd1 = _renormalize(system, N1, Nd1)
    return StructureState(N=N1, N_dot=Nd1, t=t0 + dt, omega_w=ow1)


@dataclass
class ReducedState:
    eta2: np.ndarray
    eta2_dot: np.ndarray
    t: float
    omega_w: np.ndarray


def reduced_state_from_full(red: ReducedOrder, state: StructureState, beta: int) -> ReducedState:
    return ReducedState(
        eta2=red.project(vectorize(state.N)),
        eta2_dot=red.project(vectorize(state.N_dot)),
        t=state.t,
        omega_w=state.wheels(beta).copy(),
    )


def full_state_from_reduced(red: ReducedOrder, rstate: ReducedState, n_nodes: int) -> StructureState:
    return StructureState(
        N=devectorize(red.to_full(rstate.eta2), n_nodes),
        N_dot=devectorize(red.V2 @ rstate.eta2_dot, n_nodes),
        t=rstate.t,
        omega_w=rstate.omega_w,
    )


def step_reduced(system: StructureSystem, red: ReducedOrder, rstate: ReducedState,
                 gamma, wrench: Wrench | None, dt: float,
                 renormalize: bool = True) -> ReducedState:
    """RK4 in the null-space coordinates eta2 (M2 eta2_ddot = V2^T f)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t = system.topology
    n = t.n_nodes
    wrench = wrench or Wrench()
    owd = wrench.omega_w_dot(system.material)

    def deriv(e2, e2d, ow, tt):
        if not (np.isfinite(e2).all() and np.isfinite(e2d).all()):
            raise IntegrationDivergedError(f"non-finite reduced state at t={tt:.6g}")
        st = StructureState(
            N=devectorize(red.to_full(e2), n),
            N_dot=devectorize(red.V2 @ e2d, n),
            t=tt,
            omega_w=ow,
        )
        f, _ = system.force_and_multipliers(st, wrench, gamma)
        e2dd = cho_solve(red.cho_M2, red.V2.T @ f)
        return e2d, e2dd, owd

    e2, e2d, ow, t0 = rstate.eta2, rstate.eta2_dot, rstate.omega_w, rstate.t
    k1 = deriv(e2, e2d, ow, t0)
    k2 = deriv(e2 + 0.5 * dt * k1[0], e2d + 0.5 * dt * k1[1], ow + 0.5 * dt * k1[2], t0 + 0.5 * dt)
    k3 = deriv(e2 + 0.5 * dt * k2[0], e2d + 0.5 * dt * k2[1], ow + 0.5 * dt * k2[2], t0 + 0.5 * dt)
    k4 = deriv(e2 + dt * k3[0], e2d + dt * k3[1], ow + dt * k3[2], t0 + dt)
    e2_1 = e2 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    e2d_1 = e2d + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    ow1 = ow + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if not (np.isfinite(e2_1).all() and np.isfinite(e2d_1).all()):
        raise IntegrationDivergedError(f"non-finite reduced state at t={t0 + dt:.6g}")
    if renormalize:
        N = devectorize(red.to_full(e2_1), n)
        Nd = devectorize(red.V2 @ e2d_1, n)
        N, Nd = _renormalize(system, N, Nd)
        e2_1 = red.project(vectorize(N))
        e2d_1 = red.project(vectorize(Nd))
    return ReducedState(eta2=e2_1, eta2_dot=e2d_1, t=t0 + dt, omega_w=ow1)


# ---------------------------------------------------------------------------
# prestress


def prestress_gamma(system: StructureSystem, state: StructureState,
                    wrench: Wrench | None = None):
    """Nonnegative force densities holding the state in static equilibrium.

    With no external load the equilibrium set is a cone; the returned gamma
    is then normalized to unit total density.  Returns None when no
    nonnegative equilibrium exists.
    """
    from .optimize import min_norm_nonneg

    n0, D_gamma, _ = system.acceleration_affine_map(state, wrench)
    scale = max(1.0, np.abs(D_gamma).max())
    if np.linalg.norm(n0) < 1e-12 * scale:
        alpha = system.topology.alpha
        return min_norm_nonneg(D_gamma, -n0, extra_row=np.ones(alpha), extra_rhs=1.0)
    return min_norm_nonneg(D_gamma, -n0)
