"""State, material, and load containers for bar-and-string dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import BuiltStructure, Topology


@dataclass
class MaterialSpec:
    """Per-member physical data.

    J and J_a are the dimensionless inertia coefficients that scale the bar
    and wheel rotational terms; for a uniform bar with a rim-mounted wheel
    J = m_b/12 and J_a = m_b/12 + m_b r_b^2 / l^2.
    """

    m_b: np.ndarray  # bar masses
    l: np.ndarray  # bar lengths
    r_b: np.ndarray  # wheel radii
    m_s: np.ndarray  # string-node point masses
    k_s: np.ndarray  # string stiffnesses (for gamma -> rest length)
    J: np.ndarray | None = None
    J_a: np.ndarray | None = None

    def __post_init__(self):
        for name in ("m_b", "l", "r_b", "m_s", "k_s"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if self.J is None:
            self.J = self.m_b / 12.0
        else:
            self.J = np.atleast_1d(np.asarray(self.J, dtype=float))
        if self.J_a is None:
            self.J_a = self.m_b / 12.0 + self.m_b * self.r_b**2 / self.l**2
        else:
            self.J_a = np.atleast_1d(np.asarray(self.J_a, dtype=float))
        if np.any(self.m_b <= 0) or np.any(self.l <= 0):
            raise ValueError("bar masses and lengths must be positive")
        if np.any(self.m_s < 0):
            raise ValueError("string node masses must be nonnegative")
        if np.any(self.J_a < self.m_b / 12.0 - 1e-12):
            raise ValueError("wheel inertia below the bare-bar value")


def uniform_material(built: BuiltStructure, bar_mass=1.0, wheel_radius=0.0,
                     string_node_mass=0.1, string_stiffness=1e3) -> MaterialSpec:
    """Material with identical bars/strings; lengths taken from the geometry."""
    t = built.topology
    lengths = np.linalg.norm(built.N0 @ t.C_b.T, axis=0)
    return MaterialSpec(
        m_b=np.full(t.beta, float(bar_mass)),
        l=lengths,
        r_b=np.full(t.beta, float(wheel_radius)),
        m_s=np.full(t.sigma, float(string_node_mass)),
        k_s=np.full(t.alpha, float(string_stiffness)),
    )


@dataclass
class StructureState:
    N: np.ndarray  # 3 x n positions
    N_dot: np.ndarray  # 3 x n velocities
    t: float = 0.0
    omega_w: np.ndarray | None = None  # wheel speeds, one per bar

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=float)
        self.N_dot = np.asarray(self.N_dot, dtype=float)
        if self.omega_w is not None:
            self.omega_w = np.atleast_1d(np.asarray(self.omega_w, dtype=float))

    @classmethod
    def at_rest(cls, N, beta=None):
        N = np.asarray(N, dtype=float)
        omega = np.zeros(beta) if beta is not None else None
        return cls(N=N, N_dot=np.zeros_like(N), t=0.0, omega_w=omega)

    def wheels(self, beta: int) -> np.ndarray:
        if self.omega_w is None:
            return np.zeros(beta)
        return self.omega_w


@dataclass
class Wrench:
    """External loads: applied forces, disturbance forces, wheel torques."""

    W: np.ndarray | None = None  # 3 x n
    W_d: np.ndarray | None = None  # 3 x n disturbance
    tau_B: np.ndarray | None = None  # wheel drive torques, one per bar

    def total_force(self, n_nodes: int) -> np.ndarray:
        out = np.zeros((3, n_nodes))
        if self.W is not None:
            out += self.W
        if self.W_d is not None:
            out += self.W_d
        return out

    def torques(self, beta: int) -> np.ndarray:
        if self.tau_B is None:
            return np.zeros(beta)
        return np.atleast_1d(np.asarray(self.tau_B, dtype=float))

    def omega_w_dot(self, material: MaterialSpec) -> np.ndarray:
        """Wheel accelerations implied by the drive torques."""
        return self.torques(len(material.m_b)) / (material.J_a * material.l**2)


def gravity_wrench(topology: Topology, material: MaterialSpec, g=(0.0, 0.0, -9.81)) -> np.ndarray:
    """Nodal gravity loads: half of each bar mass per end, point masses as-is."""
    g = np.asarray(g, dtype=float)
    W = np.zeros((3, topology.n_nodes))
    for i in range(topology.beta):
        W[:, 2 * i] += 0.5 * material.m_b[i] * g
        W[:, 2 * i + 1] += 0.5 * material.m_b[i] * g
    for j in range(topology.sigma):
        W[:, 2 * topology.beta + j] += material.m_s[j] * g
    return W
