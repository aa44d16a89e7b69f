"""Independent numerical cross-checks.

Each check recomputes a quantity the library produces through an unrelated
route (direct formula, exhaustive enumeration, eigenvalue test, conserved
quantity) and reports the worst observed residual.  The CLI `verify` verb
runs all of them and prints one line per check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import structure_constraints
from .dynamics import (
    StructureSystem,
    compute_lambda,
    full_state_from_reduced,
    reduced_state_from_full,
    step,
    step_reduced,
    vectorize,
)
from .model import MaterialSpec, StructureState, Wrench, gravity_wrench, uniform_material
from .shape_control import lambda_affine_map
from .topology import Topology, build_tbar


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual < self.tolerance


def random_class1(rng, beta_max=5, alpha_max=10):
    """Random connectivity with private bar nodes (no joints)."""
    beta = int(rng.integers(1, beta_max + 1))
    sigma = int(rng.integers(1, 4))
    n = 2 * beta + sigma
    C_b = np.zeros((beta, n))
    for i in range(beta):
        C_b[i, 2 * i], C_b[i, 2 * i + 1] = -1.0, 1.0
    pairs = set()
    max_pairs = n * (n - 1) // 2
    alpha = int(rng.integers(1, min(alpha_max, max_pairs) + 1))
    rows = []
    while len(rows) < alpha:
        i, j = rng.choice(n, size=2, replace=False)
        key = (min(i, j), max(i, j))
        if key in pairs:
            continue
        pairs.add(key)
        row = np.zeros(n)
        row[key[0]], row[key[1]] = -1.0, 1.0
        rows.append(row)
    C_s = np.vstack(rows)
    topo = Topology(beta=beta, alpha=len(rows), sigma=sigma, C_b=C_b, C_s=C_s)
    N = rng.normal(size=(3, n))
    lengths = np.linalg.norm(N @ C_b.T, axis=0)
    mat = MaterialSpec(
        m_b=rng.uniform(0.5, 3.0, beta),
        l=lengths,
        r_b=rng.uniform(0.0, 0.4, beta),
        m_s=rng.uniform(0.1, 1.0, sigma),
        k_s=np.ones(len(rows)),
    )
    st = StructureState(
        N=N, N_dot=rng.normal(size=(3, n)), omega_w=rng.normal(size=beta) * 5.0
    )
    return topo, mat, st


def check_lambda_equivalence(trials=100, seed=42, tol=1e-10) -> CheckResult:
    """Affine multiplier map vs the direct per-state formula."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        topo, mat, st = random_class1(rng)
        wrench = Wrench(W=rng.normal(size=(3, topo.n_nodes)))
        Wc = rng.normal(size=(3, topo.n_nodes))
        amap = lambda_affine_map(st, topo, mat, wrench, lagrange=Wc)
        gamma = rng.uniform(0.0, 3.0, topo.alpha)
        direct = compute_lambda(st, topo, mat, wrench, gamma, lagrange=Wc)
        scale = max(1.0, np.abs(direct).max())
        worst = max(worst, np.abs(amap(gamma) - direct).max() / scale)
    return CheckResult("lambda map vs direct formula", worst, tol)


def check_reduced_fidelity(steps=1000, tol=1e-8) -> CheckResult:
    """Full constrained integration vs minimal-coordinate integration."""
    built = build_tbar(0.6, 2.0)
    mat = uniform_material(built, bar_mass=1.0)
    cs = structure_constraints(built, pinned_points=[built.params["end_points"][0]])
    sys_ = StructureSystem(built.topology, mat, cs)
    red = sys_.reduced()
    gamma = np.full(built.topology.alpha, 0.5)
    wrench = Wrench(W=gravity_wrench(built.topology, mat, (0.0, 0.0, -1.0)))
    st = StructureState.at_rest(built.N0, beta=built.topology.beta)
    rst = reduced_state_from_full(red, st, built.topology.beta)
    worst = 0.0
    for _ in range(steps):
        st = step(sys_, st, gamma, wrench, dt=2e-3)
        rst = step_reduced(sys_, red, rst, gamma, wrench, dt=2e-3)
        worst = max(worst, cs.residual(vectorize(st.N)))
    st_red = full_state_from_reduced(red, rst, built.n_nodes)
    worst = max(worst, float(np.abs(st.N - st_red.N).max()))
    worst = max(worst, float(np.abs(st.N_dot - st_red.N_dot).max()))
    return CheckResult("reduced vs full integration", worst, tol)


def _momenta(N, Nd, Ms):
    lin = Nd @ Ms @ np.ones(Ms.shape[0])
    ang = np.zeros(3)
    for a in range(Ms.shape[0]):
        for b in range(Ms.shape[0]):
            ang += Ms[a, b] * np.cross(N[:, a], Nd[:, b])
    return lin, ang


def check_momentum_conservation(steps=10000, tol=1e-9) -> CheckResult:
    """Free rigid bar: linear and angular momentum drift over a long run."""
    C_b = np.array([[-1.0, 1.0]])
    topo = Topology(beta=1, alpha=0, sigma=0, C_b=C_b, C_s=np.zeros((0, 2)))
    mat = MaterialSpec(m_b=[2.0], l=[2.0], r_b=[0.0], m_s=[], k_s=[])
    sys_ = StructureSystem(topo, mat)
    N = np.array([[-1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    Nd = np.array([[0.1, 0.1], [-0.4, 0.6], [0.2, -0.1]])
    u = (N[:, 1] - N[:, 0]) / 2.0
    rel = (Nd[:, 1] - Nd[:, 0]) @ u / (u @ u)
    Nd[:, 1] -= 0.5 * rel * u
    Nd[:, 0] += 0.5 * rel * u
    st = StructureState(N=N, N_dot=Nd)
    lin0, ang0 = _momenta(N, Nd, sys_.Ms)
    for _ in range(steps):
        st = step(sys_, st, np.zeros(0), Wrench(), dt=2e-3)
    lin1, ang1 = _momenta(st.N, st.N_dot, sys_.Ms)
    drift = max(
        float(np.abs(lin1 - lin0).max()) / max(1.0, np.abs(lin0).max()),
        float(np.abs(ang1 - ang0).max()) / max(1.0, np.abs(ang0).max()),
    )
    return CheckResult("free bar momentum conservation", drift, tol)


def check_lp_oracle(trials=60, seed=11, tol=1e-9) -> CheckResult:
    """Simplex objective vs exhaustive vertex enumeration on small LPs."""
    from .optimize import enumerate_vertices, solve_nonneg_lp

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    for _ in range(trials):
        m, n = int(rng.integers(1, 5)), int(rng.integers(2, 7))
        A = rng.normal(size=(m, n))
        b = A @ rng.uniform(0.0, 2.0, size=n)
        c = rng.uniform(0.05, 1.0, size=n)
        res = solve_nonneg_lp(A, b, c)
        verts = enumerate_vertices(A, b)
        if not verts:
            continue
        best = min(float(c @ v) for v in verts)
        if not res.ok:
            return CheckResult("LP vs vertex enumeration", np.inf, tol)
        worst = max(worst, abs(res.objective - best) / max(1.0, abs(best)))
        checked += 1
    if checked < trials // 2:
        return CheckResult("LP vs vertex enumeration", np.inf, tol)
    return CheckResult("LP vs vertex enumeration", worst, tol)


def check_sdp_oracle(trials=50, seed=9, margin=1e-6) -> CheckResult:
    """Lyapunov SDP feasibility vs the spectral abscissa sign."""
    from .optimize import SDProblem, feasibility_margin

    rng = np.random.default_rng(seed)
    mistakes = 0
    checked = 0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        A = rng.normal(size=(n, n))
        abscissa = float(np.max(np.linalg.eigvals(A).real))
        if abs(abscissa) < margin:
            continue
        prob = SDProblem()
        P = prob.sym_var("P", n)
        prob.add_psd(P - np.eye(n))
        prob.add_nsd((A.T @ P) + (P @ A))
        feasible, _, _ = feasibility_margin(prob)
        if feasible != (abscissa < 0):
            mistakes += 1
        checked += 1
    residual = np.inf if checked < trials // 2 else float(mistakes)
    return CheckResult("Lyapunov SDP vs spectral abscissa", residual, 0.5)


def run_all(lambda_trials=100, momentum_steps=10000, fidelity_steps=1000,
            tol_scale=1.0) -> list[CheckResult]:
    checks = [
        check_lambda_equivalence(trials=lambda_trials, tol=1e-10 * tol_scale),
        check_reduced_fidelity(steps=fidelity_steps, tol=1e-8 * tol_scale),
        check_momentum_conservation(steps=momentum_steps, tol=1e-9 * tol_scale),
        check_lp_oracle(tol=1e-9 * tol_scale),
        check_sdp_oracle(),
    ]
    return checks
