"""Closed-loop scenario runner.

Each step recomputes the shape-control equality at the current state, solves
for nonnegative force densities (optionally together with wheel speeds),
advances the constrained dynamics one RK4 step and records errors, commands
and drift metrics.  Disturbances are injected into the plant only; the
controller never sees them, which is what the disturbance-gain experiments
measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import step, vectorize, devectorize
from .model import StructureState, Wrench
from .scenario import Runtime
from .shape_control import ControlSystem, compute_control, reduced_controller


@dataclass
class Disturbance:
    """Realized disturbance: plant force field over time plus its record."""

    kind: str
    direction: np.ndarray = None  # unit vector over stacked coordinates
    duration: float = 0.0
    intensity: float = 0.0
    impulse: np.ndarray = None  # velocity-kick force integral (w0)
    rng: object = None

    def force(self, t: float, n_nodes: int, dt: float) -> np.ndarray | None:
        if self.kind == "pulse" and t < self.duration:
            # sin^2 pulse scaled to unit L2 norm of its amplitude profile
            amp = self.amplitude(t)
            return devectorize(self.direction * amp, n_nodes)
        if self.kind == "white_noise":
            w = self.rng.normal(0.0, np.sqrt(self.intensity / dt), 3 * n_nodes)
            return devectorize(w, n_nodes)
        return None

    def amplitude(self, t: float) -> float:
        if self.kind != "pulse" or not (0.0 <= t < self.duration):
            return 0.0
        c = np.sqrt(8.0 / (3.0 * self.duration))
        return c * np.sin(np.pi * t / self.duration) ** 2


def make_disturbance(runtime: Runtime, seed=0) -> Disturbance:
    spec = runtime.disturbance
    kind = spec.get("kind", "none")
    rng = np.random.default_rng(seed)
    n = runtime.n_nodes
    if kind == "none":
        return Disturbance(kind="none")
    if kind == "pulse":
        d = rng.normal(size=3 * n)
        d /= np.linalg.norm(d)
        return Disturbance(kind="pulse", direction=d,
                           duration=float(spec.get("duration", 0.5)), rng=rng)
    if kind == "impulse":
        d = rng.normal(size=3 * n)
        d /= np.linalg.norm(d)
        return Disturbance(kind="impulse",
                           impulse=d * float(spec.get("magnitude", 1.0)), rng=rng)
    if kind == "white_noise":
        return Disturbance(kind="white_noise",
                           intensity=float(spec.get("intensity", 1.0)), rng=rng)
    raise ValueError(f"unknown disturbance kind {kind!r}")


@dataclass
class SimResult:
    t: np.ndarray
    err: np.ndarray  # steps x m selected-coordinate errors
    err_norm: np.ndarray
    gamma: np.ndarray  # steps x alpha
    omega_w: np.ndarray  # steps x beta (commanded/running wheel speeds)
    feasible: np.ndarray  # bool per step (control equality met exactly)
    residual: np.ndarray  # control equality residual per step
    bar_drift: np.ndarray
    constraint_residual: np.ndarray
    w_amp: np.ndarray  # recorded disturbance amplitude (pulse channel)
    w0: np.ndarray | None  # impulse vector when applicable
    final_state: StructureState
    summary: dict = field(default_factory=dict)


def _settling_step(err_norm, ref, tol):
    """First step index after which the error norm stays below tol * ref."""
    if ref <= 0:
        return None
    below = err_norm < tol * ref
    if not below[-1]:
        return None
    k = len(below)
    while k > 0 and below[k - 1]:
        k -= 1
    return int(k)


def run(runtime: Runtime, seed=0) -> SimResult:
    system, red = runtime.system, runtime.red
    topo_ = system.topology
    n, alpha, beta = topo_.n_nodes, topo_.alpha, topo_.beta
    m = runtime.Lscript.shape[0]
    steps, dt = runtime.steps, runtime.dt
    dist = make_disturbance(runtime, seed)

    state = StructureState(
        N=runtime.state0.N.copy(), N_dot=runtime.state0.N_dot.copy(),
        t=0.0, omega_w=runtime.omega_w0.copy(),
    )
    if dist.kind == "impulse":
        # instantaneous velocity kick, constraint-consistent
        kick = system._minv(dist.impulse)
        kick = system.constraints.project_velocities(kick)
        state.N_dot = state.N_dot + devectorize(kick, n)

    t_arr = np.arange(steps) * dt
    err = np.zeros((steps, m))
    gamma_rec = np.zeros((steps, alpha))
    omega_rec = np.zeros((steps, beta))
    feas = np.zeros(steps, dtype=bool)
    resid = np.zeros(steps)
    bar_drift = np.zeros(steps)
    con_res = np.zeros(steps)
    w_amp = np.zeros(steps)

    base_W = runtime.base_wrench_W
    lengths = system.material.l
    for k in range(steps):
        t = k * dt
        err[k] = runtime.Lscript @ vectorize(state.N) - runtime.n_bar
        B = state.N @ topo_.C_b.T
        bar_drift[k] = float(np.abs(np.linalg.norm(B, axis=0) - lengths).max())
        con_res[k] = system.constraints.residual(vectorize(state.N))

        ctrl_wrench = Wrench(W=base_W)
        nb_dot, nb_ddot = runtime.n_bar_rates(k, dt)
        ctrl = reduced_controller(system, red, state, runtime.Lscript,
                                  runtime.n_bar_at(k), runtime.Theta,
                                  runtime.Psi, wrench=ctrl_wrench,
                                  n_bar_dot=nb_dot, n_bar_ddot=nb_ddot)
        csys = ControlSystem(Gamma=ctrl.Aeq, mu=ctrl.beq, Upsilon=ctrl.Upsilon)
        res = compute_control(
            csys,
            omega_w=None if runtime.wheel_channel else state.omega_w,
            policy=runtime.policy,
            wheel_channel=runtime.wheel_channel,
            gamma_max=runtime.gamma_max,
            omega_max=runtime.omega_max,
        )
        if runtime.wheel_channel and res.status == "optimal" and res.omega_w is not None:
            state.omega_w = res.omega_w
        gamma_rec[k] = res.gamma
        omega_rec[k] = state.omega_w
        feas[k] = res.status == "optimal"
        resid[k] = res.residual

        W_d = dist.force(t, n, dt)
        w_amp[k] = dist.amplitude(t)
        sim_wrench = Wrench(W=base_W, W_d=W_d)
        state = step(system, state, res.gamma, sim_wrench, dt)

    err_norm = np.linalg.norm(err, axis=1)
    ref = err_norm[0]
    settle = _settling_step(err_norm, ref, runtime.settle_tol)
    summary = {
        "name": runtime.name,
        "steps": steps,
        "dt": dt,
        "initial_err": float(ref),
        "final_err": float(err_norm[-1]),
        "peak_err": float(err_norm.max()),
        "err_ratio": float(err_norm[-1] / ref) if ref > 0 else None,
        "settling_step": settle,
        "settling_time": None if settle is None else settle * dt,
        "avg_gamma": float(gamma_rec.sum(axis=1).mean()),
        "max_bar_drift": float(bar_drift.max()),
        "max_constraint_residual": float(con_res.max()),
        "feasible_steps": int(feas.sum()),
        "fallback_steps": int(steps - feas.sum()),
        "disturbance": dist.kind,
        "seed": int(seed),
    }
    return SimResult(
        t=t_arr, err=err, err_norm=err_norm, gamma=gamma_rec,
        omega_w=omega_rec, feasible=feas, residual=resid,
        bar_drift=bar_drift, constraint_residual=con_res, w_amp=w_amp,
        w0=dist.impulse if dist.kind == "impulse" else None,
        final_state=state, summary=summary,
    )


# ---------------------------------------------------------------------------
# sweeps


def run_target(doc: dict, target: dict, seed=0) -> dict:
    """One sweep cell: swap the objective target, run, return the summary."""
    from .scenario import build_runtime

    sub = dict(doc)
    sub["objective"] = dict(doc["objective"], target=target)
    try:
        runtime = build_runtime(sub)
        out = run(runtime, seed=seed).summary
        out["ok"] = True
        out["error"] = None
    except Exception as e:  # individual failures recorded, sweep continues
        out = {"ok": False, "error": f"{type(e).__name__}: {e}"}
    out["target"] = target
    return out


def _sweep_cell(args):
    doc, target, idx, seed = args
    out = run_target(doc, target, seed=seed)
    out["target_id"] = idx
    return out


def run_sweep(doc: dict, targets=None, jobs=1, seed=0) -> list[dict]:
    """Run every target of a sweep scenario; rows sorted by target id."""
    if targets is None:
        targets = doc.get("sweep", {}).get("targets", [])
    work = [(doc, dict(t), i, seed) for i, t in enumerate(targets)]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, work))
    else:
        rows = [_sweep_cell(w) for w in work]
    return sorted(rows, key=lambda r: r["target_id"])
