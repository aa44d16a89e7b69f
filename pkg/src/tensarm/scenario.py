"""Scenario files: versioned, human-editable JSON driving the CLI.

A scenario bundles a structure build, material, pinned points, a shape
objective (selected coordinates plus a kinematically consistent target),
a gain source (explicit PD gains or LMI-synthesized ones), the command
policy, an optional disturbance and the integrator settings.  Presets
mirroring the reference experiments ship with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import topology as topo
from .constraints import structure_constraints
from .dynamics import StructureSystem, vectorize
from .model import StructureState, Wrench, gravity_wrench, uniform_material

SCENARIO_FORMAT = "tensarm-scenario"
SCENARIO_VERSION = 1

_AXES = {"x": 0, "y": 1, "z": 2}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


# ---------------------------------------------------------------------------
# loading


def list_presets() -> list[str]:
    root = resources.files("tensarm").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    root = resources.files("tensarm").joinpath("presets")
    path = root.joinpath(f"{name}.json")
    try:
        return path.read_text()
    except FileNotFoundError:
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}") from None


def load_scenario(source: str) -> dict:
    """Parse a scenario from a file path or a `preset:<name>` reference."""
    if source.startswith("preset:"):
        text, where = preset_text(source[len("preset:"):]), source
    else:
        try:
            with open(source, "r") as fh:
                text = fh.read()
        except OSError as e:
            raise ScenarioError(f"cannot read scenario {source!r}: {e}") from None
        where = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(
            f"{where}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from None
    validate_scenario(doc, where)
    return doc


def validate_scenario(doc: dict, where: str = "scenario") -> None:
    def fail(msg):
        raise ScenarioError(f"{where}: {msg}")

    if not isinstance(doc, dict):
        fail("top level must be an object")
    if doc.get("format") != SCENARIO_FORMAT:
        fail(f'missing or wrong "format" (expected {SCENARIO_FORMAT!r})')
    if doc.get("version") != SCENARIO_VERSION:
        fail(f'unsupported version {doc.get("version")!r} (expected {SCENARIO_VERSION})')
    if "structure" not in doc or "builder" not in doc["structure"]:
        fail('missing "structure.builder"')
    builder = doc["structure"]["builder"]
    if builder not in ("tnd1", "dbar", "tbar"):
        fail(f"unknown builder {builder!r}")
    integ = doc.get("integrator", {})
    if not (float(integ.get("dt", 0)) > 0 and int(integ.get("steps", 0)) > 0):
        fail('"integrator" needs positive "dt" and "steps"')
    gains = doc.get("gains", {})
    if gains.get("source") not in ("explicit", "synthesized"):
        fail('"gains.source" must be "explicit" or "synthesized"')
    if gains["source"] == "explicit" and not ("Theta" in gains and "Psi" in gains):
        fail('explicit gains need "Theta" and "Psi"')
    if gains["source"] == "synthesized" and "bound" not in gains:
        fail('synthesized gains need a "bound" kind')
    dist = doc.get("disturbance", {"kind": "none"})
    if dist.get("kind", "none") not in ("none", "pulse", "impulse", "white_noise"):
        fail(f'unknown disturbance kind {dist.get("kind")!r}')
    if "objective" not in doc or "select" not in doc["objective"]:
        fail('missing "objective.select"')


# ---------------------------------------------------------------------------
# structure / selector / target resolution


def build_structure(doc: dict):
    s = doc["structure"]
    kind = s["builder"]
    if kind == "tnd1":
        return topo.build_tnd1(
            n=int(s["n"]), angles_T=[float(a) for a in s["angles_T"]],
            angle_D=float(s["angle_D"]), length=float(s["length"]),
            dim=int(s.get("dim", 2)), fold=int(s.get("fold", 3)),
        )
    if kind == "dbar":
        return topo.build_dbar(
            angle_D=float(s["angle_D"]), length=float(s["length"]),
            dim=int(s.get("dim", 2)), fold=int(s.get("fold", 3)),
        )
    return topo.build_tbar(
        angle_T=float(s["angle_T"]), length=float(s["length"]),
        dim=int(s.get("dim", 2)), fold=int(s.get("fold", 4)),
    )


def _point_id(built, ref):
    p = built.params
    if ref == "base":
        ref = p.get("base_point", p.get("end_points", (0, 0))[0])
    elif ref == "tip":
        ref = p.get("tip_point", p.get("end_points", (0, 1))[1])
    ref = int(ref)
    if not (0 <= ref < built.points.shape[1]):
        raise ScenarioError(f"point id {ref} out of range")
    return ref


def _spine_points(built, pinned):
    on_axis = np.flatnonzero(
        (np.abs(built.points[1]) < 1e-9) & (np.abs(built.points[2]) < 1e-9))
    return [int(p) for p in on_axis if p not in pinned]


def build_selector(built, select, pinned_points=()):
    """Rows of the coordinate selector and the matching (point, axis) labels.

    select: {"points": [{"point": id|"tip"|"base", "axes": "xz"}, ...]},
    {"mode": "spine", "axes": ...} picking every structural point on the
    build axis, or {"mode": "all", "axes": ...} picking every structural
    point (pinned points excluded either way).
    """
    n = built.n_nodes
    entries = []
    mode = select.get("mode") if isinstance(select, dict) else None
    if mode in ("spine", "all"):
        axes = select.get("axes", "xz" if built.planar else "xyz")
        pinned = set(_point_id(built, q) for q in pinned_points)
        if mode == "spine":
            points = _spine_points(built, pinned)
        else:
            points = [p for p in range(built.points.shape[1]) if p not in pinned]
        entries = [(p, axes) for p in points]
    else:
        for item in select["points"]:
            entries.append((_point_id(built, item["point"]),
                            item.get("axes", "xz" if built.planar else "xyz")))
    rows, labels = [], []
    for point, axes in entries:
        node = built.rep_node(point)
        for a in axes:
            if a not in _AXES:
                raise ScenarioError(f"unknown axis {a!r}")
            row = np.zeros(3 * n)
            row[_AXES[a] * n + node] = 1.0
            rows.append(row)
            labels.append(f"p{point}{a}")
    if not rows:
        raise ScenarioError("selector picks no coordinates")
    return np.stack(rows, axis=0), labels


def target_positions(built, target: dict) -> np.ndarray:
    """Kinematically consistent 3 x n node targets from a target block."""
    if target is None:
        return built.N0.copy()
    if "rotate_x" in target:
        ang = float(target["rotate_x"])
        ca, sa = np.cos(ang), np.sin(ang)
        Rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
        return Rx @ built.N0
    return topo.arm_target_positions(
        built,
        reach=target.get("reach"),
        angle_D=target.get("angle_D"),
        polar=float(target.get("polar", 0.0)),
        azimuth=float(target.get("azimuth", 0.0)),
    )


def _gain_matrix(value, m):
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return float(value) * np.eye(m)
    if value.shape != (m, m):
        raise ScenarioError(f"gain matrix must be scalar or {m}x{m}")
    return value


# ---------------------------------------------------------------------------
# runtime bundle


@dataclass
class Runtime:
    """Everything needed to run one closed-loop simulation."""

    name: str
    doc: dict
    built: object
    system: StructureSystem
    red: object
    state0: StructureState
    Lscript: np.ndarray
    labels: list
    n_bar: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray
    gain_result: object  # GainResult when gains were synthesized
    policy: str
    wheel_channel: bool
    gamma_max: object
    omega_w0: np.ndarray
    dt: float
    steps: int
    base_wrench_W: np.ndarray  # constant external force field (gravity etc.)
    disturbance: dict
    settle_tol: float

    target: dict | None = None
    maneuver_steps: int = 0
    omega_max: object = None
    feedforward: bool = False

    @property
    def n_nodes(self) -> int:
        return self.system.topology.n_nodes

    def error0(self) -> np.ndarray:
        return self.Lscript @ vectorize(self.state0.N) - self.n_bar

    def n_bar_at(self, k: int) -> np.ndarray:
        """Reference at step k: smoothstep maneuver from the initial shape.

        Commanding the final target directly demands accelerations far
        outside the nonnegative-tension cone; a kinematically consistent
        path keeps the per-step equality feasible.
        """
        if self.maneuver_steps <= 0 or self.target is None or k >= self.maneuver_steps:
            return self.n_bar
        s = k / self.maneuver_steps
        if "rotate_x" in self.target:
            # ramp-down profile: the reference starts turning at rate
            # 2*angle/(maneuver_steps*dt) and decelerates to rest, so a
            # matching initial twist keeps the gyroscopic channel engaged
            ang = float(self.target["rotate_x"])
            mid = {"rotate_x": ang * (s + np.sin(np.pi * s) / np.pi)}
        else:
            s = 3.0 * s * s - 2.0 * s * s * s
            tip = self.built.rep_node(_point_id(self.built, "tip"))
            r0 = float(self.state0.N[0, tip])
            rf = float(self.target.get("reach", r0))
            mid = {
                "reach": r0 + s * (rf - r0),
                "polar": s * float(self.target.get("polar", 0.0)),
                "azimuth": float(self.target.get("azimuth", 0.0)),
            }
        return self.Lscript @ vectorize(target_positions(self.built, mid))

    def n_bar_rates(self, k: int, dt: float):
        """Reference velocity and acceleration at step k (central differences).

        Feeding these forward keeps the controller from fighting the moving
        reference, which matters when the reference itself carries momentum
        (rotation maneuvers riding an initial twist).  For slow arm maneuvers
        the lag of the plain regulator acts as useful damping on the
        unselected nodes, so the feedforward is opt-in per scenario.
        """
        if (not self.feedforward or self.maneuver_steps <= 0
                or self.target is None or k > self.maneuver_steps):
            z = np.zeros_like(self.n_bar)
            return z, z
        prev, cur, nxt = (self.n_bar_at(k - 1), self.n_bar_at(k),
                          self.n_bar_at(k + 1))
        vel = (nxt - prev) / (2.0 * dt)
        acc = (nxt - 2.0 * cur + prev) / (dt * dt)
        return vel, acc


def build_runtime(doc: dict, synth_override: str | None = None) -> Runtime:
    built = build_structure(doc)
    mat_doc = doc.get("material", {})
    material = uniform_material(
        built,
        bar_mass=float(mat_doc.get("bar_mass", 1.0)),
        wheel_radius=float(mat_doc.get("wheel_radius", 0.0)),
        string_node_mass=float(mat_doc.get("string_node_mass", 0.1)),
        string_stiffness=float(mat_doc.get("string_stiffness", 1e3)),
    )
    pinned = [_point_id(built, p) for p in doc.get("pinned_points", [])]
    constraints = structure_constraints(built, pinned_points=pinned)
    system = StructureSystem(built.topology, material, constraints)
    red = system.reduced()

    initial = doc.get("initial", {})
    N_init = built.N0.copy()
    if "reach" in initial or "angle_D" in initial:
        N_init = topo.arm_target_positions(
            built, reach=initial.get("reach"), angle_D=initial.get("angle_D"))
    beta = built.topology.beta
    state0 = StructureState.at_rest(N_init, beta=beta)
    if "spin_x" in initial:
        # rigid twist rate about the x axis; constraint-consistent when the
        # pinned points lie on that axis
        w = float(initial["spin_x"])
        state0.N_dot = np.stack([
            np.zeros(N_init.shape[1]), -w * N_init[2], w * N_init[1]])

    obj = doc["objective"]
    Lscript, labels = build_selector(built, obj["select"], pinned)
    N_bar = target_positions(built, obj.get("target"))
    n_bar = Lscript @ vectorize(N_bar)
    m = Lscript.shape[0]

    gains = doc["gains"]
    gain_result = None
    if gains["source"] == "explicit":
        Theta = _gain_matrix(gains["Theta"], m)
        Psi = _gain_matrix(gains["Psi"], m)
    else:
        from . import gain_synthesis as gs
        from .shape_control import reduced_controller

        probe = reduced_controller(system, red, state0, Lscript, n_bar,
                                   np.eye(m), np.eye(m))
        bound = synth_override or gains["bound"]
        # the gain bounds depend on the disturbance input only through
        # B1 B1^T, so compress the wide nodal-force map to its square
        # symmetric factor (keeps the LMI blocks small)
        M = probe.B1 @ probe.B1.T
        w_eig, V = np.linalg.eigh(M)
        B1c = (V * np.sqrt(np.clip(w_eig, 0.0, None))) @ V.T
        W = gains.get("W")
        if W is not None:
            W = np.asarray(W, dtype=float)
            if W.ndim == 0:
                W = float(W) * np.eye(m)
        problem = gs.GainProblem(B1=B1c, W=W)
        rho = float(gains.get("rho", 1e2))
        delta = float(gains.get("delta", 1e-8))
        if bound == gs.ENERGY_TO_PEAK:
            gain_result = gs.synth_energy_to_peak(problem, delta=delta, rho=rho)
        elif bound == gs.ENERGY_TO_ENERGY:
            gain_result = gs.synth_energy_to_energy(
                problem, epsilon=gains.get("epsilon"), delta=delta, rho=rho)
        elif bound == gs.IMPULSE_TO_ENERGY:
            gain_result = gs.synth_impulse_to_energy(problem, delta=delta, rho=rho)
        elif bound == gs.COVARIANCE:
            gain_result = gs.synth_covariance(problem, gains["Y_bar"], delta=delta, rho=rho)
        elif bound == gs.STABILIZING:
            gain_result = gs.synth_stabilizing(problem, delta=delta, rho=rho)
        else:
            raise ScenarioError(f"unknown gain bound kind {bound!r}")
        Theta, Psi = gain_result.Theta, gain_result.Psi

    control = doc.get("control", {})
    wheels = doc.get("wheels", {})
    omega_w0 = np.zeros(beta)
    if "omega_w0" in wheels:
        w0 = np.asarray(wheels["omega_w0"], dtype=float)
        omega_w0 = np.full(beta, float(w0)) if w0.ndim == 0 else w0
        if omega_w0.shape != (beta,):
            raise ScenarioError("omega_w0 must be scalar or one entry per bar")
    state0.omega_w = omega_w0.copy()

    g = doc.get("gravity")
    base_W = np.zeros((3, built.n_nodes))
    if g is not None:
        base_W = gravity_wrench(built.topology, material, g=g)

    integ = doc["integrator"]
    return Runtime(
        name=doc.get("name", "scenario"),
        doc=doc,
        built=built,
        system=system,
        red=red,
        state0=state0,
        Lscript=Lscript,
        labels=labels,
        n_bar=n_bar,
        Theta=Theta,
        Psi=Psi,
        gain_result=gain_result,
        policy=control.get("policy", "min_sum_unique"),
        wheel_channel=bool(control.get("wheel_channel", False)),
        gamma_max=control.get("gamma_max"),
        omega_w0=omega_w0,
        dt=float(integ["dt"]),
        steps=int(integ["steps"]),
        base_wrench_W=base_W,
        disturbance=doc.get("disturbance", {"kind": "none"}),
        settle_tol=float(doc.get("settle_tol", 1e-3)),
        target=obj.get("target"),
        maneuver_steps=int(obj.get("maneuver_steps", int(integ["steps"]) // 2))
        if obj.get("target") is not None else 0,
        omega_max=wheels.get("omega_max"),
        feedforward=bool(control.get("feedforward", False)),
    )


def base_wrench(runtime: Runtime) -> Wrench:
    return Wrench(W=runtime.base_wrench_W.copy())
