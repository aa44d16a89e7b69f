"""Connectivity construction for bar-and-string structures.

A structure is described by spatial points joined by rigid bars and elastic
strings.  Every bar owns two private nodes; when several bar ends meet at
one spatial point the extra nodes are kept distinct and tied together by
coincidence constraints (ball joints transfer force but no torque, which is
exactly what coincident translational constraints model).  Points touched
only by strings become string nodes.  The node ordering is always
[bar nodes (2*beta) | string nodes (sigma)].

Builders are provided for the diamond (D) unit, the T unit, and the
composed n-level arm that terminates every axial segment with a diamond
unit.  All builders work in the plane (embedded at y = 0) or in 3D with a
configurable fold symmetry of the lateral members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# connectivity container


@dataclass
class Topology:
    """Signed incidence description of bars and strings.

    B = N @ C_b.T gives bar vectors, S = N @ C_s.T string vectors, under the
    node ordering [bar nodes | string nodes].
    """

    beta: int
    alpha: int
    sigma: int
    C_b: np.ndarray  # beta x n
    C_s: np.ndarray  # alpha x n

    @property
    def n_nodes(self) -> int:
        return 2 * self.beta + self.sigma

    @property
    def C_nb(self) -> np.ndarray:
        n = self.n_nodes
        return np.eye(n)[: 2 * self.beta]

    @property
    def C_ns(self) -> np.ndarray:
        n = self.n_nodes
        return np.eye(n)[2 * self.beta :]

    @property
    def C_r(self) -> np.ndarray:
        C = np.zeros((self.beta, 2 * self.beta))
        for i in range(self.beta):
            C[i, 2 * i] = C[i, 2 * i + 1] = 0.5
        return C

    @property
    def C_bb(self) -> np.ndarray:
        """Bar incidence restricted to the bar-node block (beta x 2*beta)."""
        return self.C_b[:, : 2 * self.beta]

    @property
    def C_sb(self) -> np.ndarray:
        return self.C_s[:, : 2 * self.beta]

    @property
    def C_ss(self) -> np.ndarray:
        return self.C_s[:, 2 * self.beta :]


def validate(topology: Topology) -> list[str]:
    """Return a list of violated connectivity invariants (empty when valid)."""
    out = []
    t = topology
    n = t.n_nodes
    if t.C_b.shape != (t.beta, n):
        out.append("C_b shape inconsistent with beta and node count")
        return out
    if t.C_s.shape != (t.alpha, n):
        out.append("C_s shape inconsistent with alpha and node count")
        return out
    for name, C in (("C_b", t.C_b), ("C_s", t.C_s)):
        for i, row in enumerate(C):
            nz = np.nonzero(row)[0]
            if len(nz) != 2 or not np.isclose(row.sum(), 0.0) or sorted(row[nz]) != [-1.0, 1.0]:
                out.append(f"{name} row {i} is not a (+1, -1) incidence pair")
    if t.C_b[:, 2 * t.beta :].any():
        out.append("bars must not touch string nodes")
    # duplicate members (same unordered node pair)
    for name, C in (("C_b", t.C_b), ("C_s", t.C_s)):
        seen = set()
        for i, row in enumerate(C):
            key = tuple(sorted(np.nonzero(row)[0].tolist()))
            if len(key) == 2 and key in seen:
                out.append(f"duplicate {name} member at row {i}")
            seen.add(key)
    # block partition consistency
    both = np.hstack([t.C_sb, t.C_ss])
    if not np.array_equal(both, t.C_s):
        out.append("C_sb/C_ss do not partition C_s")
    return out


# ---------------------------------------------------------------------------
# spatial blueprint


@dataclass
class Blueprint:
    points: list = field(default_factory=list)  # 3-vectors
    bars: list = field(default_factory=list)  # (point, point)
    strings: list = field(default_factory=list)  # (point, point)

    def point(self, xyz) -> int:
        self.points.append(np.asarray(xyz, dtype=float))
        return len(self.points) - 1

    def bar(self, i, j):
        self.bars.append((i, j))

    def string(self, i, j):
        self.strings.append((i, j))


@dataclass
class BuiltStructure:
    """A compiled structure: connectivity, geometry and joint bookkeeping."""

    topology: Topology
    N0: np.ndarray  # 3 x n nominal node positions
    nodes_of_point: list  # per point: node ids coincident there
    coincidences: list  # (node_i, node_j) pairs to tie (all 3 axes)
    planar: bool  # y coordinates pinned at build value
    joints: list  # (point_id, multiplicity) for multiplicity >= 2
    params: dict = field(default_factory=dict)
    points: np.ndarray | None = None  # 3 x n_points build coordinates

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    def rep_node(self, point_id: int) -> int:
        return self.nodes_of_point[point_id][0]

    def node_positions(self, point_coords) -> np.ndarray:
        """Spread per-point coordinates (3 x n_points) onto all nodes."""
        P = np.asarray(point_coords, dtype=float)
        N = np.zeros((3, self.n_nodes))
        for p, nodes in enumerate(self.nodes_of_point):
            for nd in nodes:
                N[:, nd] = P[:, p]
        return N


def compile_blueprint(bp: Blueprint, planar: bool, params=None) -> BuiltStructure:
    beta = len(bp.bars)
    npts = len(bp.points)
    nodes_of_point = [[] for _ in range(npts)]
    for b, (i, j) in enumerate(bp.bars):
        nodes_of_point[i].append(2 * b)
        nodes_of_point[j].append(2 * b + 1)
    bar_mult = [len(x) for x in nodes_of_point]
    sigma = 0
    for p in range(npts):
        if not nodes_of_point[p]:
            nodes_of_point[p].append(2 * beta + sigma)
            sigma += 1
    n = 2 * beta + sigma

    C_b = np.zeros((beta, n))
    for b in range(beta):
        C_b[b, 2 * b] = -1.0
        C_b[b, 2 * b + 1] = 1.0
    alpha = len(bp.strings)
    C_s = np.zeros((alpha, n))
    for s, (i, j) in enumerate(bp.strings):
        if i == j:
            raise ValueError("string endpoints coincide")
        C_s[s, nodes_of_point[i][0]] = -1.0
        C_s[s, nodes_of_point[j][0]] = 1.0

    coincidences = [
        (nodes[0], other)
        for nodes in nodes_of_point
        for other in nodes[1:]
    ]
    P = np.stack(bp.points, axis=1) if npts else np.zeros((3, 0))
    topo = Topology(beta=beta, alpha=alpha, sigma=sigma, C_b=C_b, C_s=C_s)
    built = BuiltStructure(
        topology=topo,
        N0=np.zeros((3, n)),
        nodes_of_point=nodes_of_point,
        coincidences=coincidences,
        planar=planar,
        joints=[(p, m) for p, m in enumerate(bar_mult) if m >= 2],
        params=dict(params or {}),
        points=P,
    )
    built.N0 = built.node_positions(P)
    return built


# ---------------------------------------------------------------------------
# unit geometry


def _lateral_dirs(dim: int, fold: int) -> list[np.ndarray]:
    """Unit directions orthogonal to the x axis for the lateral members."""
    if dim == 2:
        return [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])]
    out = []
    for j in range(fold):
        phi = 2.0 * np.pi * j / fold
        out.append(np.array([0.0, np.sin(phi), np.cos(phi)]))
    return out


def _check_angle(angle, name):
    if not (0.0 < angle < np.pi / 2):
        raise ValueError(f"{name} must lie strictly between 0 and pi/2")


def _dbar_into(bp, i0, i1, half_span_frac_radius):
    """Add a diamond unit between existing points i0, i1.

    `half_span_frac_radius` is the lateral radius (already in length units).
    Returns the lateral point ids.
    """
    p0, p1 = bp.points[i0], bp.points[i1]
    mid = 0.5 * (p0 + p1)
    axis = p1 - p0
    span = np.linalg.norm(axis)
    axis = axis / span
    laterals = []
    for d in bp._lateral_dirs:
        d_perp = d - (d @ axis) * axis
        nrm = np.linalg.norm(d_perp)
        if nrm < 1e-12:
            raise ValueError("lateral direction parallel to unit axis")
        laterals.append(bp.point(mid + half_span_frac_radius * d_perp / nrm))
    for lp in laterals:
        bp.bar(i0, lp)
        bp.bar(lp, i1)
    if len(laterals) == 2:
        bp.string(laterals[0], laterals[1])
    else:
        for a in range(len(laterals)):
            bp.string(laterals[a], laterals[(a + 1) % len(laterals)])
    bp.string(i0, i1)
    return laterals


def build_dbar(angle_D, length, dim=2, fold=3):
    """Diamond unit spanning `length` along +x with opening angle `angle_D`.

    In 2D: 4 bars and 2 strings.  In 3D with fold-k symmetry: 2k bars,
    k lateral-polygon strings plus the axial string.
    Bar length is (length / 2) / cos(angle_D).
    """
    _check_angle(angle_D, "angle_D")
    if length <= 0:
        raise ValueError("length must be positive")
    bp = Blueprint()
    bp._lateral_dirs = _lateral_dirs(dim, fold)
    i0 = bp.point([0.0, 0.0, 0.0])
    i1 = bp.point([length, 0.0, 0.0])
    radius = 0.5 * length * np.tan(angle_D)
    _dbar_into(bp, i0, i1, radius)
    return compile_blueprint(
        bp,
        planar=(dim == 2),
        params={
            "kind": "dbar",
            "angle_D": angle_D,
            "length": length,
            "dim": dim,
            "fold": fold,
            "bar_length": 0.5 * length / np.cos(angle_D),
            "end_points": (i0, i1),
        },
    )


def build_tbar(angle_T, length, dim=2, fold=4):
    """T unit: axial halves plus lateral bars meeting at the center joint.

    2D: 4 bars, 4 strings, 5 distinct spatial points, center multiplicity 4.
    3D with fold-k laterals: 2 + k bars at the center joint.
    """
    _check_angle(angle_T, "angle_T")
    if length <= 0:
        raise ValueError("length must be positive")
    bp = Blueprint()
    dirs = _lateral_dirs(dim, fold)
    i0 = bp.point([0.0, 0.0, 0.0])
    i1 = bp.point([length, 0.0, 0.0])
    mid = bp.point([0.5 * length, 0.0, 0.0])
    h = 0.5 * length * np.tan(angle_T)
    bp.bar(i0, mid)
    bp.bar(mid, i1)
    lats = []
    for d in dirs:
        lp = bp.point(np.array([0.5 * length, 0.0, 0.0]) + h * d)
        lats.append(lp)
        bp.bar(mid, lp)
    for lp in lats:
        bp.string(i0, lp)
        bp.string(lp, i1)
    return compile_blueprint(
        bp,
        planar=(dim == 2),
        params={
            "kind": "tbar",
            "angle_T": angle_T,
            "length": length,
            "dim": dim,
            "fold": fold,
            "end_points": (i0, i1),
            "center_point": mid,
        },
    )


# ---------------------------------------------------------------------------
# composed arm


def _arm_blueprint(n, h_levels, bar_length_D, angle_D, dim, fold):
    """Deterministic blueprint for the n-level arm.

    `h_levels[k]` is the lateral bar length at substitution level k (fixed
    hardware); `bar_length_D` the diamond bar length; the axial spans follow
    from `angle_D`: each terminal segment spans 2*bar_length_D*cos(angle_D).
    """
    seg = 2.0 * bar_length_D * np.cos(angle_D)
    total = (2**n) * seg
    radius_D = bar_length_D * np.sin(angle_D)
    bp = Blueprint()
    bp._lateral_dirs = _lateral_dirs(dim, fold)
    i0 = bp.point([0.0, 0.0, 0.0])
    i1 = bp.point([total, 0.0, 0.0])

    def recurse(a, b, level):
        if level == n:
            _dbar_into(bp, a, b, radius_D)
            return
        pa, pb = bp.points[a], bp.points[b]
        mid = bp.point(0.5 * (pa + pb))
        for d in bp._lateral_dirs:
            lp = bp.point(bp.points[mid] + h_levels[level] * d)
            bp.bar(mid, lp)
            bp.string(a, lp)
            bp.string(lp, b)
        recurse(a, mid, level + 1)
        recurse(mid, b, level + 1)

    recurse(i0, i1, 0)
    return bp, i0, i1


def build_tnd1(n, angles_T, angle_D, length, dim=2, fold=3):
    """n-level self-similar arm terminated with diamond units.

    Parameters
    ----------
    n : int
        Substitution depth (n >= 1).
    angles_T : sequence of float
        One lateral angle per substitution level.
    angle_D : float
        Opening angle of the terminal diamond units in the stowed build.
    length : float
        Total stowed span along +x.
    dim, fold : int
        Planar (2) or spatial (3) build; lateral fold symmetry in 3D.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    angles_T = list(angles_T)
    if len(angles_T) != n:
        raise ValueError("angles_T must have one entry per level")
    for a in angles_T:
        _check_angle(a, "angle_T")
    _check_angle(angle_D, "angle_D")
    if length <= 0:
        raise ValueError("length must be positive")

    h_levels = [length / 2 ** (k + 1) * np.tan(a) for k, a in enumerate(angles_T)]
    seg = length / 2**n
    bar_length_D = 0.5 * seg / np.cos(angle_D)
    bp, i0, i1 = _arm_blueprint(n, h_levels, bar_length_D, angle_D, dim, fold)
    return compile_blueprint(
        bp,
        planar=(dim == 2),
        params={
            "kind": "tnd1",
            "n": n,
            "angles_T": angles_T,
            "angle_D": angle_D,
            "length": length,
            "dim": dim,
            "fold": fold,
            "h_levels": h_levels,
            "bar_length_D": bar_length_D,
            "base_point": i0,
            "tip_point": i1,
        },
    )


def arm_target_positions(built: BuiltStructure, reach=None, angle_D=None,
                         polar=0.0, azimuth=0.0):
    """Kinematically consistent node targets for a composed arm.

    The member lengths of `built` are preserved; only the diamond opening
    angle changes (extension/retraction), optionally followed by a rigid
    rotation about the base: `polar` about the y axis, then `azimuth` about
    the x axis.  Returns a 3 x n_nodes position matrix.
    """
    p = built.params
    if p.get("kind") != "tnd1":
        raise ValueError("targets are defined for composed arms only")
    n, fold, dim = p["n"], p["fold"], p["dim"]
    lD = p["bar_length_D"]
    if reach is not None and angle_D is not None:
        raise ValueError("give either reach or angle_D, not both")
    if reach is not None:
        cosv = reach / (2 ** (n + 1) * lD)
        if not (0.0 < cosv < 1.0):
            raise ValueError("reach outside the kinematic range")
        angle_D = float(np.arccos(cosv))
    if angle_D is None:
        angle_D = p["angle_D"]
    bp, _, _ = _arm_blueprint(n, p["h_levels"], lD, angle_D, dim, fold)
    P = np.stack(bp.points, axis=1)
    base = P[:, p["base_point"]].copy()
    cy, sy = np.cos(polar), np.sin(polar)
    cx, sx = np.cos(azimuth), np.sin(azimuth)
    Ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    P = (Rx @ Ry) @ (P - base[:, None]) + base[:, None]
    return built.node_positions(P)


# ---------------------------------------------------------------------------
# serialization (structured text, versioned)

FORMAT_VERSION = 1


def structure_to_text(built: BuiltStructure) -> str:
    doc = {
        "format": "tensarm-structure",
        "version": FORMAT_VERSION,
        "points": np.asarray(built.points).T.tolist(),
        "bars": [
            _point_pair(built, built.topology.C_b[b]) for b in range(built.topology.beta)
        ],
        "strings": [
            _point_pair(built, built.topology.C_s[s]) for s in range(built.topology.alpha)
        ],
        "planar": built.planar,
        "params": _jsonable(built.params),
    }
    return json.dumps(doc, indent=2)


def _point_pair(built, row):
    tail = int(np.nonzero(row == -1.0)[0][0])
    head = int(np.nonzero(row == 1.0)[0][0])
    point_of_node = {}
    for pt, nodes in enumerate(built.nodes_of_point):
        for nd in nodes:
            point_of_node[nd] = pt
    return [point_of_node[tail], point_of_node[head]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def structure_from_text(text: str) -> BuiltStructure:
    doc = json.loads(text)
    if doc.get("format") != "tensarm-structure":
        raise ValueError("not a structure document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported structure format version {doc.get('version')}")
    bp = Blueprint()
    for xyz in doc["points"]:
        bp.point(xyz)
    for i, j in doc["bars"]:
        bp.bar(i, j)
    for i, j in doc["strings"]:
        bp.string(i, j)
    return compile_blueprint(bp, planar=bool(doc.get("planar")), params=doc.get("params"))
