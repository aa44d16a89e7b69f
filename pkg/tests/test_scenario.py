import json

import numpy as np
import pytest

from tensarm.dynamics import vectorize
from tensarm.scenario import (
    ScenarioError,
    build_runtime,
    build_selector,
    build_structure,
    list_presets,
    load_scenario,
    target_positions,
    validate_scenario,
)


def small_doc(**overrides):
    doc = {
        "format": "tensarm-scenario",
        "version": 1,
        "name": "unit",
        "structure": {"builder": "dbar", "angle_D": 0.6, "length": 2.0, "dim": 2},
        "pinned_points": ["base"],
        "objective": {"select": {"mode": "spine", "axes": "xz"}},
        "gains": {"source": "explicit", "Theta": 30.0, "Psi": 20.0},
        "integrator": {"dt": 2e-3, "steps": 40},
    }
    doc.update(overrides)
    return doc


def test_presets_ship_and_load():
    names = list_presets()
    for expected in ("extension", "tip_move", "end_rotation", "sweep",
                     "t1d1_disturbance"):
        assert expected in names
    for name in names:
        doc = load_scenario(f"preset:{name}")
        assert doc["name"] == name


def test_unknown_preset_lists_alternatives():
    with pytest.raises(ScenarioError, match="extension"):
        load_scenario("preset:nonexistent")


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(small_doc()))
    doc = load_scenario(str(path))
    assert doc["name"] == "unit"


def test_load_scenario_bad_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\n  broken\n}")
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(str(path))


def test_load_scenario_missing_file():
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario("/no/such/file.json")


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d.pop("format"), "format"),
    (lambda d: d.update(version=99), "version"),
    (lambda d: d["structure"].update(builder="hexapod"), "builder"),
    (lambda d: d["integrator"].update(dt=0), "integrator"),
    (lambda d: d["gains"].update(source="psychic"), "source"),
    (lambda d: d["gains"].pop("Theta"), "Theta"),
    (lambda d: d.update(disturbance={"kind": "earthquake"}), "disturbance"),
    (lambda d: d["objective"].pop("select"), "select"),
])
def test_validation_rejects(mutate, msg):
    doc = small_doc()
    mutate(doc)
    with pytest.raises(ScenarioError, match=msg):
        validate_scenario(doc)


def test_synthesized_gains_need_bound():
    doc = small_doc(gains={"source": "synthesized"})
    with pytest.raises(ScenarioError, match="bound"):
        validate_scenario(doc)


def test_selector_explicit_points():
    built = build_structure(small_doc())
    L, labels = build_selector(built, {"points": [{"point": "tip", "axes": "xz"}]})
    assert L.shape == (2, 3 * built.n_nodes)
    tip = built.rep_node(built.params.get("tip_point", 1))
    x = vectorize(built.N0)
    picked = L @ x
    assert picked[0] == pytest.approx(built.N0[0, tip])
    assert picked[1] == pytest.approx(built.N0[2, tip])
    assert labels[0].endswith("x") and labels[1].endswith("z")


def test_selector_spine_excludes_pinned():
    built = build_structure(small_doc())
    L_all, _ = build_selector(built, {"mode": "spine", "axes": "xz"})
    L_pin, _ = build_selector(built, {"mode": "spine", "axes": "xz"},
                              pinned_points=["base"])
    assert L_pin.shape[0] == L_all.shape[0] - 2


def test_selector_all_mode_covers_every_free_point():
    built = build_structure(small_doc())
    L, _ = build_selector(built, {"mode": "all", "axes": "xz"},
                          pinned_points=["base"])
    assert L.shape[0] == 2 * (built.points.shape[1] - 1)


def test_selector_rejects_bad_axis():
    built = build_structure(small_doc())
    with pytest.raises(ScenarioError, match="axis"):
        build_selector(built, {"points": [{"point": 0, "axes": "xq"}]})


def test_rotation_target_is_rigid():
    built = build_structure(small_doc(structure={
        "builder": "dbar", "angle_D": 0.6, "length": 2.0, "dim": 3, "fold": 3}))
    N = target_positions(built, {"rotate_x": 0.7})
    d0 = np.linalg.norm(built.N0[:, :, None] - built.N0[:, None, :], axis=0)
    d1 = np.linalg.norm(N[:, :, None] - N[:, None, :], axis=0)
    np.testing.assert_allclose(d1, d0, atol=1e-12)
    assert np.abs(N - built.N0).max() > 0.1


def test_build_runtime_explicit_gains_and_pins():
    rt = build_runtime(small_doc())
    m = rt.Lscript.shape[0]
    np.testing.assert_allclose(rt.Theta, 30.0 * np.eye(m))
    np.testing.assert_allclose(rt.Psi, 20.0 * np.eye(m))
    assert rt.gain_result is None
    # pinned base: the constraint set fixes that node
    base = rt.built.rep_node(rt.built.params.get("base_point", 0))
    v = vectorize(rt.state0.N)
    assert rt.system.constraints.residual(v) < 1e-12
    assert rt.error0() == pytest.approx(np.zeros(m), abs=1e-12)


def test_build_runtime_matrix_gains():
    m = 2
    doc = small_doc(
        objective={"select": {"points": [{"point": "tip", "axes": "xz"}]}},
        gains={"source": "explicit",
               "Theta": (4.0 * np.eye(m)).tolist(),
               "Psi": (3.0 * np.eye(m)).tolist()},
    )
    rt = build_runtime(doc)
    np.testing.assert_allclose(rt.Theta, 4.0 * np.eye(2))
    doc["gains"]["Theta"] = np.eye(3).tolist()  # wrong size
    with pytest.raises(ScenarioError, match="gain matrix"):
        build_runtime(doc)


def test_build_runtime_omega_w0_broadcast():
    doc = small_doc(wheels={"omega_w0": 3.0})
    rt = build_runtime(doc)
    np.testing.assert_allclose(rt.omega_w0, 3.0)
    assert rt.omega_w0.shape == (rt.system.topology.beta,)
    doc = small_doc(wheels={"omega_w0": [1.0]})
    with pytest.raises(ScenarioError, match="omega_w0"):
        build_runtime(doc)


def test_spin_initial_condition_is_rigid_rotation():
    doc = small_doc(structure={
        "builder": "dbar", "angle_D": 0.6, "length": 2.0, "dim": 3, "fold": 3},
        initial={"spin_x": 0.5},
        objective={"select": {"points": [{"point": 1, "axes": "yz"}]}})
    rt = build_runtime(doc)
    N, Nd = rt.state0.N, rt.state0.N_dot
    w = np.array([0.5, 0.0, 0.0])
    expect = np.cross(w, N.T).T
    np.testing.assert_allclose(Nd, expect, atol=1e-12)
    # rigid spin about the pin axis stays on the constraint manifold
    assert np.abs(rt.system.constraints.A @ vectorize(Nd)).max() < 1e-12


def test_maneuver_reference_endpoints():
    doc = small_doc(
        structure={"builder": "tnd1", "n": 1, "angles_T": [0.35],
                   "angle_D": 1.0, "length": 4.0, "dim": 2},
        objective={"select": {"mode": "spine", "axes": "xz"},
                   "target": {"reach": 5.0}, "maneuver_steps": 100},
    )
    rt = build_runtime(doc)
    start = rt.Lscript @ vectorize(rt.state0.N)
    np.testing.assert_allclose(rt.n_bar_at(0), start, atol=1e-12)
    np.testing.assert_allclose(rt.n_bar_at(100), rt.n_bar, atol=1e-12)
    np.testing.assert_allclose(rt.n_bar_at(5000), rt.n_bar, atol=1e-12)
    # midway the reference sits strictly between the endpoints
    mid = rt.n_bar_at(50)
    assert np.linalg.norm(mid - start) > 0.1
    assert np.linalg.norm(mid - rt.n_bar) > 0.1


def test_reference_rates_opt_in_and_consistent():
    doc = small_doc(
        structure={"builder": "tnd1", "n": 1, "angles_T": [0.35],
                   "angle_D": 1.0, "length": 4.0, "dim": 2},
        objective={"select": {"mode": "spine", "axes": "xz"},
                   "target": {"reach": 5.0}, "maneuver_steps": 100},
    )
    rt = build_runtime(doc)
    vel, acc = rt.n_bar_rates(50, rt.dt)
    assert not vel.any() and not acc.any()  # feedforward off by default

    doc["control"] = {"feedforward": True}
    rt = build_runtime(doc)
    vel, acc = rt.n_bar_rates(50, rt.dt)
    num = (rt.n_bar_at(51) - rt.n_bar_at(49)) / (2 * rt.dt)
    np.testing.assert_allclose(vel, num, atol=1e-12)
    assert np.linalg.norm(vel) > 0.0
    # past the maneuver the reference is static
    vel, acc = rt.n_bar_rates(101, rt.dt)
    assert not vel.any() and not acc.any()


def test_synthesized_gains_populate_runtime():
    doc = small_doc(
        objective={"select": {"points": [{"point": "tip", "axes": "xz"}]}},
        gains={"source": "synthesized", "bound": "stabilizing"},
    )
    rt = build_runtime(doc)
    assert rt.gain_result is not None
    assert rt.gain_result.kind == "stabilizing"
    assert min(rt.gain_result.margins) > 0
    m = rt.Lscript.shape[0]
    A = np.block([[np.zeros((m, m)), np.eye(m)], [-rt.Theta, -rt.Psi]])
    assert np.max(np.linalg.eigvals(A).real) < 0


def test_synth_override_switches_bound():
    doc = small_doc(
        objective={"select": {"points": [{"point": "tip", "axes": "xz"}]}},
        gains={"source": "synthesized", "bound": "stabilizing"},
    )
    rt = build_runtime(doc, synth_override="energy_to_peak")
    assert rt.gain_result.kind == "energy_to_peak"
    assert rt.gain_result.epsilon is not None and rt.gain_result.epsilon > 0
