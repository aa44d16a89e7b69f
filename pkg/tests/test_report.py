import json

import numpy as np

from tensarm import report, simulate
from tensarm.scenario import build_runtime


def tiny_doc():
    return {
        "format": "tensarm-scenario",
        "version": 1,
        "name": "unit",
        "structure": {"builder": "dbar", "angle_D": 0.6, "length": 2.0, "dim": 2},
        "pinned_points": ["base"],
        "objective": {"select": {"mode": "spine", "axes": "xz"}},
        "gains": {"source": "explicit", "Theta": 30.0, "Psi": 20.0},
        "disturbance": {"kind": "pulse", "duration": 0.05},
        "integrator": {"dt": 2e-3, "steps": 25},
    }


def test_write_csv_full_precision_roundtrip(tmp_path):
    path = tmp_path / "t.csv"
    x = np.array([1.0 / 3.0, 1e-300, 123456789.123456789])
    flags = np.array([True, False, True])
    report.write_csv(str(path), ["x", "flag"], [x, flags])
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x,flag"
    back = np.array([float(line.split(",")[0]) for line in lines[1:]])
    np.testing.assert_array_equal(back, x)  # 17 significant digits roundtrip
    assert [line.split(",")[1] for line in lines[1:]] == ["1", "0", "1"]


def test_write_rows_handles_missing_and_none(tmp_path):
    path = tmp_path / "r.csv"
    report.write_rows(str(path), ["a", "b"], [{"a": 1.5}, {"a": 2, "b": None}])
    assert path.read_text() == "a,b\n1.5,\n2,\n"


def test_write_run_tables_and_figures(tmp_path):
    res = simulate.run(build_runtime(tiny_doc()), seed=0)
    outdir = tmp_path / "out"
    manifest = report.write_run(str(outdir), res, plots=True)
    assert manifest["kind"] == "run"
    listed = set(manifest["files"])
    assert {"timeseries.csv", "summary.json"} <= listed
    assert any(f.endswith(".png") for f in listed)
    for f in listed:
        assert (outdir / f).exists()
    saved = json.loads((outdir / "manifest.json").read_text())
    assert saved == manifest
    header = (outdir / "timeseries.csv").read_text().split("\n", 1)[0].split(",")
    assert header[0] == "t" and "err_norm" in header and "gamma_0" in header
    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["steps"] == 25


def test_write_run_no_plots(tmp_path):
    res = simulate.run(build_runtime(tiny_doc()), seed=0)
    manifest = report.write_run(str(tmp_path / "o"), res, plots=False)
    assert not any(f.endswith(".png") for f in manifest["files"])


def test_run_output_byte_identical_for_same_seed(tmp_path):
    doc = tiny_doc()
    for d in ("a", "b"):
        res = simulate.run(build_runtime(doc), seed=9)
        report.write_run(str(tmp_path / d), res, plots=False)
    assert ((tmp_path / "a" / "timeseries.csv").read_bytes()
            == (tmp_path / "b" / "timeseries.csv").read_bytes())
    assert ((tmp_path / "a" / "summary.json").read_bytes()
            == (tmp_path / "b" / "summary.json").read_bytes())


def test_write_sweep(tmp_path):
    rows = [
        {"target_id": 0, "target": {"reach": 4.0}, "ok": True,
         "initial_err": 0.5, "final_err": 1e-4, "err_ratio": 2e-4,
         "settling_step": 90, "settling_time": 0.18, "avg_gamma": 1.25,
         "feasible_steps": 100, "fallback_steps": 0, "max_bar_drift": 1e-12,
         "max_constraint_residual": 1e-13, "error": None},
        {"target_id": 1, "target": {"reach": 9.0}, "ok": False,
         "error": "IntegrationDivergedError: non-finite nodal forces"},
        {"target_id": 2, "target": {"reach": 4.5}, "ok": True,
         "initial_err": 0.8, "final_err": 2e-4, "err_ratio": 2.5e-4,
         "settling_step": 95, "settling_time": 0.19, "avg_gamma": 1.5,
         "feasible_steps": 100, "fallback_steps": 0, "max_bar_drift": 1e-12,
         "max_constraint_residual": 1e-13, "error": None},
    ]
    outdir = tmp_path / "sweep"
    manifest = report.write_sweep(str(outdir), rows, plots=True)
    assert manifest["kind"] == "sweep"
    text = (outdir / "sweep.csv").read_text()
    lines = text.strip().split("\n")
    assert len(lines) == 4
    assert "IntegrationDivergedError" in lines[2]
    assert "," not in json.dumps({"reach": 4.0}).replace(",", ";")
    assert (outdir / "gamma_vs_reach.png").exists()
