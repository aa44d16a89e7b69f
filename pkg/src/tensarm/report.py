"""Run artifacts: delimited tables, summary files and figures.

Numeric cells are printed with 17 significant digits so that a rerun with
the same scenario and seed reproduces the files byte for byte.  Figures
are rendered through the Agg backend straight to PNG; callers that only
want the tables pass plots=False.
"""

from __future__ import annotations

import json
import os

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: str, header: list[str], columns: list) -> None:
    """Write columns of equal length as a comma-delimited table."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for i in range(n):
            f.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def write_rows(path: str, header: list[str], rows: list[dict]) -> None:
    """Write a list of dict rows using the given column order."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(row.get(k)) for k in header) + "\n")


def _plot_run(outdir: str, result) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    files = []
    t = result.t

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, np.maximum(result.err_norm, 1e-300))
    ax.set_xlabel("time [s]")
    ax.set_ylabel("position error norm")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p = os.path.join(outdir, "error_norm.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    files.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, result.gamma)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("force densities")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    p = os.path.join(outdir, "force_densities.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    files.append(p)

    if result.omega_w.size:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(t, result.omega_w)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("wheel speeds [rad/s]")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        p = os.path.join(outdir, "wheel_speeds.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        files.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, np.maximum(result.bar_drift, 1e-300), label="bar length drift")
    ax.semilogy(t, np.maximum(result.constraint_residual, 1e-300),
                label="pin residual")
    ax.set_xlabel("time [s]")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p = os.path.join(outdir, "drift.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    files.append(p)
    return files


def write_run(outdir: str, result, plots: bool = True) -> dict:
    """Write one simulation's tables (and figures) and return the manifest."""
    os.makedirs(outdir, exist_ok=True)
    m = result.err.shape[1]
    alpha = result.gamma.shape[1]
    beta = result.omega_w.shape[1]

    header = (["t"] + [f"err_{i}" for i in range(m)] + ["err_norm"]
              + [f"gamma_{i}" for i in range(alpha)]
              + [f"omega_w_{i}" for i in range(beta)]
              + ["feasible", "residual", "bar_drift",
                 "constraint_residual", "w_amp"])
    columns = ([result.t] + [result.err[:, i] for i in range(m)]
               + [result.err_norm]
               + [result.gamma[:, i] for i in range(alpha)]
               + [result.omega_w[:, i] for i in range(beta)]
               + [result.feasible, result.residual, result.bar_drift,
                  result.constraint_residual, result.w_amp])
    ts_path = os.path.join(outdir, "timeseries.csv")
    write_csv(ts_path, header, columns)

    sum_path = os.path.join(outdir, "summary.json")
    with open(sum_path, "w") as f:
        json.dump(result.summary, f, indent=2, sort_keys=True)
        f.write("\n")

    files = [ts_path, sum_path]
    if plots:
        files += _plot_run(outdir, result)

    manifest = {
        "kind": "run",
        "name": result.summary.get("name"),
        "files": [os.path.basename(p) for p in files],
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


SWEEP_COLUMNS = [
    "target_id", "target", "ok", "initial_err", "final_err", "err_ratio",
    "settling_step", "settling_time", "avg_gamma", "feasible_steps",
    "fallback_steps", "max_bar_drift", "max_constraint_residual", "error",
]


def write_sweep(outdir: str, rows: list[dict], plots: bool = True) -> dict:
    """Write sweep results as one row per target, plus a gamma-vs-reach plot."""
    os.makedirs(outdir, exist_ok=True)
    flat = []
    for row in rows:
        r = dict(row)
        r["target"] = json.dumps(row["target"], sort_keys=True).replace(",", ";")
        flat.append(r)
    csv_path = os.path.join(outdir, "sweep.csv")
    write_rows(csv_path, SWEEP_COLUMNS, flat)

    files = [csv_path]
    if plots:
        reach_rows = [r for r in rows
                      if r.get("ok") and "reach" in r["target"]
                      and r.get("avg_gamma") is not None]
        if len(reach_rows) >= 2:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt

            reach_rows.sort(key=lambda r: r["target"]["reach"])
            x = [r["target"]["reach"] for r in reach_rows]
            y = [r["avg_gamma"] for r in reach_rows]
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(x, y, "o-")
            ax.set_xlabel("target reach")
            ax.set_ylabel("average total force density")
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            p = os.path.join(outdir, "gamma_vs_reach.png")
            fig.savefig(p, dpi=120)
            plt.close(fig)
            files.append(p)

    manifest = {"kind": "sweep",
                "files": [os.path.basename(p) for p in files]}
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
