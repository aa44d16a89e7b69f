"""Command line front end.

Verbs
  simulate   run a scenario closed loop and write tables/figures
  synth      synthesize disturbance-gain feedback for a scenario
  sweep      run a scenario's target sweep in a worker pool
  verify     run the independent numerical cross-checks
  topo       emit a scenario's structure as text

Exit codes: 0 ok, 2 scenario/config error, 3 infeasible synthesis or
equality, 4 numerical failure during integration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _load(args):
    from .scenario import load_scenario

    doc = load_scenario(args.scenario)
    integ = dict(doc.get("integrator", {}))
    if getattr(args, "dt", None) is not None:
        integ["dt"] = args.dt
    if getattr(args, "steps", None) is not None:
        integ["steps"] = args.steps
    doc["integrator"] = integ
    return doc


def _outdir(args, doc, suffix=""):
    if args.out:
        return args.out
    name = doc.get("name", "scenario")
    return os.path.join("out", name + suffix)


def cmd_simulate(args) -> int:
    from . import report, simulate
    from .scenario import build_runtime

    doc = _load(args)
    runtime = build_runtime(doc)
    result = simulate.run(runtime, seed=args.seed)
    outdir = _outdir(args, doc)
    report.write_run(outdir, result, plots=not args.no_plots)
    s = result.summary
    print(f"scenario {s['name']}: {s['steps']} steps at dt={s['dt']:g}")
    print(f"  error norm {s['initial_err']:.6g} -> {s['final_err']:.6g} "
          f"(ratio {s['err_ratio'] if s['err_ratio'] is not None else 'n/a'})")
    settle = s["settling_step"]
    print(f"  settling step {settle if settle is not None else 'not settled'}; "
          f"feasible {s['feasible_steps']}/{s['steps']}")
    print(f"  avg total force density {s['avg_gamma']:.6g}; "
          f"max bar drift {s['max_bar_drift']:.3g}")
    print(f"  wrote {outdir}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .scenario import build_runtime

    doc = _load(args)
    if args.bound is None and doc.get("gains", {}).get("source") != "synthesized":
        print("scenario uses explicit gains; pass --bound to synthesize anyway",
              file=sys.stderr)
        return EXIT_CONFIG
    runtime = build_runtime(doc, synth_override=args.bound)
    res = runtime.gain_result
    print(f"bound {res.kind}: status {res.status}")
    if res.epsilon is not None:
        print(f"  certified gain bound epsilon = {res.epsilon:.6e}")
    print(f"  certificate margins (min eigenvalues): "
          + ", ".join(f"{m:.3e}" for m in res.margins))
    theta_eig = np.linalg.eigvalsh(0.5 * (runtime.Theta + runtime.Theta.T))
    psi_eig = np.linalg.eigvalsh(0.5 * (runtime.Psi + runtime.Psi.T))
    print(f"  Theta eigenvalues [{theta_eig.min():.4g}, {theta_eig.max():.4g}]")
    print(f"  Psi eigenvalues [{psi_eig.min():.4g}, {psi_eig.max():.4g}]")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "kind": res.kind,
            "status": res.status,
            "epsilon": res.epsilon,
            "margins": res.margins,
            "Theta": runtime.Theta.tolist(),
            "Psi": runtime.Psi.tolist(),
            "G": res.G.tolist(),
        }
        path = os.path.join(args.out, "gains.json")
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"  wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from . import report, simulate

    doc = _load(args)
    rows = simulate.run_sweep(doc, jobs=args.jobs, seed=args.seed)
    outdir = _outdir(args, doc, suffix="_sweep")
    report.write_sweep(outdir, rows, plots=not args.no_plots)
    n_ok = sum(1 for r in rows if r.get("ok"))
    print(f"sweep: {n_ok}/{len(rows)} targets completed")
    for r in rows:
        tgt = json.dumps(r["target"], sort_keys=True)
        if r.get("ok"):
            print(f"  [{r['target_id']}] {tgt}: err_ratio="
                  f"{r['err_ratio']:.3e} avg_gamma={r['avg_gamma']:.6g}")
        else:
            print(f"  [{r['target_id']}] {tgt}: FAILED ({r['error']})")
    print(f"  wrote {outdir}")
    return EXIT_OK if n_ok == len(rows) else EXIT_NUMERICAL


def cmd_topo(args) -> int:
    from .scenario import build_structure, load_scenario
    from .topology import structure_to_text

    doc = load_scenario(args.scenario)
    text = structure_to_text(build_structure(doc))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{doc.get('name', 'structure')}.topo")
        with open(path, "w") as f:
            f.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: independent numerical cross-checks


def cmd_verify(args) -> int:
    from . import verify

    checks = verify.run_all(lambda_trials=args.trials,
                            momentum_steps=args.momentum_steps,
                            fidelity_steps=args.fidelity_steps,
                            tol_scale=args.tol_scale)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.name}: residual {c.residual:.3e}"
              f" (tolerance {c.tolerance:.1e}, margin "
              f"{c.tolerance - c.residual:.3e})")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tensarm",
        description="shape control for gyroscopic tensegrity arms",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, sim=True):
        p.add_argument("--scenario", required=True,
                       help="scenario file path or preset:<name>")
        p.add_argument("--out", default=None, help="output directory")
        if sim:
            p.add_argument("--dt", type=float, default=None)
            p.add_argument("--steps", type=int, default=None)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("simulate", help="run a scenario closed loop")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("synth", help="synthesize feedback gains")
    common(p, sim=False)
    p.add_argument("--bound", default=None,
                   choices=["energy_to_peak", "energy_to_energy",
                            "impulse_to_energy", "covariance", "stabilizing"],
                   help="override the scenario's bound kind")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("sweep", help="run a scenario's target sweep")
    common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="run numerical cross-checks")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--momentum-steps", type=int, default=10000)
    p.add_argument("--fidelity-steps", type=int, default=1000)
    p.add_argument("--tol-scale", type=float, default=1.0,
                   help="multiply every tolerance (use <1 to tighten)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("topo", help="emit a scenario's structure as text")
    common(p, sim=False)
    p.set_defaults(fn=cmd_topo)

    args = parser.parse_args(argv)

    from .dynamics import DynamicsError
    from .gain_synthesis import InfeasibleError, SynthesisError
    from .scenario import ScenarioError

    try:
        return args.fn(args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DynamicsError, SynthesisError, FloatingPointError) as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
