"""Command line entry points: plan, validate, batch and quantile.

Every numeric value written to disk is rounded to 12 significant digits and
no file contains timestamps, so identical inputs give identical bytes.
Files are written to a temporary sibling and renamed into place.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import (ConvexityError, ScenarioError, SingularDensityError, SolverError)
from .quantile import DEFAULT_P_END, build_pwa
from .scenario import compile_scenario, load_scenario, quantile_law
from .solver import ccp_solve
from .validate import estimate_satisfaction

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2

SOLUTION_FILE = "solution.json"
TRAJECTORY_FILE = "trajectory.csv"
REPORT_FILE = "validation.json"


# --------------------------------------------------------------------------
# output helpers


def fmt(x):
    """Decimal text with 12 significant digits."""
    return f"{float(x):.12g}"


def rounded(obj):
    """Copy of a JSON-like structure with every float rounded to 12 digits."""
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(fmt(x))
    return obj


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    atomic_write_text(path, json.dumps(rounded(doc), indent=1, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def resolve_scenario(name):
    """A scenario path, or the name of a scenario shipped with the package."""
    path = Path(name)
    if path.exists():
        return path
    stem = name[:-5] if name.endswith(".json") else name
    shipped = resources.files("heavytail_ccp") / "scenarios" / f"{stem}.json"
    if shipped.is_file():
        return Path(str(shipped))
    raise ScenarioError(f"{name}: no such file or shipped scenario", field="")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# plan


def mean_trajectories(compiled, controls):
    """Noise-free states ``x(1..N)`` per vehicle in file units."""
    model = compiled.model
    N = compiled.scenario.horizon
    out = []
    for x0, u in zip(compiled.x0s, controls):
        U = np.asarray(u).reshape(N, -1)
        x = np.asarray(x0, dtype=float)
        xs = []
        for k in range(N):
            x = model.A @ x + model.B @ U[k]
            xs.append(x * compiled.state_scale)
        out.append(np.array(xs))
    return out


def solution_document(compiled, result):
    scn = compiled.scenario
    fc = compiled.file_controls(result.controllers)
    pwa = {}
    for key, q in compiled.pwa_map.items():
        pwa[key] = {"p_lo": q.p_lo, "p_hi": q.p_hi, "xi": q.xi, "segments": len(q),
                    "slopes": q.slopes, "intercepts": q.intercepts}
    trace = [{k: v for k, v in t.items()} for t in result.trace]
    return {
        "scenario": scn.name,
        "seed": scn.seed,
        "horizon": scn.horizon,
        "input_dim": compiled.model.input_dim,
        "vehicles": scn.vehicle_ids,
        "controllers": {vid: c for vid, c in zip(scn.vehicle_ids, fc)},
        "cost": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "slack_total": result.slack_total,
        "risk": {"eta": result.risk.eta, "upsilon": result.risk.upsilon,
                 "pool_sums": result.risk.pool_sums, "pool_limits": result.risk.pool_limits},
        "n_constraints": len(compiled.specs),
        "pwa": pwa,
        "trace": trace,
    }


def trajectory_rows(compiled, controls):
    scn = compiled.scenario
    fc = compiled.file_controls(controls)
    rows = []
    for vid, xs, u in zip(scn.vehicle_ids, mean_trajectories(compiled, controls), fc):
        for k in range(scn.horizon):
            rows.append([vid, str(k + 1), *xs[k], *u[k]])
    n, m = compiled.model.state_dim, compiled.model.input_dim
    header = ["vehicle", "k"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
    return header, rows


def solve_compiled(compiled):
    return ccp_solve(compiled.layout, compiled.specs, compiled.pwa_map, compiled.solver_config)


def run_plan(scenario, out_dir, quiet=False):
    """Solve ``scenario`` and write the solution and mean trajectory to ``out_dir``."""
    try:
        scn = load_scenario(resolve_scenario(scenario))
        compiled = compile_scenario(scn)
        result = solve_compiled(compiled)
    except (ScenarioError, ConvexityError, SingularDensityError, SolverError) as exc:
        _err(exc)
        return EXIT_ERROR
    out_dir = Path(out_dir)
    write_json(out_dir / SOLUTION_FILE, solution_document(compiled, result))
    header, rows = trajectory_rows(compiled, result.controllers)
    write_csv(out_dir / TRAJECTORY_FILE, header, rows)
    if not quiet:
        state = "converged" if result.converged else "iteration cap reached"
        print(f"{scn.name}: {state} after {result.iterations} iterations, "
              f"cost {fmt(result.objective)}, slack {fmt(result.slack_total)}, "
              f"{result.compute_time:.2f} s")
    return EXIT_OK if result.converged else EXIT_MAX_ITER


# --------------------------------------------------------------------------
# validate


def load_solution(compiled, path):
    """Internal-unit controllers from a solution file, checked against the scenario."""
    scn = compiled.scenario
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: cannot read solution ({exc})", field="solution") from None
    ctrl = doc.get("controllers")
    if not isinstance(ctrl, dict) or sorted(ctrl) != sorted(scn.vehicle_ids):
        have = sorted(ctrl) if isinstance(ctrl, dict) else None
        raise ScenarioError(f"vehicles {have} do not match scenario {sorted(scn.vehicle_ids)}",
                            field="controllers")
    return compiled.internal_controls([ctrl[vid] for vid in scn.vehicle_ids])


def run_validate(scenario, solution, samples=10_000, seed=0, report=None, per_step=False,
                 quiet=False):
    try:
        scn = load_scenario(resolve_scenario(scenario))
        compiled = compile_scenario(scn, reformulate=False)
        controls = load_solution(compiled, solution)
    except ScenarioError as exc:
        _err(exc)
        return EXIT_ERROR
    rep = estimate_satisfaction(compiled, controls, samples, seed, per_step=per_step)
    report = Path(report) if report else Path(solution).with_name(REPORT_FILE)
    write_json(report, rep.to_dict())
    if not quiet:
        for name, fam in rep.families.items():
            verdict = "pass" if fam.passed else "FAIL"
            print(f"{name}: {fam.probability:.4f} +/- {fam.std_error:.4f} "
                  f"(need >= {fam.threshold:.4f}) {verdict}")
    return EXIT_OK if rep.passed else EXIT_ERROR


# --------------------------------------------------------------------------
# batch


def perturbed_positions(scn, run, seed):
    """Initial states with positions shifted by a multivariate t draw for one run."""
    b = scn.batch
    nu = float(b.get("perturb_nu", 10.0))
    scale = float(b.get("perturb_scale_m", 1.0))
    idx = list(b.get("position_indices", range(3)))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run)])))
    out = []
    for v in scn.vehicles:
        x = np.array(v.x0, dtype=float)
        y = rng.standard_normal(len(idx))
        z = rng.chisquare(nu)
        x[idx] += scale * y / math.sqrt(z / nu)
        out.append(x)
    return out


def _batch_run(args):
    scn, run, seed, samples = args
    entry = {"run": run}
    try:
        x0 = perturbed_positions(scn, run, seed)
        compiled = compile_scenario(scn, x0_override=x0)
        res = solve_compiled(compiled)
        entry.update(status="ok", converged=res.converged, iterations=res.iterations,
                     cost=res.objective, compute_time=res.compute_time,
                     slack_total=res.slack_total)
        if samples:
            rep = estimate_satisfaction(compiled, res.controllers, samples, seed + 1 + run)
            entry["satisfaction"] = {k: f.probability for k, f in rep.families.items()}
            entry["validated"] = rep.passed
    except Exception as exc:  # a failed run is recorded, the batch goes on
        entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return entry


def _describe(values):
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return None
    return {"mean": float(a.mean()), "std": float(a.std(ddof=1)) if a.size > 1 else 0.0,
            "min": float(a.min()), "max": float(a.max())}


def batch_summary(runs):
    ok = [r for r in runs if r["status"] == "ok"]
    summary = {
        "runs": len(runs),
        "failures": len(runs) - len(ok),
        "not_converged": sum(1 for r in ok if not r["converged"]),
        "compute_time_s": _describe([r["compute_time"] for r in ok]),
        "cost": _describe([r["cost"] for r in ok]),
        "iterations": _describe([r["iterations"] for r in ok]),
    }
    sat = [r["satisfaction"] for r in ok if "satisfaction" in r]
    if sat:
        summary["satisfaction_min"] = {k: min(s[k] for s in sat) for k in sat[0]}
        summary["validation_failures"] = sum(1 for r in ok if not r.get("validated", True))
    return summary


def run_batch(scenario, runs, seed=0, output=None, samples=0, workers=1, quiet=False):
    """Solve ``runs`` perturbed copies of ``scenario``; individual failures are recorded."""
    if runs < 1:
        _err("runs must be at least 1")
        return EXIT_ERROR
    try:
        scn = load_scenario(resolve_scenario(scenario))
    except ScenarioError as exc:
        _err(exc)
        return EXIT_ERROR
    jobs = [(scn, r, seed, samples) for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_run, jobs))
    else:
        results = [_batch_run(j) for j in jobs]
    summary = batch_summary(results)
    doc = {"scenario": scn.name, "seed": seed, "samples": samples, "summary": summary,
           "runs": results}
    output = Path(output) if output else Path(f"{scn.name}_batch.json")
    write_json(output, doc)
    if not quiet:
        it = summary["iterations"]
        print(f"{scn.name}: {runs} runs, {summary['failures']} failed, "
              f"{summary['not_converged']} not converged"
              + (f", iterations mean {it['mean']:.1f} max {it['max']:.0f}" if it else ""))
    return EXIT_OK if summary["failures"] == 0 else EXIT_ERROR


# --------------------------------------------------------------------------
# quantile


def run_quantile(dist, output, h=5e-6, xi=0.01, nd=4, p_end=DEFAULT_P_END, segments=None,
                 quiet=False):
    """Dump the marched quantile table and its PWA over-approximation as CSV."""
    try:
        law = quantile_law(dist)
        table, pwa = build_pwa(law, h=h, xi=xi, n_d=nd, p_end=p_end)
    except (ScenarioError, ConvexityError, SingularDensityError, ValueError) as exc:
        _err(exc)
        return EXIT_ERROR
    p = table.probabilities
    inside = p >= pwa.p_lo - 1e-15
    approx = pwa(p)
    rows = [[p[i], table.values[i], approx[i] if inside[i] else ""] for i in range(p.size)]
    write_csv(output, ["p", "table", "pwa"], rows)
    if segments:
        write_csv(segments, ["slope", "intercept", "p_from", "p_to"],
                  [[m, c, a, b] for (m, c), a, b in
                   zip(pwa.segments, pwa.knots[:-1], pwa.knots[1:])])
    if not quiet:
        print(f"{law.key()}: {p.size} table points, {len(pwa)} segments on "
              f"[{fmt(pwa.p_lo)}, {fmt(pwa.p_hi)}]")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="heavytail-ccp",
                                 description="Chance-constrained multi-vehicle planning "
                                             "under multivariate t disturbances.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve a scenario")
    p.add_argument("scenario", help="scenario file or shipped scenario name")
    p.add_argument("-o", "--output", default=".", help="output directory")

    v = sub.add_parser("validate", help="Monte Carlo check of a solution")
    v.add_argument("scenario")
    v.add_argument("solution")
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", help=f"report path (default: {REPORT_FILE} next to the solution)")
    v.add_argument("--per-step", action="store_true",
                   help="fresh chi-square per time step instead of per trajectory")

    b = sub.add_parser("batch", help="solve perturbed initial conditions")
    b.add_argument("scenario")
    b.add_argument("--runs", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--samples", type=int, default=0, help="validation samples per run (0: skip)")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("-o", "--output")

    q = sub.add_parser("quantile", help="dump a quantile table and its PWA bound")
    q.add_argument("--dist", required=True,
                   help="t:NU, cauchy, betaprime:G,D, sqrtbetaprime:G,D, pair:Q,NU, obstacle:Q,NU")
    q.add_argument("--h", type=float, default=5e-6)
    q.add_argument("--xi", type=float, default=0.01)
    q.add_argument("--nd", type=int, default=4)
    q.add_argument("--p-end", type=float, default=DEFAULT_P_END)
    q.add_argument("--segments", help="also write the PWA segments to this CSV")
    q.add_argument("-o", "--output", required=True)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plan":
        return run_plan(args.scenario, args.output)
    if args.command == "validate":
        return run_validate(args.scenario, args.solution, args.samples, args.seed,
                            args.report, args.per_step)
    if args.command == "batch":
        return run_batch(args.scenario, args.runs, args.seed, args.output, args.samples,
                         args.workers)
    return run_quantile(args.dist, args.output, args.h, args.xi, args.nd, args.p_end,
                        args.segments)


if __name__ == "__main__":
    sys.exit(main())
