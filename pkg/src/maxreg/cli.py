"""Command-line experiment runner.

Subcommands::

    maxreg solve       --config run.toml [--out DIR] [--seed N] [--probes N]
    maxreg estimate    --config run.toml [--seed N] [--probes N]
    maxreg quasilinear --config run.toml [--out DIR]
    maxreg window      --c-lower 1 --c-upper 1 --C 3 --s 4
    maxreg window      --c-lower 1 --c-upper 2 --C 1.3 --r0 4 --r1 1.5 --mode isomorphism
    maxreg verify      [--out DIR]

Reports are JSON with floats printed to 17 significant digits.  The exit
status is 0 when every criterion in the report passes, 1 when one fails and
2 for invalid input.
"""
from __future__ import annotations

import argparse
import inspect
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .acceptance import CRITERIA
from .config import ConfigError, RunConfig, load_config
from .extrapolation import hilbert_window, kappa_r0
from .fem import p1_space
from .norms import holder_quotient, mr_norm
from .parabolic import (
    ParabolicProblem,
    apriori_check,
    estimate_mr_constant,
    reference_problem,
)
from .quasilinear import fixed_point_solve, quasilinear_residual, verify_effective_ellipticity

__all__ = ["main", "dumps", "run_solve", "run_estimate", "run_quasilinear", "run_window", "run_verify"]


# -- JSON with 17 significant digits ------------------------------------------------------


def _scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return "%.17g" % x
        return '"inf"' if x > 0 else ('"-inf"' if x < 0 else '"nan"')
    if isinstance(x, (str, Path)):
        return json.dumps(str(x))
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{_scalar(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _scalar(obj)


def _versions():
    return {"maxreg": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _criterion(cid, passed, value, limit, description):
    return {"id": cid, "pass": bool(passed), "value": value, "limit": limit, "description": description}


def _finish(report: dict) -> dict:
    report["pass"] = all(c["pass"] for c in report.get("criteria", []))
    report["versions"] = _versions()
    report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def _write(report: dict, out: Optional[Path], name: str = "report.json"):
    text = dumps(report) + "\n"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    return text


# -- commands -----------------------------------------------------------------------------


def run_solve(cfg: RunConfig, out: Optional[Path] = None, seed: Optional[int] = None,
              probes: Optional[int] = None) -> dict:
    """Solve, write ``trajectory.csv`` and ``report.json``, return the report."""
    seed = cfg.seed if seed is None else seed
    probes = cfg.probes if probes is None else probes
    mesh, part, grid = cfg.mesh, cfg.partition, cfg.grid
    problem = ParabolicProblem(mesh, part, grid, cfg.field, cfg.shift)
    u = problem.solve(cfg.forcing)
    mass = p1_space(mesh, part).mass

    energy = problem.energy_residual(u, cfg.forcing)
    du = np.diff(u.values, axis=0)
    predicted = -0.5 * np.concatenate([[0.0], np.cumsum(np.einsum("kn,kn->k", du, (mass @ du.T).T))])
    identity_err = float(np.abs(energy - predicted).max() / max(np.abs(predicted).max(), 1.0))

    apri = apriori_check(u, cfg.forcing, grid, mesh, part, cfg.field.bounds, cfg.shift)
    alpha = max(0.0, 0.5 - 1.0 / cfg.r) / 2
    ref = estimate_mr_constant(reference_problem(mesh, part, grid), 2.0, probes, seed)

    norms = dict(apri.norms)
    norms[f"mr_r{cfg.r:g}_q{cfg.q:g}"] = mr_norm(u, cfg.r, cfg.q, mesh, part)
    norms["holder"] = {"alpha": alpha, "quotient": holder_quotient(u, alpha, mass)}
    norms["energy_residual_final"] = float(energy[-1])
    bounds = dict(apri.constants)
    bounds["reference_constant_estimate"] = ref.value
    bounds["reference_constant_bound"] = 3.0

    criteria = [
        _criterion("A1", apri.ratios["state"] <= 1.0 and apri.ratios["derivative"] <= 1.05
                   and apri.ratios["mr"] <= 1.05, apri.ratios, {"state": 1.0, "derivative": 1.05, "mr": 1.05},
                   "a priori ratios of the discrete solution"),
        _criterion("A2", bool(np.all(energy <= 1e-12)) and identity_err <= 1e-10,
                   {"max_residual": float(energy.max()), "identity_error": identity_err},
                   {"max_residual": 1e-12, "identity_error": 1e-10},
                   "energy residual is dissipative and equals -1/2 sum |du|_M^2"),
        _criterion("A3", ref.value <= 3.0 * (1 + 1e-6), ref.value, 3.0 * (1 + 1e-6),
                   "reference maximal-regularity constant estimate"),
    ]
    out = cfg.out_dir if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    u.to_csv(out / "trajectory.csv")
    report = {"command": "solve", "input": cfg.raw, "seed": seed, "probes": probes,
              "norms": norms, "ratios": apri.ratios, "bounds": bounds, "criteria": criteria}
    report = _finish(report)
    _write(report, out)
    return report


def run_estimate(cfg: RunConfig, seed: Optional[int] = None, probes: Optional[int] = None) -> dict:
    seed = cfg.seed if seed is None else seed
    probes = cfg.probes if probes is None else probes
    if cfg.estimate_operator == "reference":
        problem = reference_problem(cfg.mesh, cfg.partition, cfg.grid)
    else:
        problem = ParabolicProblem(cfg.mesh, cfg.partition, cfg.grid, cfg.field, cfg.shift)
    est = estimate_mr_constant(problem, cfg.r, probes, seed)
    report = {"command": "estimate", "input": cfg.raw, "seed": seed, "probes": probes,
              "operator": cfg.estimate_operator, "r": cfg.r, "estimate": est.value,
              "probes_detail": [{"label": lab, "ratio": v} for lab, v in zip(est.labels, est.ratios)], "criteria": []}
    if cfg.estimate_operator == "reference" and cfg.r == 2.0:
        report["criteria"].append(_criterion("A3", est.value <= 3.0 * (1 + 1e-6), est.value, 3.0 * (1 + 1e-6),
                                             "reference maximal-regularity constant estimate"))
    return _finish(report)


def run_quasilinear(cfg: RunConfig, out: Optional[Path] = None) -> dict:
    if cfg.fixed_point is None:
        raise ConfigError("quasilinear runs need a [fixed_point] table")
    mesh, part, grid = cfg.mesh, cfg.partition, cfg.grid
    res = fixed_point_solve(cfg.field, cfg.sigma, cfg.forcing, grid, mesh, part, cfg.fixed_point)
    u = res.trajectory
    resid = quasilinear_residual(u, cfg.field, cfg.sigma, cfg.forcing, grid, mesh, part)
    ell = verify_effective_ellipticity(u, cfg.field, cfg.sigma, grid, mesh, part)
    out = cfg.out_dir if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    u.to_csv(out / "trajectory.csv")
    with open(out / "history.csv", "w") as fh:
        fh.write("iteration,distance,damping\n")
        for i, (d, w) in enumerate(zip(res.history, res.dampings), start=1):
            fh.write(f"{i},{d:.17g},{w:.17g}\n")
    report = {
        "command": "quasilinear", "input": cfg.raw,
        "norms": {f"mr_r{cfg.r:g}_q{cfg.q:g}": mr_norm(u, cfg.r, cfg.q, mesh, part), "residual": resid},
        "iterations": res.iterations, "converged": res.converged, "history": res.history,
        "bounds": {"c_lower": ell.bounds.c_lower, "c_upper": ell.bounds.c_upper,
                   "observed_lower": ell.observed_lower, "observed_upper": ell.observed_upper},
        "criteria": [
            _criterion("A9", res.converged and resid < 1e-6 and ell.passed,
                       {"residual": resid, "iterations": res.iterations, "ellipticity": ell.passed},
                       {"residual": 1e-6, "iterations": cfg.fixed_point.max_iterations},
                       "fixed point converged, small residual, effective coefficient elliptic"),
        ],
    }
    report = _finish(report)
    _write(report, out)
    return report


def run_window(c_lower: float, c_upper: float, C: float, s: Optional[float] = None,
               r0: Optional[float] = None, r1: Optional[float] = None, mode: str = "kappa",
               optimistic: bool = False) -> dict:
    if mode == "kappa":
        if s is None:
            raise ValueError("kappa mode needs --s")
        return kappa_r0(c_lower, c_upper, C, s, optimistic).as_dict()
    if r0 is None or r1 is None:
        raise ValueError(f"{mode} mode needs --r0 and --r1")
    w = hilbert_window(c_lower, c_upper, C, r0, r1, mode, optimistic)
    return {"theta": w.theta, "radius": w.radius, "window": [w.lo, w.hi], "bound": w.bound,
            "mode": mode, "optimistic": optimistic}


def run_verify(seed: Optional[int] = None, echo=print, ids=None) -> dict:
    results = []
    for cid in ids or CRITERIA:
        fn = CRITERIA[cid]
        kw = {"seed": seed} if seed is not None and "seed" in inspect.signature(fn).parameters else {}
        res = fn(**kw)
        if echo is not None:
            echo(res.line())
        results.append(res)
    report = {"command": "verify", "seed": seed,
              "criteria": [{k: v for k, v in r.as_dict().items() if k != "elapsed"} for r in results]}
    return _finish(report)


# -- argument parsing ---------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment file")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="probe seed (overrides estimate.seed)")
    common.add_argument("--probes", type=int, help="number of probes (overrides estimate.probes)")
    common.add_argument("--quiet", action="store_true", help="suppress standard output")
    p = argparse.ArgumentParser(prog="maxreg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve and check a priori bounds")
    sub.add_parser("estimate", parents=[common], help="estimate a maximal-regularity constant")
    sub.add_parser("quasilinear", parents=[common], help="damped Picard iteration")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite A1-A10")
    w = sub.add_parser("window", parents=[common], help="exponent windows from explicit constants")
    w.add_argument("--c-lower", type=float, required=True)
    w.add_argument("--c-upper", type=float, required=True)
    w.add_argument("--C", type=float, required=True, help="inverse-norm constant")
    w.add_argument("--s", type=float)
    w.add_argument("--r0", type=float)
    w.add_argument("--r1", type=float)
    w.add_argument("--mode", choices=["kappa", "surjective", "isomorphism"], default=None)
    w.add_argument("--optimistic", action="store_true", help="C is an estimate, not a proven bound")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    say = (lambda s: None) if args.quiet else print
    if args.probes is not None and args.probes < 1:
        print("error: --probes must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "window":
            mode = args.mode or ("kappa" if args.s is not None else "surjective")
            result = run_window(args.c_lower, args.c_upper, args.C, args.s, args.r0, args.r1, mode, args.optimistic)
            text = dumps(result) + "\n"
            if args.out is not None:
                _write(result, args.out, "window.json")
            say(text.rstrip())
            return 0
        if args.command == "verify":
            report = run_verify(args.seed, echo=say)
            if args.out is not None:
                _write(report, args.out, "verify.json")
            return 0 if report["pass"] else 1
        if args.config is None:
            print(f"error: {args.command} needs --config", file=sys.stderr)
            return 2
        cfg = load_config(args.config)
        if args.command == "solve":
            report = run_solve(cfg, args.out, args.seed, args.probes)
        elif args.command == "estimate":
            report = run_estimate(cfg, args.seed, args.probes)
            if args.out is not None:
                _write(report, args.out, "estimate.json")
        else:
            report = run_quasilinear(cfg, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    say(dumps(report))
    return 0 if report["pass"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
