"""Command-line entry point: ``conformal-yamabe <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or validation error,
3 infeasible or non-converged computation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import cones, geometry, reporting, verify
from .config import ExperimentConfig, load_config
from .exhaustion import run_negative, run_negative_degenerate, run_positive
from .profiles import closed_form
from .discretize import SingularSystemError
from .solver import InfeasibleError, NonPositiveSolutionError, newton_solve

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2, 3

CURVATURE_HEADER = ("r", "chi1", "chi2", "lam_radial", "lam_tangential", "scalar_curvature", "f_value", "margin")


class UsageError(Exception):
    pass


def _cone_from_args(args) -> cones.ConeSpec:
    if args.n is None or args.k is None:
        raise UsageError("--n and --k are required")
    try:
        if args.family == "tau":
            if args.tau is None:
                raise UsageError("--tau is required for the tau family")
            return cones.parse_cone({"family": "tau", "tau": args.tau,
                                     "base": {"family": args.base, "n": args.n, "k": args.k}})
        return cones.parse_cone({"family": args.family, "n": args.n, "k": args.k})
    except cones.DomainError as exc:
        raise UsageError(str(exc)) from exc


def cmd_cone(args) -> int:
    cone = _cone_from_args(args)
    if args.action == "mu":
        mu = cones.mu_plus(cone, method=args.method)
        print(f"cone: {cone.describe()}")
        print(f"mu_plus: {mu:.12g}")
        print(f"mu > 1: {'yes' if mu > 1.0 + 1e-12 else 'no'}")
        return EXIT_OK
    if len(args.values) != cone.n:
        raise UsageError(f"expected {cone.n} eigenvalues after '--', got {len(args.values)}")
    lam = np.array(args.values, dtype=float)
    if args.action == "contains":
        print(cones.contains(cone, lam).value)
        print(f"margin: {float(cones.admissibility_margin(cone, lam)):.6g}")
    else:
        print(" ".join(reporting.format_number(x) for x in cones.deform(cone, lam)))
    return EXIT_OK


def _metric_from_args(args):
    if args.metric == "euclidean":
        return geometry.euclidean(args.n)
    if args.metric == "schwarzschild":
        if args.mu is None or args.m is None:
            raise UsageError("schwarzschild needs --mu and --m")
        return geometry.schwarzschild_type(args.n, args.mu, args.m)
    if args.metric == "cylinder":
        return geometry.ConformallyFlat(args.n, closed_form("log", c=-1.0))
    if args.phi is None:
        raise UsageError("warped needs --phi")
    params = json.loads(args.phi_params) if args.phi_params else {}
    return geometry.WarpedProduct(args.n, closed_form(args.phi, **params), args.fiber_sign)


def curvature_rows(metric, cone, r, sign: str = "native") -> np.ndarray:
    eig = geometry.schouten(metric, r)
    if sign != "native":
        eig = eig.as_sign(1 if sign == "positive" else -1)
    lam = eig.vector()
    F = cones.normalize(cones.canonical(cone))
    scal = geometry.scalar_curvature(metric, r)
    return np.column_stack([r, eig.chi1, eig.chi2, lam[:, 0], lam[:, 1], scal,
                            F.values(lam), cones.admissibility_margin(cone, lam)])


def cmd_curvature(args) -> int:
    if args.r_max <= args.r_min or args.samples < 2:
        raise UsageError("need r_max > r_min and samples >= 2")
    cone = _cone_from_args(args)
    metric = _metric_from_args(args)
    r = np.linspace(args.r_min, args.r_max, args.samples)
    rows = curvature_rows(metric, cone, r, args.sign)
    if args.output:
        reporting.write_csv(args.output, CURVATURE_HEADER, rows)
    else:
        print(",".join(CURVATURE_HEADER))
        for row in rows:
            print(",".join(reporting.format_number(v) for v in row))
    return EXIT_OK


def _run_dir(cfg: ExperimentConfig, args, path: str) -> Path:
    root = Path(args.output_dir) if args.output_dir else cfg.output_root()
    run_id = args.run_id or cfg.output.run_id or Path(path).stem
    return root / run_id


def _solve_one(path: str, args) -> tuple[int, str]:
    cfg = load_config(path)
    cfg.validate_all()
    problem = cfg.build_problem()
    t0 = time.perf_counter()
    sol = newton_solve(problem)
    summary = {"config": cfg.model_dump(mode="json", exclude_none=True), "solution": sol.summary(),
               "seed": cfg.seed}
    lines = [f"converged: {sol.converged} ({sol.message})", f"iterations: {sol.iterations}",
             f"residual: {sol.residual:.3e}", f"u range: [{sol.u.min():.6g}, {sol.u.max():.6g}]"]
    if cfg.problem.exact is not None:
        err = float(np.max(np.abs(sol.u - cfg.problem.exact.build()(sol.r))))
        summary["solution"]["sup_error"] = err
        lines.append(f"sup error vs exact: {err:.3e}")
    out = _run_dir(cfg, args, path)
    if "json" in cfg.output.formats:
        reporting.write_json(out / "summary.json", summary)
    if "csv" in cfg.output.formats:
        reporting.write_solution_csv(out / "solution.csv", sol)
    lines.append(f"outputs: {out}")
    lines.append(f"seconds: {time.perf_counter() - t0:.2f}")
    return (EXIT_OK if sol.converged else EXIT_COMPUTE), "\n".join(lines)


def _exhaust_one(path: str, args) -> tuple[int, str]:
    cfg = load_config(path)
    cfg.validate_all()
    plan = cfg.build_plan()
    e = cfg.exhaustion
    if e.mode == "negative":
        report = run_negative(plan)
    elif e.mode == "degenerate":
        report = run_negative_degenerate(plan)
    else:
        report = run_positive(plan, e.Lambda, degenerate_floor=e.degenerate_floor)
    out = _run_dir(cfg, args, path)
    full = report.to_dict()
    summary = {"classification": report.classification, "limit_kind": report.limit_kind,
               "inf_trace": report.inf_trace, "radii": [s.R for s in report.stages],
               "truncated": report.truncated, "message": report.message, "seed": cfg.seed}
    # partial outputs are written even when a stage failed
    if "json" in cfg.output.formats:
        reporting.write_json(out / "summary.json", summary)
        reporting.write_json(out / "report.json", full)
    if "csv" in cfg.output.formats:
        for s in report.stages:
            if s.solution is not None:
                reporting.write_solution_csv(out / f"stage-{s.j}.csv", s.solution)
    lines = [f"classification: {report.classification}"]
    if report.limit_kind:
        lines.append(f"limit: {report.limit_kind}")
    flat = cfg.metric.kind == "euclidean" and e.mode == "negative"
    # ln(2/R) is the inf of the complete solution on the ball of radius R
    lines.append("j,R,inf_core," + ("ln(2/R)," if flat else "") + "u_min,u_max,converged")
    for s in report.stages:
        ref = f"{math.log(2.0 / s.R):.6g}," if flat else ""
        lines.append(f"{s.j},{s.R:g},{s.inf_core:.6g},{ref}{s.u_min:.6g},{s.u_max:.6g},{s.converged}")
    if report.truncated:
        lines.append(f"stopped: {report.message}")
    lines.append(f"outputs: {out}")
    return (EXIT_COMPUTE if report.truncated else EXIT_OK), "\n".join(lines)


def _guarded(fn, path, args) -> tuple[int, str]:
    try:
        return fn(path, args)
    except (cones.AdmissibilityError, InfeasibleError, NonPositiveSolutionError, SingularSystemError) as exc:
        return EXIT_COMPUTE, f"{path}: computation failed: {exc}"
    except (ValidationError, cones.DomainError, ValueError, OSError) as exc:
        return EXIT_USAGE, f"{path}: invalid configuration: {exc}"


def _run_configs(fn, args) -> int:
    paths = args.config
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_guarded, [fn] * len(paths), paths, [args] * len(paths)))
    else:
        results = [_guarded(fn, p, args) for p in paths]
    for path, (_, text) in zip(paths, results):
        if len(paths) > 1:
            print(f"== {path}")
        print(text)
    return max(code for code, _ in results)


def cmd_solve(args) -> int:
    return _run_configs(_solve_one, args)


def cmd_exhaust(args) -> int:
    return _run_configs(_exhaust_one, args)


def _run_check(check):
    return check()


def cmd_verify(args) -> int:
    if args.suite not in verify.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {sorted(verify.SUITES)}")
    checks = verify.SUITES[args.suite]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_check, checks))
    else:
        results = [c() for c in checks]
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_VERIFY if failed else EXIT_OK


def _add_cone_args(p, require: bool = True):
    p.add_argument("--family", choices=["gamma-k", "tau"], default="gamma-k")
    p.add_argument("--base", choices=["gamma-k"], default="gamma-k", help="base cone of a tau family")
    p.add_argument("--n", type=int, required=require)
    p.add_argument("--k", type=int, required=require)
    p.add_argument("--tau", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conformal-yamabe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cone", help="cone constants and membership")
    p.add_argument("action", choices=["mu", "contains", "deform"])
    _add_cone_args(p)
    p.add_argument("--method", choices=["auto", "closed", "bisection"], default="auto")
    p.add_argument("values", nargs="*", type=float, help="eigenvalues, given after '--'")
    p.set_defaults(func=cmd_cone)

    p = sub.add_parser("curvature", help="background Schouten eigenvalues as CSV")
    p.add_argument("--metric", choices=["euclidean", "schwarzschild", "warped", "cylinder"], required=True)
    _add_cone_args(p, require=False)
    p.add_argument("--mu", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--phi", help="warping profile name")
    p.add_argument("--phi-params", help="JSON object of profile parameters")
    p.add_argument("--fiber-sign", type=int, choices=[-1, 0, 1], default=1)
    p.add_argument("--r-min", type=float, default=0.5)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--sign", choices=["native", "positive", "negative"], default="native",
                   help="eigenvalues of +A, -A, or the metric's natural convention")
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_curvature, k=None)

    for name, func, text in (("solve", cmd_solve, "one Dirichlet solve from a config"),
                             ("exhaust", cmd_exhaust, "exhaustion run from a config")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", nargs="+", required=True, help="one or more ExperimentConfig JSON files")
        p.add_argument("--output-dir", help="output root (overrides config and environment)")
        p.add_argument("--run-id", help="run directory name (single config only)")
        p.add_argument("--jobs", type=int, default=1)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="bundled oracle checks")
    p.add_argument("--suite", default="all", help=f"one of {sorted(verify.SUITES)}")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # values after a bare '--' are eigenvalues; argparse mishandles them inside subcommands
    tail: list[str] = []
    if "--" in argv:
        cut = argv.index("--")
        argv, tail = argv[:cut], argv[cut + 1:]
    args = parser.parse_args(argv)
    if tail:
        if args.command != "cone":
            parser.error("positional values after '--' are only accepted by 'cone'")
        try:
            args.values = list(args.values) + [float(v) for v in tail]
        except ValueError:
            parser.error(f"eigenvalues must be numbers, got {tail}")
    if args.command == "curvature" and args.k is None:
        args.k = 1
    if args.command == "curvature" and args.n is None:
        parser.error("--n is required")
    if getattr(args, "run_id", None) and len(args.config) > 1:
        parser.error("--run-id needs a single config; each config gets its own run directory")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except cones.DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
