"""Bundled verification checks against closed-form oracles.

Each check returns a CheckResult carrying the measured quantities, so the
same numbers can be printed by the CLI and asserted by the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cones, geometry
from .discretize import Grid
from .exhaustion import ExhaustionPlan, geometric_radii, run_negative, run_negative_degenerate, run_positive
from .profiles import closed_form
from .solver import DirichletProblem, barrier_check, conformal_laplacian_solve, newton_solve


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items() if not isinstance(v, (list, dict)))
        return f"{status} {self.name} ({self.seconds:.2f}s) {shown}"


def _short(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def _timed(name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    passed, metrics = fn()
    return CheckResult(name, bool(passed), metrics, time.perf_counter() - t0)


def check_mu_table(n_range=range(3, 11), tol: float = 1e-10) -> CheckResult:
    def run():
        worst_closed = 0.0
        worst_bisect = 0.0
        for n in n_range:
            for k in range(1, n + 1):
                cone = cones.GardingCone(n, k)
                exact = (n - k) / k
                worst_closed = max(worst_closed, abs(cones.mu_plus(cone) - exact))
                worst_bisect = max(worst_bisect, abs(cones.mu_plus(cone, method="bisection") - exact))
        return worst_closed == 0.0 and worst_bisect <= tol, {
            "max_closed_error": worst_closed, "max_bisection_error": worst_bisect}
    return _timed("mu_table", run)


def check_tau_mu(n_range=range(3, 9), tol: float = 1e-9) -> CheckResult:
    """At tau0 = (n-2)/(n-1): mu > 1 exactly when the base cone is not the positive cone."""
    def run():
        failures = []
        for n in n_range:
            tau0 = cones.tau_for_trace_parameter(n, 0.0)
            for k in range(1, n + 1):
                mu = cones.mu_plus(cones.TauCone(cones.GardingCone(n, k), tau0))
                ok = abs(mu - 1.0) <= tol if k == n else mu > 1.0 + tol
                if not ok:
                    failures.append((n, k, mu))
        return not failures, {"failures": failures}
    return _timed("tau_mu_threshold", run)


def check_mean_bound(samples: int = 10_000, seed: int = 0, dims=(4, 5, 6), ks=(1, 2)) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        violations = 0
        worst = -math.inf
        for n in dims:
            for k in ks:
                F = cones.canonical(cones.GardingCone(n, k))
                lam = cones.sample_interior(F.cone, samples, rng)
                lhs = F.values(lam)
                rhs = float(F.values(np.ones(n))) * lam.sum(axis=-1) / n
                gap = (lhs - rhs) / np.maximum(1.0, np.abs(rhs))
                violations += int(np.sum(gap > 1e-12))
                worst = max(worst, float(gap.max()))
        return violations == 0, {"violations": violations, "max_relative_gap": worst, "seed": seed,
                                 "samples_per_cone": samples}
    return _timed("mean_bound", run)


def check_schwarzschild_boundary(fault: bool = False, tol_sigma: float = 1e-9, tol_ratio: float = 1e-10) -> CheckResult:
    def run():
        r = np.linspace(0.5, 20.0, 200)
        worst_sigma = 0.0
        worst_ratio = 0.0
        for n in (4, 5, 6):
            for k in range(1, n):
                if not 2 * k < n:
                    continue
                mu = (n - k) / k
                p = mu - 1.0
                for m in (0.5, 1.0, 2.0):
                    eig = geometry.radial_conformal_schouten(geometry.schwarzschild_type(n, mu, m), r)
                    if fault:
                        eig = geometry.SchoutenEigenvalues(n, eig.chi1, -eig.chi2, eig.sign, eig.frame)
                    lam = eig.vector()
                    unit = lam / np.linalg.norm(lam, axis=-1, keepdims=True)
                    worst_sigma = max(worst_sigma, float(np.max(np.abs(cones.sigma_k(unit, k)))))
                    ratio = eig.chi2 / eig.chi1
                    worst_ratio = max(worst_ratio, float(np.max(np.abs(ratio - (p + 2)) / (p + 2))))
        return worst_sigma <= tol_sigma and worst_ratio <= tol_ratio, {
            "max_abs_sigma_k": worst_sigma, "max_ratio_error": worst_ratio}
    return _timed("schwarzschild_boundary", run)


def check_warped_constants(tol: float = 1e-12) -> CheckResult:
    def run():
        r = np.linspace(0.5, 20.0, 400)
        worst = 0.0
        for name, k in (("sinh", 1), ("exp", 0), ("cosh", -1)):
            eig = geometry.warped_schouten(geometry.WarpedProduct(5, closed_form(name), k), r)
            worst = max(worst, float(np.max(np.abs(eig.chi1 - 0.5))), float(np.max(np.abs(eig.chi2))))
        return worst <= tol, {"max_error": worst}
    return _timed("warped_constants", run)


def check_exp_sin_end(alpha: float = 0.1, mu: float = 1.5, delta: float = 0.1, eps: float = 0.1) -> CheckResult:
    """End conditions for Phi = e^{alpha sin r}, k = -1, plus the closed-form ratio and its lower bound."""
    def run():
        metric = geometry.WarpedProduct(4, closed_form("exp_sin", alpha=alpha), -1)
        rep = geometry.check_end_conditions(metric, mu, (0.0, 100.0), eps, delta)
        r = rep.r
        s, c = np.sin(r), np.cos(r)
        den = alpha**2 * c**2 + np.exp(-2 * alpha * s)
        closed = (-2 * alpha * s + 2 * alpha**2 * c**2) / den
        lower = -2 * alpha * s / den
        phi, d1, d2 = metric.phi.derivatives(r)
        ratio = 2 * phi * d2 / (d1**2 + 1)
        ratio_err = float(np.max(np.abs(ratio - closed)))
        bound_ok = bool(np.all(closed >= lower - 1e-14))
        return rep.passed and ratio_err <= 1e-12 and bound_ok, {
            "min_chi1": rep.min_chi1, "min_ratio": rep.min_ratio, "ratio_bound": rep.ratio_bound,
            "closed_form_error": ratio_err, "lower_bound_holds": bound_ok}
    return _timed("exp_sin_end", run)


def check_trace_identity(tol: float = 1e-10) -> CheckResult:
    """f^{tau0}(lambda(A)) = tau0/(n-2) f(lambda(Ric)) on warped-product samples."""
    def run():
        r = np.linspace(0.3, 6.0, 60)
        ends = [("sinh", {}, 1), ("cosh", {}, -1), ("exp", {}, 0), ("exp_sin", {"alpha": 0.1}, -1),
                ("exp_sin", {"alpha": 0.3}, -1), ("power", {"a": -1.5, "c": 1.0}, 1)]
        worst, count = 0.0, 0
        for n in (4, 5, 6):
            tau0 = cones.tau_for_trace_parameter(n, 0.0)
            for k in range(1, n + 1):
                F = cones.canonical(cones.GardingCone(n, k))
                Ft = cones.canonical(cones.TauCone(F.cone, tau0))
                for name, params, fib in ends:
                    metric = geometry.WarpedProduct(n, closed_form(name, **params), fib)
                    lam_A = -geometry.warped_schouten(metric, r).vector()
                    ric_rad, ric_tan, _ = geometry.warped_ricci_scalar(metric, r)
                    lam_R = np.repeat(np.asarray(ric_tan)[:, None], n, axis=1)
                    lam_R[:, 0] = ric_rad
                    for s in (1.0, -1.0):
                        ok = cones.admissibility_margin(F.cone, s * lam_R) > 1e-8
                        if not np.any(ok):
                            continue
                        lhs = Ft.values(s * lam_A[ok])
                        rhs = tau0 / (n - 2) * F.values(s * lam_R[ok])
                        err = np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))
                        worst = max(worst, float(err.max()))
                        count += int(ok.sum())
        return count > 0 and worst <= tol, {"max_relative_error": worst, "samples": count}
    return _timed("trace_identity", run)


def manufactured_errors(sign: str, N: int, R: float = 0.5, n: int = 4, k: int = 2):
    """Sup error of the Dirichlet solve against the hyperbolic (negative) or spherical (positive) cap."""
    F = cones.normalize(cones.canonical(cones.GardingCone(n, k)))
    exact = closed_form("hyperbolic_cap" if sign == "negative" else "spherical_cap", rho=1.0)
    grid = Grid(0.0, R, N, "symmetry")
    problem = DirichletProblem(geometry.euclidean(n), F, sign, 1.0, grid, right_value=float(exact(R)))
    t0 = time.perf_counter()
    sol = newton_solve(problem)
    seconds = time.perf_counter() - t0
    return float(np.max(np.abs(sol.u - exact(grid.nodes)))), sol, seconds


def check_manufactured(N: int = 400, tol: float = 5e-5, order_range=(1.8, 2.2)) -> CheckResult:
    def run():
        out = {}
        ok = True
        for sign in ("negative", "positive"):
            e1, s1, t1 = manufactured_errors(sign, N)
            e2, s2, t2 = manufactured_errors(sign, 2 * N - 1)
            order = math.log2(e1 / e2)
            out[f"{sign}_error"] = e1
            out[f"{sign}_order"] = order
            out[f"{sign}_seconds"] = max(t1, t2)
            ok &= s1.converged and s2.converged and e1 <= tol and order_range[0] <= order <= order_range[1]
            ok &= max(t1, t2) < 10.0
        return ok, out
    return _timed("manufactured", run)


def _cosh_plan(n=4, k=2, J=6):
    F = cones.normalize(cones.canonical(cones.GardingCone(n, k)))
    return ExhaustionPlan(geometry.WarpedProduct(n, closed_form("cosh"), -1), F, "negative",
                          tuple(geometric_radii(2.0, J)), topology="capped_end")


def _euclid_plan(n=4, k=2, J=6):
    F = cones.normalize(cones.canonical(cones.GardingCone(n, k)))
    return ExhaustionPlan(geometry.euclidean(n), F, "negative", tuple(geometric_radii(2.0, J)))


def check_cosh_barrier() -> CheckResult:
    def run():
        plan = _cosh_plan()
        sol = newton_solve(plan.problem(8.0))
        rep = barrier_check(sol, "negative_lower", c=1.0, psi_sup=1.0)
        return sol.converged and rep.passed and rep.bound == 0.0 and np.max(np.abs(sol.u)) <= 1e-10, {
            "bound": rep.bound, "min_u": rep.value}
    return _timed("cosh_barrier", run)


def check_dichotomy() -> CheckResult:
    def run():
        cosh = run_negative(_cosh_plan())
        eu = run_negative(_euclid_plan())
        cosh_sup = max(max(abs(s.u_min), abs(s.u_max)) for s in cosh.stages)
        dev = [s.inf_core - math.log(2.0 / s.R) for s in eu.stages]
        levels = [s.extra["f_level"] for s in eu.stages]
        ratios = [a / b for a, b in zip(levels, levels[1:])]
        ok = (cosh.classification == "case1" and cosh_sup <= 1e-9 and eu.classification == "case2"
              and max(abs(d) for d in dev) <= 0.7 and all(b < a for a, b in zip(levels, levels[1:]))
              and abs(ratios[-1] - 4.0) <= 0.4 and not cosh.truncated and not eu.truncated)
        return ok, {"cosh_class": cosh.classification, "cosh_sup_u": cosh_sup,
                    "euclid_class": eu.classification, "max_inf_deviation": max(abs(d) for d in dev),
                    "last_level_ratio": ratios[-1], "level_ratios": ratios}
    return _timed("dichotomy", run)


def schwarzschild_positive_plan(n: int = 6, mu: float = 3.0, m: float = 2.0, spacing: float = 0.02,
                                R1: float = 10.0, J: int = 5) -> ExhaustionPlan:
    F = cones.normalize(cones.canonical(cones.GardingCone(n, 1)))
    bg = geometry.schwarzschild_type(n, mu, m)
    return ExhaustionPlan(bg, F, "positive", tuple(geometric_radii(R1, J)), topology="capped_end",
                          r_min=geometry.schwarzschild_horizon(mu, m), spacing=spacing)


def cylinder_plan(n: int = 4, k: int = 1, J: int = 5) -> ExhaustionPlan:
    F = cones.normalize(cones.canonical(cones.GardingCone(n, k)))
    bg = geometry.ConformallyFlat(n, closed_form("log", c=-1.0))
    return ExhaustionPlan(bg, F, "positive", tuple(1.0 + 2.0**j for j in range(J)),
                          topology="capped_end", r_min=1.0, spacing=0.02)


def check_barriers() -> CheckResult:
    def run():
        neg = [run_negative(_cosh_plan()), run_negative(_euclid_plan())]
        neg_ok = all(b.passed for rep in neg for s in rep.stages for b in s.barriers)
        pos = [run_positive(schwarzschild_positive_plan(), 0.0), run_positive(cylinder_plan(), 0.5)]
        pos_max = max(s.u_max - lam for rep, lam in zip(pos, (0.0, 0.5)) for s in rep.stages)
        deg = run_negative_degenerate(_euclid_plan())
        deg_max = max(s.u_max for s in deg.stages)
        ok = neg_ok and pos_max <= 1e-10 and deg_max <= 1e-10 and all(
            not r.truncated for r in (*neg, *pos, deg))
        return ok, {"negative_stage_bounds": neg_ok, "positive_max_u_minus_Lambda": pos_max,
                    "degenerate_max_u": deg_max}
    return _timed("barrier_audits", run)


def check_linear_oracle(tol: float = 1e-4, window=(5.0, 40.0)) -> CheckResult:
    def run():
        plan = schwarzschild_positive_plan()
        n, mu = plan.background.n, 3.0
        rep = run_positive(plan, 0.0, degenerate_floor=1e-9)
        sol = rep.limit["solution"]
        phi = conformal_laplacian_solve(plan.background, sol.grid, 1.0)
        w = np.exp(0.5 * (n - 2) * sol.u)
        rel = float(np.max(np.abs(w - phi(sol.r)) / phi(sol.r)))
        factor = np.exp(0.5 * (n - 2) * sol.u)
        probe = np.geomspace(window[0], window[1], 40)
        dev = np.abs(np.interp(probe, sol.r, factor) - 1.0)
        exponent = float(-np.polyfit(np.log(probe), np.log(dev), 1)[0])
        target = mu - 1.0
        ok = (rep.limit["completed"] and rel <= tol and abs(exponent - target) <= 0.1 * target
              and rep.classification == "case1")
        return ok, {"relative_sup_error": rel, "decay_exponent": exponent, "target_exponent": target,
                    "final_psi": rep.limit["psi"], "classification": rep.classification}
    return _timed("linear_oracle", run)


SUITES: dict[str, list[Callable[[], CheckResult]]] = {
    "cones": [check_mu_table, check_tau_mu, check_mean_bound, check_trace_identity],
    "geometry": [check_schwarzschild_boundary, check_warped_constants, check_exp_sin_end],
    "solver": [check_manufactured, check_cosh_barrier],
    "exhaustion": [check_dichotomy, check_barriers, check_linear_oracle],
}
SUITES["paper"] = [check_mu_table, check_tau_mu, check_schwarzschild_boundary, check_warped_constants,
                   check_exp_sin_end, check_mean_bound, check_barriers, check_manufactured]
SUITES["all"] = [c for name in ("cones", "geometry", "solver", "exhaustion") for c in SUITES[name]]


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return [check() for check in SUITES[name]]
