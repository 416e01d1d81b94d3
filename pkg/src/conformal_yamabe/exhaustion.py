"""Exhaustion drivers: Dirichlet solves on growing radial domains, traces of
the solutions on a fixed core, the two-case classification and audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import cones
from .cones import AdmissibilityError, DomainError, SymmetricFunctional
from .discretize import Grid
from .geometry import RadialMetric, frame_coefficients, scalar_curvature
from .profiles import RadialProfile, Sampled, constant
from .solver import (
    DirichletProblem,
    RadialSolution,
    barrier_check,
    continuation_solve,
    f_level_of_background,
    transient_solve,
    newton_solve,
)

CASE2_DROP = 0.5
CASE1_SHRINK = 0.75
CAUCHY_FLOOR = 1e-8
MONOTONICITY_TOL = 1e-6
COMPLETENESS_RATIO = 0.9

TOPOLOGIES = ("ball", "capped_end")


class PreconditionError(DomainError):
    pass


def geometric_radii(R1: float, J: int = 6) -> list[float]:
    return [R1 * 2.0**j for j in range(J)]


@dataclass(frozen=True)
class ExhaustionPlan:
    """Growing domains ``[r_min, R_j]`` with a symmetry boundary at r_min.

    ``K`` is the core radius on which traces are taken (the set r <= K);
    ``K0`` is the radius inside which the background is not required to be
    admissible. ``spacing`` is the target node spacing of every stage grid.
    """

    background: RadialMetric
    F: SymmetricFunctional
    sign: str
    radii: tuple
    psi: RadialProfile = field(default_factory=lambda: constant(1.0))
    topology: str = "ball"
    K: float | None = None
    K0: float = 0.0
    spacing: float = 0.05
    r_min: float = 0.0

    def __post_init__(self):
        radii = tuple(float(R) for R in self.radii)
        object.__setattr__(self, "radii", radii)
        if self.topology not in TOPOLOGIES:
            raise DomainError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.topology == "ball" and self.r_min != 0:
            raise DomainError("ball topology starts at r = 0")
        if len(radii) < 1 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise DomainError("radii must be strictly increasing")
        if radii[0] <= self.r_min:
            raise DomainError("first radius must exceed r_min")
        if self.K is None:
            object.__setattr__(self, "K", self.r_min + 0.5 * (radii[0] - self.r_min))
        if not (self.r_min <= self.K <= radii[0]):
            raise DomainError(f"core radius K = {self.K} must lie in [r_min, R_1]")
        if not self.spacing > 0:
            raise DomainError("spacing must be positive")
        if self.K0 < 0:
            raise DomainError("K0 must be nonnegative")

    def grid(self, R: float) -> Grid:
        N = max(5, int(round((R - self.r_min) / self.spacing)) + 1)
        return Grid(self.r_min, R, N, "symmetry")

    def problem(self, R: float, psi=None, boundary: float = 0.0) -> DirichletProblem:
        return DirichletProblem(self.background, self.F, self.sign,
                                self.psi if psi is None else psi, self.grid(R), right_value=boundary)

    def to_dict(self) -> dict:
        return {
            "sign": self.sign,
            "topology": self.topology,
            "radii": list(self.radii),
            "K": self.K,
            "K0": self.K0,
            "spacing": self.spacing,
            "r_min": self.r_min,
            "cone": cones.cone_to_dict(self.F.cone),
            "scale": self.F.scale,
        }


@dataclass
class StageRecord:
    j: int
    R: float
    N: int
    converged: bool
    iterations: int
    residual: float
    inf_core: float
    u_min: float
    u_max: float
    cauchy_u: float | None
    cauchy_du: float | None
    f_min: float
    f_max: float
    min_margin: float
    barriers: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    solution: RadialSolution | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("solution", "barriers", "extra")}
        out["barriers"] = [b.to_dict() for b in self.barriers]
        out.update(self.extra)
        return out


@dataclass
class ExhaustionReport:
    plan: ExhaustionPlan
    kind: str
    stages: list
    classification: str
    limit_kind: str | None
    audits: dict
    completeness: dict | None = None
    truncated: bool = False
    message: str = ""
    limit: dict | None = None

    @property
    def inf_trace(self) -> list:
        return [s.inf_core for s in self.stages]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "plan": self.plan.to_dict(),
            "stages": [s.to_dict() for s in self.stages],
            "classification": self.classification,
            "limit_kind": self.limit_kind,
            "audits": self.audits,
            "completeness": self.completeness,
            "truncated": self.truncated,
            "message": self.message,
            "limit": None if self.limit is None else {k: v for k, v in self.limit.items() if k != "solution"},
        }


def classify(inf_trace: Sequence[float], cauchy_trace: Sequence[float] | None = None) -> str:
    """Trend test on the core-infimum trace.

    ``case2`` when each of the last three decreases is at least CASE2_DROP;
    ``case1`` when the last three Cauchy differences each shrink by 25% or
    all sit below CAUCHY_FLOOR (``|delta inf|`` stands in when no Cauchy
    trace is given); otherwise ``undetermined``. Needs at least 4 stages.
    """
    inf_trace = [float(x) for x in inf_trace]
    if len(inf_trace) < 4:
        return "undetermined"
    drops = [a - b for a, b in zip(inf_trace[-4:-1], inf_trace[-3:])]
    if all(d >= CASE2_DROP for d in drops):
        return "case2"
    if cauchy_trace is None:
        cauchy = [abs(d) for d in drops]
    else:
        cauchy = [float(c) for c in cauchy_trace if c is not None][-3:]
        if len(cauchy) < 3:
            return "undetermined"
    if all(c <= CAUCHY_FLOOR for c in cauchy):
        return "case1"
    if all(b <= CASE1_SHRINK * a for a, b in zip(cauchy, cauchy[1:])) and cauchy[0] > 0:
        return "case1"
    return "undetermined"


def classify_positive(eps_trace: Sequence[float]) -> str:
    """``case1`` when eps_j shrinks by 25% per stage over the last three steps
    (eps_j -> 0); ``case2`` when it stays within 10% of its running value."""
    eps = [float(e) for e in eps_trace]
    if len(eps) < 4:
        return "undetermined"
    tail = eps[-4:]
    ratios = [b / a for a, b in zip(tail, tail[1:])]
    if all(q <= CASE1_SHRINK for q in ratios):
        return "case1"
    if all(q >= 0.9 for q in ratios):
        return "case2"
    return "undetermined"


_LIMIT_KIND = {
    ("negative", "case1"): "interior",
    ("negative", "case2"): "boundary",
    ("positive", "case1"): "boundary",
    ("positive", "case2"): "interior",
}


def completeness_proxy(r, u, background: RadialMetric, K: float, probes=None) -> dict:
    """Radial length ``L(R) = int_K^R e^{u} a dr`` of ``e^{2u} g0`` at probe radii.

    ``trend`` is ``unbounded`` when the length gained over the last doubling
    of R is at least COMPLETENESS_RATIO times the previous gain, else
    ``bounded``.
    """
    r = np.asarray(r, float)
    u = np.asarray(u, float)
    log_a = frame_coefficients(background, r).log_a
    dens = np.exp(u + log_a)
    mask = r >= K
    rr, dd = r[mask], dens[mask]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dd[1:] + dd[:-1]) * np.diff(rr))])
    if probes is None:
        top = rr[-1]
        probes = [top / 4, top / 2, top]
        probes = [p for p in probes if p > K] or [top]
    L = np.interp(probes, rr, cum)
    trend = "undetermined"
    if len(L) >= 3:
        gain_prev = L[-2] - L[-3]
        gain_last = L[-1] - L[-2]
        trend = "unbounded" if gain_last >= COMPLETENESS_RATIO * gain_prev else "bounded"
    return {"probes": [float(p) for p in probes], "length": [float(x) for x in L], "trend": trend}


def _on_core(sol: RadialSolution, K: float):
    mask = sol.r <= K + 1e-12
    return sol.r[mask], sol.u[mask], sol.du[mask]


def _cauchy(prev: RadialSolution | None, cur: RadialSolution, K: float, shift_prev=0.0, shift_cur=0.0):
    if prev is None:
        return None, None
    r, u, du = _on_core(cur, K)
    pu = np.interp(r, prev.r, prev.u)
    pdu = np.interp(r, prev.r, prev.du)
    return (float(np.max(np.abs((u - shift_cur) - (pu - shift_prev)))),
            float(np.max(np.abs(du - pdu))))


def _record(j, R, sol, K, prev, barriers, extra=None) -> StageRecord:
    core_u = _on_core(sol, K)[1]
    cu, cdu = _cauchy(prev, sol, K)
    f = sol.f_values
    return StageRecord(
        j=j, R=R, N=sol.grid.N, converged=sol.converged, iterations=sol.iterations,
        residual=sol.residual, inf_core=float(np.min(core_u)), u_min=float(np.min(sol.u)),
        u_max=float(np.max(sol.u)), cauchy_u=cu, cauchy_du=cdu,
        f_min=float(np.nanmin(f)), f_max=float(np.nanmax(f)),
        min_margin=float(sol.margin_trace[-1]), barriers=barriers, extra=extra or {}, solution=sol,
    )


def _solve_stage(problem: DirichletProblem, guess=None, **options) -> RadialSolution:
    return newton_solve(problem, guess=guess, **options)


def background_level(plan: ExhaustionPlan, R: float | None = None) -> dict:
    """Infimum c of the background f-value on ``K0 < r <= R`` and whether it is admissible there."""
    R = plan.radii[-1] if R is None else R
    r = plan.grid(R).nodes
    r = r[r > plan.K0]
    fvals, margins = f_level_of_background(plan.background, plan.F, plan.sign, r)
    admissible = bool(np.all(margins > cones.BOUNDARY_TOL))
    c = float(np.nanmin(fvals)) if np.any(np.isfinite(fvals)) else 0.0
    if not admissible:
        c = min(c, 0.0)
    return {"c": c, "admissible_outside_core": admissible, "satisfied": admissible and c > 0}


def _monotonicity(stages: list, plan: ExhaustionPlan) -> dict:
    worst = 0.0
    for prev, cur in zip(stages, stages[1:]):
        a, b = prev.solution, cur.solution
        common = b.r <= a.r[-1] + 1e-12
        diff = b.u[common] - np.interp(b.r[common], a.r, a.u)
        worst = max(worst, float(np.max(diff)))
    applicable = cones.is_uniformly_elliptic_cone(plan.F.cone)
    return {"applicable": applicable, "max_increase": worst,
            "passed": (worst <= MONOTONICITY_TOL) if applicable else None}


def normalized_stage(sol: RadialSolution, K: float) -> dict:
    """``u_hat = u - inf_core u`` and the decayed f-level ``e^{2 inf}``."""
    m = float(np.min(_on_core(sol, K)[1]))
    u_hat = sol.u - m
    return {"inf": m, "u_hat": u_hat, "f_level": math.exp(2.0 * m),
            "core_min_hat": float(np.min(u_hat[sol.r <= K + 1e-12]))}


def run_negative(plan: ExhaustionPlan, **options) -> ExhaustionReport:
    """Zero boundary data on every domain, RHS psi, with traces and the lower-bound audit."""
    if plan.sign != "negative":
        raise DomainError("run_negative needs a negative-case plan")
    level = background_level(plan)
    psi_sup = float(np.max(plan.psi(plan.grid(plan.radii[-1]).nodes)))
    stages: list[StageRecord] = []
    prev = None
    prev_hat = None
    message = ""
    truncated = False
    for j, R in enumerate(plan.radii, start=1):
        problem = plan.problem(R)
        try:
            sol = _solve_stage(problem, **options)
        except AdmissibilityError as exc:
            truncated, message = True, f"stage {j} (R = {R:g}): {exc}"
            break
        bar = barrier_check(sol, "negative_lower", c=level["c"], psi_sup=psi_sup, core_radius=plan.K0)
        norm = normalized_stage(sol, plan.K)
        hat_cauchy = None
        if prev_hat is not None:
            r_core = sol.r[sol.r <= plan.K + 1e-12]
            cur = norm["u_hat"][sol.r <= plan.K + 1e-12]
            hat_cauchy = float(np.max(np.abs(cur - np.interp(r_core, prev.r, prev_hat))))
        extra = {"f_level": norm["f_level"] * psi_sup, "cauchy_u_hat": hat_cauchy,
                 "core_min_hat": norm["core_min_hat"]}
        rec = _record(j, R, sol, plan.K, prev, [bar], extra)
        stages.append(rec)
        if not sol.converged:
            truncated, message = True, f"stage {j} (R = {R:g}): {sol.message}"
            break
        prev, prev_hat = sol, norm["u_hat"]
    return _finish(plan, "negative", stages, truncated, message,
                   {"background": level, "psi_sup": psi_sup})


def _finish(plan, kind, stages, truncated, message, audits, classification=None, limit=None):
    if classification is None:
        classification = classify([s.inf_core for s in stages], [s.cauchy_u for s in stages][1:])
    sign = "positive" if kind == "positive" else "negative"
    audits = dict(audits)
    audits["barriers_passed"] = all(b.passed for s in stages for b in s.barriers)
    if stages and stages[0].solution is not None:
        audits["monotonicity"] = _monotonicity(stages, plan) if sign == "negative" else None
    completeness = None
    if stages and stages[-1].converged:
        last = stages[-1].solution
        completeness = completeness_proxy(last.r, last.u, plan.background, plan.K)
    return ExhaustionReport(plan, kind, stages, classification, _LIMIT_KIND.get((sign, classification)),
                            audits, completeness, truncated, message, limit)


def check_nonnegative_scalar_curvature(plan: ExhaustionPlan, tol: float = 1e-10) -> float:
    r = plan.grid(plan.radii[-1]).nodes
    coeffs = frame_coefficients(plan.background, r)
    R = scalar_curvature(plan.background, np.where(coeffs.pole, 1e-6, r))
    low = float(np.min(R))
    if low < -tol:
        raise PreconditionError(f"background scalar curvature reaches {low:.6g} < 0")
    return low


def run_negative_degenerate(plan: ExhaustionPlan, **options) -> ExhaustionReport:
    """Stage j solves with RHS psi/j under R_{g0} >= 0 and audits u_j <= 0."""
    if plan.sign != "negative":
        raise DomainError("run_negative_degenerate needs a negative-case plan")
    low = check_nonnegative_scalar_curvature(plan)
    stages: list[StageRecord] = []
    prev = None
    truncated, message = False, ""
    for j, R in enumerate(plan.radii, start=1):
        psi_j = _ScaledPsi(plan.psi, 1.0 / j)
        try:
            sol = _solve_stage(plan.problem(R, psi=psi_j), **options)
        except AdmissibilityError as exc:
            truncated, message = True, f"stage {j} (R = {R:g}): {exc}"
            break
        bar = barrier_check(sol, "degenerate_upper")
        norm = normalized_stage(sol, plan.K)
        rec = _record(j, R, sol, plan.K, prev, [bar], {"rhs_scale": 1.0 / j, "f_level": norm["f_level"]})
        stages.append(rec)
        if not sol.converged:
            truncated, message = True, f"stage {j} (R = {R:g}): {sol.message}"
            break
        prev = sol
    return _finish(plan, "negative_degenerate", stages, truncated, message, {"min_scalar_curvature": low})


@dataclass(frozen=True)
class _ScaledPsi(RadialProfile):
    inner: RadialProfile
    factor: float

    def derivatives(self, r):
        return tuple(self.factor * d for d in self.inner.derivatives(r))


def comparison_from_linear(phi: RadialProfile, n: int, Lambda: float) -> Sampled:
    """The conformal-Laplacian factor in u units: ``Lambda + 2/(n-2) ln phi``."""
    r = phi.r
    return Sampled(r, Lambda + 2.0 / (n - 2) * np.log(phi(r)))


def run_positive(plan: ExhaustionPlan, Lambda: float, comparison: RadialProfile | None = None,
                 degenerate_floor: float | None = None, decades: int = 12, **options) -> ExhaustionReport:
    """Boundary value Lambda, RHS ``eps_j = e^{-2 Lambda} min f(lambda(g0^{-1} A_{g0}))``.

    Each stage is solved by pseudo-transient continuation from the constant
    supersolution ``u = Lambda``, which selects the solution below it; plain
    Newton from there can land on a solution with ``u > Lambda``.

    With ``degenerate_floor`` the last stage is continued along
    ``eps_J * 10^{-m}`` until the RHS drops below the floor; the result is
    stored in ``report.limit``.
    """
    if plan.sign != "positive":
        raise DomainError("run_positive needs a positive-case plan")
    r_all = plan.grid(plan.radii[-1]).nodes
    f0, margins = f_level_of_background(plan.background, plan.F, "positive", r_all)
    if not np.all(margins > cones.BOUNDARY_TOL):
        i = int(np.argmin(margins))
        raise AdmissibilityError(
            f"background not interior to {plan.F.cone.describe()} at r = {r_all[i]:.6g}",
            margins=margins, node=i,
        )
    stages: list[StageRecord] = []
    eps_trace = []
    prev = None
    truncated, message = False, ""
    for j, R in enumerate(plan.radii, start=1):
        inside = r_all <= R + 1e-12
        eps = math.exp(-2.0 * Lambda) * float(np.min(f0[inside]))
        problem = plan.problem(R, psi=eps, boundary=Lambda)
        try:
            sol = transient_solve(problem, np.full(problem.grid.N, float(Lambda)), **options)
        except AdmissibilityError as exc:
            truncated, message = True, f"stage {j} (R = {R:g}): {exc}"
            break
        bars = [barrier_check(sol, "positive_upper", Lambda=Lambda)]
        if comparison is not None:
            bars.append(barrier_check(sol, "positive_lower", comparison=comparison))
        rec = _record(j, R, sol, plan.K, prev, bars, {"eps": eps})
        stages.append(rec)
        eps_trace.append(eps)
        if not sol.converged:
            truncated, message = True, f"stage {j} (R = {R:g}): {sol.message}"
            break
        prev = sol
    limit = None
    if degenerate_floor is not None and stages and not truncated:
        last = stages[-1]
        eps = last.extra["eps"]
        psis = [eps * 10.0**-m for m in range(1, decades + 1)]
        cont = continuation_solve(plan.problem(last.R, psi=eps, boundary=Lambda), psis=psis,
                                  guess=last.solution.u, floor=degenerate_floor, **options)
        final = cont.final
        limit = {"completed": cont.completed, "stopped": cont.stopped, "steps": len(cont.solutions),
                 "psi": final.psi_sup if final else None,
                 "min_margin": final.margin_trace[-1] if final else None,
                 "upper_barrier": barrier_check(final, "positive_upper", Lambda=Lambda).to_dict() if final else None,
                 "solution": final}
    return _finish(plan, "positive", stages, truncated, message, {"eps": eps_trace},
                   classification=classify_positive(eps_trace), limit=limit)
