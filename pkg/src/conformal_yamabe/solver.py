"""Damped Newton solver for radial Dirichlet problems

    f(lambda(s * g_u^{-1} A_{g_u})) = psi,    g_u = e^{2u} g0,

with s = -1 (negative case) or s = +1 (positive case), plus continuation in
the right-hand side or the functional, the radial conformal Laplacian and
barrier audits.

The residual is defined on the grid first and Newton differentiates that
discrete map, so the tridiagonal Jacobian is exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import cones
from .cones import AdmissibilityError, DomainError, SymmetricFunctional
from .discretize import BandedSystem, Grid, SingularSystemError, d1, d2, solve_banded
from .geometry import RadialMetric, frame_coefficients, scalar_curvature, transformed_eigenvalues
from .profiles import RadialProfile, Sampled, constant

MARGIN_FLOOR = 1e-12
MAX_HALVINGS = 40

_SIGNS = {"negative": -1, "negative_case": -1, "positive": 1, "positive_case": 1}


class InfeasibleError(RuntimeError):
    """A solve that cannot start or cannot continue (distinct from bad input)."""


class NonPositiveSolutionError(ArithmeticError):
    pass


def _as_profile(psi) -> RadialProfile:
    if isinstance(psi, RadialProfile):
        return psi
    return constant(float(psi))


@dataclass(frozen=True)
class DirichletProblem:
    background: RadialMetric
    F: SymmetricFunctional
    sign: str
    psi: RadialProfile
    grid: Grid
    right_value: float = 0.0
    left_value: float | None = None

    def __post_init__(self):
        if self.sign not in _SIGNS:
            raise DomainError(f"sign must be 'negative' or 'positive', got {self.sign!r}")
        object.__setattr__(self, "sign", "negative" if _SIGNS[self.sign] < 0 else "positive")
        object.__setattr__(self, "psi", _as_profile(self.psi))
        if self.F.n != self.background.n:
            raise DomainError(f"cone dimension {self.F.n} != metric dimension {self.background.n}")
        if self.grid.symmetric:
            if self.left_value is not None:
                raise DomainError("symmetry boundary takes no left value")
        elif self.left_value is None:
            raise DomainError("Dirichlet left boundary needs left_value")
        if self.grid.r_min < self.background.r_min - 1e-12 or self.grid.r_max > self.background.r_max:
            raise DomainError("grid leaves the metric's radial domain")
        psi = self.psi(self.grid.nodes)
        if not np.all(np.isfinite(psi)) or np.any(psi <= 0):
            raise DomainError("psi must be finite and strictly positive on the grid")

    @property
    def s(self) -> int:
        return _SIGNS[self.sign]

    @property
    def equation_mask(self) -> np.ndarray:
        mask = np.ones(self.grid.N, dtype=bool)
        mask[-1] = False
        if not self.grid.symmetric:
            mask[0] = False
        return mask

    def boundary_guess(self) -> np.ndarray:
        r = self.grid.nodes
        if self.grid.symmetric:
            return np.full(self.grid.N, float(self.right_value))
        t = (r - r[0]) / (r[-1] - r[0])
        return (1 - t) * self.left_value + t * self.right_value


class _Discretization:
    """Per-problem cached frame coefficients and the pointwise eigenvalue map."""

    def __init__(self, problem: DirichletProblem):
        self.problem = problem
        self.grid = problem.grid
        self.nodes = problem.grid.nodes
        self.coeffs = frame_coefficients(problem.background, self.nodes)
        self.psi = problem.psi(self.nodes)
        self.mask = problem.equation_mask
        self.s = problem.s
        self.n = problem.F.n

    def eigenvalues(self, u):
        du = d1(u, self.grid)
        ddu = d2(u, self.grid)
        rad, tan = transformed_eigenvalues(self.coeffs, u, du, ddu)
        lam = np.empty((len(u), self.n))
        lam[:, 0] = self.s * rad
        lam[:, 1:] = (self.s * tan)[:, None]
        return du, ddu, lam

    def evaluate(self, u):
        with np.errstate(over="ignore", invalid="ignore"):
            du, ddu, lam = self.eigenvalues(u)
            margins = cones.admissibility_margin(self.problem.F.cone, lam)
            fvals = self.problem.F.values(lam)
        return du, ddu, lam, margins, fvals

    def residual(self, u, fvals=None):
        p = self.problem
        if fvals is None:
            fvals = self.evaluate(u)[4]
        res = np.empty(len(u))
        res[self.mask] = fvals[self.mask] - self.psi[self.mask]
        res[-1] = u[-1] - p.right_value
        if not self.grid.symmetric:
            res[0] = u[0] - p.left_value
        return res

    def jacobian(self, u, du, lam) -> BandedSystem:
        c = self.coeffs
        h = self.grid.h
        N = len(u)
        e = np.exp(-2.0 * u)
        rows = np.flatnonzero(self.mask)
        g = self.problem.F.gradient(lam[rows])
        g_rad = self.s * g[:, 0]
        g_tan = self.s * g[:, 1:].sum(axis=1)
        rad = self.s * lam[rows, 0]
        tan = self.s * lam[rows, 1]
        E, a2, al, be, pole, dr = e[rows], c.a2inv[rows], c.alpha[rows], c.beta[rows], c.pole[rows], du[rows]
        drad_du = E * (al * a2 + dr * a2)
        drad_ddu = -E * a2
        dtan_du = np.where(pole, -E * dr * a2, E * (-be - dr * a2))
        dtan_ddu = np.where(pole, -E * a2, 0.0)
        c_u = -2.0 * (g_rad * rad + g_tan * tan)
        c_du = g_rad * drad_du + g_tan * dtan_du
        c_ddu = g_rad * drad_ddu + g_tan * dtan_ddu

        sub = np.zeros(N - 1)
        diag = np.ones(N)
        sup = np.zeros(N - 1)
        for j, i in enumerate(rows.tolist()):
            if i == 0:
                # ghost reflection: du = 0, ddu = 2(u1 - u0)/h^2
                diag[0] = c_u[j] - 2.0 * c_ddu[j] / h**2
                sup[0] = 2.0 * c_ddu[j] / h**2
            else:
                sub[i - 1] = -c_du[j] / (2 * h) + c_ddu[j] / h**2
                diag[i] = c_u[j] - 2.0 * c_ddu[j] / h**2
                sup[i] = c_du[j] / (2 * h) + c_ddu[j] / h**2
        return BandedSystem(sub, diag, sup, np.zeros(N))


def _rounding_floor(jac: BandedSystem, u, psi) -> float:
    """Size of the rounding error made when evaluating the residual rows."""
    a = np.abs(u)
    row = np.abs(jac.diag) * a + np.abs(psi)
    row[1:] += np.abs(jac.sub) * a[:-1]
    row[:-1] += np.abs(jac.sup) * a[1:]
    return 16.0 * np.finfo(float).eps * float(np.max(row))


def _first_bad(margins, mask, floor):
    bad = np.flatnonzero(mask & ~(margins > floor))
    return int(bad[0]) if len(bad) else None


def residual(problem: DirichletProblem, u) -> np.ndarray:
    """Discrete residual; raises AdmissibilityError at the first inadmissible equation node."""
    disc = _Discretization(problem)
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.grid.N,):
        raise ValueError(f"expected {problem.grid.N} values, got shape {u.shape}")
    _, _, _, margins, fvals = disc.evaluate(u)
    node = _first_bad(margins, disc.mask, -cones.BOUNDARY_TOL)
    if node is not None:
        raise AdmissibilityError(
            f"inadmissible eigenvalues at node {node} (r = {disc.nodes[node]:.6g})",
            margins=margins, node=node,
        )
    return disc.residual(u, np.where(np.isnan(fvals), 0.0, fvals))


@dataclass
class RadialSolution:
    grid: Grid
    u: np.ndarray
    du: np.ndarray
    iterations: int
    residual: float
    margin_trace: list
    f_values: np.ndarray
    margins: np.ndarray
    converged: bool
    message: str = ""
    continuation_steps: int = 0
    psi_sup: float = math.nan

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def profile(self) -> Sampled:
        return Sampled(self.r, self.u)

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "message": self.message,
            "iterations": self.iterations,
            "residual": self.residual,
            "min_margin": self.margin_trace[-1] if self.margin_trace else None,
            "continuation_steps": self.continuation_steps,
            "N": self.grid.N,
            "r_min": self.grid.r_min,
            "r_max": self.grid.r_max,
            "u_min": float(np.min(self.u)),
            "u_max": float(np.max(self.u)),
        }

    def rows(self):
        """(r, u, u', f-value, margin) per node."""
        return np.column_stack([self.r, self.u, self.du, self.f_values, self.margins])


def _bowl_guesses(problem: DirichletProblem):
    r = problem.grid.nodes
    base = problem.boundary_guess()
    if problem.grid.symmetric:
        q = r**2 - r[-1] ** 2
    else:
        q = (r - r[0]) * (r - r[-1])
    q = q / np.max(np.abs(q))
    for t in (0.5, 0.25, 0.125, 0.9):
        yield base - problem.s * t * q


def initial_guess(problem: DirichletProblem) -> np.ndarray:
    """First admissible candidate from the boundary data and a ladder of bowls.

    Negative case bowls sit below the boundary value, positive case bowls
    above it. Raises AdmissibilityError recommending continuation when every
    candidate is inadmissible.
    """
    disc = _Discretization(problem)
    candidates = [problem.boundary_guess(), *_bowl_guesses(problem)]
    for cand in candidates:
        margins = disc.evaluate(cand)[3]
        if _first_bad(margins, disc.mask, MARGIN_FLOOR) is None:
            return cand
    raise AdmissibilityError(
        "no admissible initial guess among boundary data and bowl profiles; "
        "supply a guess or use continuation_solve from a solvable problem"
    )


def newton_solve(problem: DirichletProblem, guess=None, tol: float = 1e-10, max_iter: int = 100,
                 margin_floor: float = MARGIN_FLOOR) -> RadialSolution:
    """Damped Newton iteration with admissibility-preserving backtracking.

    The stopping test is ``sup |residual| <= tol * min(1, sup psi)`` so that
    small right-hand sides are resolved relatively. When the line search can
    no longer reduce the residual, the iterate is accepted if the residual is
    below ``max(tol, rounding floor)``, the floor being the floating-point
    error of evaluating the residual rows. Failure to converge is reported
    on the returned solution, not raised.
    """
    disc = _Discretization(problem)
    u = initial_guess(problem) if guess is None else np.array(guess, dtype=float)
    if u.shape != (problem.grid.N,):
        raise ValueError(f"guess must have {problem.grid.N} values")
    # boundary rows are linear; impose them up front
    u[-1] = problem.right_value
    if not problem.grid.symmetric:
        u[0] = problem.left_value
    du, ddu, lam, margins, fvals = disc.evaluate(u)
    node = _first_bad(margins, disc.mask, margin_floor)
    if node is not None:
        raise AdmissibilityError(
            f"initial guess inadmissible at node {node} (r = {disc.nodes[node]:.6g}); "
            "use continuation from an admissible problem",
            margins=margins, node=node,
        )
    psi_sup = float(np.max(disc.psi))
    tol_eff = tol * min(1.0, psi_sup)
    res = disc.residual(u, fvals)
    norm = float(np.max(np.abs(res)))
    trace = [float(np.min(margins[disc.mask]))]
    message = ""
    converged = norm <= tol_eff
    it = 0
    while not converged and it < max_iter:
        it += 1
        jac = disc.jacobian(u, du, lam)
        jac.rhs = -res
        floor = _rounding_floor(jac, u, disc.psi)
        try:
            step = solve_banded(jac)
        except SingularSystemError as exc:
            message = f"singular Jacobian at iteration {it}: {exc}"
            break
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            trial = u + t * step
            tdu, tddu, tlam, tmarg, tf = disc.evaluate(trial)
            if _first_bad(tmarg, disc.mask, margin_floor) is None:
                tres = disc.residual(trial, tf)
                tnorm = float(np.max(np.abs(tres)))
                if tnorm < norm or tnorm <= tol_eff:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if norm <= max(tol, floor):
                converged = True
                message = f"converged to rounding level ({floor:.1e})"
            else:
                message = f"line search failed at iteration {it} (residual {norm:.3e})"
            break
        u, du, lam, margins, fvals, res, norm = trial, tdu, tlam, tmarg, tf, tres, tnorm
        trace.append(float(np.min(margins[disc.mask])))
        step_size = t * float(np.max(np.abs(step)))
        converged = norm <= tol_eff or (
            norm <= tol and step_size <= 1e-13 * (1.0 + float(np.max(np.abs(u))))
        )
    if not converged and not message:
        message = f"no convergence in {max_iter} iterations (residual {norm:.3e})"
    return RadialSolution(
        grid=problem.grid, u=u, du=du, iterations=it, residual=norm, margin_trace=trace,
        f_values=fvals, margins=margins, converged=converged, message=message or "converged",
        psi_sup=psi_sup,
    )


@dataclass
class ContinuationResult:
    solutions: list
    stopped: str
    completed: bool

    @property
    def final(self) -> RadialSolution | None:
        return self.solutions[-1] if self.solutions else None

    @property
    def margin_trace(self) -> list:
        return [s.margin_trace[-1] for s in self.solutions]


def continuation_solve(problem: DirichletProblem, psis: Sequence | None = None,
                       functionals: Sequence[SymmetricFunctional] | None = None,
                       guess=None, floor: float | None = 1e-6, **options) -> ContinuationResult:
    """Solve a sequence of problems warm-started from the previous stage.

    ``psis`` replaces the right-hand side stage by stage (numbers or
    profiles); ``functionals`` replaces F (e.g. a tau-continuation). With a
    right-hand-side sequence the run stops once ``sup psi`` falls below
    ``floor``. A failing stage ends the run with the partial sequence.
    """
    if psis is None and functionals is None:
        raise ValueError("continuation needs a psi sequence or a functional sequence")
    count = len(psis) if psis is not None else len(functionals)
    if psis is not None and functionals is not None and len(functionals) != count:
        raise ValueError("psi and functional sequences differ in length")
    solutions = []
    current = guess
    for m in range(count):
        stage = problem
        if psis is not None:
            stage = replace(stage, psi=_as_profile(psis[m]))
        if functionals is not None:
            stage = replace(stage, F=functionals[m])
        try:
            sol = newton_solve(stage, guess=current, **options)
        except AdmissibilityError as exc:
            return ContinuationResult(solutions, f"stage {m}: {exc}", False)
        sol.continuation_steps = m
        solutions.append(sol)
        if not sol.converged:
            return ContinuationResult(solutions, f"stage {m}: {sol.message}", False)
        current = sol.u
        if psis is not None and floor is not None and sol.psi_sup < floor:
            return ContinuationResult(solutions, f"psi below floor {floor:g} at stage {m}", True)
    return ContinuationResult(solutions, "sequence exhausted", True)


def transient_solve(problem: DirichletProblem, guess, dt0: float | None = None, max_steps: int = 400,
                    tol: float = 1e-10, margin_floor: float = MARGIN_FLOOR, **options) -> RadialSolution:
    """Pseudo-transient continuation of ``u_t = -(f(lambda) - psi)`` from ``guess``.

    Each step solves ``(J + I/dt) delta = -residual`` on the equation rows;
    dt grows with the residual reduction and the iteration ends with plain
    Newton once the residual is small. Started from a supersolution
    (``f >= psi``, e.g. the constant boundary value in the positive case),
    the flow decreases toward the largest solution below it rather than
    jumping to another branch.
    """
    disc = _Discretization(problem)
    u = np.array(guess, dtype=float)
    u[-1] = problem.right_value
    if not problem.grid.symmetric:
        u[0] = problem.left_value
    du, ddu, lam, margins, fvals = disc.evaluate(u)
    node = _first_bad(margins, disc.mask, margin_floor)
    if node is not None:
        raise AdmissibilityError(f"transient start inadmissible at node {node}", margins=margins, node=node)
    psi_sup = float(np.max(disc.psi))
    res = disc.residual(u, fvals)
    norm = float(np.max(np.abs(res)))
    switch = 1e-3 * norm
    if dt0 is None:
        dt0 = 0.1 / max(float(np.nanmax(np.abs(fvals[disc.mask]))), psi_sup)
    dt = dt0
    shift = np.where(disc.mask, 1.0, 0.0)
    steps = 0
    while steps < max_steps and norm > switch and norm > tol * min(1.0, psi_sup):
        steps += 1
        jac = disc.jacobian(u, du, lam)
        jac.diag = jac.diag + shift / dt
        jac.rhs = -res
        try:
            delta = solve_banded(jac)
        except SingularSystemError:
            dt *= 0.25
            continue
        trial = u + delta
        tdu, tddu, tlam, tmarg, tf = disc.evaluate(trial)
        if _first_bad(tmarg, disc.mask, margin_floor) is not None:
            dt *= 0.25
            if dt < 1e-12 * dt0:
                break
            continue
        tres = disc.residual(trial, tf)
        tnorm = float(np.max(np.abs(tres)))
        dt *= min(10.0, max(0.5, norm / max(tnorm, 1e-300)))
        u, du, lam, res, norm = trial, tdu, tlam, tres, tnorm
    sol = newton_solve(problem, guess=u, tol=tol, margin_floor=margin_floor, **options)
    sol.continuation_steps = steps
    return sol


def conformal_laplacian_solve(background: RadialMetric, grid: Grid, right_value: float = 1.0,
                              left_value: float | None = None) -> Sampled:
    """Solve ``-Delta w + (n-2)/(4(n-1)) R w = 0`` radially.

    With ``g0 = a^2 dr^2 + b^2 h`` the operator is
    ``-(w'' + ((n-1) b'/b - a'/a) w')/a^2 + c_n R w``. Returns the solution
    as a spline; raises NonPositiveSolutionError if it is not positive.
    """
    if grid.symmetric == (left_value is not None):
        raise DomainError("give left_value exactly when the left boundary is Dirichlet")
    n = background.n
    r = grid.nodes
    h = grid.h
    coeffs = frame_coefficients(background, r)
    safe_r = np.where(coeffs.pole, 1e-6, r)
    R = scalar_curvature(background, safe_r)
    cn = (n - 2) / (4.0 * (n - 1))
    pot = cn * R / coeffs.a2inv
    drift = (n - 1) * coeffs.log_b_prime - coeffs.alpha
    N = grid.N
    sub = np.zeros(N - 1)
    diag = np.zeros(N)
    sup = np.zeros(N - 1)
    rhs = np.zeros(N)
    for i in range(1, N - 1):
        sub[i - 1] = 1.0 / h**2 - drift[i] / (2 * h)
        diag[i] = -2.0 / h**2 - pot[i]
        sup[i] = 1.0 / h**2 + drift[i] / (2 * h)
    diag[-1] = 1.0
    rhs[-1] = right_value
    if grid.symmetric:
        # w'(r_min) = 0; at a pole the tangential drift term tends to (n-1) w''
        lead = float(n) if coeffs.pole[0] else 1.0
        diag[0] = -2.0 * lead / h**2 - pot[0]
        sup[0] = 2.0 * lead / h**2
    else:
        diag[0] = 1.0
        rhs[0] = left_value
    w = solve_banded(BandedSystem(sub, diag, sup, rhs))
    if not np.all(w > 0):
        raise NonPositiveSolutionError(f"conformal Laplacian solution has min {w.min():.6g} <= 0")
    return Sampled(r, w)


@dataclass
class BarrierReport:
    kind: str
    passed: bool
    bound: float
    value: float
    exempt: bool = False
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "bound": self.bound,
                "value": self.value, "exempt": self.exempt, **self.detail}


def lower_bound_constant(c: float, psi_sup: float) -> float | None:
    """``min{0, (1/2) ln(c / sup psi)}``; None when c <= 0 (no bound)."""
    if not c > 0:
        return None
    return min(0.0, 0.5 * math.log(c / psi_sup))


def barrier_check(solution: RadialSolution, kind: str, *, c: float | None = None,
                  psi_sup: float | None = None, core_radius: float = 0.0,
                  Lambda: float | None = None, comparison: RadialProfile | None = None,
                  tol: float = 1e-10) -> BarrierReport:
    """Report-only barrier audits.

    kinds: ``negative_lower`` (needs c, psi_sup, core_radius),
    ``positive_upper`` (Lambda), ``positive_lower`` (comparison profile),
    ``degenerate_upper`` (u <= 0).
    """
    u, r = solution.u, solution.r
    if kind == "negative_lower":
        if c is None or psi_sup is None:
            raise ValueError("negative_lower needs c and psi_sup")
        bound = lower_bound_constant(c, psi_sup)
        i = int(np.argmin(u))
        detail = {"argmin_r": float(r[i]), "c": c, "psi_sup": psi_sup, "core_radius": core_radius}
        if bound is None:
            return BarrierReport(kind, True, -math.inf, float(u[i]), True, {**detail, "reason": "c <= 0"})
        # a zero core radius excludes nothing
        if core_radius > 0 and r[i] <= core_radius:
            return BarrierReport(kind, True, bound, float(u[i]), True, {**detail, "reason": "minimizer in core"})
        return BarrierReport(kind, bool(u[i] >= bound - tol), bound, float(u[i]), False, detail)
    if kind == "positive_upper":
        if Lambda is None:
            raise ValueError("positive_upper needs Lambda")
        top = float(np.max(u))
        return BarrierReport(kind, bool(top <= Lambda + tol), float(Lambda), top)
    if kind == "positive_lower":
        if comparison is None:
            raise ValueError("positive_lower needs a comparison profile")
        gap = u - comparison(r)
        i = int(np.argmin(gap))
        return BarrierReport(kind, bool(gap[i] >= -tol), 0.0, float(gap[i]), False, {"argmin_r": float(r[i])})
    if kind == "degenerate_upper":
        top = float(np.max(u))
        return BarrierReport(kind, bool(top <= tol), 0.0, top)
    raise ValueError(f"unknown barrier kind {kind!r}")


def f_level_of_background(background: RadialMetric, F: SymmetricFunctional, sign: str, r) -> np.ndarray:
    """f-values of ``s * g0^{-1} A_{g0}`` at radii r (NaN where exterior)."""
    coeffs = frame_coefficients(background, np.asarray(r, float))
    s = _SIGNS[sign]
    lam = np.empty((len(coeffs.r), F.n))
    lam[:, 0] = s * coeffs.A0_rad
    lam[:, 1:] = (s * coeffs.A0_tan)[:, None]
    return F.values(lam), cones.admissibility_margin(F.cone, lam)
