"""Radial finite-difference solvers for fully nonlinear Yamabe-type equations
on Gårding cones, with exact Schouten-eigenvalue formulas for the backgrounds."""

from __future__ import annotations

from .cones import (
    AdmissibilityError,
    DomainError,
    GardingCone,
    Membership,
    SymmetricFunctional,
    TauCone,
    admissibility_margin,
    canonical,
    contains,
    deform,
    mu_plus,
    normalize,
    sigma_k,
)
from .discretize import Grid, SingularSystemError, solve_banded
from .exhaustion import (
    ExhaustionPlan,
    ExhaustionReport,
    classify,
    geometric_radii,
    run_negative,
    run_negative_degenerate,
    run_positive,
)
from .geometry import (
    ConformallyFlat,
    WarpedProduct,
    euclidean,
    schouten,
    schwarzschild_type,
)
from .solver import (
    DirichletProblem,
    InfeasibleError,
    RadialSolution,
    barrier_check,
    conformal_laplacian_solve,
    continuation_solve,
    newton_solve,
    transient_solve,
)

__version__ = "0.1.0"
