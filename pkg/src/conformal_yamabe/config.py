"""Experiment configuration documents (JSON) and their translation into
domain objects. Building a config runs every constructor-level validation,
so bad input is rejected before any solve starts."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import cones
from .discretize import Grid
from .exhaustion import ExhaustionPlan, geometric_radii
from .geometry import ConformallyFlat, RadialMetric, WarpedProduct, euclidean, schwarzschild_type
from .profiles import CATALOG, RadialProfile, closed_form, constant
from .solver import DirichletProblem

OUTPUT_ENV = "CONFORMAL_YAMABE_OUTPUT"


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProfileSpec(_Model):
    name: str
    params: dict[str, float] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        if v not in CATALOG:
            raise ValueError(f"unknown profile {v!r}; known: {sorted(CATALOG)}")
        return v

    def build(self) -> RadialProfile:
        return closed_form(self.name, **self.params)


class ConeConfig(_Model):
    family: Literal["gamma-k", "tau"] = "gamma-k"
    n: int
    k: int
    tau: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if not 1 <= self.k <= self.n:
            raise ValueError("k must satisfy 1 <= k <= n")
        if self.family == "tau" and (self.tau is None or not 0 < self.tau <= 1):
            raise ValueError("tau family needs 0 < tau <= 1")
        if self.family == "gamma-k" and self.tau is not None:
            raise ValueError("tau is only valid for the tau family")
        return self

    def build(self) -> cones.ConeSpec:
        base = cones.GardingCone(self.n, self.k)
        return base if self.family == "gamma-k" else cones.TauCone(base, self.tau)


class FunctionalConfig(_Model):
    normalize: bool = True


class MetricConfig(_Model):
    kind: Literal["euclidean", "schwarzschild", "warped", "conformally_flat", "cylinder"]
    mu: Optional[float] = None
    m: Optional[float] = None
    phi: Optional[ProfileSpec] = None
    fiber_sign: Optional[int] = None
    u0: Optional[ProfileSpec] = None

    @model_validator(mode="after")
    def _check(self):
        need = {"schwarzschild": ("mu", "m"), "warped": ("phi", "fiber_sign"), "conformally_flat": ("u0",)}
        for name in need.get(self.kind, ()):
            if getattr(self, name) is None:
                raise ValueError(f"metric kind {self.kind!r} needs {name!r}")
        if self.kind == "schwarzschild" and not self.mu > 1:
            raise ValueError("Schwarzschild-type metrics need mu > 1")
        if self.kind == "warped" and self.fiber_sign not in (-1, 0, 1):
            raise ValueError("fiber_sign must be -1, 0 or 1")
        return self

    def build(self, n: int) -> RadialMetric:
        if self.kind == "euclidean":
            return euclidean(n)
        if self.kind == "schwarzschild":
            return schwarzschild_type(n, self.mu, self.m)
        if self.kind == "warped":
            return WarpedProduct(n, self.phi.build(), self.fiber_sign)
        if self.kind == "cylinder":
            return ConformallyFlat(n, closed_form("log", c=-1.0))
        return ConformallyFlat(n, self.u0.build())


class ProblemConfig(_Model):
    sign: Literal["negative", "positive"]
    psi: Union[float, ProfileSpec] = 1.0
    domain: tuple[float, float]
    N: int
    left: Literal["symmetry", "dirichlet"] = "symmetry"
    left_value: Optional[float] = None
    right_value: float = 0.0
    exact: Optional[ProfileSpec] = None

    @model_validator(mode="after")
    def _check(self):
        if self.N < 5:
            raise ValueError(f"grid needs N >= 5, got {self.N}")
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo < hi):
            raise ValueError("domain must satisfy 0 <= r_min < r_max < inf")
        if self.left == "dirichlet" and self.left_value is None:
            raise ValueError("dirichlet left boundary needs left_value")
        if isinstance(self.psi, float) and not self.psi > 0:
            raise ValueError("psi must be positive")
        return self


class ExhaustionConfig(_Model):
    mode: Literal["negative", "degenerate", "positive"] = "negative"
    topology: Literal["ball", "capped_end"] = "ball"
    radii: Optional[list[float]] = None
    R1: float = 2.0
    J: int = 6
    K: Optional[float] = None
    K0: float = 0.0
    spacing: float = 0.05
    r_min: float = 0.0
    Lambda: float = 0.0
    degenerate_floor: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.radii is None and (self.R1 <= 0 or self.J < 1):
            raise ValueError("need R1 > 0 and J >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        return self

    def schedule(self) -> list[float]:
        return list(self.radii) if self.radii is not None else geometric_radii(self.R1, self.J)


class OutputConfig(_Model):
    directory: Optional[str] = None
    run_id: Optional[str] = None
    formats: list[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])


class ExperimentConfig(_Model):
    cone: ConeConfig
    functional: FunctionalConfig = Field(default_factory=FunctionalConfig)
    metric: MetricConfig
    problem: Optional[ProblemConfig] = None
    exhaustion: Optional[ExhaustionConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        singular = self.metric.kind == "cylinder" or (self.metric.kind == "schwarzschild" and self.metric.m != 0)
        if singular:
            if self.problem is not None and not self.problem.domain[0] > 0:
                raise ValueError(f"{self.metric.kind} metric is singular at r = 0; use r_min > 0")
            if self.exhaustion is not None and not self.exhaustion.r_min > 0:
                raise ValueError(f"{self.metric.kind} metric is singular at r = 0; use r_min > 0")
        if self.exhaustion is not None and self.exhaustion.topology == "ball" and self.exhaustion.r_min != 0:
            raise ValueError("ball topology needs r_min = 0")
        return self

    def functional_object(self) -> cones.SymmetricFunctional:
        F = cones.canonical(self.cone.build())
        return cones.normalize(F) if self.functional.normalize else F

    def metric_object(self) -> RadialMetric:
        return self.metric.build(self.cone.n)

    def build_problem(self) -> DirichletProblem:
        if self.problem is None:
            raise ValueError("config has no problem section")
        p = self.problem
        grid = Grid(p.domain[0], p.domain[1], p.N, p.left)
        psi = p.psi.build() if isinstance(p.psi, ProfileSpec) else p.psi
        left = p.left_value if p.left == "dirichlet" else None
        return DirichletProblem(self.metric_object(), self.functional_object(), p.sign, psi, grid,
                                right_value=p.right_value, left_value=left)

    def build_plan(self) -> ExhaustionPlan:
        if self.exhaustion is None:
            raise ValueError("config has no exhaustion section")
        e = self.exhaustion
        sign = "positive" if e.mode == "positive" else "negative"
        psi = self.problem.psi if self.problem is not None else 1.0
        psi = psi.build() if isinstance(psi, ProfileSpec) else constant(float(psi))
        return ExhaustionPlan(self.metric_object(), self.functional_object(), sign, tuple(e.schedule()),
                              psi=psi, topology=e.topology, K=e.K, K0=e.K0, spacing=e.spacing, r_min=e.r_min)

    def validate_all(self):
        """Construct every domain object the config describes."""
        self.functional_object()
        self.metric_object()
        if self.problem is not None:
            self.build_problem()
        if self.exhaustion is not None:
            self.build_plan()

    def output_root(self) -> Path:
        return Path(self.output.directory or os.environ.get(OUTPUT_ENV, "runs"))


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def parse_config(text: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(text)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True)
