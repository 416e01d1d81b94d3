"""Radial profiles: scalar functions of r with first and second derivatives.

A profile is either a member of a fixed closed-form catalog, a cubic spline
through sampled values, or a sum of profiles. All evaluation is vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline


class RadialProfile:
    def __call__(self, r):
        return self.derivatives(r)[0]

    def d1(self, r):
        return self.derivatives(r)[1]

    def d2(self, r):
        return self.derivatives(r)[2]

    def derivatives(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __add__(self, other: RadialProfile) -> RadialProfile:
        return SumProfile((self, other))

    def to_dict(self) -> dict:
        raise NotImplementedError


def _sinh(r):
    return np.sinh(r), np.cosh(r), np.sinh(r)


def _cosh(r):
    return np.cosh(r), np.sinh(r), np.cosh(r)


def _exp(r):
    e = np.exp(r)
    return e, e, e


def _identity(r):
    return r, np.ones_like(r), np.zeros_like(r)


def _constant(r, c=0.0):
    return np.full_like(r, c), np.zeros_like(r), np.zeros_like(r)


def _exp_sin(r, alpha=0.1):
    v = np.exp(alpha * np.sin(r))
    c, s = np.cos(r), np.sin(r)
    return v, alpha * c * v, (alpha**2 * c**2 - alpha * s) * v


def _power(r, a=1.0, c=1.0):
    v = c * r ** (-a)
    return v, -a * v / r, a * (a + 1) * v / r**2


def _log(r, c=1.0):
    return c * np.log(r), c / r, -c / r**2


def _schwarzschild(r, mu=2.0, m=1.0):
    # u0 = (2/p) ln(1 + m/(2 r^p)),  p = mu - 1
    p = mu - 1.0
    x = m / (2.0 * r**p)
    v = (2.0 / p) * np.log1p(x)
    d1 = -2.0 * x / (r * (1.0 + x))
    d2 = 2.0 * (p + 1.0) * x / (r**2 * (1.0 + x)) - 2.0 * p * x**2 / (r**2 * (1.0 + x) ** 2)
    return v, d1, d2


def _hyperbolic_cap(r, rho=1.0, shift=0.0):
    q = rho**2 - r**2
    return np.log(2.0 * rho / q) + shift, 2.0 * r / q, 2.0 * (rho**2 + r**2) / q**2


def _spherical_cap(r, rho=1.0, shift=0.0):
    q = rho**2 + r**2
    return np.log(2.0 * rho / q) + shift, -2.0 * r / q, -2.0 * (rho**2 - r**2) / q**2


def _bump(r, amplitude=1.0, radius=1.0, center=0.0):
    s = (r - center) / radius
    inside = np.abs(s) < 1.0
    s_in = np.where(inside, s, 0.0)
    w = 1.0 - s_in**2
    g = 1.0 - 1.0 / w
    v = np.where(inside, amplitude * np.exp(g), 0.0)
    g1 = -2.0 * s_in / w**2 / radius
    g2 = (-2.0 / w**2 - 8.0 * s_in**2 / w**3) / radius**2
    return v, np.where(inside, v * g1, 0.0), np.where(inside, v * (g1**2 + g2), 0.0)


CATALOG: dict[str, Callable] = {
    "sinh": _sinh,
    "cosh": _cosh,
    "exp": _exp,
    "identity": _identity,
    "constant": _constant,
    "exp_sin": _exp_sin,
    "power": _power,
    "log": _log,
    "schwarzschild": _schwarzschild,
    "hyperbolic_cap": _hyperbolic_cap,
    "spherical_cap": _spherical_cap,
    "bump": _bump,
}


@dataclass(frozen=True)
class ClosedForm(RadialProfile):
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in CATALOG:
            raise ValueError(f"unknown profile {self.name!r}; known: {sorted(CATALOG)}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items()))))

    def derivatives(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v, d1, d2 = CATALOG[self.name](r, **self.params)
        return np.asarray(v, float), np.asarray(d1, float), np.asarray(d2, float)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True, eq=False)
class Sampled(RadialProfile):
    """Natural cubic spline through ``(r, values)``."""

    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or len(r) < 3 or np.any(np.diff(r) <= 0):
            raise ValueError("sampled profile needs >= 3 strictly increasing radii")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "_spline", CubicSpline(r, self.values, bc_type="natural"))

    def derivatives(self, r):
        r = np.asarray(r, dtype=float)
        s = self._spline
        return s(r), s(r, 1), s(r, 2)

    def to_dict(self) -> dict:
        return {"name": "sampled", "r": self.r.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class SumProfile(RadialProfile):
    terms: tuple

    def derivatives(self, r):
        parts = [t.derivatives(r) for t in self.terms]
        return tuple(sum(p[i] for p in parts) for i in range(3))

    def to_dict(self) -> dict:
        return {"name": "sum", "terms": [t.to_dict() for t in self.terms]}


def closed_form(name: str, **params) -> ClosedForm:
    return ClosedForm(name, params)


def constant(c: float) -> ClosedForm:
    return ClosedForm("constant", {"c": float(c)})


def from_dict(spec: dict) -> RadialProfile:
    name = spec["name"]
    if name == "sampled":
        return Sampled(np.asarray(spec["r"]), np.asarray(spec["values"]))
    if name == "sum":
        return SumProfile(tuple(from_dict(t) for t in spec["terms"]))
    return ClosedForm(name, dict(spec.get("params", {})))


def c2_norm(profile: RadialProfile, r) -> float:
    """``sup |u| + sup |u'| + sup |u''|`` over the sample radii."""
    v, d1, d2 = profile.derivatives(np.asarray(r, float))
    return float(np.max(np.abs(v)) + np.max(np.abs(d1)) + np.max(np.abs(d2)))
