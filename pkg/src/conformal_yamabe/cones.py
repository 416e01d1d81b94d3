"""Garding cones and concave 1-homogeneous symmetric functionals.

Two cone families are supported: the elementary-symmetric cones
``Gamma_k^+ = {sigma_1 > 0, ..., sigma_k > 0}`` and tau-deformations of a
base cone, ``Gamma^tau = {lam : tau*lam + (1 - tau)*sigma_1(lam)*e in base}``.
Deformations nest, and every cone is reduced to an elementary-symmetric
root cone through a single linear map (``deformation_matrix``).

Most functions accept a single eigenvalue vector or a stack of them
(eigenvalues along the last axis).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

BOUNDARY_TOL = 1e-10
MU_BISECTION_TOL = 1e-12
MU_BISECTION_MAXITER = 200


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AdmissibilityError(ValueError):
    """An eigenvalue vector lies outside the cone where f is defined."""

    def __init__(self, message: str, margins=None, node: int | None = None):
        super().__init__(message)
        self.margins = margins
        self.node = node


class Membership(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class GardingCone:
    """``Gamma_k^+`` in R^n."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 3:
            raise DomainError(f"dimension n must be >= 3, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"k must satisfy 1 <= k <= n={self.n}, got {self.k}")

    @property
    def root(self) -> GardingCone:
        return self

    def deformation_matrix(self) -> np.ndarray:
        return np.eye(self.n)

    def describe(self) -> str:
        return f"Gamma_{self.k}^+ (n={self.n})"


@dataclass(frozen=True)
class TauCone:
    """The deformation ``base^tau``; ``tau = 1`` returns the base cone itself."""

    base: ConeSpec
    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"tau must lie in (0, 1], got {self.tau}")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def root(self) -> GardingCone:
        return self.base.root

    def deformation_matrix(self) -> np.ndarray:
        n = self.n
        step = self.tau * np.eye(n) + (1.0 - self.tau) * np.ones((n, n))
        return self.base.deformation_matrix() @ step

    def describe(self) -> str:
        return f"({self.base.describe()})^tau, tau={self.tau:g}"


ConeSpec = Union[GardingCone, TauCone]


def _as_vectors(lam) -> np.ndarray:
    return np.asarray(lam, dtype=float)


def elementary_symmetric(lam, kmax: int | None = None) -> np.ndarray:
    """All of ``sigma_0 .. sigma_kmax`` by the one-pass product recurrence.

    The coefficients of ``prod_i (1 + lam_i x)`` are accumulated one factor at
    a time, which avoids the cancellation of Newton-identity formulas.
    """
    lam = _as_vectors(lam)
    n = lam.shape[-1]
    kmax = n if kmax is None else kmax
    out = np.zeros(lam.shape[:-1] + (kmax + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i]
        for j in range(min(i + 1, kmax), 0, -1):
            out[..., j] += x * out[..., j - 1]
    return out


def sigma_k(lam, k: int):
    lam = _as_vectors(lam)
    n = lam.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"sigma_k requires 0 <= k <= n={n}, got k={k}")
    return elementary_symmetric(lam, k)[..., k]


def sigma_k_gradient(lam, k: int) -> np.ndarray:
    """Partial derivatives of sigma_k; entry i is sigma_{k-1} with lam_i removed."""
    lam = _as_vectors(lam)
    n = lam.shape[-1]
    if not 1 <= k <= n:
        raise DomainError(f"sigma_k_gradient requires 1 <= k <= n={n}, got k={k}")
    grad = np.empty_like(lam)
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        grad[..., i] = elementary_symmetric(rest, k - 1)[..., k - 1]
    return grad


def deform(cone: ConeSpec, lam) -> np.ndarray:
    """Map eigenvalues into the coordinates of the root elementary-symmetric cone."""
    lam = _as_vectors(lam)
    if lam.shape[-1] != cone.n:
        raise DomainError(f"expected {cone.n} eigenvalues, got {lam.shape[-1]}")
    if isinstance(cone, GardingCone):
        return lam
    return lam @ cone.deformation_matrix().T


def admissibility_margin(cone: ConeSpec, lam) -> np.ndarray:
    """``min_j sigma_j`` (j <= k) of the deformed vector scaled to unit norm.

    Positive inside the cone, zero on its boundary, negative outside. The
    zero vector (the vertex) has margin 0.
    """
    d = deform(cone, lam)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    unit = np.divide(d, norm, out=np.zeros_like(d), where=norm > 0)
    sig = elementary_symmetric(unit, cone.k)[..., 1:]
    return sig.min(axis=-1)


def raw_margin(cone: ConeSpec, lam) -> np.ndarray:
    """Unnormalized ``min_j sigma_j`` of the deformed vector."""
    d = deform(cone, lam)
    return elementary_symmetric(d, cone.k)[..., 1:].min(axis=-1)


def contains(cone: ConeSpec, lam, tol: float = BOUNDARY_TOL) -> Membership:
    lam = _as_vectors(lam)
    if lam.ndim != 1:
        raise DomainError("contains expects a single eigenvalue vector")
    margin = float(admissibility_margin(cone, lam))
    if margin > tol:
        return Membership.INTERIOR
    if margin >= -tol:
        return Membership.BOUNDARY
    return Membership.EXTERIOR


@dataclass(frozen=True)
class SymmetricFunctional:
    """``scale * sigma_k(D lam)^(1/k)`` on the cone, with D the cone's deformation."""

    cone: ConeSpec
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    @property
    def n(self) -> int:
        return self.cone.n

    def values(self, lam) -> np.ndarray:
        """Vectorized evaluation; exterior entries come back as NaN."""
        d = deform(self.cone, lam)
        k = self.cone.k
        sig = elementary_symmetric(d, k)
        ok = sig[..., 1:].min(axis=-1) >= 0
        top = np.where(ok, np.maximum(sig[..., k], 0.0), np.nan)
        return self.scale * top ** (1.0 / k)

    def gradient(self, lam) -> np.ndarray:
        """d f / d lam for strictly interior inputs (vectorized)."""
        d = deform(self.cone, lam)
        k = self.cone.k
        top = sigma_k(d, k)
        inner = sigma_k_gradient(d, k)
        coef = self.scale / k * top[..., None] ** (1.0 / k - 1.0)
        grad_d = coef * inner
        if isinstance(self.cone, GardingCone):
            return grad_d
        return grad_d @ self.cone.deformation_matrix()

    def __call__(self, lam) -> float:
        return f_eval(self, lam)


def f_eval(F: SymmetricFunctional, lam) -> float:
    lam = _as_vectors(lam)
    member = contains(F.cone, lam)
    if member is Membership.EXTERIOR:
        sig = elementary_symmetric(deform(F.cone, lam), F.cone.k)[1:]
        raise AdmissibilityError(
            f"eigenvalues {lam.tolist()} lie outside {F.cone.describe()}; "
            f"min_j sigma_j = {sig.min():.6g}",
            margins=sig,
        )
    if member is Membership.BOUNDARY:
        return 0.0
    return float(F.values(lam))


def canonical(cone: ConeSpec) -> SymmetricFunctional:
    return SymmetricFunctional(cone, 1.0)


def normalize(F: SymmetricFunctional) -> SymmetricFunctional:
    """Rescale F so that ``f(1/2, ..., 1/2) = 1``."""
    half = np.full(F.n, 0.5)
    base = float(canonical(F.cone).values(half))
    return replace(F, scale=1.0 / base)


def _ray(n: int, mu: float) -> np.ndarray:
    v = np.ones(n)
    v[0] = -mu
    return v


def mu_plus(cone: ConeSpec, method: str = "auto") -> float:
    """The number mu with ``(-mu, 1, ..., 1)`` on the boundary of the cone.

    Closed form ``(n - k)/k`` for elementary-symmetric cones; bisection on
    ``[0, n - 1]`` otherwise (or when ``method="bisection"``).
    """
    if method not in ("auto", "closed", "bisection"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(cone, GardingCone) and method != "bisection":
        return (cone.n - cone.k) / cone.k
    if method == "closed":
        raise DomainError("no closed form for tau-modified cones")

    def inside(mu: float) -> bool:
        return float(raw_margin(cone, _ray(cone.n, mu))) > 0.0

    lo, hi = 0.0, float(cone.n - 1)
    if not inside(lo):
        return 0.0
    for _ in range(MU_BISECTION_MAXITER):
        if hi - lo <= MU_BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tau_for_trace_parameter(n: int, t: float) -> float:
    """tau such that ``A^t = tau^{-1}[tau A + (1 - tau) sigma_1(A) g]``."""
    if t >= 1:
        raise DomainError(f"trace parameter must satisfy t < 1, got {t}")
    if n < 3:
        raise DomainError(f"dimension n must be >= 3, got {n}")
    return 1.0 / (1.0 + (1.0 - t) / (n - 2))


def check_mean_bound(F: SymmetricFunctional, lam, tol: float = 1e-12) -> bool:
    """Whether ``f(lam) <= f(e) sigma_1(lam) / n`` holds (up to tol)."""
    lam = _as_vectors(lam)
    if contains(F.cone, lam) is not Membership.INTERIOR:
        raise AdmissibilityError(f"{lam.tolist()} is not interior to {F.cone.describe()}")
    lhs = float(F.values(lam))
    rhs = float(F.values(np.ones(F.n))) * float(lam.sum()) / F.n
    return lhs <= rhs + tol * max(1.0, abs(rhs))


def sample_interior(cone: ConeSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample strictly interior vectors (unit-scale Gaussian proposals)."""
    out = []
    have = 0
    while have < size:
        batch = rng.normal(size=(max(2 * size, 64), cone.n)) + rng.uniform(0.0, 2.0)
        keep = batch[admissibility_margin(cone, batch) > 1e-6]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:size]


def parse_cone(spec: dict) -> ConeSpec:
    """Build a cone from ``{"family": "gamma-k", "n": .., "k": ..}`` or a tau family."""
    family = spec.get("family", "gamma-k")
    if family in ("gamma-k", "elementary_symmetric"):
        return GardingCone(int(spec["n"]), int(spec["k"]))
    if family in ("tau", "tau_modified"):
        base = spec.get("base") or {"family": "gamma-k"}
        base = dict(base)
        base.setdefault("n", spec.get("n"))
        if "k" not in base and "k" in spec:
            base["k"] = spec["k"]
        return TauCone(parse_cone(base), float(spec["tau"]))
    raise DomainError(f"unknown cone family {family!r}")


def cone_to_dict(cone: ConeSpec) -> dict:
    if isinstance(cone, GardingCone):
        return {"family": "gamma-k", "n": cone.n, "k": cone.k}
    return {"family": "tau", "tau": cone.tau, "base": cone_to_dict(cone.base), "n": cone.n}


def is_uniformly_elliptic_cone(cone: ConeSpec) -> bool:
    """Whether ``(1, 0, ..., 0)`` is interior, the regime with unique Dirichlet solutions."""
    e1 = np.zeros(cone.n)
    e1[0] = 1.0
    return contains(cone, e1) is Membership.INTERIOR
