"""Curvature of cohomogeneity-one metrics.

Two metric classes are represented:

* ``ConformallyFlat``: ``e^{2 u0(r)} |dx|^2`` on a radial domain of R^n.
* ``WarpedProduct``: ``dr^2 + Phi(r)^2 h`` with h an Einstein metric on the
  (n-1)-dimensional fiber normalized to Ricci = (n-2) k h, k in {-1, 0, 1}.

Both are of the form ``a(r)^2 dr^2 + b(r)^2 h`` and every Schouten tensor is
diagonal in the frame (radial, tangential), so eigenvalue vectors have the
shape ``(radial, tangential, ..., tangential)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import cones
from .cones import ConeSpec, DomainError, SymmetricFunctional
from .profiles import RadialProfile, closed_form, constant


@dataclass(frozen=True)
class ConformallyFlat:
    n: int
    u0: RadialProfile = field(default_factory=lambda: constant(0.0))
    r_min: float = 0.0
    r_max: float = math.inf

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("dimension must be >= 3")
        if self.r_min < 0 or self.r_max <= self.r_min:
            raise DomainError(f"bad radial domain [{self.r_min}, {self.r_max}]")

    def with_domain(self, r_min: float, r_max: float) -> ConformallyFlat:
        return ConformallyFlat(self.n, self.u0, r_min, r_max)


@dataclass(frozen=True)
class WarpedProduct:
    n: int
    phi: RadialProfile
    k: int = 1
    r_min: float = 0.0
    r_max: float = math.inf

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("dimension must be >= 3")
        if self.k not in (-1, 0, 1):
            raise DomainError(f"fiber sign must be -1, 0 or 1, got {self.k}")
        if self.r_max <= self.r_min:
            raise DomainError(f"bad radial domain [{self.r_min}, {self.r_max}]")

    def with_domain(self, r_min: float, r_max: float) -> WarpedProduct:
        return WarpedProduct(self.n, self.phi, self.k, r_min, r_max)


RadialMetric = Union[ConformallyFlat, WarpedProduct]


def euclidean(n: int) -> ConformallyFlat:
    return ConformallyFlat(n, constant(0.0))


@dataclass(frozen=True)
class SchoutenEigenvalues:
    """Eigenvalues of ``sign * g^{-1} A_g`` packed as (chi1, chi2).

    The assembled vector is ``frame * (chi1 - chi2, chi1, ..., chi1)``: one
    radial entry followed by n - 1 equal tangential entries. ``sign`` is +1
    when the pair describes A and -1 when it describes -A; ``frame`` carries
    a conformal factor such as ``e^{-2 u0}`` when chi1, chi2 are measured in
    a background frame.
    """

    n: int
    chi1: np.ndarray
    chi2: np.ndarray
    sign: int = 1
    frame: np.ndarray | float = 1.0

    @property
    def radial(self):
        return self.frame * (self.chi1 - self.chi2)

    @property
    def tangential(self):
        return self.frame * self.chi1

    def vector(self) -> np.ndarray:
        rad = np.asarray(self.radial, float)
        tan = np.asarray(self.tangential, float)
        rad, tan = np.broadcast_arrays(rad, tan)
        out = np.repeat(tan[..., None], self.n, axis=-1)
        out[..., 0] = rad
        return out

    def negated(self) -> SchoutenEigenvalues:
        return SchoutenEigenvalues(self.n, -self.chi1, -self.chi2, -self.sign, self.frame)

    def as_sign(self, sign: int) -> SchoutenEigenvalues:
        return self if sign == self.sign else self.negated()

    def scalar_curvature(self) -> np.ndarray:
        """R = 2(n-1) tr(g^{-1} A), with the sign flag undone."""
        tr = self.radial + (self.n - 1) * self.tangential
        return 2.0 * (self.n - 1) * self.sign * tr


def _check_r(metric: RadialMetric, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be nonnegative")
    return r


def warped_schouten(metric: WarpedProduct, r) -> SchoutenEigenvalues:
    """Eigenvalues of ``-g^{-1} A`` for ``dr^2 + Phi^2 h``."""
    r = _check_r(metric, r)
    phi, dphi, ddphi = metric.phi.derivatives(r)
    if np.any(phi <= 0):
        raise DomainError("warping function must be positive")
    chi1 = (dphi**2 - metric.k) / (2.0 * phi**2)
    chi2 = -ddphi / phi + 2.0 * chi1
    return SchoutenEigenvalues(metric.n, chi1, chi2, sign=-1)


def warped_ricci_scalar(metric: WarpedProduct, r):
    """(radial Ricci eigenvalue, tangential Ricci eigenvalue, R)."""
    r = _check_r(metric, r)
    n, k = metric.n, metric.k
    phi, dphi, ddphi = metric.phi.derivatives(r)
    if np.any(phi <= 0):
        raise DomainError("warping function must be positive")
    pp = ddphi / phi
    q = (k - dphi**2) / phi**2
    ric_tan = -(pp - (n - 2) * q)
    ric_rad = ric_tan - (n - 2) * (pp + q)
    scal = -2.0 * (n - 1) * pp - (n - 1) * (n - 2) * dphi**2 / phi**2 + (n - 1) * (n - 2) * k / phi**2
    return ric_rad, ric_tan, scal


def _flat_frame_chis(n: int, du, ddu, r, at_pole):
    """(chi1, chi2) of ``g_{R^n}^{-1} A`` for ``e^{2u}|dx|^2`` (flat frame)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        du_over_r = np.where(at_pole, ddu, du / np.where(at_pole, 1.0, r))
    chi1 = -du_over_r - 0.5 * du**2
    chi2 = ddu - du_over_r - du**2
    return chi1, chi2


def _pole_mask(profile: RadialProfile, r):
    at_pole = r == 0
    if np.any(at_pole):
        slope = np.abs(profile.d1(np.zeros(1)))[0]
        if not slope <= 1e-12:
            raise DomainError("r = 0 requires an even profile (u'(0) = 0)")
    return at_pole


def radial_conformal_schouten(metric: ConformallyFlat, r) -> SchoutenEigenvalues:
    """Eigenvalues of ``g^{-1} A`` for ``g = e^{2 u0}|dx|^2``.

    chi1, chi2 are the flat-frame values; ``frame = e^{-2 u0}`` converts them
    to eigenvalues of ``g^{-1} A``. At r = 0 the tangential term ``u0'/r`` is
    replaced by its limit ``u0''(0)``.
    """
    r = _check_r(metric, r)
    at_pole = _pole_mask(metric.u0, r)
    u, du, ddu = metric.u0.derivatives(r)
    chi1, chi2 = _flat_frame_chis(metric.n, du, ddu, r, at_pole)
    return SchoutenEigenvalues(metric.n, chi1, chi2, sign=1, frame=np.exp(-2.0 * u))


def schouten(metric: RadialMetric, r) -> SchoutenEigenvalues:
    """Background eigenvalues in the metric's natural convention."""
    if isinstance(metric, WarpedProduct):
        return warped_schouten(metric, r)
    return radial_conformal_schouten(metric, r)


def scalar_curvature(metric: RadialMetric, r) -> np.ndarray:
    """Scalar curvature from the Ricci display (warped) or the conformal Laplacian of v (flat)."""
    r = _check_r(metric, r)
    if isinstance(metric, WarpedProduct):
        return warped_ricci_scalar(metric, r)[2]
    n = metric.n
    at_pole = _pole_mask(metric.u0, r)
    u, du, ddu = metric.u0.derivatives(r)
    # v = e^{(n-2)u/2};  R = -4(n-1)/(n-2) v^{-(n+2)/(n-2)} (v'' + (n-1) v'/r)
    half = 0.5 * (n - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dv_over_rv = np.where(at_pole, half * ddu, half * du / np.where(at_pole, 1.0, r))
    ddv_over_v = half * ddu + half**2 * du**2
    lap_over_v = ddv_over_v + (n - 1) * dv_over_rv
    return -4.0 * (n - 1) / (n - 2) * np.exp(-2.0 * u) * lap_over_v


@dataclass(frozen=True)
class FrameCoefficients:
    """Radial reduction data of ``g0 = a^2 dr^2 + b^2 h`` sampled at radii.

    ``a2inv = 1/a^2``, ``alpha = a'/a``, ``beta = b'/(a^2 b)``; ``pole`` marks
    r = 0 nodes where b vanishes and ``beta u'`` must be replaced by
    ``u''/a^2``. ``A0_rad``, ``A0_tan`` are eigenvalues of ``+g0^{-1} A_{g0}``.
    """

    r: np.ndarray
    a2inv: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    pole: np.ndarray
    A0_rad: np.ndarray
    A0_tan: np.ndarray
    log_a: np.ndarray
    log_b_prime: np.ndarray  # b'/b, used by the conformal Laplacian


def frame_coefficients(metric: RadialMetric, r) -> FrameCoefficients:
    r = _check_r(metric, r)
    if isinstance(metric, WarpedProduct):
        phi, dphi, _ = metric.phi.derivatives(r)
        pole = phi == 0
        if np.any(phi < 0):
            raise DomainError("warping function must be nonnegative")
        ones = np.ones_like(r)
        safe_phi = np.where(pole, 1.0, phi)
        bprime = np.where(pole, 0.0, dphi / safe_phi)
        if np.any(pole):
            # A0 at a smooth pole equals its limit; take it from a nearby radius
            eig = warped_schouten(metric, np.where(pole, 1e-6, r)).negated()
        else:
            eig = warped_schouten(metric, r).negated()
        return FrameCoefficients(
            r, ones, np.zeros_like(r), bprime, pole,
            np.asarray(eig.radial, float), np.asarray(eig.tangential, float),
            np.zeros_like(r), bprime,
        )
    pole = _pole_mask(metric.u0, r)
    u, du, _ = metric.u0.derivatives(r)
    e = np.exp(-2.0 * u)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_r = np.where(pole, 0.0, 1.0 / np.where(pole, 1.0, r))
    eig = radial_conformal_schouten(metric, r)
    return FrameCoefficients(
        r, e, du, e * (inv_r + du), pole,
        np.asarray(eig.radial, float) * np.ones_like(r),
        np.asarray(eig.tangential, float) * np.ones_like(r),
        u, inv_r + du,
    )


def transformed_eigenvalues(coeffs: FrameCoefficients, u, du, ddu):
    """Eigenvalues (radial, tangential) of ``+g_u^{-1} A_{g_u}``, ``g_u = e^{2u} g0``.

    Applies ``A_{g_u} = -Hess u + du (x) du - |du|^2 g0 / 2 + A_{g0}`` in the
    g0-orthonormal frame, then the factor ``e^{-2u}``.
    """
    c = coeffs
    grad2 = du**2 * c.a2inv
    hess_rad = (ddu - c.alpha * du) * c.a2inv
    hess_tan = np.where(c.pole, ddu * c.a2inv, c.beta * du)
    e = np.exp(-2.0 * u)
    rad = e * (-hess_rad + 0.5 * grad2 + c.A0_rad)
    tan = e * (-hess_tan - 0.5 * grad2 + c.A0_tan)
    return rad, tan


def conformal_change_schouten(base: RadialMetric, u: RadialProfile, r) -> SchoutenEigenvalues:
    """Eigenvalues of ``g_u^{-1} A_{g_u}`` for ``g_u = e^{2u} base`` (sign +A)."""
    r = _check_r(base, r)
    coeffs = frame_coefficients(base, r)
    if np.any(coeffs.pole):
        _pole_mask(u, r)
    uu, du, ddu = u.derivatives(r)
    rad, tan = transformed_eigenvalues(coeffs, uu, du, ddu)
    return SchoutenEigenvalues(base.n, tan, tan - rad, sign=1)


def schwarzschild_type(n: int, mu: float, m: float) -> ConformallyFlat:
    """``(1 + m/(2 r^{mu-1}))^{4/(mu-1)} |dx|^2`` on the radii where it is defined."""
    if not mu > 1:
        raise DomainError(f"Schwarzschild-type metrics need mu > 1, got {mu}")
    p = mu - 1.0
    r_min = (-m / 2.0) ** (1.0 / p) if m < 0 else 0.0
    if m == 0:
        return ConformallyFlat(n, constant(0.0))
    return ConformallyFlat(n, closed_form("schwarzschild", mu=float(mu), m=float(m)), r_min)


def schwarzschild_horizon(mu: float, m: float) -> float:
    """Fixed radius of the inversion isometry ``r -> r_h^2 / r`` (m > 0)."""
    return (m / 2.0) ** (1.0 / (mu - 1.0))


@dataclass
class EndConditionReport:
    passed: bool
    min_chi1: float
    min_ratio: float
    eps: float
    ratio_bound: float
    r: np.ndarray = field(repr=False, default=None)


def check_end_conditions(metric: WarpedProduct, mu: float, r_range, eps: float, delta: float,
                         samples: int = 10001) -> EndConditionReport:
    """Evaluate ``(Phi'^2 - k)/(2 Phi^2) >= eps`` and ``2 Phi Phi''/(Phi'^2 - k) >= 1 - mu + delta``."""
    r = np.linspace(r_range[0], r_range[1], samples)
    phi, dphi, ddphi = metric.phi.derivatives(r)
    num = dphi**2 - metric.k
    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = num / (2.0 * phi**2)
        q2 = np.where(np.abs(num) > 1e-14, 2.0 * phi * ddphi / num, np.nan)
    bound = 1.0 - mu + delta
    min1 = float(np.nanmin(q1)) if np.any(np.isfinite(q1)) else math.nan
    min2 = float(np.min(q2)) if not np.any(np.isnan(q2)) else math.nan
    passed = bool(min1 >= eps and min2 >= bound)
    return EndConditionReport(passed, min1, min2, eps, bound, r)


@dataclass
class DecayReport:
    radii: np.ndarray
    weighted_sup: dict
    exponent: float | None
    integral_norm: float | None
    tau: float
    p: float


def decay_report(u: RadialProfile, tau: float, p: float, radii, n: int = 3) -> DecayReport:
    """Weighted decay diagnostics of a radial function on the probe radii.

    ``weighted_sup[j] = max r^{tau+j} |u^{(j)}|`` for j = 0, 1; ``exponent`` is
    minus the least-squares log-log slope of |u|; for finite p the weighted
    Sobolev norm ``sum_j || r^{tau - n/p - j} u^{(j)} ||_{L^p}`` (j <= 2) is
    integrated over the probed annulus.
    """
    from scipy.integrate import quad

    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise DomainError("probe radii must be positive and increasing")
    v, d1, d2 = u.derivatives(radii)
    sup = {
        0: float(np.max(radii**tau * np.abs(v))),
        1: float(np.max(radii ** (tau + 1) * np.abs(d1))),
    }
    mag = np.abs(v)
    exponent = None
    if np.all(mag > 0):
        slope = np.polyfit(np.log(radii), np.log(mag), 1)[0]
        exponent = float(-slope)
    norm = None
    if math.isfinite(p):
        area = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
        total = 0.0
        for j in range(3):
            def integrand(s, j=j):
                dj = u.derivatives(np.array([s]))[j][0]
                return (s ** (tau - n / p - j) * abs(dj)) ** p * area * s ** (n - 1)
            val, _ = quad(integrand, radii[0], radii[-1], limit=200)
            total += val ** (1.0 / p)
        norm = float(total)
    return DecayReport(radii, sup, exponent, norm, tau, p)


def perturbation_margin(metric: ConformallyFlat, bump: RadialProfile, cone: ConeSpec, r,
                        scales=(1e-3, 1e-2)) -> dict:
    """Smallness audit for a compactly supported radial conformal perturbation.

    Reports the C^2 norm of the bump, a sampled Lipschitz estimate of the
    eigenvalue map ``bump -> lambda(g_{u0+bump}^{-1} A)``, the cone margin
    of the background, and whether the perturbed eigenvalues stay interior.
    """
    from .profiles import c2_norm

    r = np.asarray(r, float)
    base = radial_conformal_schouten(metric, r).vector()
    bnorm = c2_norm(bump, r)
    lips = []
    for s in scales:
        lam = conformal_change_schouten(metric, _Scaled(bump, s), r).vector()
        lips.append(float(np.max(np.abs(lam - base))) / max(s * bnorm, 1e-300))
    lam_full = conformal_change_schouten(metric, bump, r).vector()
    margins = cones.admissibility_margin(cone, lam_full)
    return {
        "c2_norm": bnorm,
        "lipschitz_estimate": max(lips),
        "predicted_shift": max(lips) * bnorm,
        "background_min_margin": float(np.min(cones.admissibility_margin(cone, base))),
        "perturbed_min_margin": float(np.min(margins)),
        "interior": bool(np.all(margins > cones.BOUNDARY_TOL)),
    }


@dataclass(frozen=True)
class _Scaled(RadialProfile):
    inner: RadialProfile
    factor: float

    def derivatives(self, r):
        return tuple(self.factor * d for d in self.inner.derivatives(r))


def f_values(F: SymmetricFunctional, eig: SchoutenEigenvalues) -> np.ndarray:
    return F.values(eig.vector())
