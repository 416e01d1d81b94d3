from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_yamabe import cones, geometry
from conformal_yamabe.profiles import closed_form

R = np.linspace(0.3, 12.0, 97)


@pytest.mark.parametrize("n", [3, 4, 6])
@pytest.mark.parametrize("name,k", [("sinh", 1), ("exp", 0), ("cosh", -1)])
def test_hyperbolic_ends_have_constant_eigenvalues(n, name, k):
    metric = geometry.WarpedProduct(n, closed_form(name), k)
    eig = geometry.warped_schouten(metric, R)
    np.testing.assert_allclose(eig.chi1, 0.5, atol=1e-12)
    np.testing.assert_allclose(eig.chi2, 0.0, atol=1e-12)
    np.testing.assert_allclose(geometry.scalar_curvature(metric, R), -n * (n - 1), rtol=1e-12)


def test_euclidean_warped_is_flat():
    eig = geometry.warped_schouten(geometry.WarpedProduct(5, closed_form("identity"), 1), R)
    np.testing.assert_allclose(eig.vector(), 0.0, atol=1e-14)


@pytest.mark.parametrize("cap,value", [("spherical_cap", 0.5), ("hyperbolic_cap", -0.5)])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_space_form_caps(cap, value, n):
    r = np.linspace(0.0, 0.9, 31)
    metric = geometry.ConformallyFlat(n, closed_form(cap, rho=1.0))
    lam = geometry.radial_conformal_schouten(metric, r).vector()
    np.testing.assert_allclose(lam, value, atol=1e-12)
    np.testing.assert_allclose(geometry.scalar_curvature(metric, r), 2 * value * n * (n - 1), atol=1e-10)
    via_change = geometry.conformal_change_schouten(geometry.euclidean(n), closed_form(cap, rho=1.0), r)
    np.testing.assert_allclose(via_change.vector(), value, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(1.2, 3.0), st.floats(0.2, 2.0))
def test_transformation_law_composes(alpha, mu, m):
    # e^{2 u1} (e^{2 u0} |dx|^2) is the flat conformal metric with exponent u0 + u1
    r = np.linspace(1.5, 8.0, 40)
    u0 = closed_form("schwarzschild", mu=mu, m=m)
    u1 = closed_form("exp_sin", alpha=alpha)
    composed = geometry.conformal_change_schouten(geometry.ConformallyFlat(4, u0), u1, r)
    direct = geometry.radial_conformal_schouten(geometry.ConformallyFlat(4, u0 + u1), r)
    np.testing.assert_allclose(composed.vector(), direct.vector(), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("name,k,params", [("exp_sin", -1, {"alpha": 0.3}), ("power", 1, {"a": 1.5, "c": 1.0}),
                                           ("cosh", 1, {})])
def test_ricci_and_schouten_agree(name, k, params):
    n = 5
    metric = geometry.WarpedProduct(n, closed_form(name, **params), k)
    r = np.linspace(0.5, 6.0, 50)
    ric_rad, ric_tan, scal = geometry.warped_ricci_scalar(metric, r)
    A = -geometry.warped_schouten(metric, r).vector()
    np.testing.assert_allclose(2 * (n - 1) * A.sum(axis=-1), scal, rtol=1e-10, atol=1e-10)
    shift = scal / (2 * (n - 1))
    np.testing.assert_allclose((n - 2) * A[:, 0] + shift, ric_rad, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose((n - 2) * A[:, 1] + shift, ric_tan, rtol=1e-10, atol=1e-10)


def test_schwarzschild_m0_is_flat():
    eig = geometry.schouten(geometry.schwarzschild_type(5, 1.5, 0.0), R)
    np.testing.assert_allclose(eig.vector(), 0.0, atol=1e-15)


@pytest.mark.parametrize("n,k", [(4, 1), (5, 1), (5, 2), (6, 1), (6, 2)])
@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_schwarzschild_on_cone_boundary(n, k, m):
    mu = (n - k) / k
    eig = geometry.schouten(geometry.schwarzschild_type(n, mu, m), np.linspace(0.5, 20, 200))
    np.testing.assert_allclose(eig.chi2 / eig.chi1, mu + 1.0, rtol=1e-10)
    margin = cones.admissibility_margin(cones.GardingCone(n, k), eig.vector())
    assert np.max(np.abs(margin)) <= 1e-9


@pytest.mark.parametrize("mu,m", [(2.0, 2.0), (3.0, 2.0), (1.5, 0.5)])
def test_horizon_is_fixed_by_inversion(mu, m):
    rh = geometry.schwarzschild_horizon(mu, m)
    metric = geometry.schwarzschild_type(4, mu, m)
    # inversion r -> rh^2/r is an isometry: e^{u(r)} r = e^{u(rh^2/r)} rh^2/r
    r = np.array([0.4 * rh, 0.8 * rh, 2.5 * rh])
    np.testing.assert_allclose(np.exp(metric.u0(r)) * r, np.exp(metric.u0(rh**2 / r)) * rh**2 / r, rtol=1e-12)


def test_schwarzschild_needs_mu_above_one():
    with pytest.raises(cones.DomainError):
        geometry.schwarzschild_type(4, 1.0, 1.0)


@pytest.mark.parametrize("alpha,passes", [(0.1, True), (0.5, False)])
def test_exp_sin_end_conditions(alpha, passes):
    metric = geometry.WarpedProduct(4, closed_form("exp_sin", alpha=alpha), -1)
    rep = geometry.check_end_conditions(metric, 1.5, (0.0, 100.0), 0.1, 0.1)
    assert rep.passed is passes


def test_frame_coefficients_reproduce_background():
    metric = geometry.WarpedProduct(4, closed_form("exp_sin", alpha=0.2), -1)
    r = np.linspace(0.5, 5.0, 20)
    c = geometry.frame_coefficients(metric, r)
    zero = np.zeros_like(r)
    rad, tan = geometry.transformed_eigenvalues(c, zero, zero, zero)
    lam = -geometry.warped_schouten(metric, r).vector()
    np.testing.assert_allclose(rad, lam[:, 0], atol=1e-14)
    np.testing.assert_allclose(tan, lam[:, 1], atol=1e-14)


def test_negative_radius_rejected():
    with pytest.raises(cones.DomainError):
        geometry.schouten(geometry.euclidean(4), np.array([-1.0, 1.0]))


def test_odd_profile_rejected_at_pole():
    with pytest.raises(cones.DomainError):
        geometry.radial_conformal_schouten(geometry.ConformallyFlat(4, closed_form("identity")), np.array([0.0, 1.0]))
