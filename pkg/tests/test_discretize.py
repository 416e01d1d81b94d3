from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_yamabe.discretize import BandedSystem, Grid, SingularSystemError, d1, d2, solve_banded

coef = st.floats(-10, 10, allow_nan=False)


@given(coef, coef, coef)
def test_stencils_exact_on_quadratics(a, b, c):
    grid = Grid(0.5, 3.0, 21)
    r = grid.nodes
    u = a + b * r + c * r**2
    np.testing.assert_allclose(d1(u, grid), b + 2 * c * r, atol=1e-9 * (1 + abs(b) + abs(c)))
    np.testing.assert_allclose(d2(u, grid), 2 * c, atol=1e-7 * (1 + abs(c)))


def test_symmetry_node_for_even_function():
    grid = Grid(0.0, 1.0, 41, "symmetry")
    u = np.cos(grid.nodes)
    assert d1(u, grid)[0] == 0.0
    assert d2(u, grid)[0] == pytest.approx(-1.0, abs=1e-3)


@pytest.mark.parametrize("op,exact", [(d1, np.cos), (d2, lambda r: -np.sin(r))])
def test_second_order_convergence(op, exact):
    errs = []
    for N in (41, 81, 161):
        grid = Grid(0.2, 2.0, N)
        errs.append(np.max(np.abs(op(np.sin(grid.nodes), grid) - exact(grid.nodes))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.3))


@pytest.mark.parametrize("kwargs", [dict(r_min=0, r_max=1, N=3), dict(r_min=1, r_max=1, N=10),
                                    dict(r_min=-1, r_max=1, N=10), dict(r_min=0, r_max=1, N=10, left="neumann")])
def test_grid_preconditions(kwargs):
    with pytest.raises(ValueError):
        Grid(**kwargs)


@settings(max_examples=40)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_thomas_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    sub, sup = rng.normal(size=n - 1), rng.normal(size=n - 1)
    diag = 3.0 + np.abs(rng.normal(size=n))
    diag[1:] += np.abs(sub)
    diag[:-1] += np.abs(sup)
    system = BandedSystem(sub, diag, sup, rng.normal(size=n))
    x = solve_banded(system)
    np.testing.assert_allclose(x, np.linalg.solve(system.dense(), system.rhs), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(system.matvec(x), system.rhs, atol=1e-10)


def test_singular_system_reported():
    system = BandedSystem(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]), np.array([1.0, 2.0]))
    with pytest.raises(SingularSystemError):
        solve_banded(system)


def test_band_lengths_checked():
    with pytest.raises(ValueError):
        BandedSystem(np.zeros(2), np.ones(2), np.zeros(1), np.ones(2))
