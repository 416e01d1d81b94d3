from __future__ import annotations

import pytest

from conformal_yamabe import verify


def test_injected_sign_fault_is_named():
    res = verify.check_schwarzschild_boundary(fault=True)
    assert not res.passed
    assert res.line().startswith("FAIL schwarzschild_boundary")


def test_pristine_boundary_check_passes():
    assert verify.check_schwarzschild_boundary().passed


@pytest.mark.parametrize("suite", ["cones", "geometry"])
def test_fast_suites_pass(suite):
    results = verify.run_suite(suite)
    assert results and all(r.passed for r in results)


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify.run_suite("everything")


def test_reference_suite_is_subset_of_all():
    assert set(verify.SUITES["paper"]) <= set(verify.SUITES["all"])
