"""Acceptance gate: every criterion at its stated tolerance, one line each.

Each test runs one criterion from the shared suite module and prints its
PASS/FAIL line; the assertions carry the measured details for diagnosis.
"""

import pytest

from fracbubbles import acceptance


def _run(cid, **kwargs):
    res = acceptance.run_criterion(cid, **kwargs)
    print(f"\n{res.line()}  [{res.seconds:.1f}s]")
    return res


def test_criterion_1_constants():
    res = _run(1)
    assert res.passed, res.details


def test_criterion_2_calibration_cross_check():
    res = _run(2)
    assert res.passed, res.details


def test_criterion_3_bubble_energy_constancy(table3, table1_tenth):
    res = _run(3)
    assert res.passed, res.details


def test_criterion_4_two_route_agreement(table3, table1_tenth):
    res = _run(4)
    assert res.passed, res.details


def test_criterion_5_trace_sobolev_extremality(table1_quarter):
    res = _run(5)
    assert res.passed, res.details


def test_criterion_6_ps_synthesis(table1_quarter):
    res = _run(6)
    assert res.passed, res.details


def test_criterion_7_separation_monotone():
    res = _run(7)
    assert res.passed, res.details


def test_criterion_8_extraction_flagship():
    res = _run(8)
    assert res.passed, res.details


def test_criterion_9_eps_regularity_audit(table1_quarter):
    res = _run(9)
    assert res.passed, res.details


def test_criterion_10_determinism(tmp_path, table1_quarter):
    res = _run(10, workdir=str(tmp_path))
    assert res.passed, res.details
