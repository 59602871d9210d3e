import time

import pytest

from wlac.gradcheck import CASES, grad_check


def test_linear_squared_error_tight():
    report = grad_check("linear_squared_error", tolerance=1e-6)
    assert report.passed, report.per_group
    assert report.max_rel_error < 1e-6


def test_baseline_cross_entropy():
    report = grad_check("baseline_cross_entropy")
    assert report.max_rel_error < 1e-4, report.per_group


def test_cmblm_cross_entropy():
    report = grad_check("cmblm_cross_entropy")
    assert report.max_rel_error < 1e-4, report.per_group


def test_energy_objective():
    report = grad_check("energy_objective")
    assert report.max_rel_error < 1e-4, report.per_group


def test_unknown_case_rejected():
    with pytest.raises(ValueError):
        grad_check("not-a-case")


def test_report_shape():
    report = grad_check("linear_squared_error")
    assert set(report.per_group) == {"weight", "bias"}
    assert report.to_json()["case"] == "linear_squared_error"


def test_all_cases_run_quickly():
    start = time.perf_counter()
    for case in CASES:
        assert grad_check(case).passed
    assert time.perf_counter() - start < 60.0
