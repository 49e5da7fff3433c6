import pytest

from utils.validation import CHECKS, CheckResult, run_checks


@pytest.mark.parametrize("check", CHECKS, ids=lambda fn: fn.__name__)
def test_check_passes(check):
    result = check(seed=0)
    assert result.passed, result.line()
    assert result.value < result.tolerance


def test_result_line():
    assert CheckResult('x', True, 1e-12, 1e-9, 'detail').line().startswith('PASS x: detail')
    assert CheckResult('x', False, 1.0, 1e-9).line().startswith('FAIL x')


def test_run_checks_reports_every_check(monkeypatch):
    import utils.validation as validation

    monkeypatch.setattr(validation, 'CHECKS', [
        lambda seed: CheckResult('a', True, 0.0, 1.0),
        lambda seed: CheckResult('b', False, 2.0, 1.0),
    ])
    results = run_checks(seed=3)
    assert [r.name for r in results] == ['a', 'b']
    assert [r.passed for r in results] == [True, False]
