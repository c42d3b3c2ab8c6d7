import numpy as np
import pytest

from hkflow.errors import ParameterError
from hkflow.profiles import make_g, make_psi
from hkflow.validators import CHECK_NAMES, default_sample, validate_pair


def test_log_beckner_passes():
    report = validate_pair(make_g("log"), make_psi("beckner", 1.5))
    assert report.is_valid, report.errors
    assert report.errors == []
    assert report.warnings == []


def test_driving_power_half_passes():
    g = make_g("power", 0.5)
    report = validate_pair(g, make_psi("driving", base=g))
    assert report.is_valid, report.errors
    assert not any("diverges" in w for w in report.warnings)
    # psi' = 2 (1 - s^-1/2) levels off at 2: only the sampled window looks unbounded
    assert any("bounded as s -> inf" in w for w in report.warnings)
    assert "not a limit" in report.check("psiprime_unbounded").detail


def test_abs_power_three_passes_with_note():
    report = validate_pair(make_g("log"), make_psi("abs_power", 3.0))
    assert report.is_valid, report.errors
    assert any("psi''(1) = 0" in w for w in report.warnings)


def test_report_lists_every_check():
    report = validate_pair(make_g("power", 2.0), make_psi("beckner", 1.0))
    assert [c.name for c in report.checks] == list(CHECK_NAMES)
    data = report.to_dict()
    assert data["is_valid"] is True
    assert {c["name"] for c in data["checks"]} == set(CHECK_NAMES)


def test_builtin_pairs_pass(builtin_pairs):
    for g, psi in builtin_pairs:
        report = validate_pair(g, psi)
        assert report.is_valid, (g, psi, report.errors)


def test_driving_arctangential_is_bounded():
    g = make_g("arctangential")
    report = validate_pair(g, make_psi("driving", base=g))
    assert not report.is_valid
    check = report.check("psiprime_unbounded")
    assert not check.passed
    assert check.worst_s == pytest.approx(1e6)


def test_divergent_hellinger_limit_warns():
    g = make_g("power", 0.3)
    report = validate_pair(g, make_psi("driving", base=g))
    assert any("diverges" in w for w in report.warnings)


def test_custom_sample_is_sorted():
    sample = default_sample()[::-1].copy()
    report = validate_pair(make_g("log"), make_psi("beckner", 2.0), sample)
    assert report.is_valid


@pytest.mark.parametrize("sample", [
    np.geomspace(1e-6, 1e6, 100),
    np.geomspace(1e-3, 1e6, 2000),
    np.geomspace(1e-6, 1e3, 2000),
])
def test_short_sample_raises(sample):
    with pytest.raises(ParameterError):
        validate_pair(make_g("log"), make_psi("beckner", 1.0), sample)


def test_unknown_check_name():
    report = validate_pair(make_g("log"), make_psi("beckner", 1.0))
    with pytest.raises(KeyError):
        report.check("not_a_check")
