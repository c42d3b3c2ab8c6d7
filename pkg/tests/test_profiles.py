import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from hkflow.errors import ParameterError
from hkflow.profiles import (
    GSpec,
    PsiSpec,
    eval_g,
    eval_psi,
    hellinger_limit_at_zero,
    make_g,
    make_psi,
)

G_SPECS = [make_g("log"), make_g("power", 2.0), make_g("power", 0.5), make_g("power", 3.0), make_g("arctangential")]


@pytest.mark.parametrize("alpha", [1.0, 0.0, -0.5])
def test_power_rejects_bad_alpha(alpha):
    with pytest.raises(ParameterError):
        make_g("power", alpha)


def test_unknown_kinds_rejected():
    with pytest.raises(ParameterError):
        make_g("cubic")
    with pytest.raises(ParameterError):
        make_psi("renyi", 2.0)
    with pytest.raises(ParameterError):
        make_g("log", 2.0)


@pytest.mark.parametrize("kind, p", [("beckner", 0.5), ("abs_power", 1.5)])
def test_psi_rejects_small_exponent(kind, p):
    with pytest.raises(ParameterError):
        make_psi(kind, p)


def test_driving_needs_base():
    with pytest.raises(ParameterError):
        make_psi("driving")


@pytest.mark.parametrize("g", G_SPECS)
def test_g_vanishes_at_one(g):
    assert float(g.g(1.0)) == 0.0


def test_arctangential_G_at_one():
    assert float(make_g("arctangential").G(1.0)) == pytest.approx(math.pi / 4, abs=1e-7)


def test_eval_g_at_zero():
    values = eval_g(make_g("log"), 0.0)
    assert values["G"] == 0.0
    assert values["sg"] == 0.0
    assert values["g"] is None and values["gprime"] is None


def test_eval_g_power_two():
    values = eval_g(make_g("power", 2.0), 3.0)
    assert values == pytest.approx({"g": 2.0, "gprime": 1.0, "G": 4.5, "sg": 6.0})


def test_eval_rejects_negative():
    with pytest.raises(ParameterError):
        eval_g(make_g("log"), -1.0)
    with pytest.raises(ParameterError):
        eval_psi(make_psi("beckner", 1.0), -0.1)


def test_psi_closed_forms():
    assert float(make_psi("driving", base=make_g("log")).psi(math.e)) == pytest.approx(1.0, abs=1e-12)
    assert float(make_psi("beckner", 2.0).psi(3.0)) == pytest.approx(2.0)
    assert float(make_psi("abs_power", 2.0).psi(0.0)) == 1.0


def test_eval_psi_examples():
    at_one = eval_psi(make_psi("beckner", 1.0), 1.0)
    assert at_one["psi"] == 0.0 and at_one["psiprime"] == 0.0
    assert eval_psi(make_psi("beckner", 1.0), 0.0)["psi"] == 1.0
    assert eval_psi(make_psi("beckner", 1.0), 0.0)["psidoubleprime"] is None
    assert eval_psi(make_psi("beckner", 1.5), 4.0)["psidoubleprime"] == pytest.approx(0.5)


@pytest.mark.parametrize("g", G_SPECS)
def test_G_derivative_matches_s_gprime(g):
    s = np.geomspace(1e-3, 1e2, 60)
    step = 1e-6 * s
    numeric = (g.G(s + step) - g.G(s - step)) / (2 * step)
    np.testing.assert_allclose(numeric, g.s_gprime(s), rtol=1e-6)


@pytest.mark.parametrize("g", G_SPECS)
def test_G_matches_quadrature(g):
    for s in (0.3, 1.0, 4.0):
        expected, _ = quad(lambda xi: xi * float(g.gprime(xi)), 0.0, s, limit=200, epsabs=0.0, epsrel=1e-10)
        assert float(g.G(s)) == pytest.approx(expected, rel=1e-7)


@pytest.mark.parametrize("g", G_SPECS)
def test_sg_slope_is_derivative_of_sg(g):
    s = np.geomspace(1e-2, 1e2, 40)
    step = 1e-6 * s
    numeric = (g.sg(s + step) - g.sg(s - step)) / (2 * step)
    np.testing.assert_allclose(numeric, g.sg_slope(s), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("g", [make_g("log"), make_g("power", 0.5), make_g("power", 2.0), make_g("arctangential")])
def test_driving_psiprime_is_g(g):
    psi = make_psi("driving", base=g)
    s = np.geomspace(1e-2, 1e2, 1000)
    step = 1e-6 * s
    numeric = (psi.psi(s + step) - psi.psi(s - step)) / (2 * step)
    np.testing.assert_allclose(numeric, g.g(s), rtol=1e-6, atol=1e-6)


def test_signs_agree_for_builtin_pairs(builtin_pairs):
    s = np.geomspace(1e-4, 1e4, 500)
    for g, psi in builtin_pairs:
        assert np.all(np.sign(g.g(s)) == np.sign(s - 1)), g
        assert np.all(np.sign(psi.psiprime(s)) == np.sign(s - 1)), psi


def test_evaluation_is_pure():
    psi = make_psi("driving", base=make_g("arctangential"))
    assert eval_psi(psi, 2.7) == eval_psi(psi, 2.7)
    assert eval_g(make_g("power", 0.5), 0.3) == eval_g(make_g("power", 0.5), 0.3)


def test_sg_extension_at_zero():
    for g in G_SPECS:
        assert float(g.sg(0.0)) == 0.0
        assert np.isfinite(g.sg(1e-12))


def test_hellinger_limit_at_zero():
    log, beckner = make_g("log"), make_psi("beckner", 1.0)
    assert hellinger_limit_at_zero(log, beckner) == 0.0
    half = make_g("power", 0.5)
    assert hellinger_limit_at_zero(half, make_psi("driving", base=half)) == pytest.approx(4.0)
    low = make_g("power", 0.3)
    assert hellinger_limit_at_zero(low, make_psi("driving", base=low)) == math.inf
    assert hellinger_limit_at_zero(log, make_psi("driving", base=low)) == 0.0


def test_json_round_trip_uses_fixed_field_names():
    psi = make_psi("driving", base=make_g("power", 0.5))
    data = json.loads(json.dumps(psi.to_dict()))
    assert data == {"kind": "driving", "base": {"kind": "power", "alpha": 0.5}}
    assert PsiSpec.from_dict(data) == psi
    assert GSpec.from_dict({"kind": "log"}) == make_g("log")


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ParameterError):
        GSpec.from_dict({"kind": "power", "alpha": 2.0, "beta": 1})
    with pytest.raises(ParameterError):
        PsiSpec.from_dict({"p": 2.0})
