import math

import numpy as np
import pytest

from hkflow.entropy import (
    band_production_bound,
    density_ratio,
    production,
    production_band,
    relative_entropy,
    safe_ratio,
)
from hkflow.errors import ParameterError
from hkflow.mesh import DensityBuilder, Field, build_density, build_grid, gradient_sq_values
from hkflow.profiles import make_g, make_psi


@pytest.fixture
def sine_case():
    grid = build_grid("torus1d", 128)
    steady = build_density(grid, DensityBuilder("constant"))
    x = grid.axis_centers()
    rho = Field(grid, 1.0 + 0.1 * np.sin(2 * np.pi * x))
    return grid, rho, steady


def test_entropy_vanishes_at_steady(torus_grid, cosine_steady, builtin_pairs):
    steady = cosine_steady(torus_grid)
    for g, psi in builtin_pairs:
        report = production(torus_grid, steady, steady, g, psi)
        assert report.entropy == 0.0
        assert report.production_w == 0.0
        assert abs(report.production_h) <= 1e-14
        assert report.mass == pytest.approx(1.0)


def test_entropy_of_doubled_steady(interval_grid, cosine_steady):
    steady = cosine_steady(interval_grid)
    value = relative_entropy(interval_grid, steady.scaled(2.0), steady, make_psi("beckner", 2.0))
    assert value == pytest.approx(0.5, abs=1e-12)


def test_entropy_of_indicator_band():
    # 0.1 psi(0) + 0.9 psi(10/9) collapses to ln(10/9)
    grid = build_grid("interval_noflux", 100)
    steady = build_density(grid, DensityBuilder("constant"))
    rho = build_density(grid, DensityBuilder("indicator_band", {"n": 10}), steady)
    value = relative_entropy(grid, rho, steady, make_psi("beckner", 1.0))
    assert value == pytest.approx(math.log(10 / 9), abs=1e-12)


def test_entropy_positive_away_from_steady(torus_grid, unit_steady, perturbed, builtin_pairs):
    steady = unit_steady(torus_grid)
    rho = perturbed(steady, amp=0.2)
    for g, psi in builtin_pairs:
        assert relative_entropy(torus_grid, rho, steady, psi) > 0


def test_production_of_scaled_steady(torus_grid, unit_steady):
    steady = unit_steady(torus_grid)
    report = production(torus_grid, steady.scaled(2.0), steady, make_g("log"), make_psi("beckner", 1.0))
    assert report.production_w == 0.0
    assert report.production_h == pytest.approx(2 * math.log(2) ** 2, abs=1e-6)
    assert report.production_total == report.production_w + report.production_h


@pytest.mark.parametrize("g", [make_g("log"), make_g("power", 2.0), make_g("arctangential")])
def test_hellinger_production_of_cut_steady(g):
    grid = build_grid("interval_noflux", 64)
    steady = build_density(grid, DensityBuilder("cosine", {"a": 0.4}, normalize=True))
    cut = Field(grid, np.where(grid.axis_centers() < 0.3, 0.0, steady.values))
    for psi in (make_psi("beckner", 1.0), make_psi("beckner", 2.0), make_psi("abs_power", 2.0)):
        assert production(grid, cut, steady, g, psi).production_h == 0.0


def test_productions_are_nonnegative(torus_grid, cosine_steady, perturbed, builtin_pairs):
    steady = cosine_steady(torus_grid)
    rho = perturbed(steady, amp=0.6, scale=1.3)
    for g, psi in builtin_pairs:
        report = production(torus_grid, rho, steady, g, psi)
        assert report.production_w >= 0
        assert report.production_h >= 0
        assert report.production_total == report.production_w + report.production_h


def test_driving_pair_matches_direct_formulas(torus_grid, cosine_steady, perturbed):
    steady = cosine_steady(torus_grid)
    rho = perturbed(steady, amp=0.5)
    for g in (make_g("log"), make_g("power", 0.5), make_g("power", 2.0)):
        report = production(torus_grid, rho, steady, g, make_psi("driving", base=g))
        r = rho.values / steady.values
        grad_sq = gradient_sq_values(torus_grid, r)
        direct_h = np.sum(r * g.g(r) ** 2 * steady.values) * torus_grid.cell_measure
        direct_w = np.sum(r * g.gprime(r) ** 2 * grad_sq * steady.values) * torus_grid.cell_measure
        assert report.production_h == pytest.approx(direct_h, rel=1e-12)
        assert report.production_w == pytest.approx(direct_w, rel=1e-12)


def test_report_serialises_fixed_fields(torus_grid, unit_steady):
    steady = unit_steady(torus_grid)
    report = production(torus_grid, steady, steady, make_g("log"), make_psi("beckner", 1.0))
    assert set(report.to_dict()) == {"entropy", "production_total", "production_w", "production_h", "mass"}


def test_band_of_constant_ratio_is_zero(torus_grid, unit_steady):
    steady = unit_steady(torus_grid)
    value = production_band(torus_grid, steady.scaled(1.5), steady, make_g("log"), make_psi("beckner", 2.0), 0.5, 2.0)
    assert value == 0.0


def test_full_band_equals_wasserstein_production(sine_case):
    grid, rho, steady = sine_case
    g, psi = make_g("log"), make_psi("beckner", 1.5)
    band = production_band(grid, rho, steady, g, psi, 1e-300, 1e300)
    assert band == production(grid, rho, steady, g, psi).production_w


def test_band_matches_cellwise_oracle(sine_case):
    grid, rho, steady = sine_case
    band = production_band(grid, rho, steady, make_g("log"), make_psi("beckner", 2.0), 0.95, 1.05)
    r = rho.values / steady.values
    grad_sq = gradient_sq_values(grid, r)
    expected = 0.0
    for i in range(grid.n):
        if 0.95 < r[i] < 1.05:
            expected += grad_sq[i] * steady.values[i] * grid.cell_measure
    assert band > 0
    assert band == pytest.approx(expected, abs=1e-12)


def test_band_is_monotone(sine_case):
    grid, rho, steady = sine_case
    g, psi = make_g("power", 2.0), make_psi("beckner", 1.0)
    betas = [0.95, 1.0, 1.03, 1.1]
    values = [production_band(grid, rho, steady, g, psi, 0.9, b) for b in betas]
    assert values == sorted(values)
    alphas = [0.85, 0.92, 0.97, 1.02]
    values = [production_band(grid, rho, steady, g, psi, a, 1.2) for a in alphas]
    assert values == sorted(values, reverse=True)


def test_band_rejects_bad_levels(sine_case):
    grid, rho, steady = sine_case
    with pytest.raises(ParameterError):
        production_band(grid, rho, steady, make_g("log"), make_psi("beckner", 1.0), 1.1, 0.9)


def test_band_production_bound_parts(sine_case):
    grid, rho, steady = sine_case
    bound = band_production_bound(grid, rho, steady, make_g("log"), make_psi("beckner", 2.0), 0.95, 1.05)
    assert bound["sigma"] + bound["tau"] + bound["high"] == pytest.approx(1.0)
    # in one dimension the geometric side is min(sigma, high)^0 = 1
    assert bound["rhs_geom"] == 1.0
    assert bound["lhs"] == pytest.approx(bound["tau"] * bound["band_production"])


@pytest.mark.parametrize("kind", ["interval_noflux", "torus2d"])
def test_band_production_bound_with_empty_side(kind):
    grid = build_grid(kind, 16)
    steady = build_density(grid, DensityBuilder("cosine", {"a": 0.3}, normalize=True))
    bound = band_production_bound(grid, steady, steady, make_g("log"), make_psi("beckner", 1.0), 0.25, 0.75)
    assert bound["sigma"] == 0.0 and bound["high"] == 1.0
    assert bound["lhs"] == 0.0
    assert bound["rhs_geom"] == 0.0
    assert bound["ratio"] == 0.0


def test_rejects_negative_density_and_steady(torus_grid, unit_steady):
    steady = unit_steady(torus_grid)
    negative = Field(torus_grid, np.full(torus_grid.shape, -0.5))
    psi = make_psi("beckner", 1.0)
    with pytest.raises(ParameterError):
        relative_entropy(torus_grid, negative, steady, psi)
    with pytest.raises(ParameterError):
        relative_entropy(torus_grid, steady, Field(torus_grid, np.zeros(torus_grid.shape)), psi)
    with pytest.raises(ParameterError):
        density_ratio(build_grid("torus1d", 32), steady, steady)


@pytest.mark.parametrize("lhs, rhs, expected", [
    (0.0, 0.0, 0.0),
    (1.0, 0.0, math.inf),
    (3.0, 2.0, 1.5),
    (1e-17, 1e-17, 0.0),
])
def test_safe_ratio(lhs, rhs, expected):
    assert safe_ratio(lhs, rhs, scale=1.0) == expected
