import numpy as np
import pytest

from hkflow.mesh import DensityBuilder, Field, build_density, build_grid
from hkflow.profiles import make_g, make_psi


@pytest.fixture
def interval_grid():
    return build_grid("interval_noflux", 64)


@pytest.fixture
def torus_grid():
    return build_grid("torus1d", 64)


@pytest.fixture
def unit_steady():
    """Constant steady state of unit mass on a given grid"""
    def make(grid):
        return build_density(grid, DensityBuilder("constant", {"value": 1.0}))
    return make


@pytest.fixture
def cosine_steady():
    """Normalised 1 + 0.5 cos(2 pi x) steady state"""
    def make(grid):
        return build_density(grid, DensityBuilder("cosine", {"a": 0.5, "k": 1}, normalize=True))
    return make


@pytest.fixture
def perturbed():
    """steady * scale * (1 + amp cos(2 pi x))"""
    def make(steady, amp=0.3, scale=1.0):
        x = steady.grid.coordinates()[0]
        return Field(steady.grid, steady.values * scale * (1.0 + amp * np.cos(2 * np.pi * x)))
    return make


@pytest.fixture
def log_g():
    return make_g("log")


@pytest.fixture
def builtin_pairs():
    """Every built-in (g, psi) combination used across the suite"""
    gs = [make_g("log"), make_g("power", 2.0), make_g("power", 0.5), make_g("arctangential")]
    psis = [make_psi("beckner", 1.0), make_psi("beckner", 1.5), make_psi("beckner", 3.0),
            make_psi("abs_power", 2.0), make_psi("abs_power", 3.0)]
    pairs = [(g, psi) for g in gs for psi in psis]
    pairs += [(g, make_psi("driving", base=g)) for g in gs if g.kind != "arctangential"]
    return pairs
