"""
Relative entropy and entropy production functionals
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np

from hkflow.errors import ParameterError
from hkflow.mesh import Field, Grid, gradient_sq_values, level_measures, mass
from hkflow.profiles import GSpec, PsiSpec, hellinger_limit_at_zero

logger = logging.getLogger(__name__)

# |value| <= SNAP_TOL * scale is read as an exact zero when forming ratios
SNAP_TOL = 1e-14


@dataclass(frozen=True)
class EntropyReport:
    entropy: float
    production_total: float
    production_w: float
    production_h: float
    mass: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def safe_ratio(lhs: float, rhs: float, scale: float = 0.0) -> float:
    """lhs / rhs with 0/0 -> 0 and x/0 -> inf for x > 0"""
    if abs(lhs) <= SNAP_TOL * scale:
        lhs = 0.0
    if abs(rhs) <= SNAP_TOL * scale:
        rhs = 0.0
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def density_ratio(grid: Grid, rho: Field, steady: Field) -> np.ndarray:
    """r = rho / rho_inf cellwise"""
    for f in (rho, steady):
        if f.grid != grid:
            raise ParameterError(f"field lives on {f.grid.to_dict()}, expected {grid.to_dict()}")
    if np.any(steady.values <= 0):
        raise ParameterError("steady state must be strictly positive in every cell")
    if np.any(rho.values < 0):
        raise ParameterError("density must be nonnegative")
    return rho.values / steady.values


def _weighted(grid: Grid, integrand: np.ndarray, steady: Field) -> float:
    return float(np.sum(integrand * steady.values) * grid.cell_measure)


def relative_entropy(grid: Grid, rho: Field, steady: Field, psi: PsiSpec) -> float:
    """E_psi(rho) = int psi(r) d rho_inf"""
    r = density_ratio(grid, rho, steady)
    return _weighted(grid, psi.psi(r), steady)


def hellinger_integrand(g: GSpec, psi: PsiSpec, r: np.ndarray) -> np.ndarray:
    """r g(r) psi'(r), taking the limit of s g(s) psi'(s) at r = 0"""
    r = np.asarray(r, dtype=float)
    positive = r > 0
    safe = np.where(positive, r, 1.0)
    return np.where(positive, g.sg(safe) * psi.psiprime(safe), hellinger_limit_at_zero(g, psi))


def wasserstein_integrand(g: GSpec, psi: PsiSpec, r: np.ndarray, grad_sq: np.ndarray) -> np.ndarray:
    """r g'(r) psi''(r) |grad r|^2 on [r > 0], zero elsewhere"""
    r = np.asarray(r, dtype=float)
    positive = r > 0
    safe = np.where(positive, r, 1.0)
    return np.where(positive, g.s_gprime(safe) * psi.psidoubleprime(safe) * grad_sq, 0.0)


def production(grid: Grid, rho: Field, steady: Field, g: GSpec, psi: PsiSpec) -> EntropyReport:
    """Entropy, its Wasserstein and Hellinger productions, and the mass of rho"""
    r = density_ratio(grid, rho, steady)
    grad_sq = gradient_sq_values(grid, r)
    production_w = _weighted(grid, wasserstein_integrand(g, psi, r, grad_sq), steady)
    production_h = _weighted(grid, hellinger_integrand(g, psi, r), steady)
    return EntropyReport(
        entropy=_weighted(grid, psi.psi(r), steady),
        production_total=production_w + production_h,
        production_w=production_w,
        production_h=production_h,
        mass=mass(grid, rho),
    )


def production_band(grid: Grid, rho: Field, steady: Field, g: GSpec, psi: PsiSpec,
                    alpha: float, beta: float) -> float:
    """Wasserstein-type production restricted to [alpha < r < beta]"""
    if not 0 < alpha < beta:
        raise ParameterError(f"band needs 0 < alpha < beta, got alpha={alpha}, beta={beta}")
    r = density_ratio(grid, rho, steady)
    integrand = wasserstein_integrand(g, psi, r, gradient_sq_values(grid, r))
    band = (r > alpha) & (r < beta)
    return _weighted(grid, np.where(band, integrand, 0.0), steady)


def band_production_bound(grid: Grid, rho: Field, steady: Field, g: GSpec, psi: PsiSpec,
                          alpha: float, beta: float) -> Dict[str, Any]:
    """
    Both sides of the level-set estimate behind the band inequality:

        tau * int_band r g' psi'' |grad r|^2 d rho_inf  vs  min(sigma, high)^(2(d-1)/d)

    sigma, tau and high are the measures of [r <= alpha], the band and [r >= beta].
    """
    measures = level_measures(grid, Field(grid, density_ratio(grid, rho, steady)), alpha, beta)
    band = production_band(grid, rho, steady, g, psi, alpha, beta)
    lhs = measures["tau"] * band
    smaller = min(measures["sigma"], measures["high"])
    # an empty side leaves nothing to bound, also in 1D where the exponent is 0
    rhs_geom = smaller ** (2.0 * (grid.dim - 1) / grid.dim) if smaller > 0 else 0.0
    return {
        **measures,
        "band_production": band,
        "lhs": lhs,
        "rhs_geom": rhs_geom,
        "ratio": safe_ratio(lhs, rhs_geom),
    }
