"""
Uniform cell-centred grids on unit domains, density builders, quadrature,
gradients, level-set measures and the two sides of the coarea identity
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter1d

from hkflow.errors import ParameterError

logger = logging.getLogger(__name__)

DOMAIN_KINDS = ("interval_noflux", "torus1d", "torus2d")
DENSITY_KINDS = (
    "constant",
    "cosine",
    "scaled_steady",
    "indicator_band",
    "mollified_indicator",
    "trig_random",
)
DEFAULT_CELL_CAP = 10 ** 6
MIN_CELLS_PER_AXIS = 4
NORMALIZE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid of the unit interval (no-flux) or the unit torus"""

    domain_kind: str
    n: int
    cell_cap: int = field(default=DEFAULT_CELL_CAP, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return 2 if self.domain_kind == "torus2d" else 1

    @property
    def periodic(self) -> bool:
        return self.domain_kind != "interval_noflux"

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def num_cells(self) -> int:
        return self.n ** self.dim

    @property
    def cell_measure(self) -> float:
        return self.h ** self.dim

    @property
    def face_measure(self) -> float:
        return self.h ** (self.dim - 1)

    def axis_centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Cell-centre coordinates, one array per axis, each of grid shape"""
        centers = self.axis_centers()
        if self.dim == 1:
            return (centers,)
        return tuple(np.meshgrid(centers, centers, indexing="ij"))

    def to_dict(self) -> Dict[str, Any]:
        return {"domain_kind": self.domain_kind, "n": self.n}


@dataclass(frozen=True, eq=False)
class Field:
    """Cell-centred values on a grid; the array is copied and made read-only"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ParameterError(f"field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def scaled(self, factor: float) -> "Field":
        return Field(self.grid, self.values * factor)

    @property
    def is_density(self) -> bool:
        return bool(np.all(self.values >= 0))


@dataclass(frozen=True)
class DensityBuilder:
    """Recipe for one of the built-in density families"""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise ParameterError(f"unknown density kind '{self.kind}', expected one of {DENSITY_KINDS}")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": dict(self.params), "normalize": self.normalize}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DensityBuilder":
        if not isinstance(data, dict) or "kind" not in data:
            raise ParameterError(f"density builder must be an object with a 'kind', got {data!r}")
        return cls(kind=data["kind"], params=dict(data.get("params", {})), normalize=bool(data.get("normalize", False)))


def build_grid(domain_kind: str, n: int, cell_cap: int = DEFAULT_CELL_CAP) -> Grid:
    if domain_kind not in DOMAIN_KINDS:
        raise ParameterError(f"unknown domain kind '{domain_kind}', expected one of {DOMAIN_KINDS}")
    if int(n) != n or n < MIN_CELLS_PER_AXIS:
        raise ParameterError(f"grid needs an integer n >= {MIN_CELLS_PER_AXIS}, got {n}")
    n = int(n)
    if domain_kind == "torus2d" and n * n > cell_cap:
        raise ParameterError(f"torus2d with n={n} has {n * n} cells, above the cap {cell_cap}")
    return Grid(domain_kind=domain_kind, n=n, cell_cap=cell_cap)


def _quadrature(grid: Grid, values: np.ndarray) -> float:
    return float(np.sum(values) * grid.cell_measure)


def integrate(grid: Grid, field: Field) -> float:
    """Midpoint rule: sum of cell values times the cell measure"""
    _require_same_grid(grid, field)
    return _quadrature(grid, field.values)


def mass(grid: Grid, field: Field) -> float:
    """L1 norm of a field"""
    _require_same_grid(grid, field)
    return _quadrature(grid, np.abs(field.values))


def _require_same_grid(grid: Grid, *fields: Field) -> None:
    for f in fields:
        if f.grid != grid:
            raise ParameterError(f"field lives on {f.grid.to_dict()}, expected {grid.to_dict()}")


def _trig_random(grid: Grid, params: Dict[str, Any]) -> np.ndarray:
    rng = np.random.default_rng(int(params.get("seed", 0)))
    modes = int(params.get("modes", 4))
    floor = float(params.get("floor", 0.2))
    values = np.zeros(grid.shape)
    for coord in grid.coordinates():
        for k in range(1, modes + 1):
            a, b = rng.normal(size=2) / k
            values += a * np.cos(2 * np.pi * k * coord) + b * np.sin(2 * np.pi * k * coord)
    offset = floor * (1.0 + rng.uniform())
    return values - values.min() + offset


def _mollified_indicator(grid: Grid, params: Dict[str, Any]) -> np.ndarray:
    width = float(params.get("width", 0.05))
    lo, hi = float(params.get("lo", 0.25)), float(params.get("hi", 0.75))
    if width < 0 or not 0.0 <= lo < hi <= 1.0:
        raise ParameterError(f"mollified_indicator needs width >= 0 and 0 <= lo < hi <= 1, got {params}")
    x = grid.coordinates()[0]
    indicator = ((x > lo) & (x < hi)).astype(float)
    sigma = width / grid.h
    if sigma > 0:
        mode = "wrap" if grid.periodic else "reflect"
        indicator = gaussian_filter1d(indicator, sigma=sigma, axis=0, mode=mode)
    return np.clip(indicator, 0.0, None)


def build_density(grid: Grid, builder: DensityBuilder, steady: Optional[Field] = None) -> Field:
    """
    Evaluate a density recipe on a grid.
    Builders that reference the steady state need the steady field.
    """
    params = builder.params
    kind = builder.kind
    if kind in ("scaled_steady", "indicator_band", "mollified_indicator"):
        if steady is None:
            raise ParameterError(f"density kind '{kind}' needs the steady field")
        _require_same_grid(grid, steady)

    if kind == "constant":
        values = np.full(grid.shape, float(params.get("value", 1.0)))
    elif kind == "cosine":
        a = float(params.get("a", 0.5))
        k = float(params.get("k", 1))
        if abs(a) >= 1:
            raise ParameterError(f"cosine density needs |a| < 1, got a={a}")
        wave = np.ones(grid.shape)
        for coord in grid.coordinates():
            wave = wave * np.cos(2 * np.pi * k * coord)
        values = 1.0 + a * wave
    elif kind == "scaled_steady":
        k = float(params.get("k", 2.0))
        if k < 0:
            raise ParameterError(f"scaled_steady needs k >= 0, got {k}")
        values = k * steady.values
    elif kind == "indicator_band":
        m = int(params.get("n", 10))
        if m < 2:
            raise ParameterError(f"indicator_band needs n >= 2, got {m}")
        x = grid.coordinates()[0]
        values = np.where(x > 1.0 / m, steady.values * m / (m - 1.0), 0.0)
    elif kind == "mollified_indicator":
        values = steady.values * _mollified_indicator(grid, params)
    else:
        values = _trig_random(grid, params)

    if builder.normalize:
        total = _quadrature(grid, values)
        if total <= 0:
            raise ParameterError(f"cannot normalise a '{kind}' density with zero mass")
        values = values / total
    if np.any(values < 0):
        raise ParameterError(f"'{kind}' density produced negative values")
    return Field(grid, values)


def gradient_sq(grid: Grid, field: Field) -> Field:
    """
    |grad f|^2 at cell centres: central differences in the interior and in
    periodic directions, one-sided differences in boundary cells.
    """
    _require_same_grid(grid, field)
    return Field(grid, gradient_sq_values(grid, field.values))


def gradient_sq_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    total = np.zeros(grid.shape)
    for axis in range(grid.dim):
        if grid.periodic:
            d = (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * grid.h)
        else:
            d = np.gradient(values, grid.h, axis=axis, edge_order=1)
        total += d * d
    return total


def interior_faces(grid: Grid, values: np.ndarray):
    """
    Yield (left, right) value pairs for every face inside the domain, one
    pair of arrays per axis.  Boundary faces of the interval are excluded.
    """
    for axis in range(grid.dim):
        if grid.periodic:
            yield values, np.roll(values, -1, axis=axis)
        else:
            lead = [slice(None)] * grid.dim
            trail = [slice(None)] * grid.dim
            lead[axis] = slice(None, -1)
            trail[axis] = slice(1, None)
            yield values[tuple(lead)], values[tuple(trail)]


def level_measures(grid: Grid, r: Field, alpha: float, beta: float) -> Dict[str, float]:
    """Measures of [r <= alpha], [alpha < r < beta] and [r >= beta]"""
    _check_band(alpha, beta)
    _require_same_grid(grid, r)
    values = r.values
    total = grid.num_cells
    low = np.count_nonzero(values <= alpha)
    high = np.count_nonzero(values >= beta)
    return {
        "sigma": low / total,
        "tau": (total - low - high) / total,
        "high": high / total,
    }


def _check_band(alpha: float, beta: float) -> None:
    if not 0 < alpha < beta:
        raise ParameterError(f"level band needs 0 < alpha < beta, got alpha={alpha}, beta={beta}")


def coarea_sides(grid: Grid, r: Field, alpha: float, beta: float, t_samples: int = 256) -> Dict[str, float]:
    """
    Both sides of the coarea identity on the band [alpha < r < beta]:

        variation_band     = int_{[alpha<r<beta]} |grad r| dx
        perimeter_integral = int_alpha^beta P([r < t]; Omega) dt
    """
    _check_band(alpha, beta)
    _require_same_grid(grid, r)
    if t_samples < 16:
        raise ParameterError(f"coarea needs t_samples >= 16, got {t_samples}")
    values = r.values
    band = (values > alpha) & (values < beta)
    slope = np.sqrt(gradient_sq_values(grid, values))
    variation = _quadrature(grid, np.where(band, slope, 0.0))

    dt = (beta - alpha) / t_samples
    levels = alpha + (np.arange(t_samples) + 0.5) * dt
    crossings = np.zeros(t_samples)
    for left, right in interior_faces(grid, values):
        lo = np.sort(np.minimum(left, right), axis=None)
        hi = np.sort(np.maximum(left, right), axis=None)
        # a face separates [r < t] from [r >= t] iff lo < t <= hi
        crossings += np.searchsorted(lo, levels, side="left") - np.searchsorted(hi, levels, side="left")
    perimeter = float(np.sum(crossings) * grid.face_measure * dt)
    return {"variation_band": variation, "perimeter_integral": perimeter}


def isoperimetric_ratio(grid: Grid, mask: np.ndarray) -> float:
    """P(A; Omega) / min(|A|, |Omega \\ A|)^((d-1)/d) with interior-face perimeter"""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ParameterError(f"mask shape {mask.shape} does not match grid shape {grid.shape}")
    cut = sum(int(np.count_nonzero(left != right)) for left, right in interior_faces(grid, mask))
    perimeter = cut * grid.face_measure
    volume = np.count_nonzero(mask) / grid.num_cells
    smaller = min(volume, 1.0 - volume)
    if smaller == 0.0:
        return 0.0 if perimeter == 0 else math.inf
    return perimeter / smaller ** ((grid.dim - 1) / grid.dim)


def lp_distance(grid: Grid, a: Field, b: Field, p: float = 2.0) -> float:
    """(int |a - b|^p dx)^(1/p)"""
    _require_same_grid(grid, a, b)
    if not 1.0 <= p < math.inf:
        raise ParameterError(f"L^p distance needs 1 <= p < inf, got {p}")
    return _quadrature(grid, np.abs(a.values - b.values) ** p) ** (1.0 / p)
