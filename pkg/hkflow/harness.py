"""
Inequality certificates, counterexample sequences, rate and decay fits
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import xlogy
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from hkflow.entropy import (
    SNAP_TOL,
    band_production_bound,
    density_ratio,
    production,
    production_band,
    safe_ratio,
)
from hkflow.errors import HarnessError, PairValidationError, ParameterError
from hkflow.flow import Trajectory
from hkflow.mesh import DensityBuilder, Field, Grid, build_density, build_grid, lp_distance, mass
from hkflow.profiles import GSpec, PsiSpec

logger = logging.getLogger(__name__)

INEQUALITY_NAMES = (
    "eep",
    "eep_band",
    "beckner_classical",
    "beckner_hellinger",
    "porous_variant",
    "porous_log_variant",
    "arctan_logsob",
)
SEQUENCE_KINDS = ("hellinger_gap", "scaling", "indicator")
SEQUENCE_COLUMNS = ["param", "entropy", "production_w", "production_h"]
GAP_MIN_CELLS = 256
DEFAULT_SEQUENCE_CELLS = 256
MIN_DECAY_SAMPLES = 8
MIN_RATE_ROWS = 4
BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class InequalityCase:
    """A named inequality bound to an admissible (g, psi) pair"""

    name: str
    g: GSpec
    psi: PsiSpec
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in INEQUALITY_NAMES:
            raise ParameterError(f"unknown inequality '{self.name}', expected one of {INEQUALITY_NAMES}")
        g, psi = self.g, self.psi
        beckner_p = psi.p if psi.kind == "beckner" else None
        if self.name == "beckner_classical":
            self._require(g.kind == "log" and beckner_p is not None and 1.0 < beckner_p <= 2.0,
                          "g=log and psi=beckner with 1 < p <= 2")
        elif self.name == "beckner_hellinger":
            self._require(g.kind == "log" and beckner_p is not None and beckner_p > 1.0,
                          "g=log and psi=beckner with p > 1")
        elif self.name == "porous_variant":
            self._require(g.kind == "power" and beckner_p is not None and beckner_p > 1.0,
                          "g=power and psi=beckner with p > 1")
        elif self.name == "porous_log_variant":
            self._require(g.kind == "power" and beckner_p == 1.0, "g=power and psi=beckner with p = 1")
        elif self.name == "arctan_logsob":
            self._require(g.kind == "arctangential" and beckner_p == 1.0,
                          "g=arctangential and psi=beckner with p = 1")
        elif self.name == "eep_band":
            band = self.band
            if band is None or not 0 < band[0] < band[1]:
                raise ParameterError(f"eep_band needs params alpha, beta with 0 < alpha < beta, got {self.params}")

    def _require(self, ok: bool, what: str) -> None:
        if not ok:
            raise ParameterError(
                f"inequality '{self.name}' requires {what}, got g={self.g.to_dict()} psi={self.psi.to_dict()}"
            )

    @property
    def band(self):
        if "alpha" in self.params and "beta" in self.params:
            return float(self.params["alpha"]), float(self.params["beta"])
        return None


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    ratio: float
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "params": dict(self.params)}


def _integral(grid: Grid, steady: Field, integrand: np.ndarray) -> float:
    """int integrand d rho_inf"""
    return float(np.sum(integrand * steady.values) * grid.cell_measure)


def _snap(value: float, scale: float) -> float:
    return 0.0 if abs(value) <= SNAP_TOL * scale else float(value)


def inequality_report(case: InequalityCase, grid: Grid, rho: Field, steady: Field) -> InequalityReport:
    """
    Evaluate both sides of a named inequality in the r = rho / rho_inf variables.
    Every gradient term is the Wasserstein production of the case's own (g, psi).
    """
    r = density_ratio(grid, rho, steady)
    g, psi = case.g, case.psi
    report = production(grid, rho, steady, g, psi)
    grad = report.production_w
    m = mass(grid, rho)
    name = case.name

    if name == "eep":
        lhs, rhs_value, scale = report.entropy, report.production_total, m
    elif name == "eep_band":
        alpha, beta = case.band
        lhs = report.entropy
        rhs_value = report.production_h + production_band(grid, rho, steady, g, psi, alpha, beta)
        scale = m
    elif name in ("beckner_classical", "beckner_hellinger", "porous_variant"):
        p = psi.p
        lhs = _integral(grid, steady, r ** p) - m ** p
        scale = m ** p
        if name == "beckner_classical":
            rhs_value = grad
        elif name == "beckner_hellinger":
            correction = xlogy(r, r / m) * (r ** (p - 1.0) - m ** (p - 1.0)) if m > 0 else np.zeros_like(r)
            rhs_value = grad + _integral(grid, steady, correction)
        elif m > 0:
            a = g.alpha
            correction = (r ** a - r * m ** (a - 1.0)) / (a - 1.0) * (r ** (p - 1.0) - m ** (p - 1.0))
            rhs_value = m ** (1.0 - a) * (grad + _integral(grid, steady, correction))
        else:
            rhs_value = 0.0
    elif name == "porous_log_variant":
        a = g.alpha
        scale = m
        if m > 0:
            entropy_density = xlogy(r, r / m)
            lhs = _integral(grid, steady, entropy_density)
            positive = r > 0
            shifted = np.where(positive, np.where(positive, r, 1.0) ** (a - 1.0) - m ** (a - 1.0), 0.0)
            correction = entropy_density * shifted / (2.0 - 2.0 / a)
            rhs_value = m ** (1.0 - a) * (grad + _integral(grid, steady, correction))
        else:
            lhs = rhs_value = 0.0
    else:
        lhs = report.entropy
        positive = r > 0
        safe = np.where(positive, r, 1.0)
        correction = np.where(positive, xlogy(safe, safe) * np.log(2.0 * safe * safe / (1.0 + safe * safe)), 0.0)
        rhs_value = grad + _integral(grid, steady, correction)
        scale = m

    lhs, rhs_value = _snap(lhs, scale), _snap(rhs_value, scale)
    ratio = safe_ratio(lhs, rhs_value)
    if math.isinf(ratio):
        logger.error("inequality %s falsified on this field: lhs=%.6g, rhs=0", name, lhs)
    return InequalityReport(name=name, lhs=float(lhs), rhs=float(rhs_value), ratio=ratio, params=dict(case.params))


def _gap_grid(n: int) -> Grid:
    return build_grid("interval_noflux", n * math.ceil(GAP_MIN_CELLS / n))


def counterexample_sequence(kind: str, values: Sequence[float], g: GSpec, psi: PsiSpec,
                            steady_builder: DensityBuilder,
                            grid_resolver: Optional[Callable[[float], Grid]] = None) -> pd.DataFrame:
    """
    Tabulate entropy and productions along one of the counterexample families:

        hellinger_gap  rho_n = rho_inf * n/(n-1) * 1_(1/n, 1), n integer >= 4
        scaling        k * rho_inf, k >= 0 and k != 1
        indicator      rho_inf * 1_(1/4, 3/4) mollified with width w > 0
    """
    if kind not in SEQUENCE_KINDS:
        raise ParameterError(f"unknown sequence kind '{kind}', expected one of {SEQUENCE_KINDS}")
    rows = []
    for value in values:
        if kind == "hellinger_gap":
            if int(value) != value or value < 4:
                raise ParameterError(f"hellinger_gap needs integers n >= 4, got {value}")
            value = int(value)
            grid = grid_resolver(value) if grid_resolver else _gap_grid(value)
            if grid.n % value:
                raise ParameterError(f"grid with {grid.n} cells does not put the jump at 1/{value} on a face")
            builder = DensityBuilder("indicator_band", {"n": value})
        elif kind == "scaling":
            if value < 0 or value == 1:
                raise ParameterError(f"scaling needs k >= 0 and k != 1, got {value}")
            grid = grid_resolver(value) if grid_resolver else build_grid("interval_noflux", DEFAULT_SEQUENCE_CELLS)
            builder = DensityBuilder("scaled_steady", {"k": value})
        else:
            if not value > 0:
                raise ParameterError(f"indicator needs a mollification width w > 0, got {value}")
            grid = grid_resolver(value) if grid_resolver else build_grid("interval_noflux", DEFAULT_SEQUENCE_CELLS)
            builder = DensityBuilder("mollified_indicator", {"width": value})

        steady = build_density(grid, steady_builder)
        rho = build_density(grid, builder, steady)
        report = production(grid, rho, steady, g, psi)
        rows.append([value, report.entropy, report.production_w, report.production_h])
        logger.debug("%s %s: %s", kind, value, report)
    return pd.DataFrame(rows, columns=SEQUENCE_COLUMNS)


def rate_fit_loglog(table: pd.DataFrame, x_field: str, y_field: str) -> float:
    """Least-squares slope of log y against log x"""
    x = table[x_field].to_numpy(dtype=float)
    y = table[y_field].to_numpy(dtype=float)
    if x.size < MIN_RATE_ROWS:
        raise ParameterError(f"rate fit needs >= {MIN_RATE_ROWS} rows, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError(f"rate fit needs positive '{x_field}' and '{y_field}' values")
    model = LinearRegression().fit(np.log(x).reshape(-1, 1), np.log(y))
    return float(model.coef_[0])


def algterm_scan(g: GSpec, psi: PsiSpec, eps: float, s_max: float, samples: int = 2000) -> Dict[str, float]:
    """
    sup over [eps, s_max] of psi(s) / (s g(s) psi'(s)).

    The ratio is 0/0 at s = 1; that sample takes the value interpolated from
    its two neighbours.
    """
    if not 0 < eps < 1 < s_max:
        raise ParameterError(f"scan needs 0 < eps < 1 < s_max, got eps={eps}, s_max={s_max}")
    if samples < 1000:
        raise ParameterError(f"scan needs >= 1000 samples, got {samples}")
    s = np.union1d(np.geomspace(eps, s_max, samples), [1.0])
    one = int(np.searchsorted(s, 1.0))
    away = np.arange(s.size) != one

    denominator = g.sg(s[away]) * psi.psiprime(s[away])
    if np.any(denominator <= 0):
        bad = float(s[away][np.argmin(denominator)])
        raise PairValidationError(f"s g(s) psi'(s) is not positive at s={bad:.6g}")
    ratio = np.empty_like(s)
    ratio[away] = psi.psi(s[away]) / denominator
    ratio[one] = np.interp(1.0, s[[one - 1, one + 1]], ratio[[one - 1, one + 1]])

    worst = int(np.argmax(ratio))
    return {"c_eps": float(ratio[worst]), "argmax_s": float(s[worst]), "limit_at_one": float(ratio[one])}


@dataclass(frozen=True)
class DecayFit:
    gamma_hat: float
    fit_quality: float
    bound_holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma_hat": self.gamma_hat, "fit_quality": self.fit_quality, "bound_holds": self.bound_holds}


def decay_fit(times: Iterable[float], entropies: Iterable[float],
              entropy_floor: Optional[float] = None, margin: float = 0.05) -> DecayFit:
    """
    Fit ln E(t) ~ ln E(0) - gamma t over the samples above the floor, then
    check E(t) <= E(0) exp(-gamma (1 - margin) t) at every sample.
    """
    t = np.asarray(list(times), dtype=float)
    e = np.asarray(list(entropies), dtype=float)
    if t.shape != e.shape or t.size == 0:
        raise HarnessError("times and entropies must be non-empty and aligned")
    if not 0 <= margin < 1:
        raise ParameterError(f"margin must lie in [0, 1), got {margin}")
    e0 = float(e[0])
    floor = 1e-12 * e0 if entropy_floor is None else float(entropy_floor)
    usable = e > floor
    if np.count_nonzero(usable) < MIN_DECAY_SAMPLES:
        raise HarnessError(
            f"decay fit needs >= {MIN_DECAY_SAMPLES} samples above {floor:.3g}, got {int(np.count_nonzero(usable))}"
        )

    x = t[usable].reshape(-1, 1)
    y = np.log(e[usable])
    if np.ptp(y) == 0.0:
        gamma, quality = 0.0, 1.0
    else:
        model = LinearRegression().fit(x, y)
        slope = float(model.coef_[0])
        gamma = 0.0 if abs(slope) < 1e-14 else -slope
        quality = float(r2_score(y, model.predict(x)))

    envelope = e0 * np.exp(-gamma * (1.0 - margin) * t)
    holds = bool(np.all(e <= envelope * (1.0 + BOUND_RTOL)))
    return DecayFit(gamma_hat=gamma, fit_quality=quality, bound_holds=holds)


@dataclass
class SweepResult:
    empirical_C_U: float
    worst_case: Optional[Dict[str, Any]]
    ratios: List[float] = field(default_factory=list)
    admitted: int = 0
    skipped: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "empirical_C_U": self.empirical_C_U,
            "worst_case": self.worst_case,
            "ratios": list(self.ratios),
            "admitted": self.admitted,
            "skipped": self.skipped,
        }


def _sweep_member(task) -> Dict[str, Any]:
    index, builder, g, psi, grid, steady = task
    rho = build_density(grid, builder, steady)
    report = production(grid, rho, steady, g, psi)
    return {
        "index": index,
        "builder": builder.to_dict(),
        "mass": report.mass,
        "entropy": report.entropy,
        "production_total": report.production_total,
        "ratio": safe_ratio(report.entropy, report.production_total, report.mass),
    }


def eep_sweep(family: Sequence[DensityBuilder], g: GSpec, psi: PsiSpec, grid: Grid, steady: Field,
              mass_floor: float, entropy_cap: float, jobs: int = 1) -> SweepResult:
    """
    Empirical entropy / production constant over a family of densities.
    Members below mass_floor or above entropy_cap are skipped.
    """
    tasks = [(i, builder, g, psi, grid, steady) for i, builder in enumerate(family)]
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=jobs) as pool:
            members = list(pool.imap(_sweep_member, tasks))
    else:
        members = [_sweep_member(task) for task in tasks]

    admitted = []
    skipped = 0
    for member in members:
        if member["mass"] < mass_floor or member["entropy"] > entropy_cap:
            skipped += 1
            logger.warning("skipping family member %d: mass %.4g, entropy %.4g",
                           member["index"], member["mass"], member["entropy"])
            continue
        admitted.append(member)
        if math.isinf(member["ratio"]):
            logger.error("member %d has entropy %.6g with zero production: EEP inequality falsified",
                         member["index"], member["entropy"])
    if not admitted:
        raise HarnessError(f"no family member passed mass >= {mass_floor} and entropy <= {entropy_cap}")

    ratios = [m["ratio"] for m in admitted]
    worst = admitted[int(np.argmax(ratios))]
    logger.info("sweep over %d members (%d skipped): empirical C_U = %.6g", len(admitted), skipped, worst["ratio"])
    return SweepResult(empirical_C_U=worst["ratio"], worst_case=worst, ratios=ratios,
                       admitted=len(admitted), skipped=skipped)


def lp_decay_check(traj: Trajectory, p: float, gamma_hat: float, margin: float = 0.05) -> Dict[str, Any]:
    """
    ||rho(t) - rho_inf||_p <= (1 + sup rho_inf / inf rho_inf) ||rho0 - rho_inf||_p exp(-gamma (1 - margin) t)
    at every stored snapshot.
    """
    grid, steady = traj.grid, traj.steady
    constant = 1.0 + float(np.max(steady.values) / np.min(steady.values))
    start = lp_distance(grid, traj.initial, steady, p)
    worst = 0.0
    for _, t, snapshot in traj.snapshots:
        distance = lp_distance(grid, snapshot, steady, p)
        bound = constant * start * math.exp(-gamma_hat * (1.0 - margin) * t)
        worst = max(worst, safe_ratio(distance, bound))
    return {"constant": constant, "holds": worst <= 1.0 + BOUND_RTOL, "worst_ratio": worst}


def entropy_bounds_check(traj: Trajectory, tol: float = 1e-3) -> Dict[str, Any]:
    """E(t) <= E(0) for every monitor and ||rho(t)||_1 >= ||min(rho0, rho_inf)||_1 - tol"""
    grid = traj.grid
    floor_field = Field(grid, np.minimum(traj.initial.values, traj.steady.values))
    lower = mass(grid, floor_field)
    init_ok = True
    for i in range(len(traj.monitors)):
        e = traj.entropies(i)
        init_ok &= bool(np.all(e <= e[0] * (1.0 + 1e-9) + 1e-15))
    masses = np.asarray(traj.mass_series)
    return {
        "init_entropy_holds": init_ok,
        "lower_mass_holds": bool(np.all(masses >= lower - tol)),
        "lower_mass_bound": lower,
        "min_mass": float(np.min(masses)),
    }


def band_report(case: InequalityCase, grid: Grid, rho: Field, steady: Field) -> Dict[str, Any]:
    """Level-set estimate of an eep_band case"""
    alpha, beta = case.band
    return band_production_bound(grid, rho, steady, case.g, case.psi, alpha, beta)
