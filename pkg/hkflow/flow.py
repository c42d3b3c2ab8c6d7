"""
Explicit finite-volume integration of the Hellinger-Kantorovich gradient flow

The PDE is advanced in flux form

    d/dt rho = Div(rho_inf grad G(r)) - rho_inf * (r g(r)),   r = rho / rho_inf

with zero flux through the boundary faces of the interval.  The
'wasserstein' mode keeps only the divergence, 'hellinger' only the reaction.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from hkflow.entropy import EntropyReport, density_ratio, production
from hkflow.errors import ParameterError, SolverAbort
from hkflow.mesh import Field, Grid, interior_faces, mass
from hkflow.profiles import GSpec, PsiSpec

logger = logging.getLogger(__name__)

FLOW_MODES = ("full", "wasserstein", "hellinger")
DT_FLOOR = 1e-12
# slope of s*g(s) at r = 0 is taken as the one-sided quotient over [0, ZERO_STEP]
ZERO_STEP = 1e-6
CLAMP_GUARD = 1e-6
UNIT_MASS_TOL = 1e-10


@dataclass
class FlowConfig:
    mode: str
    g: GSpec
    psi_monitors: List[PsiSpec]
    grid: Grid
    steady: Field
    initial: Field
    t_end: float
    cfl: float = 0.45
    snapshot_every: int = 100
    keep_snapshots: bool = True
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.mode not in FLOW_MODES:
            raise ParameterError(f"unknown flow mode '{self.mode}', expected one of {FLOW_MODES}")
        if not self.psi_monitors:
            raise ParameterError("at least one psi monitor is required")
        for f in (self.steady, self.initial):
            if f.grid != self.grid:
                raise ParameterError("steady and initial fields must live on the flow grid")
        if np.any(self.steady.values <= 0):
            raise ParameterError("steady state must be strictly positive")
        steady_mass = mass(self.grid, self.steady)
        if abs(steady_mass - 1.0) > UNIT_MASS_TOL:
            raise ParameterError(f"steady state must have unit mass, got {steady_mass:.12g}")
        if np.any(self.initial.values < 0):
            raise ParameterError("initial density must be nonnegative")
        if not self.t_end > 0:
            raise ParameterError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if int(self.snapshot_every) < 1:
            raise ParameterError(f"snapshot_every must be >= 1, got {self.snapshot_every}")


@dataclass
class Trajectory:
    mode: str
    monitors: List[PsiSpec]
    initial: Field
    steady: Field
    times: List[float] = field(default_factory=list)
    entropy_series: List[List[float]] = field(default_factory=list)
    production_series: List[List[EntropyReport]] = field(default_factory=list)
    mass_series: List[float] = field(default_factory=list)
    snapshots: List[Tuple[int, float, Field]] = field(default_factory=list)
    steps: int = 0
    clamp_events: int = 0
    clamp_mass: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.steady.grid

    @property
    def final(self) -> Field:
        return self.snapshots[-1][2]

    def entropies(self, index: int) -> np.ndarray:
        return np.array([row[index] for row in self.entropy_series])

    def productions(self, index: int, component: str = "production_total") -> np.ndarray:
        return np.array([getattr(row[index], component) for row in self.production_series])

    def to_frame(self) -> pd.DataFrame:
        """Columns t, mass, then entropy_i, prod_total_i, prod_w_i, prod_h_i per monitor"""
        data: Dict[str, np.ndarray] = {"t": np.array(self.times), "mass": np.array(self.mass_series)}
        for i in range(len(self.monitors)):
            data[f"entropy_{i}"] = self.entropies(i)
            data[f"prod_total_{i}"] = self.productions(i, "production_total")
            data[f"prod_w_{i}"] = self.productions(i, "production_w")
            data[f"prod_h_{i}"] = self.productions(i, "production_h")
        return pd.DataFrame(data)

    def summary(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "steps": self.steps,
            "records": len(self.times),
            "clamp_events": self.clamp_events,
            "clamp_mass": self.clamp_mass,
            "final_mass": self.mass_series[-1] if self.mass_series else None,
            "final_entropy": list(self.entropy_series[-1]) if self.entropy_series else None,
        }


def _check_mode(mode: str) -> None:
    if mode not in FLOW_MODES:
        raise ParameterError(f"unknown flow mode '{mode}', expected one of {FLOW_MODES}")


def _face_weights(grid: Grid, steady: np.ndarray) -> List[np.ndarray]:
    """Arithmetic means of rho_inf on the interior faces, one array per axis"""
    return [0.5 * (left + right) for left, right in interior_faces(grid, steady)]


def _flux_divergence(grid: Grid, flux: np.ndarray, axis: int) -> np.ndarray:
    if grid.periodic:
        return (flux - np.roll(flux, 1, axis=axis)) / grid.h
    pad = [(0, 0)] * grid.dim
    pad[axis] = (1, 1)
    return np.diff(np.pad(flux, pad), axis=axis) / grid.h


def _face_rate(dr: np.ndarray, dG: np.ndarray, mean: np.ndarray, scale: float, g: GSpec) -> float:
    """Largest secant slope of G over the faces; G' at the face mean where r barely changes"""
    resolved = np.abs(dr) > scale
    with np.errstate(divide="ignore", invalid="ignore"):
        if resolved.all():
            quotient = dG / dr
        else:
            quotient = np.where(resolved, dG / np.where(resolved, dr, 1.0),
                                g.s_gprime(np.where(mean > 0, mean, 1.0)))
    usable = (mean > 0) & np.isfinite(quotient)
    if not usable.any():
        return 0.0
    return float(np.max(np.abs(quotient[usable])))


def _reaction_rate(r: np.ndarray, g: GSpec) -> float:
    positive = r > 0
    slope = np.abs(g.sg_slope(np.where(positive, r, 1.0)))
    if not np.all(positive):
        slope = np.where(positive, slope, abs(float(g.g(ZERO_STEP))))
    return float(np.max(slope))


def _step_terms(grid: Grid, r: np.ndarray, steady: np.ndarray, weights: List[np.ndarray], g: GSpec,
                mode: str, cfl: float) -> Tuple[np.ndarray, Optional[float]]:
    """
    Right-hand side and explicit step bound from one pass over the faces.
    The bound is cfl * min(h^2 / (2 d a_max), 1 / b_max) over the active terms,
    or None when every rate vanishes.
    """
    out = np.zeros(grid.shape)
    limits = []
    if mode != "hellinger":
        G = g.G(r)
        scale = 1e-12 * max(float(np.max(r)), 0.0)
        a_max = 0.0
        faces = zip(interior_faces(grid, r), interior_faces(grid, G), weights)
        for axis, ((r_left, r_right), (G_left, G_right), weight) in enumerate(faces):
            dG = G_right - G_left
            a_max = max(a_max, _face_rate(r_right - r_left, dG, 0.5 * (r_left + r_right), scale, g))
            out += _flux_divergence(grid, weight * dG / grid.h, axis)
        if a_max > 0:
            limits.append(grid.h ** 2 / (2.0 * grid.dim * a_max))
    if mode != "wasserstein":
        out -= steady * g.sg(r)
        b_max = _reaction_rate(r, g)
        if b_max > 0:
            limits.append(1.0 / b_max)
    return out, (cfl * min(limits) if limits else None)


def rhs(grid: Grid, rho: Field, steady: Field, g: GSpec, mode: str = "full") -> Field:
    """Right-hand side of the flow in the given mode"""
    _check_mode(mode)
    r = density_ratio(grid, rho, steady)
    out, _ = _step_terms(grid, r, steady.values, _face_weights(grid, steady.values), g, mode, 1.0)
    return Field(grid, out)


def stable_dt(grid: Grid, rho: Field, steady: Field, g: GSpec, mode: str = "full", cfl: float = 0.45) -> float:
    """
    Explicit Euler step bound cfl * min(h^2 / (2 d a_max), 1 / b_max) over the
    terms active in the mode.  Returns DT_FLOOR when every rate vanishes.
    """
    _check_mode(mode)
    r = density_ratio(grid, rho, steady)
    _, dt = _step_terms(grid, r, steady.values, _face_weights(grid, steady.values), g, mode, cfl)
    if dt is None:
        logger.warning("all rates vanish in %s mode, using dt floor %g", mode, DT_FLOOR)
        return DT_FLOOR
    return dt


def _record(traj: Trajectory, config: FlowConfig, rho: Field, step: int, t: float) -> None:
    reports = [production(config.grid, rho, config.steady, config.g, psi) for psi in config.psi_monitors]
    for i, report in enumerate(reports):
        if not (np.isfinite(report.entropy) and np.isfinite(report.production_total)):
            raise SolverAbort(f"monitor {i} ({config.psi_monitors[i].to_dict()}) became non-finite", step, t)
    traj.times.append(t)
    traj.entropy_series.append([rep.entropy for rep in reports])
    traj.production_series.append(reports)
    traj.mass_series.append(mass(config.grid, rho))
    if config.keep_snapshots or step == 0:
        traj.snapshots.append((step, t, rho))


def simulate(config: FlowConfig) -> Trajectory:
    """
    Forward Euler with adaptive dt and a positivity clamp.
    Monitors are recorded at t = 0, every snapshot_every steps and at t_end.
    """
    grid = config.grid
    steady = config.steady.values
    traj = Trajectory(mode=config.mode, monitors=list(config.psi_monitors),
                      initial=config.initial, steady=config.steady)
    logger.info("simulating %s flow on %s up to t=%g (g=%s)",
                config.mode, grid.to_dict(), config.t_end, config.g.to_dict())

    rho = config.initial
    values = rho.values
    weights = _face_weights(grid, steady)
    t = 0.0
    step = 0
    floor_warned = False
    _record(traj, config, rho, step, t)

    while t < config.t_end:
        if step >= config.max_steps:
            raise SolverAbort(f"step limit {config.max_steps} reached before t_end", step, t)
        r = values / steady
        change, dt = _step_terms(grid, r, steady, weights, config.g, config.mode, config.cfl)
        if not np.any(change):
            # a fixed point of the scheme stays put, so one step reaches t_end exactly
            logger.info("stationary state at t=%.6g, advancing to t_end=%g", t, config.t_end)
            dt = config.t_end - t
        elif dt is None:
            if not floor_warned:
                logger.warning("all rates vanish in %s mode, using dt floor %g", config.mode, DT_FLOOR)
                floor_warned = True
            dt = DT_FLOOR
        last = t + dt >= config.t_end
        if last:
            dt = config.t_end - t

        update = values + dt * change
        negative = update < 0
        if np.any(negative):
            removed = float(-np.sum(update[negative]) * grid.cell_measure)
            current = float(np.sum(values) * grid.cell_measure)
            traj.clamp_events += 1
            traj.clamp_mass += removed
            if removed > CLAMP_GUARD * current:
                raise SolverAbort(
                    f"clamp removed mass {removed:.3g} above {CLAMP_GUARD:g} x current mass {current:.3g}",
                    step, t,
                )
            update = np.maximum(update, 0.0)
        values = update
        step += 1
        t = config.t_end if last else t + dt
        logger.debug("step %d t=%.6g dt=%.3g", step, t, dt)

        if last or step % config.snapshot_every == 0:
            rho = Field(grid, values)
            _record(traj, config, rho, step, t)

    traj.steps = step
    if not config.keep_snapshots:
        traj.snapshots.append((step, t, Field(grid, values)))
    logger.info("finished after %d steps: %d clamp events, entropies %s",
                step, traj.clamp_events, ["%.6g" % e for e in traj.entropy_series[-1]])
    return traj


def dissipation_residual(traj: Trajectory, monitor_index: int = 0) -> np.ndarray:
    """
    |dE/dt + D| on each recorded interval: difference quotient of the entropy
    against the mean production at the interval ends.
    """
    times = np.asarray(traj.times)
    if times.size < 2:
        raise ParameterError("dissipation residual needs at least two recorded times")
    component = {"full": "production_total", "wasserstein": "production_w", "hellinger": "production_h"}[traj.mode]
    entropy = traj.entropies(monitor_index)
    prod = traj.productions(monitor_index, component)
    rate = np.diff(entropy) / np.diff(times)
    return np.abs(rate + 0.5 * (prod[1:] + prod[:-1]))

