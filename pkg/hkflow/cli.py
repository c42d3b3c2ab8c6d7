"""
Command line entry point

    hkflow <command> --config <path> [--set key.path=value]... [--jobs N]

Exit codes: 0 success, 1 malformed config, 2 invalid parameters or pair,
3 falsified inequality, 4 solver abort.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from hkflow.config import COMMANDS, OUTPUT_DIR_ENV, RunConfig, load_run_config
from hkflow.errors import ConfigError, HarnessError, PairValidationError, ParameterError, SolverAbort
from hkflow.flow import FlowConfig, Trajectory, simulate
from hkflow.harness import (
    InequalityCase,
    band_report,
    counterexample_sequence,
    decay_fit,
    eep_sweep,
    entropy_bounds_check,
    inequality_report,
    lp_decay_check,
    rate_fit_loglog,
)
from hkflow.storage import ReportStore
from hkflow.validators import validate_pair

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVALID = 2
EXIT_FALSIFIED = 3
EXIT_ABORT = 4

DEFAULT_GAP_VALUES = [8, 16, 32, 64, 128]
DEFAULT_MARGIN = 0.05

Outcome = Tuple[Dict[str, Any], int]


def _above_cap(ratio: float, cap: float) -> bool:
    return math.isinf(ratio) or ratio > cap


def command_validate(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    g = config.g_spec()
    reports = [validate_pair(g, psi) for psi in config.psi_specs()]
    payload = {"validation": [r.to_dict() for r in reports]}
    store.save_json("validation.json", payload)
    if not all(r.is_valid for r in reports):
        failed = [e for r in reports for e in r.errors]
        raise PairValidationError("pair validation failed: " + "; ".join(failed), reports)
    return payload, EXIT_OK


def _flow_config(config: RunConfig) -> FlowConfig:
    grid = config.build_grid()
    steady = config.build_steady(grid)
    flow = config.flow
    return FlowConfig(
        mode=flow.get("mode", "full"),
        g=config.g_spec(),
        psi_monitors=config.psi_specs(),
        grid=grid,
        steady=steady,
        initial=config.build_initial(grid, steady),
        t_end=float(flow.get("t_end", 1.0)),
        cfl=float(flow.get("cfl", 0.45)),
        snapshot_every=int(flow.get("snapshot_every", 100)),
        keep_snapshots=bool(flow.get("keep_snapshots", True)),
        max_steps=int(flow.get("max_steps", 50_000_000)),
    )


def _decay_fits(config: RunConfig, traj: Trajectory) -> List[Dict[str, Any]]:
    margin = float(config.case.get("margin", DEFAULT_MARGIN))
    floor_rel = float(config.case.get("entropy_floor_rel", 1e-12))
    fits = []
    for i, psi in enumerate(traj.monitors):
        entropies = traj.entropies(i)
        try:
            fit = decay_fit(traj.times, entropies, entropy_floor=floor_rel * entropies[0], margin=margin)
            fits.append({"monitor": psi.to_dict(), **fit.to_dict()})
        except HarnessError as e:
            logger.info("no decay fit for monitor %d: %s", i, e)
            fits.append({"monitor": psi.to_dict(), "error": str(e)})
    return fits


def _run_flow(config: RunConfig, store: ReportStore) -> Tuple[Trajectory, Dict[str, Any]]:
    flow_config = _flow_config(config)
    traj = simulate(flow_config)
    files = store.save_trajectory(traj, snapshots=flow_config.keep_snapshots)
    payload = {"trajectory": traj.summary(), "files": files, "decay_fits": _decay_fits(config, traj)}
    return traj, payload


def command_simulate(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    _, payload = _run_flow(config, store)
    return payload, EXIT_OK


def command_decay(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    traj, payload = _run_flow(config, store)
    margin = float(config.case.get("margin", DEFAULT_MARGIN))
    lp_checks = []
    falsified = False
    for fit, psi in zip(payload["decay_fits"], traj.monitors):
        if "error" in fit:
            continue
        falsified |= not fit["bound_holds"]
        if psi.kind == "abs_power":
            check = lp_decay_check(traj, psi.p, fit["gamma_hat"] / psi.p, margin)
            lp_checks.append({"monitor": psi.to_dict(), **check})
            falsified |= not check["holds"]
    bounds = entropy_bounds_check(traj, tol=float(config.case.get("mass_tol", 1e-3)))
    falsified |= not (bounds["init_entropy_holds"] and bounds["lower_mass_holds"])
    payload.update({"lp_checks": lp_checks, "entropy_bounds": bounds})
    store.save_json("decay.json", payload)
    if falsified:
        logger.error("decay bounds failed: fits=%s lp=%s bounds=%s", payload["decay_fits"], lp_checks, bounds)
    return payload, EXIT_FALSIFIED if falsified else EXIT_OK


def command_inequality(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    name = config.case.get("name")
    if name is None:
        raise ConfigError("inequality runs need case.name", field="case")
    params = dict(config.case.get("params", {}))
    grid = config.build_grid()
    steady = config.build_steady(grid)
    rho = config.build_initial(grid, steady)
    g = config.g_spec()
    reports = []
    falsified = False
    for psi in config.psi_specs():
        case = InequalityCase(name=name, g=g, psi=psi, params=params)
        report = inequality_report(case, grid, rho, steady)
        entry = {**report.to_dict(), "psi": psi.to_dict()}
        if name == "eep_band":
            entry["band"] = band_report(case, grid, rho, steady)
        if _above_cap(report.ratio, config.ratio_cap):
            logger.error("%s ratio %.6g exceeds cap %.6g", name, report.ratio, config.ratio_cap)
            falsified = True
        reports.append(entry)
    payload = {"inequalities": reports}
    store.save_json("inequality.json", payload)
    return payload, EXIT_FALSIFIED if falsified else EXIT_OK


def command_counterexample(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    kind = config.case.get("kind")
    if kind is None:
        raise ConfigError("counterexample runs need case.kind", field="case")
    values = config.case.get("values", DEFAULT_GAP_VALUES if kind == "hellinger_gap" else None)
    if not values:
        raise ConfigError("counterexample runs need case.values", field="case")
    # rho_n needs a grid per n so the jump sits on a face; the other families reuse the run grid
    resolver = None
    if kind != "hellinger_gap":
        grid = config.build_grid()
        resolver = lambda _value: grid  # noqa: E731

    g = config.g_spec()
    steady_builder = config.builder(config.steady)
    sequences = []
    for i, psi in enumerate(config.psi_specs()):
        table = counterexample_sequence(kind, values, g, psi, steady_builder, resolver)
        name = f"sequence_{i}.csv"
        store.save_frame(name, table)
        entry: Dict[str, Any] = {"psi": psi.to_dict(), "file": name, "rows": len(table)}
        if kind == "hellinger_gap" and len(table) >= 4:
            entry["slopes"] = {
                "entropy": rate_fit_loglog(table, "param", "entropy"),
                "production_h": rate_fit_loglog(table, "param", "production_h"),
            }
        sequences.append(entry)
    payload = {"kind": kind, "sequences": sequences}
    store.save_json("counterexample.json", payload)
    return payload, EXIT_OK


def command_sweep(config: RunConfig, store: ReportStore, jobs: int = 1) -> Outcome:
    grid = config.build_grid()
    steady = config.build_steady(grid)
    family = config.family_builders()
    mass_floor = float(config.case.get("mass_floor", 0.5))
    entropy_cap = float(config.case.get("entropy_cap", 5.0))
    g = config.g_spec()
    results = []
    falsified = False
    for psi in config.psi_specs():
        result = eep_sweep(family, g, psi, grid, steady, mass_floor, entropy_cap, jobs=jobs)
        if _above_cap(result.empirical_C_U, config.ratio_cap):
            logger.error("empirical C_U %.6g for psi=%s exceeds cap %.6g",
                         result.empirical_C_U, psi.to_dict(), config.ratio_cap)
            falsified = True
        results.append({"psi": psi.to_dict(), **result.to_dict()})
    payload = {"sweeps": results}
    store.save_json("sweep.json", payload)
    return payload, EXIT_FALSIFIED if falsified else EXIT_OK


COMMAND_HANDLERS = {
    "validate": command_validate,
    "simulate": command_simulate,
    "inequality": command_inequality,
    "counterexample": command_counterexample,
    "sweep": command_sweep,
    "decay": command_decay,
}


def emit_summary(store: ReportStore, config: RunConfig, reports: Dict[str, Any], exit_code: int,
                 started: float, error: Optional[str] = None,
                 location: Optional[ConfigError] = None) -> Dict[str, Any]:
    """Aggregate the run into summary.json; location adds the offending config field and line"""
    summary: Dict[str, Any] = {
        "command": config.command,
        "config": config.to_dict(),
        "reports": reports,
        "exit_code": exit_code,
        "grid": dict(config.grid),
        "wall_clock_seconds": time.perf_counter() - started,
    }
    if "decay_fits" in reports:
        summary["decay_fits"] = reports["decay_fits"]
    if error is not None:
        summary["error"] = error
    if location is not None:
        summary["error_field"] = location.field
        summary["error_line"] = location.line
    store.save_json("summary.json", summary)
    return summary


def _emit_config_failure(config_path: str, error: ConfigError, started: float) -> None:
    """Write summary.json for a config that failed to load, if an output directory can be found"""
    try:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, ValueError):
        data = None
    output_dir = data.get("output_dir") if isinstance(data, dict) else None
    if not isinstance(output_dir, str):
        output_dir = os.environ.get(OUTPUT_DIR_ENV)
    if not output_dir:
        return
    command = data.get("command") if isinstance(data, dict) else None
    ReportStore(output_dir).save_json("summary.json", {
        "command": command if isinstance(command, str) else None,
        "config": None,
        "reports": {},
        "exit_code": EXIT_CONFIG,
        "error": str(error),
        "error_field": error.field,
        "error_line": error.line,
        "wall_clock_seconds": time.perf_counter() - started,
    })


def run(config_path: str, overrides: Sequence[str] = (), command: Optional[str] = None, jobs: int = 1) -> int:
    """Execute one configured run and return its exit code"""
    started = time.perf_counter()
    if command is not None:
        overrides = [f"command={command}", *overrides]
    try:
        config = load_run_config(config_path, overrides)
    except ConfigError as e:
        logger.error("malformed config: %s", e)
        _emit_config_failure(config_path, e, started)
        return EXIT_CONFIG

    store = ReportStore(config.resolved_output_dir())
    logger.info("running %s into %s", config.command, store.output_dir)
    reports: Dict[str, Any] = {}
    error = None
    location = None
    try:
        reports, code = COMMAND_HANDLERS[config.command](config, store, jobs)
    except ConfigError as e:
        error, code, location = str(e), EXIT_CONFIG, e
    except (ParameterError, PairValidationError, HarnessError) as e:
        error, code = str(e), EXIT_INVALID
    except SolverAbort as e:
        error, code = str(e), EXIT_ABORT
    if error is not None:
        logger.error("%s failed: %s", config.command, error)

    emit_summary(store, config, reports, code, started, error, location)
    logger.info("%s finished with exit code %d", config.command, code)
    return code


def _parse_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="hkflow", description="Hellinger-Kantorovich gradient flow lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="Path to the JSON run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config entry, e.g. --set flow.t_end=2")
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes for sweeps")
    parser.add_argument("--log-level", default=None, help="Logging level (default: $HKFLOW_LOG_LEVEL or INFO)")
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = _parse_args(argv)
    level = (args.log_level or os.environ.get("HKFLOW_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.jobs < 1:
        logger.error("--jobs must be >= 1, got %d", args.jobs)
        return EXIT_CONFIG
    return run(args.config, args.overrides, command=args.command, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
