"""
Report store for run artifacts: JSON reports, CSV tables and field snapshots
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from hkflow.errors import HKFlowError, ParameterError
from hkflow.flow import Trajectory
from hkflow.mesh import Field, Grid, build_grid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
COORD_TOL = 1e-12


def grid_to_json(grid: Grid) -> str:
    return json.dumps(grid.to_dict(), sort_keys=True)


def grid_from_json(text: Union[str, Dict[str, Any]]) -> Grid:
    data = json.loads(text) if isinstance(text, str) else text
    try:
        return build_grid(data["domain_kind"], data["n"])
    except (KeyError, TypeError) as e:
        raise ParameterError(f"grid JSON needs 'domain_kind' and 'n': {e}")


def field_to_frame(field: Field) -> pd.DataFrame:
    """One row per cell in row-major order with columns x[,y],value"""
    grid = field.grid
    coords = grid.coordinates()
    names = ("x", "y")[: grid.dim]
    data = {name: coord.ravel() for name, coord in zip(names, coords)}
    data["value"] = field.values.ravel()
    return pd.DataFrame(data)


def field_from_frame(frame: pd.DataFrame, grid: Grid) -> Field:
    names = ("x", "y")[: grid.dim]
    expected = list(names) + ["value"]
    if list(frame.columns) != expected:
        raise ParameterError(f"field table needs columns {expected}, got {list(frame.columns)}")
    if len(frame) != grid.num_cells:
        raise ParameterError(f"field table has {len(frame)} rows, grid has {grid.num_cells} cells")
    for name, coord in zip(names, grid.coordinates()):
        if np.max(np.abs(frame[name].to_numpy(dtype=float) - coord.ravel())) > COORD_TOL:
            raise ParameterError(f"column '{name}' does not match the cell centres of {grid.to_dict()}")
    return Field(grid, frame["value"].to_numpy(dtype=float).reshape(grid.shape))


def _jsonable(value: Any) -> Any:
    """Turn numpy scalars and arrays into plain JSON values"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


class ReportStore:
    """Writes and reads the artifacts of one run under a single directory"""

    def __init__(self, output_dir: Union[str, Path]):
        """
        Initialize the store
        Args:
            output_dir: Directory for every file of the run; created if missing
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def save_json(self, name: str, payload: Dict[str, Any]) -> Path:
        """
        Save a report as JSON with sorted keys
        Args:
            name: File name inside the output directory
            payload: JSON-compatible report; +inf ratios are written as the bare token
                Infinity, which Python json reads back but strict JSON parsers reject
        Returns:
            Path of the written file
        """
        target = self.path(name)
        try:
            with open(target, "w", encoding="utf-8") as f:
                json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
                f.write("\n")
        except (OSError, TypeError, ValueError) as e:
            raise HKFlowError(f"could not write {target}: {e}")
        logger.debug("wrote %s", target)
        return target

    def load_json(self, name: str) -> Dict[str, Any]:
        with open(self.path(name), "r", encoding="utf-8") as f:
            return json.load(f)

    def save_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT)
        logger.debug("wrote %s (%d rows)", target, len(frame))
        return target

    def load_frame(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self.path(name), float_precision="round_trip")

    def save_field(self, name: str, field: Field) -> Path:
        return self.save_frame(name, field_to_frame(field))

    def load_field(self, name: str, grid: Grid) -> Field:
        return field_from_frame(self.load_frame(name), grid)

    def save_trajectory(self, traj: Trajectory, snapshots: Optional[bool] = None) -> Dict[str, Any]:
        """
        Save series.csv and one snap_<step>.csv per stored snapshot
        Args:
            traj: Completed trajectory
            snapshots: Write snapshot files; defaults to writing them all
        Returns:
            Dictionary with the series path and the snapshot file names
        """
        series = self.save_frame("series.csv", traj.to_frame())
        written = []
        if snapshots is None or snapshots:
            for step, _, field in traj.snapshots:
                name = f"snap_{step}.csv"
                self.save_field(name, field)
                written.append(name)
        logger.info("saved trajectory: %d records, %d snapshots in %s",
                    len(traj.times), len(written), self.output_dir)
        return {"series": series.name, "snapshots": written}
