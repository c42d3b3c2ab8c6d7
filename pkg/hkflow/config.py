"""
Run configuration: JSON file plus --set overrides
"""

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from hkflow.errors import ConfigError, ParameterError
from hkflow.mesh import DensityBuilder, Field, Grid, build_density, build_grid
from hkflow.profiles import GSpec, PsiSpec

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "simulate", "inequality", "counterexample", "sweep", "decay")
DEFAULT_OUTPUT_DIR = "hkflow_runs"
OUTPUT_DIR_ENV = "HKFLOW_OUTPUT_DIR"
FLOW_FIELDS = {"mode", "t_end", "cfl", "snapshot_every", "keep_snapshots", "max_steps"}
REQUIRED = ("command", "g", "psi")


@dataclass
class RunConfig:
    command: str
    g: Dict[str, Any]
    psi: List[Dict[str, Any]]
    grid: Dict[str, Any] = field(default_factory=lambda: {"domain_kind": "interval_noflux", "n": 128})
    steady: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "params": {"value": 1.0}})
    initial: Optional[Dict[str, Any]] = None
    case: Dict[str, Any] = field(default_factory=dict)
    flow: Dict[str, Any] = field(default_factory=dict)
    family: Any = None
    output_dir: Optional[str] = None
    seed: int = 0
    ratio_cap: float = math.inf
    field_lines: Dict[str, Optional[int]] = field(default_factory=dict, repr=False, compare=False)

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)

    def _building(self, key: str, build: Callable[[], Any]) -> Any:
        """Run a constructor, reporting bad value types as a ConfigError on the field"""
        try:
            return build()
        except ParameterError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), field=key, line=self.field_lines.get(key))

    def g_spec(self) -> GSpec:
        return self._building("g", lambda: GSpec.from_dict(self.g))

    def psi_specs(self) -> List[PsiSpec]:
        return self._building("psi", lambda: [PsiSpec.from_dict(p) for p in self.psi])

    def build_grid(self) -> Grid:
        return self._building("grid", lambda: build_grid(self.grid["domain_kind"], self.grid["n"]))

    def builder(self, data: Dict[str, Any]) -> DensityBuilder:
        """Density recipe with the run seed filled in for trig_random"""
        builder = DensityBuilder.from_dict(data)
        if builder.kind == "trig_random" and "seed" not in builder.params:
            builder = DensityBuilder(builder.kind, {**builder.params, "seed": self.seed}, builder.normalize)
        return builder

    def build_steady(self, grid: Grid) -> Field:
        return self._building("steady", lambda: build_density(grid, self.builder(self.steady)))

    def build_initial(self, grid: Grid, steady: Field) -> Field:
        if self.initial is None:
            return steady
        return self._building("initial", lambda: build_density(grid, self.builder(self.initial), steady))

    def family_builders(self) -> List[DensityBuilder]:
        """
        Expand the sweep family: either an explicit list of builders or
        {"kind": "trig_random", "count": N, "seed": s, ...} for seeds s..s+N-1
        """
        family = self.family
        if isinstance(family, list):
            return self._building("family", lambda: [self.builder(item) for item in family])
        if isinstance(family, dict) and family.get("kind") == "trig_random":
            count = int(family.get("count", 20))
            first = int(family.get("seed", self.seed))
            params = {k: v for k, v in family.items() if k not in ("kind", "count", "seed", "normalize")}
            normalize = bool(family.get("normalize", False))
            return [DensityBuilder("trig_random", {**params, "seed": first + i}, normalize) for i in range(count)]
        raise ConfigError("sweep family must be a list of builders or a trig_random spec", field="family")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "g": self.g,
            "psi": self.psi,
            "grid": self.grid,
            "steady": self.steady,
            "initial": self.initial,
            "case": self.case,
            "flow": self.flow,
            "family": self.family,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "ratio_cap": self.ratio_cap,
        }


def _line_of(text: str, key: str) -> Optional[int]:
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(data: Dict[str, Any], assignment: str) -> None:
    """Apply one key.path=value assignment in place; value is JSON or a bare string"""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key.path=value")
    path, raw = assignment.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override '{assignment}' has an empty key path")
    node: Any = data
    for i, key in enumerate(keys[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(key)]
            except (ValueError, IndexError):
                raise ConfigError(f"no list element '{key}'", field=".".join(keys[: i + 1]))
            continue
        if not isinstance(node, dict):
            raise ConfigError("cannot descend into a scalar", field=".".join(keys[: i + 1]))
        node = node.setdefault(key, {})
    last = keys[-1]
    value = _parse_value(raw)
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"no list element '{last}'", field=path)
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError("cannot assign into a scalar", field=path)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_number(value: Any, name: str, text: str, key: str) -> None:
    if value is None or (isinstance(value, (int, float)) and not isinstance(value, bool)):
        return
    raise ConfigError(f"must be a number, got {value!r}", field=name, line=_line_of(text, key))


def _check_types(data: Dict[str, Any], text: str) -> None:
    expectations = {
        "command": str,
        "g": dict,
        "grid": dict,
        "steady": dict,
        "initial": (dict, type(None)),
        "case": dict,
        "flow": dict,
        "output_dir": (str, type(None)),
        "seed": int,
        "ratio_cap": (int, float),
    }
    for key, expected in expectations.items():
        if key in data and not isinstance(data[key], expected):
            raise ConfigError(f"has type {type(data[key]).__name__}", field=key, line=_line_of(text, key))
    if not isinstance(data.get("psi"), (dict, list)):
        raise ConfigError("must be a profile object or a list of them", field="psi", line=_line_of(text, "psi"))
    grid = data.get("grid")
    if grid is not None:
        if not isinstance(grid.get("domain_kind"), str):
            raise ConfigError(f"must be a domain name, got {grid.get('domain_kind')!r}", field="grid.domain_kind",
                              line=_line_of(text, "domain_kind") or _line_of(text, "grid"))
        if not _is_integer(grid.get("n")):
            raise ConfigError(f"must be an integer, got {grid.get('n')!r}", field="grid.n",
                              line=_line_of(text, "n") or _line_of(text, "grid"))
    _check_number(data.get("g", {}).get("alpha"), "g.alpha", text, "alpha")
    psis = data["psi"] if isinstance(data["psi"], list) else [data["psi"]]
    for i, psi in enumerate(psis):
        if not isinstance(psi, dict):
            raise ConfigError(f"entry {i} must be a profile object", field="psi", line=_line_of(text, "psi"))
        _check_number(psi.get("p"), f"psi.{i}.p", text, "p")
    unknown_flow = set(data.get("flow", {})) - FLOW_FIELDS
    if unknown_flow:
        raise ConfigError(f"unknown flow fields {sorted(unknown_flow)}", field="flow", line=_line_of(text, "flow"))
    flow = data.get("flow", {})
    for key in ("t_end", "cfl"):
        _check_number(flow.get(key), f"flow.{key}", text, key)
    for key in ("snapshot_every", "max_steps"):
        if key in flow and not _is_integer(flow[key]):
            raise ConfigError(f"must be an integer, got {flow[key]!r}", field=f"flow.{key}", line=_line_of(text, key))
    if not isinstance(flow.get("mode", ""), str) or not isinstance(flow.get("keep_snapshots", True), bool):
        raise ConfigError("mode must be a string and keep_snapshots a boolean", field="flow",
                          line=_line_of(text, "flow"))


def parse_run_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", line=1)

    for assignment in overrides:
        apply_override(data, assignment)

    known = set(RunConfig.__dataclass_fields__) - {"field_lines"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError("unknown field", field=unknown[0], line=_line_of(text, unknown[0]))
    for key in REQUIRED:
        if key not in data:
            raise ConfigError("is required", field=key)
    if data.get("ratio_cap", 0) is None:
        data.pop("ratio_cap")
    _check_types(data, text)
    if data["command"] not in COMMANDS:
        raise ConfigError(f"must be one of {COMMANDS}, got '{data['command']}'",
                          field="command", line=_line_of(text, "command"))
    if isinstance(data["psi"], dict):
        data["psi"] = [data["psi"]]
    return RunConfig(**data, field_lines={key: _line_of(text, key) for key in data})


def load_run_config(path, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Load a run configuration
    Args:
        path: JSON config file
        overrides: key.path=value assignments applied after parsing
    Returns:
        RunConfig with every field checked for name and type
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    config = parse_run_config(text, overrides)
    logger.info("loaded %s config from %s (%d overrides)", config.command, path, len(overrides))
    return config
