import json
import math

import numpy as np
import pandas as pd
import pytest

from hkflow.errors import ParameterError
from hkflow.flow import FlowConfig, simulate
from hkflow.mesh import DensityBuilder, Field, build_density, build_grid
from hkflow.profiles import make_g, make_psi
from hkflow.storage import ReportStore, field_from_frame, field_to_frame, grid_from_json, grid_to_json


@pytest.fixture
def store(tmp_path):
    return ReportStore(tmp_path / "run")


def test_grid_json():
    grid = build_grid("torus2d", 8)
    text = grid_to_json(grid)
    assert json.loads(text) == {"domain_kind": "torus2d", "n": 8}
    assert grid_from_json(text) == grid
    with pytest.raises(ParameterError):
        grid_from_json('{"n": 8}')


def test_field_frame_layout_2d():
    grid = build_grid("torus2d", 4)
    x, y = grid.coordinates()
    frame = field_to_frame(Field(grid, x + 10 * y))
    assert list(frame.columns) == ["x", "y", "value"]
    assert len(frame) == 16
    # row-major: y varies fastest
    assert frame["x"].iloc[0] == frame["x"].iloc[3]
    assert frame["y"].iloc[1] > frame["y"].iloc[0]


def test_field_csv_keeps_full_precision(store):
    grid = build_grid("interval_noflux", 16)
    field = Field(grid, np.exp(grid.axis_centers()) / 3.0)
    store.save_field("f.csv", field)
    header = store.path("f.csv").read_text().splitlines()[0]
    assert header == "x,value"
    loaded = store.load_field("f.csv", grid)
    np.testing.assert_array_equal(loaded.values, field.values)


def test_field_csv_2d(store):
    grid = build_grid("torus2d", 8)
    field = build_density(grid, DensityBuilder("trig_random", {"seed": 3}, normalize=True))
    store.save_field("f.csv", field)
    np.testing.assert_array_equal(store.load_field("f.csv", grid).values, field.values)


def test_field_frame_checks():
    grid = build_grid("interval_noflux", 8)
    frame = field_to_frame(Field(grid, np.ones(8)))
    with pytest.raises(ParameterError):
        field_from_frame(frame.rename(columns={"value": "rho"}), grid)
    with pytest.raises(ParameterError):
        field_from_frame(frame, build_grid("interval_noflux", 16))
    shifted = frame.assign(x=frame["x"] + 0.01)
    with pytest.raises(ParameterError):
        field_from_frame(shifted, grid)


def test_json_keeps_infinity_and_numpy_values(store):
    store.save_json("r.json", {"ratio": math.inf, "values": np.arange(3), "scalar": np.float64(0.5)})
    data = store.load_json("r.json")
    assert data == {"ratio": math.inf, "values": [0, 1, 2], "scalar": 0.5}
    assert '"ratio": Infinity' in (store.output_dir / "r.json").read_text(encoding="utf-8")


def test_save_trajectory(store):
    grid = build_grid("interval_noflux", 16)
    steady = build_density(grid, DensityBuilder("cosine", {"a": 0.5}, normalize=True))
    config = FlowConfig(mode="full", g=make_g("log"), psi_monitors=[make_psi("beckner", 1.0), make_psi("abs_power", 2.0)],
                        grid=grid, steady=steady, initial=steady.scaled(1.2), t_end=0.01, snapshot_every=10)
    traj = simulate(config)
    files = store.save_trajectory(traj)
    assert files["series"] == "series.csv"
    assert files["snapshots"] == [f"snap_{step}.csv" for step, _, _ in traj.snapshots]
    series = store.load_frame("series.csv")
    assert list(series.columns[:6]) == ["t", "mass", "entropy_0", "prod_total_0", "prod_w_0", "prod_h_0"]
    pd.testing.assert_frame_equal(series, traj.to_frame())
    final = store.load_field(files["snapshots"][-1], grid)
    np.testing.assert_array_equal(final.values, traj.final.values)
    assert store.save_trajectory(traj, snapshots=False)["snapshots"] == []
