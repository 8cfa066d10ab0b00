"""Simulation output containers and their on-disk CSV/JSON form.

A run produces one :class:`OutputSeries` per region plus a system aggregate,
bundled in a :class:`SimOutput`.  On disk that is ``region_<name>.csv`` per
region, ``system.csv``, and a ``meta.json`` sidecar carrying the schema
version and run provenance.  Series files are written with ``repr`` float
formatting so identical runs produce byte-identical files; the only
timestamp lives in one metadata field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

OUTPUT_SCHEMA_VERSION = 1

_FLOAT_SERIES = ("total_mw", "hvac_mw", "water_heater_mw", "zip_mw",
                 "pv_mw", "battery_mw", "industrial_mw", "losses_mw")
_INT_SERIES = ("viol_a_low", "viol_a_high", "viol_b_low", "viol_b_high")
SERIES_COLUMNS = _FLOAT_SERIES + _INT_SERIES


class OutputError(ValueError):
    pass


@dataclass
class OutputSeries:
    """Per-timestep power decomposition and violation tallies (MW, counts).

    Sign conventions: pv_mw <= 0 (generation), battery_mw signed with
    charging positive.  total_mw is the power drawn from the grid source
    plus the constant industrial block, so at every step

        total = hvac + water_heater + zip + battery + pv + industrial + losses
    """

    total_mw: np.ndarray
    hvac_mw: np.ndarray
    water_heater_mw: np.ndarray
    zip_mw: np.ndarray
    pv_mw: np.ndarray
    battery_mw: np.ndarray
    industrial_mw: np.ndarray
    losses_mw: np.ndarray
    viol_a_low: np.ndarray
    viol_a_high: np.ndarray
    viol_b_low: np.ndarray
    viol_b_high: np.ndarray

    def __post_init__(self):
        n = len(self.total_mw)
        for f in fields(self):
            arr = getattr(self, f.name)
            if len(arr) != n:
                raise OutputError(f"series {f.name} has length {len(arr)}, "
                                  f"expected {n}")

    def __len__(self):
        return len(self.total_mw)

    @classmethod
    def zeros(cls, n: int) -> "OutputSeries":
        kw = {name: np.zeros(n) for name in _FLOAT_SERIES}
        kw.update({name: np.zeros(n, dtype=np.int64) for name in _INT_SERIES})
        return cls(**kw)

    def __add__(self, other: "OutputSeries") -> "OutputSeries":
        if len(other) != len(self):
            raise OutputError("cannot add series on different grids")
        kw = {f.name: getattr(self, f.name) + getattr(other, f.name)
              for f in fields(self)}
        return OutputSeries(**kw)

    def scaled(self, factor: float) -> "OutputSeries":
        """Scale load series by a population factor; counts stay counts."""
        kw = {name: getattr(self, name) * factor for name in _FLOAT_SERIES}
        kw.update({name: getattr(self, name).copy() for name in _INT_SERIES})
        return OutputSeries(**kw)

    def equals(self, other: "OutputSeries") -> bool:
        return all(np.array_equal(getattr(self, f.name),
                                  getattr(other, f.name))
                   for f in fields(self))


@dataclass
class SimOutput:
    """Timestep grid, per-region series, and the system aggregate."""

    t: np.ndarray
    regions: dict
    system: OutputSeries
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, series in self.regions.items():
            if len(series) != len(self.t):
                raise OutputError(f"region {name!r} series off-grid")
        if len(self.system) != len(self.t):
            raise OutputError("system series off-grid")

    @property
    def dt(self) -> float:
        if len(self.t) < 2:
            return 0.0
        return float(self.t[1] - self.t[0])

    def same_grid(self, other: "SimOutput") -> bool:
        return np.array_equal(self.t, other.t)


def decomposition_residual(series: OutputSeries) -> np.ndarray:
    """Relative residual of the per-step decomposition identity."""
    total = series.total_mw
    parts = (series.hvac_mw + series.water_heater_mw + series.zip_mw
             + series.battery_mw + series.pv_mw + series.industrial_mw
             + series.losses_mw)
    return np.abs(total - parts) / np.maximum(np.abs(total), 1.0)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _write_series_csv(path: Path, t: np.ndarray, series: OutputSeries):
    with path.open("w", newline="") as fh:
        fh.write("t," + ",".join(SERIES_COLUMNS) + "\n")
        cols = [getattr(series, name) for name in SERIES_COLUMNS]
        for i in range(len(t)):
            row = [str(int(t[i]))]
            for name, col in zip(SERIES_COLUMNS, cols):
                if name in _INT_SERIES:
                    row.append(str(int(col[i])))
                else:
                    row.append(repr(float(col[i])))
            fh.write(",".join(row) + "\n")


def _read_series_csv(path: Path):
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        expected = ["t"] + list(SERIES_COLUMNS)
        if header != expected:
            raise OutputError(f"{path}: unexpected columns {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise OutputError(f"{path}: empty series")
    t = data[:, 0].astype(np.int64)
    kw = {}
    for j, name in enumerate(SERIES_COLUMNS, start=1):
        col = data[:, j]
        kw[name] = col.astype(np.int64) if name in _INT_SERIES else col
    return t, OutputSeries(**kw)


def region_filename(name: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
    return f"region_{safe}.csv"


def write_output(output: SimOutput, path) -> None:
    """Write the run to a directory: per-region CSVs, system CSV, metadata."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for name, series in output.regions.items():
        _write_series_csv(out / region_filename(name), output.t, series)
    _write_series_csv(out / "system.csv", output.t, output.system)
    meta = dict(output.meta)
    meta["schema_version"] = OUTPUT_SCHEMA_VERSION
    meta["regions"] = sorted(output.regions.keys())
    meta["n_steps"] = int(len(output.t))
    meta["created"] = datetime.now(timezone.utc).isoformat()
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True)
                                   + "\n")


def read_output(path) -> SimOutput:
    """Load a run directory written by :func:`write_output`."""
    out = Path(path)
    meta_path = out / "meta.json"
    if not meta_path.exists():
        raise OutputError(f"{out}: missing meta.json")
    meta = json.loads(meta_path.read_text())
    version = meta.get("schema_version")
    if version != OUTPUT_SCHEMA_VERSION:
        raise OutputError(
            f"{out}: unsupported output schema version {version!r}")
    regions = {}
    t = None
    for name in meta.get("regions", []):
        t_r, series = _read_series_csv(out / region_filename(name))
        if t is None:
            t = t_r
        elif not np.array_equal(t, t_r):
            raise OutputError(f"{out}: region {name!r} grid mismatch")
        regions[name] = series
    t_s, system = _read_series_csv(out / "system.csv")
    if t is None:
        t = t_s
    elif not np.array_equal(t, t_s):
        raise OutputError(f"{out}: system grid mismatch")
    return SimOutput(t=t, regions=regions, system=system, meta=meta)
