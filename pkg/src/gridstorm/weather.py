"""Weather time-series ingestion, validation, resampling, and synthesis.

Weather files are CSV with an exact header::

    timestamp,temperature_f,humidity_pct,pressure_mbar,wind_mps,ghi_wm2

Timestamps are integer seconds since the run epoch (t = 0).  Rows must be
strictly increasing and uniformly spaced; gaps are rejected rather than
filled (gap-filling is a preprocessing concern, not a simulation one).
Units are fixed: deg F, percent, mbar, m/s, W/m^2.  Humidity, pressure and
wind speed are carried through and logged but do not drive any model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import solar

CSV_HEADER = ["timestamp", "temperature_f", "humidity_pct", "pressure_mbar",
              "wind_mps", "ghi_wm2"]


class WeatherError(ValueError):
    """Malformed or physically invalid weather input."""


@dataclass(frozen=True)
class WeatherSample:
    """One observation: run-local timestamp plus ambient conditions."""

    timestamp: int
    temperature_f: float
    humidity_pct: float
    pressure_mbar: float
    wind_mps: float
    ghi_wm2: float


class WeatherSeries:
    """Immutable, uniformly spaced weather record.

    Field data is held in numpy arrays; indexing returns a
    :class:`WeatherSample`.  Instances are safe to share read-only across
    parallel region simulations.
    """

    def __init__(self, timestamps, temperature_f, humidity_pct, pressure_mbar,
                 wind_mps, ghi_wm2):
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.temperature_f = np.asarray(temperature_f, dtype=float)
        self.humidity_pct = np.asarray(humidity_pct, dtype=float)
        self.pressure_mbar = np.asarray(pressure_mbar, dtype=float)
        self.wind_mps = np.asarray(wind_mps, dtype=float)
        self.ghi_wm2 = np.asarray(ghi_wm2, dtype=float)
        for arr in (self.timestamps, self.temperature_f, self.humidity_pct,
                    self.pressure_mbar, self.wind_mps, self.ghi_wm2):
            arr.setflags(write=False)
        self._validate()

    def _validate(self):
        n = len(self.timestamps)
        if n == 0:
            raise WeatherError("no samples")
        lengths = {len(self.temperature_f), len(self.humidity_pct),
                   len(self.pressure_mbar), len(self.wind_mps),
                   len(self.ghi_wm2)}
        if lengths != {n}:
            raise WeatherError("field arrays have mismatched lengths")
        if n > 1:
            gaps = np.diff(self.timestamps)
            if np.any(gaps <= 0):
                bad = int(np.argmax(gaps <= 0)) + 1
                raise WeatherError(
                    f"timestamps not strictly increasing at sample {bad}")
            if np.any(gaps != gaps[0]):
                bad = int(np.argmax(gaps != gaps[0])) + 1
                raise WeatherError(
                    f"non-uniform sample spacing at sample {bad} "
                    f"(expected {int(gaps[0])} s)")
        _check_ranges(self.humidity_pct, self.pressure_mbar, self.ghi_wm2)

    @property
    def native_resolution(self) -> int:
        """Sample spacing in seconds (0 for a single-sample series)."""
        if len(self.timestamps) < 2:
            return 0
        return int(self.timestamps[1] - self.timestamps[0])

    @property
    def span(self) -> int:
        return int(self.timestamps[-1] - self.timestamps[0])

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, i) -> WeatherSample:
        return WeatherSample(
            timestamp=int(self.timestamps[i]),
            temperature_f=float(self.temperature_f[i]),
            humidity_pct=float(self.humidity_pct[i]),
            pressure_mbar=float(self.pressure_mbar[i]),
            wind_mps=float(self.wind_mps[i]),
            ghi_wm2=float(self.ghi_wm2[i]),
        )

    def __eq__(self, other):
        if not isinstance(other, WeatherSeries):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.temperature_f, other.temperature_f)
            and np.array_equal(self.humidity_pct, other.humidity_pct)
            and np.array_equal(self.pressure_mbar, other.pressure_mbar)
            and np.array_equal(self.wind_mps, other.wind_mps)
            and np.array_equal(self.ghi_wm2, other.ghi_wm2)
        )

    def covers(self, start: int, end: int) -> bool:
        return int(self.timestamps[0]) <= start and int(self.timestamps[-1]) >= end


def _check_ranges(humidity, pressure, ghi):
    for i, h in enumerate(humidity):
        if not 0.0 <= h <= 100.0:
            raise WeatherError(
                f"humidity_pct out of range [0,100] at sample {i}: {h}")
    for i, p in enumerate(pressure):
        if not p > 0.0:
            raise WeatherError(f"pressure_mbar must be > 0 at sample {i}: {p}")
    for i, g in enumerate(ghi):
        if g < 0.0:
            raise WeatherError(f"ghi_wm2 must be >= 0 at sample {i}: {g}")


def load_weather(path) -> WeatherSeries:
    """Parse and validate a weather CSV.

    Raises WeatherError naming the offending line for malformed rows,
    non-monotonic timestamps, or out-of-range fields.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"weather file not found: {path}")
    columns: dict[str, list] = {name: [] for name in CSV_HEADER}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise WeatherError(f"{path}: no samples") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise WeatherError(
                f"{path}: bad header {header!r}; expected {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise WeatherError(
                    f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, "
                    f"got {len(row)}")
            try:
                columns["timestamp"].append(int(row[0]))
                for name, cell in zip(CSV_HEADER[1:], row[1:]):
                    columns[name].append(float(cell))
            except ValueError as exc:
                raise WeatherError(f"{path}:{lineno}: {exc}") from None
    if not columns["timestamp"]:
        raise WeatherError(f"{path}: no samples")
    try:
        return WeatherSeries(
            columns["timestamp"], columns["temperature_f"],
            columns["humidity_pct"], columns["pressure_mbar"],
            columns["wind_mps"], columns["ghi_wm2"])
    except WeatherError as exc:
        raise WeatherError(f"{path}: {exc}") from None


def save_weather(series: WeatherSeries, path) -> None:
    """Write a series back to CSV; numeric fields round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for i in range(len(series)):
            fh.write("%d,%r,%r,%r,%r,%r\n" % (
                int(series.timestamps[i]), float(series.temperature_f[i]),
                float(series.humidity_pct[i]), float(series.pressure_mbar[i]),
                float(series.wind_mps[i]), float(series.ghi_wm2[i])))


def resample(series: WeatherSeries, dt: int) -> WeatherSeries:
    """Linearly interpolate onto a uniform dt grid over the original span.

    dt must be positive, no larger than the span, and divide the span so the
    endpoints are preserved exactly.  Interpolated values never overshoot the
    neighboring native samples.
    """
    if dt <= 0:
        raise WeatherError(f"dt must be positive, got {dt}")
    if len(series) < 2:
        raise WeatherError("resample needs at least 2 samples")
    span = series.span
    if dt > span:
        raise WeatherError(f"dt={dt} exceeds series span {span}")
    if span % dt != 0:
        raise WeatherError(f"dt={dt} does not divide series span {span}")
    t0 = int(series.timestamps[0])
    new_t = t0 + np.arange(span // dt + 1, dtype=np.int64) * dt
    old_t = series.timestamps.astype(float)
    new_tf = new_t.astype(float)

    def interp(values):
        return np.interp(new_tf, old_t, values)

    return WeatherSeries(
        new_t,
        interp(series.temperature_f),
        interp(series.humidity_pct),
        interp(series.pressure_mbar),
        interp(series.wind_mps),
        interp(series.ghi_wm2),
    )


# ---------------------------------------------------------------------------
# Synthetic cold snap
# ---------------------------------------------------------------------------

SYNTH_RESOLUTION = 300  # 5-minute native samples


def synth_cold_snap(days: int, floor_temp: float, seed: int, *,
                    latitude_deg: float = 32.8,
                    base_mean_f: float = 46.0,
                    diurnal_amp_f: float = 11.0,
                    day_of_year0: float = solar.DEFAULT_DAY_OF_YEAR) -> WeatherSeries:
    """Deterministic multi-day cold-snap weather at 5-minute resolution.

    A winter diurnal sinusoid (coldest around 05:30) is pulled down by a
    smooth raised-cosine dip spanning the middle days of the window, clamped
    so the series minimum equals ``floor_temp`` exactly.  Skies stay clear:
    GHI is the geometric clear-sky value, zero at night.  The same
    (days, floor_temp, seed) always yields a bitwise-identical series.
    """
    if days < 1:
        raise WeatherError(f"days must be >= 1, got {days}")
    n = days * 86400 // SYNTH_RESOLUTION + 1
    t = np.arange(n, dtype=np.int64) * SYNTH_RESOLUTION
    tf = t.astype(float)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5eed]))

    hour = (tf % 86400.0) / 3600.0
    # Diurnal: minimum at 05:30, maximum at 17:30.
    diurnal = -np.cos(2.0 * np.pi * (hour - 5.5) / 24.0)
    base = base_mean_f + diurnal_amp_f * diurnal

    # Raised-cosine dip occupying the middle ~60% of the window, overshooting
    # the floor slightly so the clamp below pins the minimum at floor_temp.
    day = tf / 86400.0
    dip_start, dip_end = 0.18 * days, 0.82 * days
    envelope = np.zeros_like(tf)
    inside = (day >= dip_start) & (day <= dip_end)
    phase = (day[inside] - dip_start) / (dip_end - dip_start)
    envelope[inside] = 0.5 * (1.0 - np.cos(2.0 * np.pi * phase))
    dip_target = floor_temp - 6.0 + 0.6 * diurnal_amp_f * diurnal
    temp = base * (1.0 - envelope) + dip_target * envelope
    temp = temp + rng.normal(0.0, 0.25, size=n)
    temp = np.maximum(temp, floor_temp)

    ghi = solar.clear_sky_ghi(latitude_deg, tf, day_of_year0)
    humidity = np.clip(62.0 - 14.0 * diurnal + rng.normal(0.0, 2.0, size=n),
                       5.0, 100.0)
    pressure = 1016.0 + 6.0 * np.sin(2.0 * np.pi * day / max(days, 1)) \
        + rng.normal(0.0, 0.4, size=n)
    wind = np.clip(3.0 + 2.0 * envelope + rng.normal(0.0, 0.6, size=n),
                   0.0, None)
    return WeatherSeries(t, temp, humidity, pressure, wind, ghi)
