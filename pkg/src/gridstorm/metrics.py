"""Comparison metrics: peaks, energy deltas, unmet energy, violations.

Integrals use the rectangle rule (value x dt), matching the discrete
semantics of the simulation exactly, so conservation-style checks close
without interpolation surprises.  Unmet energy is the positive part of
(simulated minus supplied): intervals where supply exceeded simulated
demand do not offset a deficit elsewhere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .output import SimOutput


class MetricsError(ValueError):
    pass


REFERENCE_HEADER = ["timestamp", "supplied_mw"]


@dataclass(frozen=True)
class ReferenceSeries:
    """Externally supplied demand (e.g. what the system actually served)."""

    t: np.ndarray
    supplied_mw: np.ndarray
    label: str = "reference"

    def __post_init__(self):
        if len(self.t) != len(self.supplied_mw):
            raise MetricsError("reference arrays have mismatched lengths")
        if len(self.t) < 2:
            raise MetricsError("reference needs at least 2 samples")

    def on_grid(self, t: np.ndarray) -> np.ndarray:
        """Supplied series interpolated onto a simulation grid."""
        if np.array_equal(self.t, t):
            return np.asarray(self.supplied_mw, dtype=float)
        if t[0] < self.t[0] or t[-1] > self.t[-1]:
            raise MetricsError("reference does not cover the output grid")
        return np.interp(t.astype(float), self.t.astype(float),
                         self.supplied_mw)


def load_reference(path, label=None) -> ReferenceSeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"reference file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != REFERENCE_HEADER:
            raise MetricsError(
                f"{path}: expected header {','.join(REFERENCE_HEADER)}")
        t, mw = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t.append(int(row[0]))
                mw.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise MetricsError(f"{path}:{lineno}: {exc}") from None
    return ReferenceSeries(np.asarray(t, dtype=np.int64), np.asarray(mw),
                           label=label or path.stem)


def save_reference(ref: ReferenceSeries, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(REFERENCE_HEADER) + "\n")
        for ti, mi in zip(ref.t, ref.supplied_mw):
            fh.write(f"{int(ti)},{float(mi)!r}\n")


def make_outage_reference(bau: SimOutput, notch_start: int, notch_end: int,
                          depth_fraction: float,
                          label: str = "synthetic-supplied") -> ReferenceSeries:
    """Baseline output minus a supply notch: a stand-in served-demand series."""
    supplied = bau.system.total_mw.copy()
    mask = (bau.t >= notch_start) & (bau.t < notch_end)
    supplied[mask] *= (1.0 - depth_fraction)
    return ReferenceSeries(bau.t.copy(), supplied, label=label)


# ---------------------------------------------------------------------------
# Core metrics
# ---------------------------------------------------------------------------

def _window_mask(t: np.ndarray, window) -> np.ndarray:
    if window is None:
        return np.ones(len(t), dtype=bool)
    lo, hi = window
    mask = (t >= lo) & (t < hi)
    if not mask.any():
        raise MetricsError(f"window [{lo}, {hi}) selects no timesteps")
    return mask


def peak(output: SimOutput, window=None) -> tuple:
    """(MW, timestamp) of the system maximum; first attaining step wins."""
    mask = _window_mask(output.t, window)
    series = output.system.total_mw[mask]
    ts = output.t[mask]
    k = int(np.argmax(series))
    return float(series[k]), int(ts[k])


def energy_mwh(output: SimOutput, window=None) -> float:
    mask = _window_mask(output.t, window)
    return float(np.sum(output.system.total_mw[mask]) * output.dt / 3600.0)


def energy_delta(case: SimOutput, base: SimOutput, window=None):
    """Cumulative MWh of (case - base) system load; returns (t, series)."""
    if not case.same_grid(base):
        raise MetricsError("outputs on mismatched grids")
    mask = _window_mask(case.t, window)
    diff_mw = case.system.total_mw[mask] - base.system.total_mw[mask]
    cum = np.cumsum(diff_mw) * case.dt / 3600.0
    return case.t[mask], cum


def unmet_energy(case: SimOutput, ref: ReferenceSeries, window=None) -> float:
    """MWh of max(0, simulated - supplied) over the window."""
    mask = _window_mask(case.t, window)
    supplied = ref.on_grid(case.t)[mask]
    deficit = np.maximum(0.0, case.system.total_mw[mask] - supplied)
    return float(np.sum(deficit) * case.dt / 3600.0)


VIOLATION_BANDS = ("a_low", "a_high", "b_low", "b_high")


def violation_counts(output: SimOutput, window=None) -> dict:
    mask = _window_mask(output.t, window)
    s = output.system
    return {
        "a_low": int(s.viol_a_low[mask].sum()),
        "a_high": int(s.viol_a_high[mask].sum()),
        "b_low": int(s.viol_b_low[mask].sum()),
        "b_high": int(s.viol_b_high[mask].sum()),
    }


def violation_summary(case: SimOutput, base: SimOutput, window=None) -> dict:
    """Per-band (case count, base count, % change); % is None when base = 0."""
    if not case.same_grid(base):
        raise MetricsError("outputs on mismatched grids")
    case_counts = violation_counts(case, window)
    base_counts = violation_counts(base, window)
    out = {}
    for band in VIOLATION_BANDS:
        c, b = case_counts[band], base_counts[band]
        pct = None if b == 0 else 100.0 * (c - b) / b
        out[band] = {"count": c, "base_count": b, "pct_change": pct}
    return out


def losses_mwh(output: SimOutput, window=None) -> float:
    mask = _window_mask(output.t, window)
    return float(np.sum(output.system.losses_mw[mask]) * output.dt / 3600.0)


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    """All comparison quantities for a set of cases against a baseline."""

    baseline: str
    window: tuple | None
    cases: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"baseline": self.baseline,
                "window": list(self.window) if self.window else None,
                "cases": self.cases}


def build_report(outputs: dict, baseline: str, reference=None,
                 window=None) -> MetricsReport:
    """Compute the full metric set for named outputs vs a baseline.

    ``outputs`` maps case name -> SimOutput; ``baseline`` must be a key.
    """
    if baseline not in outputs:
        raise MetricsError(f"baseline {baseline!r} not among outputs")
    base = outputs[baseline]
    report = MetricsReport(baseline=baseline, window=window)
    base_losses = losses_mwh(base, window)
    for name, out in outputs.items():
        if not out.same_grid(base):
            raise MetricsError(f"{name!r} grid differs from baseline")
        pk, pk_t = peak(out, window)
        _, delta = energy_delta(out, base, window)
        entry = {
            "peak_mw": pk,
            "peak_time": pk_t,
            "energy_mwh": energy_mwh(out, window),
            "energy_delta_mwh": float(delta[-1]),
            "losses_mwh": losses_mwh(out, window),
            "losses_pct_change": (
                None if base_losses == 0 else
                100.0 * (losses_mwh(out, window) - base_losses) / base_losses),
            "violations": violation_summary(out, base, window),
        }
        if reference is not None:
            entry["unmet_energy_mwh"] = unmet_energy(out, reference, window)
        report.cases[name] = entry
    return report


def format_table(report: MetricsReport) -> str:
    """Human-readable fixed-width summary of a report."""
    cols = ["case", "peak MW", "peak t", "energy MWh", "dE vs base",
            "losses MWh", "A-low", "A-high", "B-low", "B-high"]
    has_unmet = any("unmet_energy_mwh" in c for c in report.cases.values())
    if has_unmet:
        cols.append("unmet MWh")
    rows = []
    for name in sorted(report.cases):
        c = report.cases[name]
        v = c["violations"]
        row = [name, f"{c['peak_mw']:.3f}", str(c["peak_time"]),
               f"{c['energy_mwh']:.2f}", f"{c['energy_delta_mwh']:+.2f}",
               f"{c['losses_mwh']:.3f}",
               str(v["a_low"]["count"]), str(v["a_high"]["count"]),
               str(v["b_low"]["count"]), str(v["b_high"]["count"])]
        if has_unmet:
            row.append(f"{c.get('unmet_energy_mwh', 0.0):.2f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows + [cols]) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"
