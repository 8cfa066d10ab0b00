"""Report emission: tidy CSVs for external plotting plus rendered figures.

The plotting contract is the tidy CSV (time, series, value); the PNG figures
are a convenience rendered from the same data so a report directory is
readable at a glance.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .metrics import (MetricsReport, build_report, energy_delta, format_table,
                      violation_counts)
from .output import SimOutput  # noqa: E402

DECOMPOSITION_SERIES = ("hvac_mw", "water_heater_mw", "zip_mw", "battery_mw",
                        "pv_mw", "industrial_mw", "losses_mw", "total_mw")


def _tidy_rows(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_decomposition_csv(output: SimOutput, path: Path) -> None:
    rows = []
    for name in DECOMPOSITION_SERIES:
        series = getattr(output.system, name)
        for t, v in zip(output.t, series):
            rows.append([int(t), name, repr(float(v))])
    _tidy_rows(path, ["time", "series", "value_mw"], rows)


def _hours(t):
    return (np.asarray(t) - t[0]) / 3600.0


def plot_decomposition(output: SimOutput, path: Path, title="") -> None:
    fig, ax = plt.subplots(figsize=(9, 4.5))
    h = _hours(output.t)
    for name in DECOMPOSITION_SERIES:
        label = name.replace("_mw", "")
        ax.plot(h, getattr(output.system, name), label=label, lw=1.0)
    ax.set_xlabel("hours")
    ax.set_ylabel("MW")
    ax.legend(ncol=4, fontsize=8)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def write_run_report(output: SimOutput, out_dir, figures: bool = True) -> list:
    """Single-run report: decomposition CSV, summary JSON, optional figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out / "decomposition.csv"
    write_decomposition_csv(output, csv_path)
    written.append(csv_path)
    summary = {
        "peak_mw": float(np.max(output.system.total_mw)),
        "peak_time": int(output.t[int(np.argmax(output.system.total_mw))]),
        "energy_mwh": float(np.sum(output.system.total_mw)
                            * output.dt / 3600.0),
        "losses_mwh": float(np.sum(output.system.losses_mw)
                            * output.dt / 3600.0),
        "violations": violation_counts(output),
    }
    jpath = out / "summary.json"
    jpath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(jpath)
    if figures:
        fpath = out / "decomposition.png"
        plot_decomposition(output, fpath,
                           title=output.meta.get("case", ""))
        written.append(fpath)
    return written


def write_compare_report(outputs: dict, baseline: str, out_dir,
                         reference=None, window=None,
                         figures: bool = True) -> MetricsReport:
    """Multi-case comparison: report JSON + table + tidy CSVs + figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(outputs, baseline, reference=reference,
                          window=window)
    (out / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(format_table(report))

    base = outputs[baseline]
    case_names = sorted(n for n in outputs if n != baseline)

    load_rows, energy_rows = [], []
    for name in case_names:
        case = outputs[name]
        t_w, cum = energy_delta(case, base, window)
        mask = np.isin(case.t, t_w)
        diff = case.system.total_mw[mask] - base.system.total_mw[mask]
        for t, v in zip(t_w, diff):
            load_rows.append([int(t), name, repr(float(v))])
        for t, v in zip(t_w, cum):
            energy_rows.append([int(t), name, repr(float(v))])
    _tidy_rows(out / "load_difference.csv",
               ["time", "case", "delta_mw"], load_rows)
    _tidy_rows(out / "energy_difference.csv",
               ["time", "case", "delta_mwh"], energy_rows)

    viol_rows = []
    for name in sorted(outputs):
        entry = report.cases[name]
        for band, rec in entry["violations"].items():
            viol_rows.append([name, f"viol_{band}", rec["count"],
                              "" if rec["pct_change"] is None
                              else repr(rec["pct_change"])])
        viol_rows.append([name, "losses_mwh", repr(entry["losses_mwh"]),
                          "" if entry["losses_pct_change"] is None
                          else repr(entry["losses_pct_change"])])
    _tidy_rows(out / "violations_losses.csv",
               ["case", "metric", "value", "pct_change_vs_base"], viol_rows)

    for name in sorted(outputs):
        write_decomposition_csv(outputs[name],
                                out / f"decomposition_{name}.csv")

    if figures:
        _compare_figures(outputs, baseline, case_names, report, out, window)
    return report


def _compare_figures(outputs, baseline, case_names, report, out: Path,
                     window):
    base = outputs[baseline]
    h = _hours(base.t)

    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name in case_names:
        diff = outputs[name].system.total_mw - base.system.total_mw
        ax.plot(h, diff, label=f"{name} - {baseline}", lw=1.0)
    ax.set_xlabel("hours")
    ax.set_ylabel("load difference (MW)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "load_difference.png", dpi=130)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name in case_names:
        t_w, cum = energy_delta(outputs[name], base, window)
        ax.plot(_hours(t_w), cum, label=name, lw=1.2)
    ax.set_xlabel("hours")
    ax.set_ylabel("cumulative energy difference (MWh)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "energy_difference.png", dpi=130)
    plt.close(fig)

    names = sorted(report.cases)
    bands = ("a_low", "a_high", "b_low", "b_high")
    x = np.arange(len(names))
    width = 0.2
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    for i, band in enumerate(bands):
        counts = [report.cases[n]["violations"][band]["count"] for n in names]
        ax1.bar(x + (i - 1.5) * width, counts, width, label=band)
    ax1.set_xticks(x, names, rotation=30, ha="right", fontsize=8)
    ax1.set_ylabel("violation count")
    ax1.legend(fontsize=8)
    losses = [report.cases[n]["losses_mwh"] for n in names]
    ax2.bar(x, losses, 0.5, color="#777")
    ax2.set_xticks(x, names, rotation=30, ha="right", fontsize=8)
    ax2.set_ylabel("losses (MWh)")
    fig.tight_layout()
    fig.savefig(out / "violations_losses.png", dpi=130)
    plt.close(fig)

    for name in sorted(outputs):
        plot_decomposition(outputs[name], out / f"decomposition_{name}.png",
                           title=name)
