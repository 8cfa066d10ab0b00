"""Run configuration files, validation, and generated presets.

A run configuration is a JSON file referencing weather, feeder, population,
and scenario files by relative path::

    {
      "schema_version": 1,
      "start": 0, "end": 604800, "dt": 30, "seed": 42,
      "output_dir": "output",
      "scenarios": ["scenarios/BAU.json", ...],
      "regions": [
        {"name": "north", "weather": "weather/north.csv",
         "feeders": ["feeders/north_1.json"],
         "population": "populations/north.json",
         "scaling_factor": 40.0, "industrial_mw": 2.0, "latitude": 32.8}
      ]
    }

``init`` emits a self-consistent tree for either the desk preset (2 regions
x 200 houses x 7 days) or a paper-scale preset (8 regions with pinned
scaling factors); generation is fully seeded, so the same seed reproduces
identical files byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from . import feeder as feeder_mod
from . import scenario as scenario_mod
from . import weather as weather_mod
from .population import PopulationStats, RegionConfig

RUN_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    path: Path
    start: int
    end: int
    dt: int
    seed: int
    output_dir: Path
    scenario_files: tuple
    regions: tuple


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"run config not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    version = data.get("schema_version")
    if version != RUN_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported run schema version {version!r}")
    base = path.parent
    try:
        regions = []
        for rd in data["regions"]:
            stats_path = base / rd["population"]
            if not stats_path.exists():
                raise ConfigError(f"population file not found: {stats_path}")
            stats = PopulationStats.from_json(
                json.loads(stats_path.read_text()))
            regions.append(RegionConfig(
                name=rd["name"],
                weather_file=str(base / rd["weather"]),
                feeders=tuple(str(base / f) for f in rd["feeders"]),
                stats=stats,
                scaling_factor=float(rd.get("scaling_factor", 1.0)),
                industrial_mw=float(rd.get("industrial_mw", 0.0)),
                latitude=float(rd.get("latitude", stats.latitude)),
            ))
        return RunConfig(
            path=path,
            start=int(data["start"]),
            end=int(data["end"]),
            dt=int(data["dt"]),
            seed=int(data.get("seed", 0)),
            output_dir=base / data.get("output_dir", "output"),
            scenario_files=tuple(str(base / s)
                                 for s in data.get("scenarios", [])),
            regions=tuple(regions),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc}") from None


def validate_run_config(path) -> list:
    """Full configuration check; returns machine-readable diagnostics."""
    diags = []
    try:
        cfg = load_run_config(path)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        return [{"level": "error", "message": str(exc)}]

    if cfg.end <= cfg.start:
        diags.append({"level": "error",
                      "message": "end must be after start"})
    elif cfg.dt <= 0 or (cfg.end - cfg.start) % cfg.dt != 0:
        diags.append({"level": "error",
                      "message": "dt must be positive and divide end-start"})

    for spath in cfg.scenario_files:
        try:
            spec, _ = scenario_mod.load_scenario(spath)
            for msg in scenario_mod.validate_spec(spec):
                diags.append({"level": "error",
                              "message": f"{spath}: {msg}"})
        except (FileNotFoundError, ValueError) as exc:
            diags.append({"level": "error", "message": str(exc)})

    for region in cfg.regions:
        try:
            wx = weather_mod.load_weather(region.weather_file)
            if not wx.covers(cfg.start, cfg.end):
                diags.append({
                    "level": "error",
                    "message": f"{region.weather_file} does not cover "
                               f"[{cfg.start}, {cfg.end}]"})
            elif (wx.span % cfg.dt) != 0:
                diags.append({
                    "level": "error",
                    "message": f"{region.weather_file}: span not divisible "
                               f"by dt={cfg.dt}"})
        except (FileNotFoundError, ValueError) as exc:
            diags.append({"level": "error", "message": str(exc)})
        for fpath in region.feeders:
            try:
                model = feeder_mod.load_feeder(fpath)
                if not model.attachment_nodes:
                    diags.append({"level": "error",
                                  "message": f"{fpath}: no attachment nodes"})
            except (FileNotFoundError, ValueError) as exc:
                diags.append({"level": "error", "message": str(exc)})
    return diags


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

DESK_DAYS = 7

DESK_REGIONS = (
    # name, latitude, cold-snap floor F, scaling factor, industrial MW
    ("north", 32.8, 10.0, 40.0, 2.0),
    ("south", 29.8, 14.0, 30.0, 1.5),
)

# Region table for the paper-scale preset: feeders, modeled houses, pinned
# scaling factor, approximate latitude, industrial block.
PAPER_REGIONS = (
    ("region1", ("R4-12.47-1", "R4-12.47-2"), 893, 3816.95, 32.8, 400.0),
    ("region2", ("R5-12.47-1", "R5-12.47-2"), 1308, 2351.17, 29.8, 350.0),
    ("region3", ("R5-12.47-5",), 1539, 58.14, 33.7, 20.0),
    ("region4", ("R5-12.47-5",), 1539, 479.44, 32.0, 60.0),
    ("region5", ("R5-12.47-1", "R5-12.47-2"), 1308, 1395.95, 30.0, 150.0),
    ("region6", ("R4-12.47-1", "R5-12.47-1"), 1525, 67.95, 29.4, 15.0),
    ("region7", ("R5-12.47-5",), 1539, 895.00, 27.7, 90.0),
    ("region8", ("R5-12.47-5",), 1539, 23.55, 29.6, 5.0),
)

SCENARIO_SEED_SALT = 777


def _write_json(path: Path, data: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _emit_scenarios(out: Path, seed: int) -> list:
    files = []
    for case in scenario_mod.CASES:
        spec = scenario_mod.ScenarioSpec(case_id=case)
        rel = f"scenarios/{case}.json"
        scenario_mod.save_scenario(spec, seed + SCENARIO_SEED_SALT, out / rel)
        files.append(rel)
    return files


def init_tree(out_dir, preset: str = "desk", seed: int = 42,
              force: bool = False) -> Path:
    """Generate a ready-to-run configuration tree; returns run.json path."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(
            f"output directory {out} is not empty (use force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    if preset == "desk":
        return _init_desk(out, seed)
    if preset == "paper-scale":
        return _init_paper_scale(out, seed)
    raise ConfigError(f"unknown preset {preset!r}")


def _init_desk(out: Path, seed: int) -> Path:
    regions = []
    for i, (name, lat, floor, factor, industrial) in enumerate(DESK_REGIONS):
        wx = weather_mod.synth_cold_snap(DESK_DAYS, floor, seed + i,
                                         latitude_deg=lat)
        weather_mod.save_weather(wx, out / f"weather/{name}.csv")
        model = feeder_mod.generate_desk_feeder(
            f"{name}_1", n_nodes=30, seed=seed + 10 + i)
        feeder_mod.save_feeder(model, out / f"feeders/{name}_1.json")
        stats = PopulationStats(n_houses=200, latitude=lat, seed=seed + 20 + i)
        _write_json(out / f"populations/{name}.json", stats.to_json())
        regions.append({
            "name": name,
            "weather": f"weather/{name}.csv",
            "feeders": [f"feeders/{name}_1.json"],
            "population": f"populations/{name}.json",
            "scaling_factor": factor,
            "industrial_mw": industrial,
            "latitude": lat,
        })
    scenario_files = _emit_scenarios(out, seed)
    run = {
        "schema_version": RUN_SCHEMA_VERSION,
        "start": 0,
        "end": DESK_DAYS * 86400,
        "dt": 30,
        "seed": seed,
        "output_dir": "output",
        "scenarios": scenario_files,
        "regions": regions,
    }
    _write_json(out / "run.json", run)
    return out / "run.json"


def _init_paper_scale(out: Path, seed: int) -> Path:
    regions = []
    for i, (name, feeders, houses, factor, lat, industrial) \
            in enumerate(PAPER_REGIONS):
        floor = 8.0 + 1.5 * i
        wx = weather_mod.synth_cold_snap(DESK_DAYS, floor, seed + i,
                                         latitude_deg=lat)
        weather_mod.save_weather(wx, out / f"weather/{name}.csv")
        per_feeder = houses // len(feeders)
        feeder_files = []
        for j, label in enumerate(feeders):
            model = feeder_mod.generate_desk_feeder(
                f"{name}_{label}", n_nodes=40, seed=seed + 100 + 10 * i + j)
            rel = f"feeders/{name}_{label}.json"
            feeder_mod.save_feeder(model, out / rel)
            feeder_files.append(rel)
        stats = PopulationStats(n_houses=per_feeder, latitude=lat,
                                seed=seed + 200 + i)
        _write_json(out / f"populations/{name}.json", stats.to_json())
        regions.append({
            "name": name,
            "weather": f"weather/{name}.csv",
            "feeders": feeder_files,
            "population": f"populations/{name}.json",
            "scaling_factor": factor,
            "industrial_mw": industrial,
            "latitude": lat,
        })
    scenario_files = _emit_scenarios(out, seed)
    run = {
        "schema_version": RUN_SCHEMA_VERSION,
        "start": 0,
        "end": DESK_DAYS * 86400,
        "dt": 30,
        "seed": seed,
        "output_dir": "output",
        "scenarios": scenario_files,
        "regions": regions,
    }
    _write_json(out / "run.json", run)
    return out / "run.json"
