"""House population synthesis, region scaling, and region aggregation.

Populations are sampled from statistical targets (heating technology shares,
insulation vintages, floor-area spread, setpoints, DER penetrations) onto a
feeder's attachment nodes.  Sampling is fully seeded: the stream for a
feeder is derived from (master seed, population seed, feeder name), so the
same configuration always yields the same houses while different feeders
draw from independent streams.

Commercial premises are represented as scaled residential-equivalent blocks
(larger envelope, larger plug loads) rather than with a dedicated model.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .der import Battery, PvPanel
from .feeder import FeederModel
from .output import OutputSeries
from .thermal import (HeatType, HvacSystem, ThermalEnvelope, WaterHeater,
                      compute_ua)

POPULATION_SCHEMA_VERSION = 1


class PopulationError(ValueError):
    pass


def default_heating_shares() -> dict:
    # ERCOT-like winter mix: roughly a third of homes on gas heat, the rest
    # split between heat pumps and resistance strips.
    return {"Gas": 0.36, "HeatPump": 0.32, "Resistance": 0.32}


# Envelope R-value / tightness tables by construction vintage.
VINTAGE_TABLE = {
    "pre2000": {"r_walls": 11.0, "r_ceilings": 19.0, "r_floors": 13.0,
                "r_doors": 3.0, "u_windows": 0.80, "ach": 0.9},
    "post2000": {"r_walls": 19.0, "r_ceilings": 34.0, "r_floors": 19.0,
                 "r_doors": 5.0, "u_windows": 0.50, "ach": 0.45},
}

# BAU heat-pump rated-COP sampling range (heating COP at 47 F).
COP_RATED_RANGE = (3.4, 4.2)

# Auxiliary strip capacity as a fraction of rated heat-pump capacity.
AUX_FRACTION = 0.6

DEFAULT_ZIP_FRACTIONS = (0.2, 0.2, 0.6)
HVAC_POWER_FACTOR = 0.97
ZIP_POWER_FACTOR = 0.95

HALF_TON_BTUH = 6000.0


@dataclass(frozen=True)
class PopulationStats:
    """Statistical targets for synthesizing one feeder's housing stock."""

    n_houses: int = 200
    heating_shares: dict = field(default_factory=default_heating_shares)
    post2000_fraction: float = 0.4
    floor_area_mean: float = 2000.0
    floor_area_sd: float = 450.0
    design_temp_f: float = 5.0       # HVAC sizing outdoor design temperature
    sizing_oversize: float = 1.25
    setpoint_mean: float = 70.0
    setpoint_sd: float = 1.5
    wh_fraction: float = 0.55
    commercial_fraction: float = 0.08
    pv_penetration: float = 0.0
    battery_penetration: float = 0.0
    latitude: float = 32.8
    seed: int = 0

    def __post_init__(self):
        total = sum(self.heating_shares.values())
        if abs(total - 1.0) > 1e-9:
            raise PopulationError(f"heating shares must sum to 1, got {total}")
        for name in ("pv_penetration", "battery_penetration", "wh_fraction",
                     "commercial_fraction", "post2000_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PopulationError(f"{name} must be in [0,1], got {v}")
        if self.n_houses < 1:
            raise PopulationError("n_houses must be >= 1")

    def to_json(self) -> dict:
        d = {f: getattr(self, f) for f in (
            "n_houses", "post2000_fraction", "floor_area_mean",
            "floor_area_sd", "design_temp_f", "sizing_oversize",
            "setpoint_mean", "setpoint_sd", "wh_fraction",
            "commercial_fraction", "pv_penetration", "battery_penetration",
            "latitude", "seed")}
        d["heating_shares"] = dict(self.heating_shares)
        d["schema_version"] = POPULATION_SCHEMA_VERSION
        return d

    @classmethod
    def from_json(cls, data: dict) -> "PopulationStats":
        version = data.get("schema_version")
        if version != POPULATION_SCHEMA_VERSION:
            raise PopulationError(
                f"unsupported population schema version {version!r}")
        kwargs = {k: v for k, v in data.items() if k != "schema_version"}
        return cls(**kwargs)


@dataclass(frozen=True)
class House:
    """One premise: envelope, equipment, plug loads, optional DERs."""

    index: int
    node: str
    envelope: ThermalEnvelope
    hvac: HvacSystem
    water_heater: WaterHeater | None
    wh_draw_scale: float
    wh_offset_s: float
    zip_base_kw: float
    zip_fractions: tuple = DEFAULT_ZIP_FRACTIONS
    floor_area: float = 2000.0
    latitude: float = 32.8
    is_commercial: bool = False
    pv: PvPanel | None = None
    battery: Battery | None = None


def feeder_stream(master_seed: int, pop_seed: int, feeder_name: str):
    """Independent, reproducible random stream for one feeder."""
    crc = zlib.crc32(feeder_name.encode("utf-8"))
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(pop_seed), crc]))


def _sample_envelope(rng, floor_area: float, vintage: str) -> ThermalEnvelope:
    table = VINTAGE_TABLE[vintage]
    stories = 1 if rng.random() < 0.7 else 2
    footprint = floor_area / stories
    side = math.sqrt(footprint)
    gross_wall = 4.0 * side * 8.0 * stories
    window_area = 0.15 * gross_wall
    door_area = 42.0
    wall_area = max(gross_wall - window_area - door_area, 0.0)
    volume = floor_area * 8.0
    jitter = rng.uniform(0.9, 1.1)
    air_cap = 3.0 * 0.018 * volume          # air plus light furnishings
    return ThermalEnvelope(
        area_walls=wall_area, r_walls=table["r_walls"] * jitter,
        area_ceilings=footprint, r_ceilings=table["r_ceilings"] * jitter,
        area_floors=footprint, r_floors=table["r_floors"] * jitter,
        area_doors=door_area, r_doors=table["r_doors"],
        area_windows=window_area, u_windows=table["u_windows"] / jitter,
        ach=table["ach"] * rng.uniform(0.9, 1.1),
        volume=volume,
        air_heat_capacity=air_cap,
        mass_heat_capacity=5.0 * air_cap,
        mass_conductance=2.9 * floor_area,
    )


def size_hvac_btuh(ua: float, setpoint: float, design_temp: float,
                   oversize: float) -> float:
    """Design-heat-loss sizing rounded up to half-ton increments."""
    design_load = ua * max(setpoint - design_temp, 10.0) * oversize
    return math.ceil(design_load / HALF_TON_BTUH) * HALF_TON_BTUH


def _sample_hvac(rng, heat_name: str, envelope: ThermalEnvelope,
                 setpoint: float, stats: PopulationStats) -> HvacSystem:
    ua = compute_ua(envelope)
    capacity = size_hvac_btuh(ua, setpoint, stats.design_temp_f,
                              stats.sizing_oversize)
    heat_type = {"Gas": HeatType.GAS, "Resistance": HeatType.RESISTANCE,
                 "HeatPump": HeatType.HEAT_PUMP}[heat_name]
    cop_rated = float(rng.uniform(*COP_RATED_RANGE))
    aux = AUX_FRACTION * capacity if heat_type == HeatType.HEAT_PUMP else 0.0
    return HvacSystem(
        heat_type=heat_type,
        rated_heat_capacity=capacity,
        rated_cool_capacity=capacity,
        cop_rated=cop_rated if heat_type == HeatType.HEAT_PUMP else 1.0,
        aux_capacity=aux,
        fan_power=float(rng.uniform(230.0, 330.0)),
        heat_setpoint=setpoint,
        cool_setpoint=setpoint + 6.0,
        deadband=2.0,
    )


def populate(stats: PopulationStats, feeder: FeederModel,
             master_seed: int = 0) -> list:
    """Sample ``stats.n_houses`` houses round-robin over attachment nodes."""
    nodes = feeder.attachment_nodes
    if not nodes:
        raise PopulationError(
            f"feeder {feeder.name!r} has no attachment nodes")
    rng = feeder_stream(master_seed, stats.seed, feeder.name)
    share_names = sorted(stats.heating_shares)
    share_probs = np.array([stats.heating_shares[k] for k in share_names])

    houses = []
    for i in range(stats.n_houses):
        is_commercial = rng.random() < stats.commercial_fraction
        floor_area = float(np.clip(
            rng.normal(stats.floor_area_mean, stats.floor_area_sd),
            1000.0, 3800.0))
        if is_commercial:
            floor_area *= 4.0
        vintage = "post2000" if rng.random() < stats.post2000_fraction \
            else "pre2000"
        envelope = _sample_envelope(rng, floor_area, vintage)
        setpoint = float(np.clip(
            rng.normal(stats.setpoint_mean, stats.setpoint_sd), 66.0, 74.0))
        heat_name = share_names[int(rng.choice(len(share_names),
                                               p=share_probs))]
        hvac = _sample_hvac(rng, heat_name, envelope, setpoint, stats)

        has_wh = (not is_commercial) and rng.random() < stats.wh_fraction
        water_heater = WaterHeater(
            tank_gallons=float(rng.uniform(45.0, 55.0)),
            setpoint=float(rng.uniform(125.0, 135.0)),
        ) if has_wh else None

        zip_base = float(rng.uniform(0.35, 0.9))
        if is_commercial:
            zip_base *= 6.0

        houses.append(House(
            index=i,
            node=nodes[i % len(nodes)],
            envelope=envelope,
            hvac=hvac,
            water_heater=water_heater,
            wh_draw_scale=float(rng.uniform(0.7, 1.3)),
            wh_offset_s=float(rng.uniform(0.0, 7200.0)),
            zip_base_kw=zip_base,
            floor_area=floor_area,
            latitude=stats.latitude,
            is_commercial=is_commercial,
        ))

    # DER penetrations at population time (scenarios usually add these).
    if stats.pv_penetration > 0 or stats.battery_penetration > 0:
        from . import scenario as _scenario
        if stats.pv_penetration > 0:
            houses = _scenario.add_pv(houses, rng, stats.pv_penetration)
        if stats.battery_penetration > 0:
            houses = _scenario.add_batteries(houses, rng,
                                             stats.battery_penetration)
    return houses


def attach(feeder: FeederModel, houses: list) -> FeederModel:
    """Return the feeder with its attachment map filled from the houses."""
    attachments = {nid: [] for nid in feeder.attachment_nodes}
    for h in houses:
        if h.node not in attachments:
            raise PopulationError(
                f"house {h.index} attached to unknown node {h.node!r}")
        attachments[h.node].append(h.index)
    return replace_feeder_attachments(feeder, attachments)


def replace_feeder_attachments(feeder: FeederModel,
                               attachments: dict) -> FeederModel:
    return FeederModel(name=feeder.name, nodes=list(feeder.nodes),
                       lines=list(feeder.lines), source=feeder.source,
                       source_pu=feeder.source_pu,
                       transformers=list(feeder.transformers),
                       attachments=attachments, base_kva=feeder.base_kva)


# ---------------------------------------------------------------------------
# Region scaling and aggregation
# ---------------------------------------------------------------------------

def scaling_factor(total_customers: float, residential_fraction: float,
                   n_modeled: int) -> float:
    """Population scale-up: customers / (residential fraction x modeled)."""
    if total_customers <= 0 or residential_fraction <= 0 or n_modeled <= 0:
        raise PopulationError("scaling factor inputs must be positive")
    return total_customers / (residential_fraction * n_modeled)


@dataclass(frozen=True)
class RegionConfig:
    """One modeled region: weather, feeders, population, and scale-up."""

    name: str
    weather_file: str
    feeders: tuple
    stats: PopulationStats
    scaling_factor: float = 1.0
    industrial_mw: float = 0.0
    latitude: float = 32.8

    def __post_init__(self):
        if self.scaling_factor <= 0:
            raise PopulationError("scaling_factor must be positive")


def aggregate_region(feeder_outputs: list, config: RegionConfig) -> OutputSeries:
    """Scale the summed feeder series to region level, add industrial block.

    Violation counts are diagnostics of the modeled feeders and are summed
    without scaling.
    """
    if not feeder_outputs:
        raise PopulationError("no feeder outputs to aggregate")
    n = len(feeder_outputs[0])
    total = OutputSeries.zeros(n)
    for out in feeder_outputs:
        if len(out) != n:
            raise PopulationError("feeder outputs on mismatched grids")
        total = total + out
    scaled = total.scaled(config.scaling_factor)
    scaled.industrial_mw = scaled.industrial_mw + config.industrial_mw
    scaled.total_mw = scaled.total_mw + config.industrial_mw
    return scaled
