"""Case definitions: declarative transformations of a base population.

Each case is a composition of independent stages (electrify gas heat,
convert resistance to heat pumps, improve insulation, add PV, add
batteries).  Every stage draws from its own seeded stream keyed by
(seed, stage), so compositions commute with the stand-alone cases:
applying Case1c equals applying the insulation stage to the heat-pump
stage of Case1, draw for draw.

Cases:
    BAU     baseline population, untouched
    Case1   all gas heating converted to electric, split evenly between
            heat pumps and resistance
    Case1a  Case1 plus insulation retrofits (R-value multipliers)
    Case1b  Case1 plus full conversion of resistance heat to heat pumps
    Case1c  Case1b plus the insulation retrofits
    Case2   rooftop PV on a fraction of houses (default 40%)
    Case2a  Case2 plus behind-the-meter batteries (default 50%, max one
            per house)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import der
from .population import COP_RATED_RANGE, AUX_FRACTION, House
from .thermal import HeatType

SCENARIO_SCHEMA_VERSION = 1

CASES = ("BAU", "Case1", "Case1a", "Case1b", "Case1c", "Case2", "Case2a")

# Stage salts for seed splitting; shared stages share draws across cases.
_STAGE_ELECTRIFY = 1
_STAGE_HEATPUMP = 2
_STAGE_INSULATE = 3
_STAGE_PV = 4
_STAGE_BATTERY = 5

DEFAULT_R_MULT_RANGE = (1.229, 1.639)
DEFAULT_PV_PENETRATION = 0.40
DEFAULT_BATTERY_PENETRATION = 0.50
DEFAULT_PV_KW_RANGE = (4.0, 8.0)
DEFAULT_BATTERY_KWH = 13.5
DEFAULT_BATTERY_KW = 5.0
DEFAULT_BATTERY_RANGE = 0.20

_KNOWN_OVERRIDES = {
    "heating_shares", "r_mult_low", "r_mult_high", "pv_penetration",
    "battery_penetration", "pv_kw_low", "pv_kw_high", "battery_kwh_mean",
    "battery_kw_mean", "battery_range_frac",
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    case_id: str
    overrides: dict = field(default_factory=dict)

    def get(self, key, default):
        return self.overrides.get(key, default)


def validate_spec(spec: ScenarioSpec) -> list:
    """Consistency diagnostics; an empty list means the spec is usable."""
    diags = []
    if spec.case_id not in CASES:
        diags.append(f"unknown case id {spec.case_id!r}; "
                     f"expected one of {', '.join(CASES)}")
    for key in spec.overrides:
        if key not in _KNOWN_OVERRIDES:
            diags.append(f"unknown override {key!r}")
    for key in ("pv_penetration", "battery_penetration"):
        if key in spec.overrides:
            v = spec.overrides[key]
            if not 0.0 <= v <= 1.0:
                diags.append(f"{key} out of [0,1]: {v}")
    lo = spec.get("r_mult_low", DEFAULT_R_MULT_RANGE[0])
    hi = spec.get("r_mult_high", DEFAULT_R_MULT_RANGE[1])
    if not 1.0 <= lo <= hi:
        diags.append(f"R multiplier range invalid: [{lo}, {hi}]")
    shares = spec.overrides.get("heating_shares")
    if shares is not None:
        total = sum(shares.values())
        if abs(total - 1.0) > 1e-9:
            diags.append(f"heating shares sum to {total}, expected 1")
        if spec.case_id in ("Case1b", "Case1c") \
                and shares.get("Resistance", 0.0) > 0.0:
            diags.append(f"{spec.case_id} requires zero resistance share")
        if spec.case_id in ("Case1", "Case1a", "Case1b", "Case1c") \
                and shares.get("Gas", 0.0) > 0.0:
            diags.append(f"{spec.case_id} requires zero gas share")
    return diags


def _stage_rng(seed: int, stage: int):
    return np.random.default_rng(np.random.SeedSequence([int(seed), stage]))


def _bau_cop_pool(houses) -> list:
    pool = sorted(h.hvac.cop_rated for h in houses
                  if h.hvac.heat_type == HeatType.HEAT_PUMP)
    return pool


def _as_heat_pump(house: House, cop_rated: float) -> House:
    hvac = replace(house.hvac, heat_type=HeatType.HEAT_PUMP,
                   cop_rated=cop_rated,
                   aux_capacity=AUX_FRACTION * house.hvac.rated_heat_capacity)
    return replace(house, hvac=hvac)


def _as_resistance(house: House) -> House:
    hvac = replace(house.hvac, heat_type=HeatType.RESISTANCE,
                   cop_rated=1.0, aux_capacity=0.0)
    return replace(house, hvac=hvac)


def electrify(houses, rng, cop_pool=None) -> list:
    """Convert every gas house to electric heat, HP or strips at a coin flip.

    Converted heat pumps draw their rated COP from the baseline heat-pump
    distribution so the technology mix shifts without an efficiency bias.
    """
    pool = cop_pool if cop_pool else _bau_cop_pool(houses)
    out = []
    for h in houses:
        if h.hvac.heat_type == HeatType.GAS:
            if rng.random() < 0.5:
                cop = float(rng.choice(pool)) if pool \
                    else float(rng.uniform(*COP_RATED_RANGE))
                out.append(_as_heat_pump(h, cop))
            else:
                out.append(_as_resistance(h))
        else:
            out.append(h)
    return out


def to_heat_pumps(houses, rng, cop_pool=None) -> list:
    """Convert all resistance heating to heat pumps (baseline COP draws)."""
    pool = cop_pool if cop_pool else _bau_cop_pool(houses)
    out = []
    for h in houses:
        if h.hvac.heat_type == HeatType.RESISTANCE:
            cop = float(rng.choice(pool)) if pool \
                else float(rng.uniform(*COP_RATED_RANGE))
            out.append(_as_heat_pump(h, cop))
        else:
            out.append(h)
    return out


def improve_insulation(houses, rng,
                       mult_range=DEFAULT_R_MULT_RANGE) -> list:
    """Scale each house's R-valued components by one per-house multiplier.

    Windows (U-valued) and infiltration (air exchange) are not R-valued
    components and are left alone; equipment sizing is also untouched, as a
    retrofit does not replace the furnace.
    """
    lo, hi = mult_range
    out = []
    for h in houses:
        m = float(rng.uniform(lo, hi))
        env = replace(h.envelope,
                      r_walls=h.envelope.r_walls * m,
                      r_ceilings=h.envelope.r_ceilings * m,
                      r_floors=h.envelope.r_floors * m,
                      r_doors=h.envelope.r_doors * m)
        out.append(replace(h, envelope=env))
    return out


def add_pv(houses, rng, penetration=DEFAULT_PV_PENETRATION,
           kw_range=DEFAULT_PV_KW_RANGE) -> list:
    """Put rooftop PV on a seeded sample of houses (without replacement)."""
    n = len(houses)
    n_pv = int(round(penetration * n))
    chosen = set(rng.choice(n, size=n_pv, replace=False).tolist()) \
        if n_pv else set()
    out = []
    for i, h in enumerate(houses):
        if i in chosen:
            panel = der.PvPanel(
                rated_dc=float(rng.uniform(*kw_range)),
                tilt=float(rng.uniform(10.0, 40.0)),
                azimuth=float(rng.uniform(90.0, 270.0)),
                derate=0.86,
                latitude=h.latitude,
            )
            out.append(replace(h, pv=panel))
        else:
            out.append(h)
    return out


def add_batteries(houses, rng, penetration=DEFAULT_BATTERY_PENETRATION,
                  kwh_mean=DEFAULT_BATTERY_KWH, kw_mean=DEFAULT_BATTERY_KW,
                  range_frac=DEFAULT_BATTERY_RANGE) -> list:
    """Behind-the-meter batteries on a seeded sample, at most one per house.

    Ratings are uniform within +/- range_frac of the fleet mean; schedules
    share the utility base windows with a per-battery time skew.  Batteries
    enter the simulation fully charged (utility pre-event positioning).
    """
    n = len(houses)
    n_batt = int(round(penetration * n))
    chosen = set(rng.choice(n, size=n_batt, replace=False).tolist()) \
        if n_batt else set()
    out = []
    for i, h in enumerate(houses):
        if i in chosen and h.battery is None:
            scale = float(rng.uniform(1.0 - range_frac, 1.0 + range_frac))
            schedule = der.make_schedule(
                der.DispatchSchedule(), int(rng.integers(0, 2**31 - 1)))
            batt = der.Battery(
                energy_capacity=kwh_mean * scale,
                power_rating=kw_mean * scale,
                soc=kwh_mean * scale,
                schedule=schedule,
            )
            out.append(replace(h, battery=batt))
        else:
            out.append(h)
    return out


def apply_scenario(base, spec: ScenarioSpec, seed: int) -> list:
    """Transform a base population into the requested case.

    Never changes the number of houses or their feeder attachments, and is
    deterministic for a fixed (base, spec, seed).
    """
    if not base:
        raise ScenarioError("base population is empty")
    if spec.case_id not in CASES:
        raise ScenarioError(f"unknown case id {spec.case_id!r}")
    diags = validate_spec(spec)
    if diags:
        raise ScenarioError("; ".join(diags))

    houses = list(base)
    cop_pool = _bau_cop_pool(houses)
    case = spec.case_id
    r_range = (spec.get("r_mult_low", DEFAULT_R_MULT_RANGE[0]),
               spec.get("r_mult_high", DEFAULT_R_MULT_RANGE[1]))

    if case in ("Case1", "Case1a", "Case1b", "Case1c"):
        houses = electrify(houses, _stage_rng(seed, _STAGE_ELECTRIFY),
                           cop_pool)
    if case in ("Case1b", "Case1c"):
        houses = to_heat_pumps(houses, _stage_rng(seed, _STAGE_HEATPUMP),
                               cop_pool)
    if case in ("Case1a", "Case1c"):
        houses = improve_insulation(houses, _stage_rng(seed, _STAGE_INSULATE),
                                    r_range)
    if case in ("Case2", "Case2a"):
        houses = add_pv(houses, _stage_rng(seed, _STAGE_PV),
                        spec.get("pv_penetration", DEFAULT_PV_PENETRATION),
                        (spec.get("pv_kw_low", DEFAULT_PV_KW_RANGE[0]),
                         spec.get("pv_kw_high", DEFAULT_PV_KW_RANGE[1])))
    if case == "Case2a":
        houses = add_batteries(
            houses, _stage_rng(seed, _STAGE_BATTERY),
            spec.get("battery_penetration", DEFAULT_BATTERY_PENETRATION),
            spec.get("battery_kwh_mean", DEFAULT_BATTERY_KWH),
            spec.get("battery_kw_mean", DEFAULT_BATTERY_KW),
            spec.get("battery_range_frac", DEFAULT_BATTERY_RANGE))
    return houses


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

def spec_to_json(spec: ScenarioSpec, seed: int) -> dict:
    return {"schema_version": SCENARIO_SCHEMA_VERSION, "case": spec.case_id,
            "overrides": dict(spec.overrides), "seed": int(seed)}


def spec_from_json(data: dict) -> tuple:
    """Returns (ScenarioSpec, seed)."""
    version = data.get("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported scenario schema version {version!r}")
    if "case" not in data:
        raise ScenarioError("scenario file missing 'case'")
    return (ScenarioSpec(case_id=data["case"],
                         overrides=dict(data.get("overrides", {}))),
            int(data.get("seed", 0)))


def load_scenario(path) -> tuple:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    return spec_from_json(json.loads(path.read_text()))


def save_scenario(spec: ScenarioSpec, seed: int, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(spec_to_json(spec, seed), indent=2) + "\n")
