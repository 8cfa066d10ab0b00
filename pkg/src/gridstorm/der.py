"""Rooftop PV and behind-the-meter battery storage.

PV uses a clear-sky plane-of-array transposition of GHI with a linear cell
temperature derate; batteries are DC energy buckets behind an inverter with
separate charge/discharge efficiencies and a utility-issued daily schedule,
individually skewed in time so a fleet does not switch as one block.
Both operate at unity power factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from . import solar


class DerError(ValueError):
    pass


# ---------------------------------------------------------------------------
# PV
# ---------------------------------------------------------------------------

TEMP_COEFF_PER_C = 0.004       # output loss per deg C of cell above 25 C
CELL_RISE_C_AT_1SUN = 25.0     # cell temperature rise above ambient at 1 kW/m^2


@dataclass(frozen=True)
class PvPanel:
    rated_dc: float                # kW
    tilt: float                    # degrees from horizontal
    azimuth: float                 # degrees clockwise from north
    derate: float = 0.86           # DC->AC system derate
    latitude: float = 32.8
    day_of_year0: float = solar.DEFAULT_DAY_OF_YEAR

    def __post_init__(self):
        if self.rated_dc <= 0:
            raise DerError("rated_dc must be positive")
        if not 0.0 <= self.tilt <= 90.0:
            raise DerError("tilt must be in [0, 90]")
        if not 0.0 <= self.azimuth < 360.0:
            raise DerError("azimuth must be in [0, 360)")
        if not 0.0 < self.derate <= 1.0:
            raise DerError("derate must be in (0, 1]")


def temp_factor(temperature_f, ghi_wm2):
    """Linear cell-temperature output factor (1.0 at or below 25 C cell)."""
    ambient_c = (np.asarray(temperature_f, dtype=float) - 32.0) * 5.0 / 9.0
    cell_c = ambient_c + CELL_RISE_C_AT_1SUN * np.asarray(ghi_wm2) / 1000.0
    return 1.0 - TEMP_COEFF_PER_C * np.maximum(0.0, cell_c - 25.0)


def pv_power(panel: PvPanel, sample, time: float) -> float:
    """AC power at the meter, kW, clamped to [0, rated_dc]."""
    ghi = sample.ghi_wm2
    if ghi <= 0.0:
        return 0.0
    poa = solar.poa_irradiance(ghi, panel.tilt, panel.azimuth, panel.latitude,
                               time, panel.day_of_year0)
    tf = temp_factor(sample.temperature_f, ghi)
    p = panel.rated_dc * panel.derate * (float(poa) / 1000.0) * float(tf)
    return float(min(max(p, 0.0), panel.rated_dc))


# ---------------------------------------------------------------------------
# Battery
# ---------------------------------------------------------------------------

class Command(IntEnum):
    IDLE = 0
    CHARGE = 1
    DISCHARGE = 2


MAX_SKEW_S = 7200


@dataclass(frozen=True)
class DispatchSchedule:
    """Daily command blocks (hour-of-day windows) plus a per-battery skew.

    The default base charges 10:00-15:00 and discharges 18:00-23:00, i.e.
    soak up midday solar, give it back across the evening.
    """

    windows: tuple = (
        (10.0, 15.0, Command.CHARGE),
        (18.0, 23.0, Command.DISCHARGE),
    )
    skew: float = 0.0  # seconds

    def __post_init__(self):
        if abs(self.skew) > MAX_SKEW_S:
            raise DerError(f"|skew| must be <= {MAX_SKEW_S} s")

    def command(self, time: float) -> Command:
        hour = ((time + self.skew) % 86400.0) / 3600.0
        for start, end, cmd in self.windows:
            if start <= hour < end:
                return Command(cmd)
        return Command.IDLE


def make_schedule(base: DispatchSchedule, seed: int) -> DispatchSchedule:
    """Copy of base with a uniformly drawn skew in [-7200, +7200] s."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xba77]))
    skew = float(rng.uniform(-MAX_SKEW_S, MAX_SKEW_S))
    return replace(base, skew=skew)


@dataclass(frozen=True)
class Battery:
    """DC electro-chemical store behind an inverter, utility-scheduled."""

    energy_capacity: float          # kWh (DC)
    power_rating: float             # kW (AC)
    soc: float                      # kWh (DC)
    discharge_eff: float = 0.96
    charge_eff: float = 0.96
    inverter_eff: float = 0.98
    schedule: DispatchSchedule = field(default_factory=DispatchSchedule)

    def __post_init__(self):
        if not 0.0 <= self.soc <= self.energy_capacity:
            raise DerError("soc must lie in [0, energy_capacity]")
        for name in ("discharge_eff", "charge_eff", "inverter_eff"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DerError(f"{name} must be in (0, 1]")


def battery_step(b: Battery, time: float, dt: float) -> tuple[Battery, float]:
    """Advance one step; returns (battery, meter kW, + = load).

    Commands that would push the state of charge past a bound are tapered to
    exactly hit the bound, never clipped after the fact.
    """
    if dt <= 0:
        raise DerError("dt must be positive")
    cmd = b.schedule.command(time)
    dt_h = dt / 3600.0
    eta_in = b.inverter_eff * b.charge_eff     # AC -> DC
    eta_out = b.inverter_eff * b.discharge_eff  # DC -> AC

    if cmd == Command.CHARGE:
        headroom = b.energy_capacity - b.soc
        p_ac = min(b.power_rating, headroom / (eta_in * dt_h))
        if p_ac <= 0.0:
            return b, 0.0
        return replace(b, soc=b.soc + p_ac * eta_in * dt_h), p_ac
    if cmd == Command.DISCHARGE:
        p_ac = min(b.power_rating, b.soc * eta_out / dt_h)
        if p_ac <= 0.0:
            return b, 0.0
        return replace(b, soc=b.soc - p_ac / eta_out * dt_h), -p_ac
    return b, 0.0
