"""Two-node house thermal model, thermostat, HVAC electrics, water heater.

The building is a lumped air node coupled to a lumped mass node:

    C_A dT_A/dt = Q_A - U_A (T_A - T_O) - H_M (T_A - T_M)
    C_M dT_M/dt = H_M (T_A - T_M) + f_i Q_I + f_s Q_S

with Q_A = Q_H + (1 - f_i) Q_I + (1 - f_s) Q_S, i.e. the fractions f_i / f_s
of internal and solar gains bypass the air and land on the mass.  U_A is the
whole-envelope conductance including an infiltration term 0.018 * V * ACH
(0.018 Btu/ft^3/F is the volumetric heat capacity of air; the volume factor
is required for the units to close).

The per-step update is the exact constant-input solution of the 2x2 linear
system (closed-form matrix exponential), so results are independent of step
size for piecewise-constant inputs.  All heat quantities are Btu/h,
temperatures deg F, electrical power W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

BTU_PER_WH = 3.412          # Btu/h per electrical watt
AIR_HEAT_CAP_FT3 = 0.018    # Btu per ft^3 per deg F
LB_PER_GALLON = 8.34        # water, at 1 Btu/lb/F


class ThermalError(ValueError):
    """Invalid thermal parameters or a non-finite integration result."""


class HvacMode(IntEnum):
    OFF = 0
    HEAT = 1
    HEAT_AUX = 2
    COOL = 3


class HeatType(IntEnum):
    GAS = 0
    RESISTANCE = 1
    HEAT_PUMP = 2


@dataclass(frozen=True)
class ThermalEnvelope:
    """Geometry, insulation and thermal-mass parameters of one building.

    Areas in ft^2, R-values in F.ft^2.h/Btu, window U-value in
    Btu/(h.ft^2.F), volume in ft^3, heat capacities in Btu/F, mass
    conductance in Btu/(h.F).
    """

    area_walls: float
    r_walls: float
    area_ceilings: float
    r_ceilings: float
    area_floors: float
    r_floors: float
    area_doors: float
    r_doors: float
    area_windows: float
    u_windows: float
    ach: float
    volume: float
    air_heat_capacity: float
    mass_heat_capacity: float
    mass_conductance: float
    solar_mass_fraction: float = 0.5
    internal_mass_fraction: float = 0.5

    def __post_init__(self):
        for name in ("area_walls", "area_ceilings", "area_floors",
                     "area_doors", "area_windows", "u_windows", "ach",
                     "volume", "air_heat_capacity", "mass_heat_capacity",
                     "mass_conductance"):
            if getattr(self, name) < 0:
                raise ThermalError(f"{name} must be >= 0")
        for name in ("solar_mass_fraction", "internal_mass_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ThermalError(f"{name} must be in [0,1], got {v}")


@dataclass(frozen=True)
class HvacSystem:
    """Heating/cooling equipment and thermostat settings for one house."""

    heat_type: HeatType
    rated_heat_capacity: float       # Btu/h
    rated_cool_capacity: float = 0.0  # Btu/h, 0 = no cooling
    cop_rated: float = 3.8           # heating COP at 47 F (heat pumps)
    aux_capacity: float = 0.0        # Btu/h resistance backup (heat pumps)
    fan_power: float = 300.0         # W while running
    heat_setpoint: float = 70.0
    cool_setpoint: float = 76.0
    deadband: float = 2.0
    cool_cop: float = 3.5

    def __post_init__(self):
        if self.heat_type == HeatType.HEAT_PUMP and self.cop_rated < 1.0:
            raise ThermalError("heat pump cop_rated must be >= 1")
        if self.rated_cool_capacity > 0:
            if (self.heat_setpoint + self.deadband / 2.0
                    >= self.cool_setpoint - self.deadband / 2.0):
                raise ThermalError(
                    "heat and cool thermostat bands overlap")

    @property
    def has_cooling(self) -> bool:
        return self.rated_cool_capacity > 0


@dataclass(frozen=True)
class HvacOutput:
    """Heat delivered to the air node and the electrical draw producing it."""

    heat_to_air: float       # Btu/h, negative when cooling; excludes gas_heat
    electric_power: float    # W, >= 0
    gas_heat: float = 0.0    # Btu/h delivered non-electrically (gas systems)


@dataclass(frozen=True)
class InternalGains:
    q_internal: float  # Btu/h from non-HVAC equipment
    q_solar: float     # Btu/h through-window solar gain

    def __post_init__(self):
        if self.q_solar < 0:
            raise ThermalError("q_solar must be >= 0")


@dataclass(frozen=True)
class HouseState:
    air_temp: float
    mass_temp: float
    hvac_mode: HvacMode = HvacMode.OFF
    wh_temp: float = 130.0
    wh_on: bool = False


NO_GAINS = InternalGains(0.0, 0.0)
OFF_OUTPUT = HvacOutput(0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Envelope conductance and gain routing
# ---------------------------------------------------------------------------

def compute_ua(env: ThermalEnvelope) -> float:
    """Whole-envelope heat loss coefficient, Btu/(h.F).

    Zero-area components contribute nothing; a positive area with a zero
    R-value is rejected.
    """
    total = env.area_windows * env.u_windows
    for area, r, name in ((env.area_doors, env.r_doors, "doors"),
                          (env.area_walls, env.r_walls, "walls"),
                          (env.area_ceilings, env.r_ceilings, "ceilings"),
                          (env.area_floors, env.r_floors, "floors")):
        if area > 0:
            if r <= 0:
                raise ThermalError(f"{name}: area > 0 requires R > 0")
            total += area / r
    total += AIR_HEAT_CAP_FT3 * env.volume * env.ach
    return total


def compute_qa(hvac: HvacOutput, gains: InternalGains,
               env: ThermalEnvelope) -> float:
    """Total heat gain to the indoor air node, Btu/h."""
    return (hvac.heat_to_air + hvac.gas_heat
            + (1.0 - env.internal_mass_fraction) * gains.q_internal
            + (1.0 - env.solar_mass_fraction) * gains.q_solar)


# ---------------------------------------------------------------------------
# Exact two-node update
# ---------------------------------------------------------------------------

def _phi1(z):
    """(e^z - 1)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    out = np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(safe) / safe)
    return out


def etp_transition(ua, hm, ca, cm, dt_seconds):
    """Closed-form transition operators for the two-node system over a step.

    Returns (E, P) as tuples of four coefficient arrays each, such that

        [T_A'] = E [T_A] + P [b1]      b1 = (Q_A + U_A T_O) / C_A
        [T_M']     [T_M]     [b2]      b2 = (f_i Q_I + f_s Q_S) / C_M

    with b in deg F per hour (conductances are Btu/h based).  E = exp(A dt)
    and P = integral_0^dt exp(A s) ds for the state matrix A of the coupled
    ODEs, dt in hours internally.  Inputs broadcast, so one call serves a
    whole population of houses.

    The eigenvalues of A are real and distinct except in the fully decoupled
    limit (U_A = H_M = 0, A = 0), which falls back to a Taylor series.
    """
    ua = np.asarray(ua, dtype=float)
    hm = np.asarray(hm, dtype=float)
    ca = np.asarray(ca, dtype=float)
    cm = np.asarray(cm, dtype=float)
    if np.any(ca <= 0) or np.any(cm <= 0):
        raise ThermalError("heat capacities must be positive")
    if dt_seconds <= 0:
        raise ThermalError("dt must be positive")
    dt = dt_seconds / 3600.0  # conductance/capacity ratios are per hour

    a11 = -(ua + hm) / ca
    a12 = hm / ca
    a21 = hm / cm
    a22 = -hm / cm
    tr = a11 + a22
    det = ua * hm / (ca * cm)
    disc = np.maximum(tr * tr - 4.0 * det, 0.0)
    sq = np.sqrt(disc)

    lam1 = (tr + sq) / 2.0
    lam2 = (tr - sq) / 2.0
    degenerate = sq < 1e-14

    safe_sq = np.where(degenerate, 1.0, sq)
    e1 = np.exp(lam1 * dt)
    e2 = np.exp(lam2 * dt)
    g1 = dt * _phi1(lam1 * dt)
    g2 = dt * _phi1(lam2 * dt)

    # Lagrange form: f(A) = f(lam1)(A - lam2 I)/(lam1-lam2)
    #                     + f(lam2)(A - lam1 I)/(lam2-lam1)
    def lagrange(f1, f2):
        d = safe_sq
        c11 = (f1 * (a11 - lam2) - f2 * (a11 - lam1)) / d
        c12 = (f1 - f2) * a12 / d
        c21 = (f1 - f2) * a21 / d
        c22 = (f1 * (a22 - lam2) - f2 * (a22 - lam1)) / d
        return c11, c12, c21, c22

    E = lagrange(e1, e2)
    P = lagrange(g1, g2)

    if np.any(degenerate):
        # A ~ 0: second-order Taylor is exact to machine precision here.
        def taylor():
            i11 = 1.0 + a11 * dt + (a11 * a11 + a12 * a21) * dt * dt / 2.0
            i12 = a12 * dt + (a11 * a12 + a12 * a22) * dt * dt / 2.0
            i21 = a21 * dt + (a21 * a11 + a22 * a21) * dt * dt / 2.0
            i22 = 1.0 + a22 * dt + (a21 * a12 + a22 * a22) * dt * dt / 2.0
            p11 = dt * (1.0 + a11 * dt / 2.0)
            p12 = dt * (a12 * dt / 2.0)
            p21 = dt * (a21 * dt / 2.0)
            p22 = dt * (1.0 + a22 * dt / 2.0)
            return (i11, i12, i21, i22), (p11, p12, p21, p22)

        tE, tP = taylor()
        E = tuple(np.where(degenerate, t, e) for t, e in zip(tE, E))
        P = tuple(np.where(degenerate, t, p) for t, p in zip(tP, P))
    return E, P


def step_thermal(state: HouseState, env: ThermalEnvelope, t_out: float,
                 hvac: HvacOutput, gains: InternalGains,
                 dt: float) -> HouseState:
    """Advance (T_A, T_M) one step with inputs held constant across it."""
    ua = compute_ua(env)
    qa = compute_qa(hvac, gains, env)
    (e11, e12, e21, e22), (p11, p12, p21, p22) = etp_transition(
        ua, env.mass_conductance, env.air_heat_capacity,
        env.mass_heat_capacity, dt)
    b1 = (qa + ua * t_out) / env.air_heat_capacity
    b2 = (env.internal_mass_fraction * gains.q_internal
          + env.solar_mass_fraction * gains.q_solar) / env.mass_heat_capacity
    ta = float(e11 * state.air_temp + e12 * state.mass_temp
               + p11 * b1 + p12 * b2)
    tm = float(e21 * state.air_temp + e22 * state.mass_temp
               + p21 * b1 + p22 * b2)
    if not (math.isfinite(ta) and math.isfinite(tm)):
        raise ThermalError(
            f"non-finite thermal state (T_A={ta}, T_M={tm})")
    return replace(state, air_temp=ta, mass_temp=tm)


# ---------------------------------------------------------------------------
# Thermostat and equipment
# ---------------------------------------------------------------------------

AUX_LOCKOUT_F = 20.0  # aux strips allowed whenever heating below this t_out


def thermostat_decide(state: HouseState, sys: HvacSystem,
                      t_out: float) -> HvacMode:
    """Hysteresis control with auxiliary staging for heat pumps.

    Heating turns on below heat_setpoint - deadband/2 and off above
    heat_setpoint + deadband/2; cooling is symmetric about cool_setpoint.
    Inside a band the previous mode persists.  Heat pumps escalate to
    HEAT_AUX in deep cold or when the air node has fallen well below band.
    """
    ta = state.air_temp
    half = sys.deadband / 2.0
    heating = state.hvac_mode in (HvacMode.HEAT, HvacMode.HEAT_AUX)
    cooling = state.hvac_mode == HvacMode.COOL

    if heating:
        heat = ta <= sys.heat_setpoint + half
    else:
        heat = ta < sys.heat_setpoint - half
    if heat:
        if (sys.heat_type == HeatType.HEAT_PUMP and sys.aux_capacity > 0
                and (t_out < AUX_LOCKOUT_F
                     or ta < sys.heat_setpoint - 2.0 * sys.deadband)):
            return HvacMode.HEAT_AUX
        return HvacMode.HEAT

    if sys.has_cooling:
        if cooling:
            if ta >= sys.cool_setpoint - half:
                return HvacMode.COOL
        elif ta > sys.cool_setpoint + half:
            return HvacMode.COOL
    return HvacMode.OFF


def cop(sys: HvacSystem, t_out: float) -> float:
    """Heat-pump heating COP at outdoor temperature t_out.

    Piecewise-linear through (47 F, cop_rated) and (17 F, 0.6 cop_rated),
    extended with the same slope and clamped at 1.0, which makes it monotone
    nondecreasing over the operating range.
    """
    if sys.heat_type != HeatType.HEAT_PUMP:
        raise ThermalError("cop() applies to heat pumps only")
    slope = 0.4 * sys.cop_rated / 30.0
    return max(1.0, sys.cop_rated + slope * (t_out - 47.0))


def cap_derate(t_out: float) -> float:
    """Heat-pump capacity derate: 1.0 at 47 F down to 0.65 at 0 F."""
    return float(np.clip(0.65 + 0.35 * t_out / 47.0, 0.4, 1.0))


def hvac_output(sys: HvacSystem, mode: HvacMode, t_out: float) -> HvacOutput:
    """Heat delivery and electrical draw for a commanded mode."""
    if mode == HvacMode.OFF:
        return OFF_OUTPUT
    if mode == HvacMode.COOL:
        if not sys.has_cooling:
            raise ThermalError("Cool commanded on a system without cooling")
        q = -sys.rated_cool_capacity
        power = sys.rated_cool_capacity / (BTU_PER_WH * sys.cool_cop) \
            + sys.fan_power
        return HvacOutput(q, power)
    if mode == HvacMode.HEAT_AUX and sys.heat_type != HeatType.HEAT_PUMP:
        raise ThermalError("HeatAux commanded on a non-heat-pump system")

    if sys.heat_type == HeatType.GAS:
        return HvacOutput(0.0, sys.fan_power, gas_heat=sys.rated_heat_capacity)
    if sys.heat_type == HeatType.RESISTANCE:
        q = sys.rated_heat_capacity
        return HvacOutput(q, q / BTU_PER_WH + sys.fan_power)

    # Heat pump: derated compressor output, plus strips under HEAT_AUX.
    q = sys.rated_heat_capacity * cap_derate(t_out)
    power = q / (BTU_PER_WH * cop(sys, t_out)) + sys.fan_power
    if mode == HvacMode.HEAT_AUX:
        q += sys.aux_capacity
        power += sys.aux_capacity / BTU_PER_WH
    return HvacOutput(q, power)


# ---------------------------------------------------------------------------
# Water heater
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaterHeater:
    """Single-node electric tank with thermostat hysteresis."""

    tank_gallons: float = 50.0
    element_power: float = 4500.0   # W
    setpoint: float = 130.0
    deadband: float = 8.0
    standby_ua: float = 3.0         # Btu/(h.F) shell loss

    @property
    def tank_capacity(self) -> float:
        """Thermal capacity of the stored water, Btu/F."""
        return LB_PER_GALLON * self.tank_gallons


def step_waterheater(wh: WaterHeater, state: HouseState, draw_gpm: float,
                     inlet_temp: float, ambient: float,
                     dt: float) -> tuple[HouseState, float]:
    """Advance the tank one step; returns (new state, electric watts).

    The element decision is made on the entering temperature and held for
    the step; the temperature then follows the exact single-node exponential
    for constant inputs (standby loss plus draw-replacement mixing).
    """
    if dt <= 0:
        raise ThermalError("dt must be positive")
    if draw_gpm < 0:
        raise ThermalError("draw must be >= 0")
    half = wh.deadband / 2.0
    if state.wh_on:
        on = state.wh_temp <= wh.setpoint + half
    else:
        on = state.wh_temp < wh.setpoint - half

    cap = wh.tank_capacity
    mdot = draw_gpm * LB_PER_GALLON * 60.0          # Btu/(h.F) of throughput
    k = wh.standby_ua + mdot                        # Btu/(h.F)
    q_in = (wh.element_power * BTU_PER_WH if on else 0.0) \
        + wh.standby_ua * ambient + mdot * inlet_temp
    dt_h = dt / 3600.0
    if k > 0:
        t_ss = q_in / k
        new_t = t_ss + (state.wh_temp - t_ss) * math.exp(-k * dt_h / cap)
    else:
        new_t = state.wh_temp + q_in * dt_h / cap
    if not math.isfinite(new_t):
        raise ThermalError(f"non-finite tank temperature {new_t}")
    power = wh.element_power if on else 0.0
    return replace(state, wh_temp=new_t, wh_on=on), power
