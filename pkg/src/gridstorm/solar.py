"""Solar-position geometry and a clear-sky irradiance model.

Shared by the synthetic weather generator (clear-sky GHI) and the rooftop PV
model (plane-of-array transposition).  Angles follow the usual conventions:
solar azimuth measured clockwise from north, panel azimuth likewise
(180 deg = south-facing), tilt measured from horizontal.

Timestamps are run-local seconds; ``day_of_year0`` anchors the run epoch on
the calendar so the declination is meaningful.  Hour-of-day is interpreted as
local solar time (no equation-of-time correction; the simulator does not care
about a few minutes of noon skew).
"""

from __future__ import annotations

import numpy as np

# Default epoch anchor: around Feb 9 (day 40), matching a mid-February event.
DEFAULT_DAY_OF_YEAR = 40.0

# Clear-sky GHI envelope, W/m^2 at cos(zenith) = 1, plus an airmass-ish exponent.
_CLEAR_SKY_PEAK = 950.0
_CLEAR_SKY_EXPONENT = 1.15


def declination_deg(day_of_year):
    """Solar declination (degrees) via the Cooper approximation."""
    return 23.45 * np.sin(2.0 * np.pi * (284.0 + day_of_year) / 365.0)


def hour_angle_deg(t_seconds):
    """Hour angle (degrees), 0 at local solar noon, 15 deg per hour."""
    hour = (np.asarray(t_seconds) % 86400.0) / 3600.0
    return (hour - 12.0) * 15.0


def sun_position(latitude_deg, t_seconds, day_of_year0=DEFAULT_DAY_OF_YEAR):
    """Return (cos_zenith, azimuth_deg) of the sun at run-local time t.

    cos_zenith is negative when the sun is below the horizon.
    """
    t = np.asarray(t_seconds, dtype=float)
    n = day_of_year0 + t / 86400.0
    decl = np.radians(declination_deg(n))
    lat = np.radians(latitude_deg)
    ha = np.radians(hour_angle_deg(t))

    cos_zen = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha)
    sin_zen = np.sqrt(np.maximum(0.0, 1.0 - cos_zen**2))

    # Azimuth from north, clockwise; guard the polar/noon singularity.
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_az = (np.sin(decl) - cos_zen * np.sin(lat)) / np.where(
            sin_zen * np.cos(lat) == 0.0, np.nan, sin_zen * np.cos(lat)
        )
    cos_az = np.clip(np.nan_to_num(cos_az, nan=1.0), -1.0, 1.0)
    az = np.degrees(np.arccos(cos_az))
    az = np.where(ha > 0.0, 360.0 - az, az)
    return cos_zen, az


def clear_sky_ghi(latitude_deg, t_seconds, day_of_year0=DEFAULT_DAY_OF_YEAR):
    """Idealized cloud-free global horizontal irradiance, W/m^2 (0 at night)."""
    cos_zen, _ = sun_position(latitude_deg, t_seconds, day_of_year0)
    return _CLEAR_SKY_PEAK * np.maximum(0.0, cos_zen) ** _CLEAR_SKY_EXPONENT


def poa_irradiance(ghi, tilt_deg, azimuth_deg, latitude_deg, t_seconds,
                   day_of_year0=DEFAULT_DAY_OF_YEAR):
    """Transpose GHI onto a tilted plane, beam-dominated clear-sky model.

    The measured GHI is treated as beam irradiance on the horizontal, so the
    plane-of-array value is GHI * cos(AOI)/cos(zenith).  The ratio is clamped
    near the horizon (cos zenith floor at cos 85 deg) and at zero when the sun
    is behind the panel or below the horizon.  At tilt 0 this returns GHI
    exactly.
    """
    ghi = np.asarray(ghi, dtype=float)
    cos_zen, sun_az = sun_position(latitude_deg, t_seconds, day_of_year0)
    tilt = np.radians(tilt_deg)
    cos_aoi = (
        np.cos(tilt) * cos_zen
        + np.sin(tilt)
        * np.sqrt(np.maximum(0.0, 1.0 - cos_zen**2))
        * np.cos(np.radians(sun_az - azimuth_deg))
    )
    ratio = np.maximum(0.0, cos_aoi) / np.maximum(cos_zen, 0.0871557)
    return np.where(cos_zen > 0.0, ghi * ratio, 0.0)
