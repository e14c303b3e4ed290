"""Sun position, daylight duration, clear-sky irradiance and shadow tests.

Solar geometry follows the standard fractional-year formulation
(declination + equation of time + hour angle), good to a fraction of a
degree, which is ample for energy bookkeeping at city scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .geo import NodeSite, ray_circle_interval, ray_rect_interval

CLEAR_SKY_WPM2 = 1000.0
# apparent sunrise/sunset: 0.833 deg of refraction + solar radius below horizon
RISE_SET_ZENITH_DEG = 90.833


@dataclass(frozen=True, slots=True)
class SunPosition:
    altitude: float  # degrees above horizon, [-90, 90]
    azimuth: float  # degrees clockwise from north, [0, 360)


@dataclass(frozen=True, slots=True)
class PanelSpec:
    """A horizontally mounted panel; rated power is at 1000 W/m^2 insolation."""

    rated_power_w: float = 6.0

    def __post_init__(self):
        if self.rated_power_w <= 0:
            raise ValueError("rated_power_w must be > 0")

    def harvest_w(self, irradiance_wpm2: float) -> float:
        return self.rated_power_w * irradiance_wpm2 / CLEAR_SKY_WPM2


def _fractional_year(doy, hour_utc):
    return 2.0 * math.pi / 365.0 * (doy - 1 + (hour_utc - 12.0) / 24.0)


def _declination_rad(g):
    return (0.006918 - 0.399912 * np.cos(g) + 0.070257 * np.sin(g)
            - 0.006758 * np.cos(2 * g) + 0.000907 * np.sin(2 * g)
            - 0.002697 * np.cos(3 * g) + 0.00148 * np.sin(3 * g))


def _equation_of_time_min(g):
    return 229.18 * (0.000075 + 0.001868 * np.cos(g) - 0.032077 * np.sin(g)
                     - 0.014615 * np.cos(2 * g) - 0.040849 * np.sin(2 * g))


def _to_utc(t: datetime) -> datetime:
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def sun_angles(lat: float, lon: float, base_utc: datetime, offsets_s) -> tuple[np.ndarray, np.ndarray]:
    """Altitude/azimuth in radians for base_utc + offsets_s (vectorized).

    Longitude is degrees east; offsets_s may be any array of seconds.
    """
    base = _to_utc(base_utc)
    off = np.asarray(offsets_s, dtype=np.float64)
    day0 = base.timetuple().tm_yday
    sec0 = base.hour * 3600 + base.minute * 60 + base.second
    total = sec0 + off
    doy = day0 + np.floor(total / 86400.0)
    sod = np.mod(total, 86400.0)
    hour = sod / 3600.0
    g = 2.0 * math.pi / 365.0 * (np.mod(doy - 1, 365.0) + (hour - 12.0) / 24.0)
    decl = _declination_rad(g)
    eqt = _equation_of_time_min(g)
    tst = sod / 60.0 + eqt + 4.0 * lon  # true solar time, minutes
    ha = np.radians(tst / 4.0 - 180.0)
    lat_r = math.radians(lat)
    sin_alt = (math.sin(lat_r) * np.sin(decl)
               + math.cos(lat_r) * np.cos(decl) * np.cos(ha))
    alt = np.arcsin(np.clip(sin_alt, -1.0, 1.0))
    az = np.arctan2(-np.sin(ha) * np.cos(decl),
                    math.cos(lat_r) * np.sin(decl)
                    - math.sin(lat_r) * np.cos(decl) * np.cos(ha))
    az = np.mod(az, 2.0 * math.pi)
    return alt, az


def sun_position(lat: float, lon: float, t: datetime) -> SunPosition:
    """Sun altitude/azimuth (degrees) at a UTC instant for a ground observer."""
    if abs(lat) > 90:
        raise ValueError("latitude outside [-90, 90]")
    alt, az = sun_angles(lat, lon, _to_utc(t), np.zeros(1))
    return SunPosition(float(np.degrees(alt[0])), float(np.degrees(az[0])))


def daylight_duration(lat: float, day: date) -> float:
    """Minutes between refraction-corrected sunrise and sunset on `day`."""
    if abs(lat) >= 66:
        raise ValueError("polar day/night latitudes are not supported")
    g = _fractional_year(day.timetuple().tm_yday, 12.0)
    decl = float(_declination_rad(g))
    lat_r = math.radians(lat)
    cos_h0 = ((math.cos(math.radians(RISE_SET_ZENITH_DEG))
               - math.sin(lat_r) * math.sin(decl))
              / (math.cos(lat_r) * math.cos(decl)))
    cos_h0 = min(1.0, max(-1.0, cos_h0))
    h0_deg = math.degrees(math.acos(cos_h0))
    return 8.0 * h0_deg  # hour angle sweeps 0.25 deg/minute, times two half-days


def irradiance(sun: SunPosition, cloud_attenuation: float = 0.0) -> float:
    """Horizontal-plane clear-sky irradiance, W/m^2, scaled by cloud attenuation."""
    if sun.altitude <= 0:
        return 0.0
    return max(0.0, math.sin(math.radians(sun.altitude))) * CLEAR_SKY_WPM2 * (1.0 - cloud_attenuation)


# -- shadow casting ----------------------------------------------------------


def shading_mask(px: float, py: float, panel_h: float, alt_rad, az_rad,
                 buildings, trees) -> np.ndarray:
    """Vectorized shadow test for one panel point over arrays of sun angles.

    True where the sun ray from the panel intersects any building volume or
    tree canopy cylinder. Entries with altitude <= 0 are returned False
    (night is dark, not shaded); callers gate on daytime themselves.
    """
    alt = np.asarray(alt_rad, dtype=np.float64)
    az = np.asarray(az_rad, dtype=np.float64)
    day = alt > 0
    dx = np.sin(az)
    dy = np.cos(az)
    tan_alt = np.tan(np.where(day, alt, 0.01))
    shaded = np.zeros(alt.shape, dtype=bool)
    for b in buildings:
        if b.height <= panel_h:
            t_in, t_out = ray_rect_interval(px, py, dx, dy, b.footprint)
            # a volume not above the panel can only shade if the panel is inside it
            inside = (t_in <= 0) & (t_out >= 0) & (b.height >= panel_h)
            shaded |= inside
            continue
        t_in, t_out = ray_rect_interval(px, py, dx, dy, b.footprint)
        s = np.maximum(t_in, 0.0)
        hit = (t_in <= t_out) & (t_out >= 0)
        shaded |= hit & (panel_h + s * tan_alt <= b.height)
    for t in trees:
        t_in, t_out = ray_circle_interval(px, py, dx, dy, t.center.x, t.center.y,
                                          t.canopy_radius)
        s = np.maximum(t_in, 0.0)
        hit = (t_in <= t_out) & (t_out >= 0)
        shaded |= hit & (panel_h + s * tan_alt <= t.height)
    return shaded & day


def is_shaded(site: NodeSite, sun: SunPosition, buildings, trees) -> bool:
    """Whether the site's panel is shaded by any occluder at this sun position."""
    if sun.altitude <= 0:
        raise ValueError("shading is only defined for daytime sun positions")
    mask = shading_mask(site.position.x, site.position.y, site.mount_height,
                        np.array([math.radians(sun.altitude)]),
                        np.array([math.radians(sun.azimuth)]),
                        buildings, trees)
    return bool(mask[0])


def _local_midnight_utc(day: date, lon: float) -> datetime:
    """Mean-solar local midnight, so a day's daylight is one contiguous block."""
    return (datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
            - timedelta(hours=lon / 15.0))


def shadow_minutes(site: NodeSite, day: date, buildings, trees,
                   origin_lat: float, origin_lon: float) -> int:
    """Count of daytime minutes (1-minute sampling) with the panel in shadow."""
    start = _local_midnight_utc(day, origin_lon)
    offsets = np.arange(1440) * 60.0
    alt, az = sun_angles(origin_lat, origin_lon, start, offsets)
    mask = shading_mask(site.position.x, site.position.y, site.mount_height,
                        alt, az, buildings, trees)
    return int(np.count_nonzero(mask))


def daytime_minutes(day: date, origin_lat: float, origin_lon: float) -> int:
    """Minutes with geometric sun altitude > 0 on the 1-minute scan grid."""
    start = _local_midnight_utc(day, origin_lon)
    offsets = np.arange(1440) * 60.0
    alt, _ = sun_angles(origin_lat, origin_lon, start, offsets)
    return int(np.count_nonzero(alt > 0))


def winter_solstice(year: int) -> date:
    """Shortest day of the year, taken as December 21 (calendar approximation)."""
    return date(year, 12, 21)


def summer_solstice(year: int) -> date:
    return date(year, 6, 21)


def shadow_report(city, day: date) -> list[dict]:
    """Per-site shadow minutes for one date: site_id, date, shadow and daylight minutes."""
    rows = []
    daylight = round(daylight_duration(city.origin_lat, day))
    for site in city.sites:
        rows.append({
            "site_id": site.id,
            "date": day.isoformat(),
            "shadow_minutes": shadow_minutes(site, day, city.buildings, city.trees,
                                             city.origin_lat, city.origin_lon),
            "daylight_minutes": daylight,
        })
    return rows


def write_shadow_report(rows, path) -> None:
    with open(path, "w") as f:
        f.write("site_id,date,shadow_minutes,daylight_minutes\n")
        for r in rows:
            f.write(f"{r['site_id']},{r['date']},{r['shadow_minutes']},{r['daylight_minutes']}\n")
