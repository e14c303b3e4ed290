"""Bundled presets: the chicago-like city and the year-long default scenario.

The default scenario is a calibrated artifact: the seeds, storm calendar and
outage schedule below are frozen constants. Outage days are spread one per
weekday with hour-rotated windows so delayed readings stay uncorrelated with
clock features, and they sit before the storm season so every node is awake.
"""
from __future__ import annotations

from datetime import datetime

import numpy as np

from .citygen import CityGenConfig, generate_city
from .engine import OutageWindow, ScenarioConfig
from .geo import CityModel
from .power import PowerParams
from .radio import RadioParams
from .solar import PanelSpec

CITY_SEED = 20210703
MASTER_SEED = 7
WEATHER_SEED = 11
SCENARIO_START = datetime(2021, 7, 3)
SCENARIO_DAYS = 365

# blockage high enough that a ring-walled site is beyond rescue by shadowing,
# which is what makes the constructed dead zones absolute
DEFAULT_BLOCKAGE_DB = 70.0

STORM_SEASON = (135, 250)  # day offsets: mid-November through mid-March
SHOULDER_END = 280
STORM_ATTENUATION = 0.95
CLEAR_ATTENUATION = 0.15
BASE_ATTENUATION = 0.20

OUTAGE_DAYS = (38, 46, 54, 62, 70, 78, 86)  # step 8: one per weekday
OUTAGE_WINDOWS_PER_DAY = 12
OUTAGE_WINDOW_S = 2700  # nine wake slots: one short of the reboot threshold
OUTAGE_SPACING_S = 7200
LONG_OUTAGE_DAY = 95
LONG_OUTAGE_START_S = 10 * 3600
LONG_OUTAGE_LEN_S = 4 * 3600


def default_city_config() -> CityGenConfig:
    return CityGenConfig()


def default_city(seed: int = CITY_SEED) -> CityModel:
    return generate_city(default_city_config(), seed)


def _weather(n_days: int):
    """Deterministic daily temperature, precipitation and cloud attenuation."""
    rng = np.random.default_rng(WEATHER_SEED)
    day = np.arange(n_days)
    temp = 10.0 + 16.0 * np.cos(2 * np.pi * (day - 12) / 365.0) + rng.normal(0, 2.0, n_days)
    att = np.full(n_days, BASE_ATTENUATION)
    precip = np.where(rng.random(n_days) < 0.25, rng.uniform(0.5, 6.0, n_days), 0.0)

    def fill_stretches(lo, hi, storm_range, clear_range):
        d = lo
        while d < hi:
            storm_len = int(rng.integers(*storm_range))
            clear_len = int(rng.integers(*clear_range))
            end = min(d + storm_len, hi)
            att[d:end] = STORM_ATTENUATION
            precip[d:end] = rng.uniform(2.0, 12.0, end - d)
            d = end
            end = min(d + clear_len, hi)
            att[d:end] = CLEAR_ATTENUATION
            precip[d:end] = 0.0
            d = end

    fill_stretches(STORM_SEASON[0], STORM_SEASON[1], (12, 25), (2, 5))
    fill_stretches(STORM_SEASON[1], SHOULDER_END, (5, 11), (4, 8))
    # maintenance days are fair-weather: keep outage days unremarkable
    for d in (*OUTAGE_DAYS, LONG_OUTAGE_DAY):
        att[d] = BASE_ATTENUATION
        precip[d] = 0.0
    return [round(float(v), 3) for v in att], \
        [round(float(v), 2) for v in temp], \
        [round(float(v), 2) for v in precip]


def _outage_schedule() -> list[OutageWindow]:
    # identical window pattern on every outage day (even-hour starts), so the
    # delayed-reading multiset is the same for each affected weekday and hour
    windows = []
    for day in OUTAGE_DAYS:
        base = day * 86400
        for w in range(OUTAGE_WINDOWS_PER_DAY):
            start = base + w * OUTAGE_SPACING_S
            windows.append(OutageWindow(start, start + OUTAGE_WINDOW_S))
    start = LONG_OUTAGE_DAY * 86400 + LONG_OUTAGE_START_S
    windows.append(OutageWindow(start, start + LONG_OUTAGE_LEN_S))
    return windows


def default_scenario(city: CityModel | None = None,
                     master_seed: int = MASTER_SEED) -> ScenarioConfig:
    att, temp, precip = _weather(SCENARIO_DAYS)
    cfg = ScenarioConfig(
        city=city if city is not None else default_city(),
        start=SCENARIO_START,
        duration_days=SCENARIO_DAYS,
        master_seed=master_seed,
        radio=RadioParams(blockage_loss_db=DEFAULT_BLOCKAGE_DB),
        power=PowerParams(),
        panel=PanelSpec(),
        outages=_outage_schedule(),
        cloud_attenuation=att,
        weather_temp_c=temp,
        weather_precip_mm=precip,
    )
    cfg.validate()
    return cfg


def smoke_scenario(duration_days: int = 1, master_seed: int = 1) -> ScenarioConfig:
    """A one-tower, one-node scenario for quick end-to-end checks."""
    from .geo import GeoPoint, NodeSite, Rect, Tower, ZoneAttr

    zone = ZoneAttr("z0000", Rect(1000.0, 1000.0, 2000.0, 2000.0), 0.2, False)
    site = NodeSite("n000", GeoPoint(800.0, 1000.0), "z0000")
    tower = Tower("t000", GeoPoint(1800.0, 1000.0), 30.0, 43.0)
    city = CityModel(41.88, -87.63, [zone], [], [], [tower], [site])
    return ScenarioConfig(
        city=city,
        start=SCENARIO_START,
        duration_days=duration_days,
        master_seed=master_seed,
        unknown_tower_fraction=0.0,
    )


PRESET_CITIES = {"chicago-like": (default_city_config, CITY_SEED)}
PRESET_SCENARIOS = {"default": default_scenario, "smoke": smoke_scenario}
