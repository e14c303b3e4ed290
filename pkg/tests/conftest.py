import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from citysense.geo import (Building, CityModel, GeoPoint, NodeSite, Rect,
                           Tower, ZoneAttr)


def make_city(sites=None, towers=None, buildings=None, trees=None, zones=None):
    """A minimal single-zone city for unit tests; callers override pieces."""
    if zones is None:
        zones = [ZoneAttr("z00", Rect(2000.0, 2000.0, 4000.0, 4000.0), 0.2, False)]
    if sites is None:
        sites = [NodeSite("n000", GeoPoint(1000.0, 2000.0), "z00")]
    if towers is None:
        towers = [Tower("t000", GeoPoint(2000.0, 2000.0))]
    city = CityModel(41.88, -87.63, zones, buildings or [], trees or [],
                     towers, sites)
    city.validate()
    return city


@pytest.fixture
def tiny_city():
    return make_city()
