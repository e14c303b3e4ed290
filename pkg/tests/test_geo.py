import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from citysense.geo import (Building, GeoPoint, LosResult, Rect, building_stats,
                           distance, latlon_to_local, local_to_latlon,
                           los_blocked, los_blocked_matrix)
from conftest import make_city
from oracles import haversine_m, los_blocked_sampling

coords = st.floats(min_value=-20_000, max_value=20_000, allow_nan=False)


def test_distance_identity():
    p = GeoPoint(123.4, -567.8)
    assert distance(p, p) == 0.0


def test_distance_pythagorean():
    assert distance(GeoPoint(0, 0), GeoPoint(3, 4)) == 5.0


def test_distance_matches_haversine_oracle():
    rng = np.random.default_rng(7)
    origin = (41.88, -87.63)
    for _ in range(200):
        a = GeoPoint(*rng.uniform(-10_000, 10_000, 2))
        b = GeoPoint(*rng.uniform(-10_000, 10_000, 2))
        d_plane = distance(a, b)
        if d_plane < 10.0:
            continue
        lat_a, lon_a = local_to_latlon(a, *origin)
        lat_b, lon_b = local_to_latlon(b, *origin)
        d_sphere = haversine_m(lat_a, lon_a, lat_b, lon_b)
        assert d_plane == pytest.approx(d_sphere, rel=0.005)


def test_projection_roundtrip():
    p = GeoPoint(5123.0, -2876.0)
    lat, lon = local_to_latlon(p, 41.88, -87.63)
    q = latlon_to_local(lat, lon, 41.88, -87.63)
    assert q.x == pytest.approx(p.x, abs=1e-6)
    assert q.y == pytest.approx(p.y, abs=1e-6)


@given(coords, coords, coords, coords, coords, coords)
@settings(max_examples=100)
def test_distance_is_a_metric(ax, ay, bx, by, cx, cy):
    a, b, c = GeoPoint(ax, ay), GeoPoint(bx, by), GeoPoint(cx, cy)
    assert distance(a, b) >= 0
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_nonfinite_point_rejected():
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0.0)


# -- building stats -----------------------------------------------------------


def _site(x=0.0, y=0.0):
    from citysense.geo import NodeSite
    return NodeSite("s", GeoPoint(x, y), "z00")


def test_building_stats_single_building():
    b = Building("b1", Rect(80.0, 0.0, 10.0, 10.0), 24.0)
    st_ = building_stats(_site(), [b], 100.0)
    assert st_.count == 1
    assert st_.tallest_height == 24.0
    assert st_.closest_distance == pytest.approx(80.0)
    assert st_.closest_height == 24.0


def test_building_stats_empty():
    st_ = building_stats(_site(), [], 100.0)
    assert st_.count == 0
    assert st_.tallest_height is None
    assert st_.mean_height is None
    assert st_.closest_distance is None


def test_building_stats_five_heights():
    bs = [Building(f"b{i}", Rect(10.0 * (i + 1), 0.0, 4.0, 4.0), h)
          for i, h in enumerate([5, 10, 15, 20, 25])]
    st_ = building_stats(_site(), bs, 100.0)
    assert st_.count == 5
    assert st_.mean_height == 15.0
    assert st_.median_height == 15.0
    assert st_.tallest_height == 25.0


def test_building_stats_closest_tie_breaks_by_id():
    bs = [Building("b2", Rect(50.0, 0.0, 4.0, 4.0), 7.0),
          Building("b1", Rect(-50.0, 0.0, 4.0, 4.0), 9.0)]
    st_ = building_stats(_site(), bs, 100.0)
    assert st_.closest_height == 9.0  # b1 wins the tie


def test_building_stats_requires_positive_radius():
    with pytest.raises(ValueError):
        building_stats(_site(), [], 0.0)


@given(st.integers(min_value=0, max_value=60), st.integers(min_value=0, max_value=12345))
@settings(max_examples=40)
def test_building_stats_radius_nesting(n, seed):
    rng = np.random.default_rng(seed)
    bs = [Building(f"b{i}", Rect(float(x), float(y), 6.0, 6.0), float(h))
          for i, (x, y, h) in enumerate(zip(rng.uniform(-600, 600, n),
                                            rng.uniform(-600, 600, n),
                                            rng.uniform(3, 40, n)))]
    counts = [building_stats(_site(), bs, r).count for r in (100.0, 250.0, 500.0)]
    assert counts[0] <= counts[1] <= counts[2]


# -- line of sight ------------------------------------------------------------


def test_los_no_buildings():
    res = los_blocked((GeoPoint(0, 0), 2.5), (GeoPoint(1000, 0), 30.0), [])
    assert res == LosResult(False, None)


def test_los_midpoint_building_below_segment():
    # segment height at the midpoint is (2.5 + 30) / 2 = 16.25 m
    b = Building("b1", Rect(500.0, 0.0, 2.0, 2.0), 11.9)
    res = los_blocked((GeoPoint(0, 0), 2.5), (GeoPoint(1000, 0), 30.0), [b])
    assert not res.blocked


def test_los_midpoint_building_above_segment():
    b = Building("b1", Rect(500.0, 0.0, 2.0, 2.0), 17.0)
    res = los_blocked((GeoPoint(0, 0), 2.5), (GeoPoint(1000, 0), 30.0), [b])
    assert res.blocked and res.blocker_id == "b1"


def test_los_reports_first_blocker_in_crossing_order():
    near = Building("far_id", Rect(200.0, 0.0, 4.0, 4.0), 50.0)
    far = Building("aaa", Rect(700.0, 0.0, 4.0, 4.0), 50.0)
    res = los_blocked((GeoPoint(0, 0), 2.5), (GeoPoint(1000, 0), 30.0), [far, near])
    assert res.blocker_id == "far_id"


def test_los_monotone_in_blocker_height():
    rng = np.random.default_rng(3)
    for _ in range(50):
        b = Building("b", Rect(float(rng.uniform(100, 900)), float(rng.uniform(-20, 20)),
                               float(rng.uniform(5, 50)), float(rng.uniform(5, 50))),
                     float(rng.uniform(0, 40)))
        args = (GeoPoint(0, 0), 2.5), (GeoPoint(1000, 0), 30.0)
        if los_blocked(*args, [b]).blocked:
            taller = Building("b", b.footprint, b.height + rng.uniform(0, 30))
            assert los_blocked(*args, [taller]).blocked
        flat = Building("b", b.footprint, 0.0)
        assert not los_blocked(*args, [flat]).blocked


def test_los_agrees_with_sampling_oracle():
    rng = np.random.default_rng(11)
    disagreements = 0
    for _ in range(300):
        node = GeoPoint(float(rng.uniform(0, 200)), float(rng.uniform(0, 200)))
        tower = GeoPoint(float(rng.uniform(800, 1500)), float(rng.uniform(0, 500)))
        buildings = [
            Building(f"b{i}", Rect(float(rng.uniform(200, 800)), float(rng.uniform(0, 400)),
                                   float(rng.uniform(10, 60)), float(rng.uniform(10, 60))),
                     float(rng.uniform(2, 35)))
            for i in range(int(rng.integers(1, 6)))
        ]
        fast = los_blocked((node, 2.5), (tower, 30.0), buildings).blocked
        slow = los_blocked_sampling(node, 2.5, tower, 30.0, buildings)
        disagreements += fast != slow
    assert disagreements == 0


def test_los_matrix_matches_scalar():
    rng = np.random.default_rng(5)
    sites = [(GeoPoint(float(rng.uniform(0, 300)), float(rng.uniform(0, 300))), 2.5)
             for _ in range(4)]
    towers = [(GeoPoint(float(rng.uniform(500, 1500)), float(rng.uniform(0, 800))), 30.0)
              for _ in range(5)]
    buildings = [Building(f"b{i}", Rect(float(rng.uniform(100, 900)),
                                        float(rng.uniform(0, 600)),
                                        float(rng.uniform(10, 80)),
                                        float(rng.uniform(10, 80))),
                          float(rng.uniform(2, 40))) for i in range(15)]
    mat = los_blocked_matrix([s[0].x for s in sites], [s[0].y for s in sites],
                             [s[1] for s in sites], [t[0].x for t in towers],
                             [t[0].y for t in towers], [t[1] for t in towers],
                             buildings)
    for i, s in enumerate(sites):
        for j, t in enumerate(towers):
            assert mat[i, j] == los_blocked(s, t, buildings).blocked


# -- city model ---------------------------------------------------------------


def test_city_json_roundtrip(tmp_path):
    city = make_city(buildings=[Building("b0", Rect(500.0, 500.0, 20.0, 10.0), 12.0)])
    path = tmp_path / "city.json"
    city.to_json(path)
    from citysense.geo import CityModel
    back = CityModel.from_json(path)
    assert back.to_dict() == city.to_dict()


def test_city_validation_site_outside_zone():
    from citysense.geo import CityModel, NodeSite, Rect, Tower, ZoneAttr
    city = CityModel(41.88, -87.63,
                     [ZoneAttr("z00", Rect(500.0, 500.0, 1000.0, 1000.0), 0.1, False)],
                     [], [],
                     [Tower("t0", GeoPoint(100.0, 100.0))],
                     [NodeSite("n0", GeoPoint(5000.0, 5000.0), "z00")])
    with pytest.raises(ValueError, match="outside its zone"):
        city.validate()


def test_city_validation_duplicate_ids():
    from citysense.geo import CityModel, NodeSite, Rect, Tower, ZoneAttr
    zone = ZoneAttr("z00", Rect(500.0, 500.0, 1000.0, 1000.0), 0.1, False)
    city = CityModel(41.88, -87.63, [zone], [], [],
                     [Tower("t0", GeoPoint(100.0, 100.0))],
                     [NodeSite("n0", GeoPoint(400.0, 400.0), "z00"),
                      NodeSite("n0", GeoPoint(600.0, 600.0), "z00")])
    with pytest.raises(ValueError, match="duplicate"):
        city.validate()


def test_tower_overlapping_outages_rejected():
    from citysense.geo import TimeWindow, Tower
    with pytest.raises(ValueError, match="overlapping"):
        Tower("t0", GeoPoint(0, 0), outages=(TimeWindow(0, 100), TimeWindow(50, 150)))
