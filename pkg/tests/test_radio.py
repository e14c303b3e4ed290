import numpy as np
import pytest

from citysense.geo import Building, GeoPoint, NodeSite, Rect, TimeWindow, Tower
from citysense.radio import (ConnectionAttempt, Outcome, RadioParams, attempt_connect,
                             default_latency_pmf, expected_rss, ici_candidates,
                             path_loss_db, rss, sample_latency, select_tower)
from conftest import make_city

NOSHADOW = RadioParams(shadowing_sigma_db=0.0)


def _city_one_tower(tower_x=1000.0, buildings=None, outages=()):
    site = NodeSite("n000", GeoPoint(0.0, 2000.0), "z00")
    tower = Tower("t000", GeoPoint(tower_x, 2000.0), 30.0, 43.0, tuple(outages))
    from citysense.geo import CityModel, Rect, ZoneAttr
    zone = ZoneAttr("z00", Rect(0.0, 2000.0, 50000.0, 8000.0), 0.2, False)
    city = CityModel(41.88, -87.63, [zone], buildings or [], [], [tower], [site])
    return city, site, tower


def test_default_pmf_is_a_distribution():
    pmf = default_latency_pmf()
    assert abs(sum(pmf.values()) - 1.0) < 1e-12
    assert min(pmf) == 2
    assert all(isinstance(k, int) for k in pmf)


def test_pmf_validation():
    with pytest.raises(ValueError, match="sums"):
        RadioParams(base_latency_pmf={5: 0.5})
    with pytest.raises(ValueError, match="integers"):
        RadioParams(base_latency_pmf={1: 1.0})
    with pytest.raises(ValueError, match="sentinel"):
        RadioParams(sensitivity_dbm=-130.0, dead_sentinel_dbm=-120.0)


def test_rss_at_reference_distance():
    city, site, tower = _city_one_tower(tower_x=1.0)
    rng = np.random.default_rng(0)
    assert rss(site, tower, city, NOSHADOW, rng) == pytest.approx(43.0 - 40.0)


def test_rss_closed_form_at_1km():
    city, site, tower = _city_one_tower(tower_x=1000.0)
    val = rss(site, tower, city, NOSHADOW, np.random.default_rng(0))
    assert val == pytest.approx(-87.0)


def test_rss_with_blockage_penalty():
    b = Building("b0", Rect(500.0, 2000.0, 10.0, 10.0), 60.0)
    city, site, tower = _city_one_tower(tower_x=1000.0, buildings=[b])
    val = rss(site, tower, city, NOSHADOW, np.random.default_rng(0))
    assert val == pytest.approx(-112.0)  # below the -100 dBm low-median band


def test_rss_zero_distance_rejected():
    with pytest.raises(ValueError):
        path_loss_db(0.0, NOSHADOW)


def test_rss_monotone_in_distance():
    rng = np.random.default_rng(0)
    vals = []
    for d in (200.0, 500.0, 1200.0, 3000.0):
        city, site, tower = _city_one_tower(tower_x=d)
        vals.append(rss(site, tower, city, NOSHADOW, rng))
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_shadowing_draws_clipped():
    params = RadioParams(shadowing_sigma_db=6.0, shadowing_clip_sigmas=2.5)
    city, site, tower = _city_one_tower()
    rng = np.random.default_rng(1)
    base = expected_rss(site, tower, city, params)
    draws = np.array([rss(site, tower, city, params, rng) - base for _ in range(3000)])
    assert np.abs(draws).max() <= 15.0 + 1e-9
    assert np.abs(draws).std() > 3.0  # actually random


# -- tower selection ------------------------------------------------------------


def test_select_single_tower():
    city, site, tower = _city_one_tower()
    tid, _ = select_tower(site, city.towers, city, NOSHADOW, np.random.default_rng(0))
    assert tid == "t000"


def test_select_prefers_unblocked_farther_tower():
    # near tower blocked (25 dB > the ~9 dB distance advantage), far tower clear
    b = Building("b0", Rect(500.0, 2000.0, 10.0, 10.0), 60.0)
    site = NodeSite("n000", GeoPoint(0.0, 2000.0), "z00")
    near = Tower("t000", GeoPoint(1000.0, 2000.0), 30.0, 43.0)
    far = Tower("t001", GeoPoint(0.0, 4000.0), 30.0, 43.0)
    from citysense.geo import CityModel, Rect as R, ZoneAttr
    zone = ZoneAttr("z00", R(0.0, 2000.0, 50000.0, 8000.0), 0.2, False)
    city = CityModel(41.88, -87.63, [zone], [b], [], [near, far], [site])
    tid, _ = select_tower(site, city.towers, city, NOSHADOW, np.random.default_rng(0))
    assert tid == "t001"


def test_select_tie_breaks_to_lower_id():
    site = NodeSite("n000", GeoPoint(0.0, 0.0), "z00")
    a = Tower("t002", GeoPoint(0.0, 800.0), 30.0, 43.0)
    b = Tower("t001", GeoPoint(0.0, -800.0), 30.0, 43.0)
    from citysense.geo import CityModel, Rect as R, ZoneAttr
    zone = ZoneAttr("z00", R(0.0, 0.0, 40000.0, 40000.0), 0.2, False)
    city = CityModel(41.88, -87.63, [zone], [], [], [a, b], [site])
    tid, _ = select_tower(site, city.towers, city, NOSHADOW, np.random.default_rng(0))
    assert tid == "t001"


def test_select_invariant_under_uniform_power_shift():
    rng = np.random.default_rng(3)
    site = NodeSite("n000", GeoPoint(0.0, 0.0), "z00")
    from citysense.geo import CityModel, Rect as R, ZoneAttr
    zone = ZoneAttr("z00", R(0.0, 0.0, 40000.0, 40000.0), 0.2, False)
    positions = [(float(rng.uniform(-3000, 3000)), float(rng.uniform(-3000, 3000)))
                 for _ in range(6)]
    for shift in (0.0, 7.0, -12.0):
        towers = [Tower(f"t{i:03d}", GeoPoint(x, y), 30.0, 43.0 + shift)
                  for i, (x, y) in enumerate(positions)]
        city = CityModel(41.88, -87.63, [zone], [], [], towers, [site])
        tid, _ = select_tower(site, towers, city, NOSHADOW, np.random.default_rng(0))
        if shift == 0.0:
            baseline = tid
        else:
            assert tid == baseline


def test_select_requires_towers():
    city, site, _ = _city_one_tower()
    with pytest.raises(ValueError):
        select_tower(site, [], city, NOSHADOW, np.random.default_rng(0))


# -- connection attempts -----------------------------------------------------------


def test_attempt_outage():
    city, site, tower = _city_one_tower(outages=[TimeWindow(0, 3600)])
    att = attempt_connect(site, 100.0, city, NOSHADOW, np.random.default_rng(0))
    assert att.outcome is Outcome.FAIL_OUTAGE
    att2 = attempt_connect(site, 7200.0, city, NOSHADOW, np.random.default_rng(0))
    assert att2.outcome is Outcome.SUCCESS


def test_attempt_dead_zone_fails_weak_persistently():
    # ringed site: blocked link at 2 km is 43-40-99-25 = -121 dBm, under -120
    ring = [Building(f"w{k}", Rect(60 * np.sin(a), 2000 + 60 * np.cos(a), 80.0, 80.0), 200.0)
            for k, a in enumerate(np.linspace(0, 2 * np.pi, 8, endpoint=False))]
    city, site, tower = _city_one_tower(tower_x=2000.0, buildings=ring)
    for t in (0.0, 300.0, 600.0):
        att = attempt_connect(site, t, city, NOSHADOW, np.random.default_rng(0))
        assert att.outcome is Outcome.FAIL_WEAK


def test_attempt_success_invariant():
    city, site, tower = _city_one_tower()
    att = attempt_connect(site, 0.0, city, RadioParams(), np.random.default_rng(5))
    if att.outcome is Outcome.SUCCESS:
        assert att.rss_dbm >= RadioParams().sensitivity_dbm


# -- latency --------------------------------------------------------------------------


def test_sample_latency_degenerate():
    params = RadioParams(base_latency_pmf={5: 1.0})
    rng = np.random.default_rng(0)
    assert all(sample_latency(params, rng) == 5 for _ in range(50))


def test_sample_latency_default_distribution():
    params = RadioParams()
    ks, cum = params.latency_support()
    rng = np.random.default_rng(42)
    draws = ks[np.searchsorted(cum, rng.random(100_000), side="right")]
    assert np.median(draws) == 5
    q25, q75 = np.percentile(draws, [25, 75])
    assert 4 <= q25 <= 6 and 4 <= q75 <= 6
    assert (draws >= 7).mean() < 0.1738
    assert draws.min() >= 2
    assert (draws >= 30).mean() == 0.0


def test_sample_latency_integers_geq_2():
    params = RadioParams()
    rng = np.random.default_rng(1)
    for _ in range(500):
        v = sample_latency(params, rng)
        assert isinstance(v, int) and v >= 2


# -- interference screening -----------------------------------------------------------


def test_ici_flags_near_equidistant_trio():
    site = NodeSite("n000", GeoPoint(0.0, 0.0), "z00")
    dists = [360.4, 443.7, 490.7]
    towers = [Tower(f"t{i:03d}", GeoPoint(d * np.sin(i * 2.1), d * np.cos(i * 2.1)), 30.0, 43.0)
              for i, d in enumerate(dists)]
    from citysense.geo import CityModel, Rect as R, ZoneAttr
    zone = ZoneAttr("z00", R(0.0, 0.0, 40000.0, 40000.0), 0.2, False)
    city = CityModel(41.88, -87.63, [zone], [], [], towers, [site])
    hits = ici_candidates(city)
    assert len(hits) == 1
    sid, tower_ids, found = hits[0]
    assert sid == "n000"
    assert sorted(found) == pytest.approx(sorted(dists))


def test_ici_needs_three_towers():
    city, site, _ = _city_one_tower()
    assert ici_candidates(city) == []


def test_ici_rejects_spread_distances():
    site = NodeSite("n000", GeoPoint(0.0, 0.0), "z00")
    towers = [Tower(f"t{i:03d}", GeoPoint(0.0, d), 30.0, 43.0)
              for i, d in enumerate([100.0, 1000.0, 2000.0])]
    from citysense.geo import CityModel, Rect as R, ZoneAttr
    zone = ZoneAttr("z00", R(0.0, 0.0, 40000.0, 40000.0), 0.2, False)
    city = CityModel(41.88, -87.63, [zone], [], [], towers, [site])
    assert ici_candidates(city) == []
