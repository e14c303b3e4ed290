import numpy as np
import pytest

from citysense.citygen import CityGenConfig, config_from_dict, engineered_site_ids, generate_city
from citysense.geo import distance, los_blocked


def small_config(**kw):
    """A light config with the engineered features off unless enabled."""
    base = dict(
        extent_m=8000.0, zone_grid=(4, 4), n_random=32, n_community=4, n_epa=4,
        epa_stations=2, random_quota_per_zone=2, tower_count=20,
        downtown_buildings_per_zone=20, residential_buildings_per_zone=8,
        tree_count=20, dead_zone_count=0, canyon_count=0, pocket_count=0,
        ici_trio=False, min_site_separation_m=80.0,
    )
    base.update(kw)
    return CityGenConfig(**base)


def test_determinism():
    cfg = small_config()
    a = generate_city(cfg, seed=5)
    b = generate_city(cfg, seed=5)
    assert a.to_dict() == b.to_dict()
    c = generate_city(cfg, seed=6)
    assert a.to_dict() != c.to_dict()


def test_default_site_kind_counts():
    city = generate_city(CityGenConfig(), seed=1)
    kinds = {}
    for s in city.sites:
        kinds[s.selection_kind] = kinds.get(s.selection_kind, 0) + 1
    assert kinds == {"random": 86, "community": 20, "epa": 12}
    assert len(city.sites) == 118


def test_zone_quota_satisfied():
    cfg = small_config()
    city = generate_city(cfg, seed=2)
    per_zone = {z.id: 0 for z in city.zones}
    for s in city.sites:
        if s.selection_kind == "random":
            per_zone[s.zone_id] += 1
    assert all(v >= 2 for v in per_zone.values())


def test_zero_zones_rejected():
    with pytest.raises(ValueError):
        CityGenConfig(zone_grid=(0, 4)).validate()


def test_zero_sites_rejected():
    with pytest.raises(ValueError):
        small_config(n_random=0, n_community=0, n_epa=0,
                     random_quota_per_zone=0).validate()


def test_quota_exceeding_random_rejected():
    with pytest.raises(ValueError, match="quota"):
        small_config(n_random=10).validate()


@pytest.mark.parametrize("seed", range(8))
def test_generated_city_passes_invariants(seed):
    city = generate_city(small_config(dead_zone_count=2, canyon_count=1,
                                      pocket_count=2), seed=seed)
    city.validate()  # raises on any structural breakage
    for site in city.sites:
        zone = city.zone_by_id(site.zone_id)
        assert zone.cell.contains(site.position)


def test_dead_rings_block_every_tower():
    city = generate_city(CityGenConfig(), seed=3)
    eng = engineered_site_ids(city)
    assert len(eng["dead"]) == 11
    for sid in eng["dead"]:
        site = city.site_by_id(sid)
        for tower in city.towers:
            res = los_blocked((site.position, site.mount_height),
                              (tower.position, tower.mast_height), city.buildings)
            assert res.blocked, f"{sid} has line of sight to {tower.id}"


def test_twins_sit_near_their_partner():
    city = generate_city(CityGenConfig(), seed=1)
    eng = engineered_site_ids(city)
    assert len(eng["twin"]) == len(eng["dead"]) == 11
    for dead_id, twin_id in zip(eng["dead"], eng["twin"]):
        d = distance(city.site_by_id(dead_id).position,
                     city.site_by_id(twin_id).position)
        assert 200.0 <= d <= 500.0


def test_towers_keep_their_distance_from_sites():
    city = generate_city(CityGenConfig(), seed=1)
    for t in city.towers:
        nearest = min(distance(t.position, s.position) for s in city.sites)
        assert nearest >= 300.0


def test_epa_sites_mounted_high_and_clear():
    city = generate_city(CityGenConfig(), seed=1)
    for s in city.sites:
        if s.selection_kind != "epa":
            continue
        assert s.mount_height == 8.0
        for b in city.buildings:
            assert distance(s.position, GeoPoint_b(b)) >= 100.0


def GeoPoint_b(b):
    from citysense.geo import GeoPoint
    return GeoPoint(b.footprint.cx, b.footprint.cy)


def test_config_from_dict_tuple_coercion():
    cfg = config_from_dict({"zone_grid": [3, 3], "n_random": 18, "n_community": 2,
                            "n_epa": 2, "epa_stations": 1, "tower_count": 12,
                            "dead_zone_count": 0, "canyon_count": 0,
                            "pocket_count": 0, "ici_trio": False,
                            "extent_m": 6000.0})
    assert cfg.zone_grid == (3, 3)
    with pytest.raises(ValueError, match="unknown"):
        config_from_dict({"nonsense": 1})
