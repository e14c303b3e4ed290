"""Procedural city generation with stratified site placement.

Besides plain stratified sampling, the generator can engineer the structures
the bundled scenario needs: ring-walled dead-zone sites with relocation twins,
tree-ringed full-shade sites (long winter outages), partially shaded pocket
sites (oscillating winter outages), cleared rooftop reference sites, and a
trio of near-equidistant towers for interference screening. A final pass
guarantees every non-engineered site keeps at least one clear-path tower.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo import (Building, CityModel, GeoPoint, NodeSite, Rect, TreeOccluder,
                  Tower, distance, los_blocked_matrix)


@dataclass(frozen=True)
class CityGenConfig:
    origin_lat: float = 41.88
    origin_lon: float = -87.63
    extent_m: float = 24_000.0
    zone_grid: tuple[int, int] = (6, 6)
    disadvantaged_fraction: float = 0.39
    downtown_cells: int = 2

    # site counts
    n_random: int = 86
    n_community: int = 20
    n_epa: int = 12
    epa_stations: int = 4
    random_quota_per_zone: int = 2
    community_disadvantaged_fraction: float = 0.7
    min_site_separation_m: float = 150.0
    site_clearance_m: float = 60.0  # buildings keep this far from sites
    epa_clearance_m: float = 150.0
    epa_mount_height_m: float = 8.0
    # sites stay off the extent edge so boundary tower-density loss cannot
    # couple site radio quality to zone geography
    site_boundary_margin_m: float = 1500.0

    # towers
    tower_count: int = 130
    min_tower_site_m: float = 300.0
    min_tower_tower_m: float = 200.0
    max_link_distance_m: float = 2_500.0  # guarantee: a clear tower this close
    tower_mast_height_m: float = 30.0
    tower_tx_power_dbm: float = 43.0

    # buildings
    downtown_buildings_per_zone: int = 110
    residential_buildings_per_zone: int = 24
    downtown_height_range: tuple[float, float] = (30.0, 130.0)
    residential_height_range: tuple[float, float] = (4.0, 14.0)

    # scattered trees
    tree_count: int = 120
    tree_clearance_m: float = 25.0

    # engineered dead zones (ring-walled) and their relocation twins
    dead_zone_count: int = 11
    dead_from_community: int = 3
    dead_disadvantaged: int = 9
    ring_radius_m: float = 42.0
    ring_height_range: tuple[float, float] = (24.0, 34.0)
    relocate_offset_m: tuple[float, float] = (250.0, 450.0)
    ici_trio: bool = True
    ici_trio_distances: tuple[float, float, float] = (360.4, 443.7, 490.7)

    # engineered shading
    canyon_count: int = 10
    canyon_tree_height_m: float = 26.0
    canyon_tree_radius_m: float = 12.0
    canyon_tree_distance_m: float = 37.0
    pocket_count: int = 36
    pocket_disadvantaged: int = 28
    pocket_tree_height_m: float = 14.0
    pocket_tree_radius_m: float = 4.0
    pocket_tree_distance_m: float = 25.0

    def validate(self) -> None:
        nx, ny = self.zone_grid
        if nx <= 0 or ny <= 0:
            raise ValueError("zone grid must have at least one cell")
        n_sites = self.n_random + self.n_community + self.n_epa
        if n_sites <= 0:
            raise ValueError("configuration must place at least one site")
        if self.n_random < self.random_quota_per_zone * nx * ny:
            raise ValueError("n_random cannot satisfy the per-zone quota")
        if self.n_epa % max(self.epa_stations, 1) != 0:
            raise ValueError("n_epa must divide evenly across stations")
        if self.dead_zone_count > 0 and self.dead_zone_count > self.n_random + self.n_community:
            raise ValueError("more dead zones than placeable sites")


def _pick_disadvantaged(nx: int, ny: int, fraction: float) -> set[tuple[int, int]]:
    """West columns first, then the south row: a deterministic clustered block."""
    target = round(fraction * nx * ny)
    cells = []
    for i in range(nx):
        for j in range(ny):
            cells.append((i, j))
    cells.sort(key=lambda c: (c[0], c[1]))
    return set(cells[:target])


def _pick_downtown(nx: int, ny: int, count: int,
                   disadvantaged: set[tuple[int, int]]) -> list[tuple[int, int]]:
    center = ((nx - 1) / 2, (ny - 1) / 2)
    cells = [(i, j) for i in range(nx) for j in range(ny) if (i, j) not in disadvantaged]
    cells.sort(key=lambda c: ((c[0] - center[0] - 1) ** 2 + (c[1] - center[1]) ** 2, c))
    return cells[:count]


class _Gen:
    """Holds the mutable working collections while a city is assembled."""

    def __init__(self, config: CityGenConfig, seed: int):
        self.cfg = config
        self.rng = np.random.default_rng(seed)
        self.zones = []
        self.sites = []
        self.site_kind = {}
        self.buildings = []
        self.protected_buildings = set()
        self.trees = []
        self.towers = []
        self.dead_ids = []
        self.twin_of = {}
        self.canyon_ids = []
        self.pocket_ids = []
        self._bid = 0
        self._vid = 0

    # -- zones ---------------------------------------------------------------

    def make_zones(self):
        nx, ny = self.cfg.zone_grid
        w = self.cfg.extent_m / nx
        d = self.cfg.extent_m / ny
        disadvantaged = _pick_disadvantaged(nx, ny, self.cfg.disadvantaged_fraction)
        self.downtown = set(_pick_downtown(nx, ny, self.cfg.downtown_cells, disadvantaged))
        self.zone_cell = {}
        for i in range(nx):
            for j in range(ny):
                zid = f"z{i:02d}{j:02d}"
                cell = Rect(i * w + w / 2, j * d + d / 2, w, d)
                dis = (i, j) in disadvantaged
                pct = float(self.rng.uniform(0.55, 0.95) if dis else self.rng.uniform(0.05, 0.60))
                self.zones.append((zid, cell, pct, dis, (i, j)))
                self.zone_cell[(i, j)] = (zid, cell)

    def zones_where(self, pred):
        return [z for z in self.zones if pred(z)]

    # -- sites ----------------------------------------------------------------

    def _place_in_cell(self, cell: Rect, min_sep: float, margin: float = 100.0) -> GeoPoint:
        bm = self.cfg.site_boundary_margin_m
        xlo = max(cell.xmin + margin, bm)
        xhi = min(cell.xmax - margin, self.cfg.extent_m - bm)
        ylo = max(cell.ymin + margin, bm)
        yhi = min(cell.ymax - margin, self.cfg.extent_m - bm)
        if xlo >= xhi or ylo >= yhi:
            raise RuntimeError("zone cell has no placeable interior; check the boundary margin")
        for _ in range(4000):
            p = GeoPoint(float(self.rng.uniform(xlo, xhi)), float(self.rng.uniform(ylo, yhi)))
            if all(distance(p, s.position) >= min_sep for s in self.sites):
                return p
        raise RuntimeError("could not place a site; zone too crowded for the separation rule")

    def make_sites(self):
        cfg = self.cfg
        sep = cfg.min_site_separation_m
        counter = 0

        def add(kind, cell, zid, mount=2.5, pos=None):
            nonlocal counter
            p = pos if pos is not None else self._place_in_cell(cell, sep)
            site = NodeSite(f"n{counter:03d}", p, zid, mount, kind)
            self.sites.append(site)
            self.site_kind[site.id] = kind
            counter += 1
            return site

        # stratified random: the per-zone quota first, extras over seeded zones
        for zid, cell, _, _, _ in self.zones:
            for _ in range(cfg.random_quota_per_zone):
                add("random", cell, zid)
        extras = cfg.n_random - cfg.random_quota_per_zone * len(self.zones)
        zone_idx = self.rng.choice(len(self.zones), size=extras, replace=True)
        for zi in zone_idx:
            zid, cell = self.zones[zi][0], self.zones[zi][1]
            add("random", cell, zid)

        # community sites lean toward disadvantaged zones
        n_dis = round(cfg.n_community * cfg.community_disadvantaged_fraction)
        dis_zones = self.zones_where(lambda z: z[3])
        other_zones = self.zones_where(lambda z: not z[3])
        for k in range(cfg.n_community):
            pool = dis_zones if (k < n_dis and dis_zones) else other_zones or dis_zones
            zi = int(self.rng.integers(len(pool)))
            zid, cell = pool[zi][0], pool[zi][1]
            add("community", cell, zid)

        # reference (epa) stations: clusters of collocated rooftop sites
        safe = self.zones_where(lambda z: not z[3] and z[4] not in self.downtown)
        picks = self.rng.choice(len(safe), size=cfg.epa_stations, replace=False)
        per_station = cfg.n_epa // cfg.epa_stations
        for zi in picks:
            zid, cell = safe[zi][0], safe[zi][1]
            anchor = self._place_in_cell(cell, sep)
            for k in range(per_station):
                off = self.rng.uniform(-12, 12, size=2)
                pos = GeoPoint(anchor.x + float(off[0]), anchor.y + float(off[1]))
                add("epa", cell, zid, mount=cfg.epa_mount_height_m, pos=pos)

    def _site_zone_flags(self, site: NodeSite):
        z = next(z for z in self.zones if z[0] == site.zone_id)
        return z[3], z[4] in self.downtown

    # -- engineered designations ------------------------------------------------

    def designate(self):
        cfg = self.cfg
        if cfg.dead_zone_count:
            self._designate_dead()
        if cfg.canyon_count:
            self._designate_canyon()
        if cfg.pocket_count:
            self._designate_pockets()

    def _eligible(self, kinds, exclude=()):
        out = []
        for s in self.sites:
            if self.site_kind[s.id] not in kinds:
                continue
            if s.id in exclude or s.id in self.dead_ids or s.id in self.twin_of.values():
                continue
            if s.id in self.canyon_ids or s.id in self.pocket_ids:
                continue
            out.append(s)
        return out

    def _designate_dead(self):
        cfg = self.cfg
        n_comm = min(cfg.dead_from_community, cfg.dead_zone_count)
        n_rand = cfg.dead_zone_count - n_comm
        want_dis = cfg.dead_disadvantaged
        chosen: list[NodeSite] = []
        for kind, count in (("random", n_rand), ("community", n_comm)):
            pool = [s for s in self._eligible((kind,))
                    if not self._site_zone_flags(s)[1]]  # keep out of downtown
            dis = [s for s in pool if self._site_zone_flags(s)[0]]
            non = [s for s in pool if not self._site_zone_flags(s)[0]]
            n_dis_total = sum(1 for c in chosen if self._site_zone_flags(c)[0])
            take_dis = min(count, max(0, want_dis - n_dis_total), len(dis))
            picked = dis[:take_dis] + non[: count - take_dis]
            if len(picked) < count:  # fall back to whatever is left
                leftovers = [s for s in dis if s not in picked]
                picked += leftovers[: count - len(picked)]
            chosen += picked
        if len(chosen) != cfg.dead_zone_count:
            raise RuntimeError("could not designate the requested dead-zone sites")
        self.dead_ids = [s.id for s in chosen]
        # relocation twins: random-kind survivors repositioned near their partner
        twins = self._eligible(("random",))[: len(self.dead_ids)]
        if len(twins) < len(self.dead_ids):
            raise RuntimeError("not enough random sites to serve as relocation twins")
        for dead_id, twin in zip(self.dead_ids, twins):
            dead = self._site(dead_id)
            for _ in range(2000):
                r = float(self.rng.uniform(*cfg.relocate_offset_m))
                az = float(self.rng.uniform(0, 2 * math.pi))
                pos = GeoPoint(dead.position.x + r * math.sin(az),
                               dead.position.y + r * math.cos(az))
                zone = self._zone_containing(pos)
                if zone is None:
                    continue
                others = [s for s in self.sites if s.id not in (twin.id,)]
                if all(distance(pos, s.position) >= 120.0 for s in others):
                    new = NodeSite(twin.id, pos, zone[0], twin.mount_height,
                                   twin.selection_kind, relocated_from=dead_id)
                    self.sites[self.sites.index(twin)] = new
                    self.twin_of[dead_id] = new.id
                    break
            else:
                raise RuntimeError(f"could not reposition twin for {dead_id}")

    def _designate_canyon(self):
        center = GeoPoint(self.cfg.extent_m / 2, self.cfg.extent_m / 2)
        pool = self._eligible(("random", "community"))
        pool = [s for s in pool if not self._site_zone_flags(s)[0]]
        downtown_first = sorted(
            pool, key=lambda s: (not self._site_zone_flags(s)[1],
                                 distance(s.position, center), s.id))
        self.canyon_ids = [s.id for s in downtown_first[: self.cfg.canyon_count]]

    def _designate_pockets(self):
        cfg = self.cfg
        pool = self._eligible(("random", "community"))
        dis = [s for s in pool if self._site_zone_flags(s)[0]]
        non = [s for s in pool if not self._site_zone_flags(s)[0]]
        chosen = dis[: cfg.pocket_disadvantaged]
        for s in non + dis[cfg.pocket_disadvantaged:]:
            if len(chosen) >= cfg.pocket_count:
                break
            if s not in chosen:
                chosen.append(s)
        if len(chosen) < cfg.pocket_count:
            raise RuntimeError("not enough sites left for shade pockets")
        self.pocket_ids = [s.id for s in chosen[: cfg.pocket_count]]

    def _site(self, sid) -> NodeSite:
        return next(s for s in self.sites if s.id == sid)

    def _zone_containing(self, p: GeoPoint):
        for zid, cell, pct, dis, ij in self.zones:
            if cell.contains(p):
                return (zid, cell, pct, dis, ij)
        return None

    # -- towers -------------------------------------------------------------------

    def make_towers(self):
        cfg = self.cfg
        count = 0
        attempts = 0
        while count < cfg.tower_count and attempts < 200_000:
            attempts += 1
            x = float(self.rng.uniform(50, cfg.extent_m - 50))
            y = float(self.rng.uniform(50, cfg.extent_m - 50))
            p = GeoPoint(x, y)
            if any(distance(p, s.position) < cfg.min_tower_site_m for s in self.sites):
                continue
            if any(distance(p, t.position) < cfg.min_tower_tower_m for t in self.towers):
                continue
            self.towers.append(Tower(f"t{count:03d}", p, cfg.tower_mast_height_m,
                                     cfg.tower_tx_power_dbm))
            count += 1
        if count < cfg.tower_count:
            raise RuntimeError("could not place the requested tower count")
        if cfg.ici_trio and self.dead_ids:
            self._add_ici_trio()

    def _add_ici_trio(self):
        cfg = self.cfg
        anchor = self._site(self.dead_ids[0]).position
        base_az = float(self.rng.uniform(0, 2 * math.pi))
        idx = len(self.towers)
        for k, dist_m in enumerate(cfg.ici_trio_distances):
            for extra in range(64):
                az = base_az + k * 2.1 + extra * 0.2
                p = GeoPoint(anchor.x + dist_m * math.sin(az),
                             anchor.y + dist_m * math.cos(az))
                ok = (0 < p.x < cfg.extent_m and 0 < p.y < cfg.extent_m
                      and all(distance(p, s.position) >= cfg.min_tower_site_m
                              for s in self.sites if s.id != self.dead_ids[0])
                      and all(distance(p, t.position) >= cfg.min_tower_tower_m
                              for t in self.towers))
                if ok:
                    self.towers.append(Tower(f"t{idx:03d}", p, cfg.tower_mast_height_m,
                                             cfg.tower_tx_power_dbm))
                    idx += 1
                    break
            else:
                raise RuntimeError("could not place interference trio towers")

    # -- buildings and trees --------------------------------------------------------

    def _next_building(self, rect, height, protected=False) -> Building:
        b = Building(f"b{self._bid:04d}", rect, float(height))
        self._bid += 1
        self.buildings.append(b)
        if protected:
            self.protected_buildings.add(b.id)
        return b

    def _next_tree(self, center, radius, height) -> TreeOccluder:
        t = TreeOccluder(f"v{self._vid:03d}", center, float(radius), float(height))
        self._vid += 1
        self.trees.append(t)
        return t

    def _clear_of_sites(self, x, y) -> bool:
        cfg = self.cfg
        for s in self.sites:
            clearance = cfg.epa_clearance_m if s.selection_kind == "epa" else cfg.site_clearance_m
            if math.hypot(x - s.position.x, y - s.position.y) < clearance:
                return False
        return True

    def make_buildings(self):
        cfg = self.cfg
        for zid, cell, _, _, ij in self.zones:
            downtown = ij in self.downtown
            n = cfg.downtown_buildings_per_zone if downtown else cfg.residential_buildings_per_zone
            h_lo, h_hi = (cfg.downtown_height_range if downtown
                          else cfg.residential_height_range)
            placed = 0
            attempts = 0
            while placed < n and attempts < 50 * n:
                attempts += 1
                w = float(self.rng.uniform(10, 45) if downtown else self.rng.uniform(8, 20))
                d = float(self.rng.uniform(10, 45) if downtown else self.rng.uniform(8, 20))
                x = float(self.rng.uniform(cell.xmin + w, cell.xmax - w))
                y = float(self.rng.uniform(cell.ymin + d, cell.ymax - d))
                if not self._clear_of_sites(x, y):
                    continue
                h = float(self.rng.uniform(h_lo, h_hi))
                self._next_building(Rect(x, y, w, d), h)
                placed += 1

    def make_trees(self):
        cfg = self.cfg
        placed = 0
        attempts = 0
        while placed < cfg.tree_count and attempts < 50_000:
            attempts += 1
            x = float(self.rng.uniform(50, cfg.extent_m - 50))
            y = float(self.rng.uniform(50, cfg.extent_m - 50))
            ok = True
            for s in self.sites:
                clearance = (cfg.epa_clearance_m if s.selection_kind == "epa"
                             else cfg.tree_clearance_m)
                if math.hypot(x - s.position.x, y - s.position.y) < clearance:
                    ok = False
                    break
            if not ok:
                continue
            self._next_tree(GeoPoint(x, y), self.rng.uniform(2.5, 5.0),
                            self.rng.uniform(6.0, 12.0))
            placed += 1

    # -- engineered structures ---------------------------------------------------------

    def build_dead_rings(self):
        cfg = self.cfg
        r = cfg.ring_radius_m
        for sid in self.dead_ids:
            site = self._site(sid)
            h = float(self.rng.uniform(*cfg.ring_height_range))
            cx, cy = site.position.x, site.position.y
            # eight axis-aligned blocks: cardinal walls plus corner blocks
            for dx, dy, w, d in [(0, r, 56, 8), (0, -r, 56, 8),
                                 (r, 0, 8, 56), (-r, 0, 8, 56)]:
                self._next_building(Rect(cx + dx, cy + dy, w, d), h, protected=True)
            c = r / math.sqrt(2)
            for sx in (-1, 1):
                for sy in (-1, 1):
                    self._next_building(Rect(cx + sx * c, cy + sy * c, 36, 36),
                                        h, protected=True)

    def build_shade_rings(self):
        cfg = self.cfg
        for sid in self.canyon_ids:
            site = self._site(sid)
            n = 10
            for k in range(n):
                az = 2 * math.pi * k / n
                p = GeoPoint(site.position.x + cfg.canyon_tree_distance_m * math.sin(az),
                             site.position.y + cfg.canyon_tree_distance_m * math.cos(az))
                self._next_tree(p, cfg.canyon_tree_radius_m, cfg.canyon_tree_height_m)
        for sid in self.pocket_ids:
            site = self._site(sid)
            # nine canopies covering the winter sun arc (south-east to south-west)
            for k in range(9):
                az = math.radians(113.0 + 16.75 * k)
                p = GeoPoint(site.position.x + cfg.pocket_tree_distance_m * math.sin(az),
                             site.position.y + cfg.pocket_tree_distance_m * math.cos(az))
                self._next_tree(p, cfg.pocket_tree_radius_m, cfg.pocket_tree_height_m)

    # -- connectivity guarantee ---------------------------------------------------------

    def _blockers(self, site: NodeSite, tower: Tower) -> list[Building]:
        """Buildings crossing the site-tower segment, vectorized over buildings."""
        if not self.buildings:
            return []
        xmin = np.array([b.footprint.xmin for b in self.buildings])
        xmax = np.array([b.footprint.xmax for b in self.buildings])
        ymin = np.array([b.footprint.ymin for b in self.buildings])
        ymax = np.array([b.footprint.ymax for b in self.buildings])
        hgt = np.array([b.height for b in self.buildings])
        px, py = site.position.x, site.position.y
        dx = tower.position.x - px
        dy = tower.position.y - py
        from .geo import _slab
        nx, fx = _slab(px, dx, xmin, xmax)
        ny, fy = _slab(py, dy, ymin, ymax)
        lo = np.maximum(np.maximum(nx, ny), 0.0)
        hi = np.minimum(np.minimum(fx, fy), 1.0)
        dh = tower.mast_height - site.mount_height
        h_min = np.minimum(site.mount_height + lo * dh, site.mount_height + hi * dh)
        mask = (lo <= hi) & (h_min <= hgt)
        return [b for b, m in zip(self.buildings, mask) if m]

    def guarantee_connectivity(self):
        """Ensure every live site keeps a clear-path tower within the link range."""
        cfg = self.cfg
        dead = set(self.dead_ids)
        for site in self.sites:
            if site.id in dead:
                continue
            cands = sorted(
                (t for t in self.towers
                 if distance(site.position, t.position) <= cfg.max_link_distance_m),
                key=lambda t: (distance(site.position, t.position), t.id))
            fixed = False
            for tower in cands:
                blockers = self._blockers(site, tower)
                if not blockers:
                    fixed = True
                    break
                if all(b.id not in self.protected_buildings for b in blockers):
                    doomed = {b.id for b in blockers}
                    self.buildings = [b for b in self.buildings if b.id not in doomed]
                    fixed = True
                    break
            if not fixed:
                self._add_tower_near(site)

    def _add_tower_near(self, site: NodeSite):
        cfg = self.cfg
        idx = len(self.towers)
        for attempt in range(256):
            az = 2 * math.pi * (attempt % 16) / 16 + 0.1 * (attempt // 16)
            r = float(self.rng.uniform(500, 900))
            p = GeoPoint(site.position.x + r * math.sin(az),
                         site.position.y + r * math.cos(az))
            if not (0 < p.x < cfg.extent_m and 0 < p.y < cfg.extent_m):
                continue
            if any(distance(p, s.position) < cfg.min_tower_site_m for s in self.sites):
                continue
            tower = Tower(f"t{idx:03d}", p, cfg.tower_mast_height_m, cfg.tower_tx_power_dbm)
            if not self._blockers(site, tower):
                self.towers.append(tower)
                return
        raise RuntimeError(f"could not guarantee connectivity for {site.id}")

    def verify(self):
        """Structural self-checks: dead rings block everything, kinds add up."""
        if not self.dead_ids:
            return
        dead_sites = [self._site(d) for d in self.dead_ids]
        ax = [s.position.x for s in dead_sites]
        ay = [s.position.y for s in dead_sites]
        ah = [s.mount_height for s in dead_sites]
        bx = [t.position.x for t in self.towers]
        by = [t.position.y for t in self.towers]
        bh = [t.mast_height for t in self.towers]
        blocked = los_blocked_matrix(ax, ay, ah, bx, by, bh, self.buildings)
        if not blocked.all():
            leaks = [(dead_sites[i].id, self.towers[j].id)
                     for i, j in zip(*np.nonzero(~blocked))]
            raise RuntimeError(f"dead-zone rings leak line of sight: {leaks[:5]}")


def generate_city(config: CityGenConfig, seed: int) -> CityModel:
    """Deterministically build a CityModel from the generation config and seed."""
    config.validate()
    g = _Gen(config, seed)
    g.make_zones()
    g.make_sites()
    g.designate()
    g.make_towers()
    g.make_buildings()
    g.make_trees()
    g.build_dead_rings()
    g.build_shade_rings()
    g.guarantee_connectivity()
    g.verify()

    from .geo import ZoneAttr
    city = CityModel(
        origin_lat=config.origin_lat,
        origin_lon=config.origin_lon,
        zones=[ZoneAttr(zid, cell, pct, dis) for zid, cell, pct, dis, _ in g.zones],
        buildings=g.buildings,
        trees=g.trees,
        towers=g.towers,
        sites=g.sites,
    )
    city.validate()
    return city


def config_from_dict(d: dict) -> CityGenConfig:
    """CityGenConfig from parsed JSON; list-valued fields become tuples."""
    import dataclasses
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(CityGenConfig)}
    for key, value in d.items():
        if key not in fields:
            raise ValueError(f"unknown city generation field {key!r}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return CityGenConfig(**kwargs)


def engineered_site_ids(city: CityModel) -> dict[str, list[str]]:
    """Recover the engineered designations that are encoded in the model itself."""
    twins = {s.relocated_from: s.id for s in city.sites if s.relocated_from}
    return {
        "dead": sorted(twins.keys()),
        "twin": [twins[d] for d in sorted(twins.keys())],
        "epa": [s.id for s in city.sites if s.selection_kind == "epa"],
    }
