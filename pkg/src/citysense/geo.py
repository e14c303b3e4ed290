"""Planar city geometry: primitives, building statistics and line-of-sight tests.

All coordinates live in one local planar frame (meters east/north of an
origin latitude/longitude, equirectangular projection). Heights are meters
above ground.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True, slots=True)
class GeoPoint:
    x: float  # meters east of origin
    y: float  # meters north of origin

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle given by center, width (x extent) and depth (y extent)."""

    cx: float
    cy: float
    width: float
    depth: float

    @property
    def xmin(self):
        return self.cx - self.width / 2

    @property
    def xmax(self):
        return self.cx + self.width / 2

    @property
    def ymin(self):
        return self.cy - self.depth / 2

    @property
    def ymax(self):
        return self.cy + self.depth / 2

    def contains(self, p: GeoPoint) -> bool:
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax


@dataclass(frozen=True, slots=True)
class Building:
    id: str
    footprint: Rect
    height: float

    def __post_init__(self):
        if self.footprint.width <= 0 or self.footprint.depth <= 0:
            raise ValueError(f"building {self.id}: footprint must have positive extent")
        if self.height < 0:
            raise ValueError(f"building {self.id}: negative height")


@dataclass(frozen=True, slots=True)
class TreeOccluder:
    """A tree modeled as a vertical canopy cylinder from ground to `height`."""

    id: str
    center: GeoPoint
    canopy_radius: float
    height: float

    def __post_init__(self):
        if self.canopy_radius <= 0:
            raise ValueError(f"tree {self.id}: canopy_radius must be > 0")
        if self.height <= 0:
            raise ValueError(f"tree {self.id}: height must be > 0")


@dataclass(frozen=True, slots=True)
class TimeWindow:
    """Half-open interval [start, end) in seconds since scenario start."""

    start: float
    end: float

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"window start {self.start} must precede end {self.end}")

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True, slots=True)
class Tower:
    id: str
    position: GeoPoint
    mast_height: float = 30.0  # assumption: masts are never published, see README
    tx_power_dbm: float = 43.0  # assumption: typical macro-cell EIRP class
    outages: tuple[TimeWindow, ...] = ()

    def __post_init__(self):
        if self.mast_height <= 0:
            raise ValueError(f"tower {self.id}: mast_height must be > 0")
        windows = sorted(self.outages, key=lambda w: w.start)
        for a, b in zip(windows, windows[1:]):
            if b.start < a.end:
                raise ValueError(f"tower {self.id}: overlapping outage windows")
        object.__setattr__(self, "outages", tuple(windows))


@dataclass(frozen=True, slots=True)
class ZoneAttr:
    id: str
    cell: Rect
    pct_minority: float
    disadvantaged: bool

    def __post_init__(self):
        if not 0.0 <= self.pct_minority <= 1.0:
            raise ValueError(f"zone {self.id}: pct_minority outside [0, 1]")


@dataclass(frozen=True, slots=True)
class NodeSite:
    id: str
    position: GeoPoint
    zone_id: str
    mount_height: float = 2.5
    selection_kind: str = "random"  # random | community | epa
    relocated_from: str | None = None  # id of the dead-zone site this one replaced

    def __post_init__(self):
        if self.mount_height <= 0:
            raise ValueError(f"site {self.id}: mount_height must be > 0")
        if self.selection_kind not in ("random", "community", "epa"):
            raise ValueError(f"site {self.id}: unknown selection_kind {self.selection_kind!r}")


@dataclass
class CityModel:
    origin_lat: float
    origin_lon: float
    zones: list[ZoneAttr]
    buildings: list[Building]
    trees: list[TreeOccluder]
    towers: list[Tower]
    sites: list[NodeSite]

    def validate(self) -> None:
        zone_ids = {z.id for z in self.zones}
        if len(zone_ids) != len(self.zones):
            raise ValueError("duplicate zone ids")
        for coll, name in ((self.buildings, "building"), (self.trees, "tree"),
                           (self.towers, "tower"), (self.sites, "site")):
            ids = [o.id for o in coll]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate {name} ids")
        site_ids = {s.id for s in self.sites}
        for s in self.sites:
            if s.zone_id not in zone_ids:
                raise ValueError(f"site {s.id} references unknown zone {s.zone_id}")
            zone = self.zone_by_id(s.zone_id)
            if not zone.cell.contains(s.position):
                raise ValueError(f"site {s.id} lies outside its zone {s.zone_id}")
            if s.relocated_from is not None and s.relocated_from not in site_ids:
                raise ValueError(f"site {s.id} relocated_from unknown site {s.relocated_from}")

    def zone_by_id(self, zone_id: str) -> ZoneAttr:
        return self._zone_index()[zone_id]

    def site_by_id(self, site_id: str) -> NodeSite:
        return {s.id: s for s in self.sites}[site_id]

    def tower_by_id(self, tower_id: str) -> Tower:
        return {t.id: t for t in self.towers}[tower_id]

    def _zone_index(self):
        return {z.id: z for z in self.zones}

    def bounds(self) -> Rect:
        """Bounding rectangle of the zone tiling (the city extent)."""
        xmin = min(z.cell.xmin for z in self.zones)
        xmax = max(z.cell.xmax for z in self.zones)
        ymin = min(z.cell.ymin for z in self.zones)
        ymax = max(z.cell.ymax for z in self.zones)
        return Rect((xmin + xmax) / 2, (ymin + ymax) / 2, xmax - xmin, ymax - ymin)

    # -- JSON serialization ------------------------------------------------

    def to_dict(self) -> dict:
        def rect(r: Rect):
            return {"cx": r.cx, "cy": r.cy, "width": r.width, "depth": r.depth}

        return {
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "zones": [
                {"id": z.id, "cell": rect(z.cell), "pct_minority": z.pct_minority,
                 "disadvantaged": z.disadvantaged}
                for z in self.zones
            ],
            "buildings": [
                {"id": b.id, "footprint": rect(b.footprint), "height": b.height}
                for b in self.buildings
            ],
            "trees": [
                {"id": t.id, "center": {"x": t.center.x, "y": t.center.y},
                 "canopy_radius": t.canopy_radius, "height": t.height}
                for t in self.trees
            ],
            "towers": [
                {"id": t.id, "position": {"x": t.position.x, "y": t.position.y},
                 "mast_height": t.mast_height, "tx_power_dbm": t.tx_power_dbm,
                 "outages": [{"start": w.start, "end": w.end} for w in t.outages]}
                for t in self.towers
            ],
            "sites": [
                {"id": s.id, "position": {"x": s.position.x, "y": s.position.y},
                 "zone_id": s.zone_id, "mount_height": s.mount_height,
                 "selection_kind": s.selection_kind, "relocated_from": s.relocated_from}
                for s in self.sites
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CityModel":
        def rect(r):
            return Rect(r["cx"], r["cy"], r["width"], r["depth"])

        city = cls(
            origin_lat=d["origin_lat"],
            origin_lon=d["origin_lon"],
            zones=[ZoneAttr(z["id"], rect(z["cell"]), z["pct_minority"], z["disadvantaged"])
                   for z in d["zones"]],
            buildings=[Building(b["id"], rect(b["footprint"]), b["height"])
                       for b in d["buildings"]],
            trees=[TreeOccluder(t["id"], GeoPoint(t["center"]["x"], t["center"]["y"]),
                                t["canopy_radius"], t["height"]) for t in d["trees"]],
            towers=[Tower(t["id"], GeoPoint(t["position"]["x"], t["position"]["y"]),
                          t["mast_height"], t["tx_power_dbm"],
                          tuple(TimeWindow(w["start"], w["end"]) for w in t["outages"]))
                    for t in d["towers"]],
            sites=[NodeSite(s["id"], GeoPoint(s["position"]["x"], s["position"]["y"]),
                            s["zone_id"], s["mount_height"], s["selection_kind"],
                            s.get("relocated_from")) for s in d["sites"]],
        )
        city.validate()
        return city

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "CityModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


# -- distance and projection ----------------------------------------------


def distance(a: GeoPoint, b: GeoPoint) -> float:
    """Euclidean distance in the planar frame, meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


def local_to_latlon(p: GeoPoint, origin_lat: float, origin_lon: float) -> tuple[float, float]:
    """Inverse of the equirectangular projection used for the local frame."""
    lat = origin_lat + math.degrees(p.y / EARTH_RADIUS_M)
    lon = origin_lon + math.degrees(p.x / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    return lat, lon


def latlon_to_local(lat: float, lon: float, origin_lat: float, origin_lon: float) -> GeoPoint:
    x = math.radians(lon - origin_lon) * EARTH_RADIUS_M * math.cos(math.radians(origin_lat))
    y = math.radians(lat - origin_lat) * EARTH_RADIUS_M
    return GeoPoint(x, y)


# -- building statistics ---------------------------------------------------


@dataclass(frozen=True, slots=True)
class BuildingStats:
    count: int
    tallest_height: float | None
    mean_height: float | None
    median_height: float | None
    closest_distance: float | None
    closest_height: float | None


def building_stats(site: NodeSite, buildings, radius: float) -> BuildingStats:
    """Statistics over buildings whose footprint center lies within `radius` of the site.

    Distances are center-to-center. An empty neighborhood is valid and yields
    count 0 with all height fields None. Median uses the lower of two middles
    for even counts; closest-building ties break toward the lowest id.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    hits = []
    for b in buildings:
        d = math.hypot(b.footprint.cx - site.position.x, b.footprint.cy - site.position.y)
        if d <= radius:
            hits.append((d, b))
    if not hits:
        return BuildingStats(0, None, None, None, None, None)
    heights = sorted(h.height for _, h in hits)
    closest = min(hits, key=lambda db: (db[0], db[1].id))
    return BuildingStats(
        count=len(hits),
        tallest_height=heights[-1],
        mean_height=sum(heights) / len(heights),
        median_height=heights[(len(heights) - 1) // 2],
        closest_distance=closest[0],
        closest_height=closest[1].height,
    )


# -- ray / segment intersection helpers ------------------------------------
# Array-native: every argument may be a scalar or a broadcastable ndarray.


def _slab(p, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p) / d
        t2 = (hi - p) / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    zero = d == 0
    if np.any(zero):
        inside = (p >= lo) & (p <= hi)
        near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
        far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
    return near, far


def ray_rect_interval(px, py, dx, dy, rect: Rect):
    """Parameter interval (t_near, t_far) where the ray p + t*d is inside `rect`.

    No intersection when t_near > t_far. Negative parameters are not clipped;
    callers decide how to treat the part behind the origin.
    """
    nx, fx = _slab(px, dx, rect.xmin, rect.xmax)
    ny, fy = _slab(py, dy, rect.ymin, rect.ymax)
    return np.maximum(nx, ny), np.minimum(fx, fy)


def ray_circle_interval(px, py, dx, dy, cx, cy, r):
    """Parameter interval (t1, t2) where the ray p + t*d is inside the circle."""
    fx = px - cx
    fy = py - cy
    a = dx * dx + dy * dy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - r * r
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(ok, (-b - sq) / (2.0 * a), np.inf)
        t2 = np.where(ok, (-b + sq) / (2.0 * a), -np.inf)
    return t1, t2


# -- line of sight ----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LosResult:
    blocked: bool
    blocker_id: str | None = None


def los_blocked(node: tuple[GeoPoint, float], tower: tuple[GeoPoint, float],
                buildings) -> LosResult:
    """Test whether any building volume intersects the 3-D node-tower segment.

    A building blocks when the 2-D segment crosses its footprint and the
    interpolated segment height somewhere in the crossing is at or below the
    building height. Reports the first blocker in crossing order (ties by id).
    """
    (npos, nh), (tpos, th) = node, tower
    if nh < 0:
        raise ValueError("node height must be >= 0")
    if th <= 0:
        raise ValueError("tower height must be > 0")
    dx = tpos.x - npos.x
    dy = tpos.y - npos.y
    best = None
    for b in buildings:
        t_in, t_out = ray_rect_interval(npos.x, npos.y, dx, dy, b.footprint)
        lo = max(float(t_in), 0.0)
        hi = min(float(t_out), 1.0)
        if lo > hi:
            continue
        h_lo = nh + lo * (th - nh)
        h_hi = nh + hi * (th - nh)
        if min(h_lo, h_hi) <= b.height:
            key = (lo, b.id)
            if best is None or key < best[0]:
                best = (key, b.id)
    if best is None:
        return LosResult(False, None)
    return LosResult(True, best[1])


def los_blocked_matrix(ax, ay, ah, bx, by, bh, buildings) -> np.ndarray:
    """Blockage for every (a_i, b_j) segment pair at once; returns a bool matrix.

    Same geometry as `los_blocked`, vectorized over endpoint pairs for the
    engine's link precompute. Blocker identity is not tracked here.
    """
    ax = np.asarray(ax, dtype=np.float64)[:, None]
    ay = np.asarray(ay, dtype=np.float64)[:, None]
    ah = np.asarray(ah, dtype=np.float64)[:, None]
    bx = np.asarray(bx, dtype=np.float64)[None, :]
    by = np.asarray(by, dtype=np.float64)[None, :]
    bh = np.asarray(bh, dtype=np.float64)[None, :]
    dx = bx - ax
    dy = by - ay
    dh = bh - ah
    blocked = np.zeros((ax.shape[0], bx.shape[1]), dtype=bool)
    for b in buildings:
        t_in, t_out = ray_rect_interval(ax, ay, dx, dy, b.footprint)
        lo = np.maximum(t_in, 0.0)
        hi = np.minimum(t_out, 1.0)
        cross = lo <= hi
        h_min = np.minimum(ah + lo * dh, ah + hi * dh)
        blocked |= cross & (h_min <= b.height)
    return blocked
