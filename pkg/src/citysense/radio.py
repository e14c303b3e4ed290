"""Link budget: log-distance path loss, LOS blockage penalty, tower selection.

Shadowing draws are truncated at a configurable number of sigmas so a single
draw cannot rescue a link that is structurally far below sensitivity; this is
what makes constructed dead zones absolute rather than merely unlikely.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import CityModel, NodeSite, Tower, distance, los_blocked


class Outcome(enum.Enum):
    SUCCESS = "Success"
    FAIL_WEAK = "FailWeak"
    FAIL_OUTAGE = "FailOutage"


def default_latency_pmf() -> dict[int, float]:
    """Latency distribution of direct (unbuffered) transmissions, seconds.

    Mass concentrates on 4-6 s with a geometric tail from 7 s that is
    truncated below 30 s; multi-second delays beyond that come from retry
    buffering, not from the link itself.
    """
    pmf = {2: 0.02, 3: 0.08, 4: 0.22, 5: 0.32, 6: 0.21}
    tail_mass = 0.15
    ratio = 0.737
    ks = list(range(7, 30))
    weights = [ratio ** (k - 7) for k in ks]
    total_w = sum(weights)
    for k, w in zip(ks, weights):
        pmf[k] = tail_mass * w / total_w
    pmf[5] += 1.0 - sum(pmf.values())
    return pmf


@dataclass(frozen=True)
class RadioParams:
    ref_path_loss_db: float = 40.0  # at d0
    d0_m: float = 1.0
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 6.0
    shadowing_clip_sigmas: float = 2.5
    blockage_loss_db: float = 25.0
    sensitivity_dbm: float = -120.0
    dead_sentinel_dbm: float = -130.0
    base_latency_pmf: dict[int, float] = field(default_factory=default_latency_pmf)
    lte_bands: tuple[int, ...] = (2, 4, 12)  # metadata only

    def __post_init__(self):
        total = sum(self.base_latency_pmf.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"latency pmf sums to {total}, not 1")
        if any((not isinstance(k, int)) or k < 2 for k in self.base_latency_pmf):
            raise ValueError("latency support must be integers >= 2")
        if not self.sensitivity_dbm > self.dead_sentinel_dbm:
            raise ValueError("sensitivity must exceed the dead sentinel")

    def latency_support(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted support values and their cumulative probabilities."""
        ks = np.array(sorted(self.base_latency_pmf), dtype=np.int64)
        cum = np.cumsum([self.base_latency_pmf[int(k)] for k in ks])
        cum[-1] = 1.0
        return ks, cum


def path_loss_db(d_m: float, params: RadioParams) -> float:
    if d_m <= 0:
        raise ValueError("distance must be > 0")
    return (params.ref_path_loss_db
            + 10.0 * params.path_loss_exponent * math.log10(d_m / params.d0_m))


def shadowing_draw(params: RadioParams, rng: np.random.Generator) -> float:
    clip = params.shadowing_clip_sigmas * params.shadowing_sigma_db
    return float(np.clip(rng.normal(0.0, params.shadowing_sigma_db), -clip, clip))


def expected_rss(node: NodeSite, tower: Tower, city: CityModel,
                 params: RadioParams) -> float:
    """RSS with shadowing suppressed: tx power minus path loss minus blockage."""
    d = distance(node.position, tower.position)
    loss = path_loss_db(d, params)
    blocked = los_blocked((node.position, node.mount_height),
                          (tower.position, tower.mast_height),
                          city.buildings).blocked
    return tower.tx_power_dbm - loss - (params.blockage_loss_db if blocked else 0.0)


def rss(node: NodeSite, tower: Tower, city: CityModel, params: RadioParams,
        rng: np.random.Generator) -> float:
    """One RSS observation for the node-tower link (dBm)."""
    return expected_rss(node, tower, city, params) + shadowing_draw(params, rng)


def select_tower(node: NodeSite, towers, city: CityModel, params: RadioParams,
                 rng: np.random.Generator) -> tuple[str, float]:
    """Pick the tower with the best expected RSS (ties to lowest id); draw its RSS."""
    if not towers:
        raise ValueError("need at least one tower")
    best = min(towers, key=lambda t: (-expected_rss(node, t, city, params), t.id))
    return best.id, expected_rss(node, best, city, params) + shadowing_draw(params, rng)


@dataclass(frozen=True, slots=True)
class ConnectionAttempt:
    node_id: str
    tower_id: str
    time: float  # seconds since scenario start
    rss_dbm: float
    outcome: Outcome


def attempt_connect(node: NodeSite, t: float, city: CityModel, params: RadioParams,
                    rng: np.random.Generator) -> ConnectionAttempt:
    """Single connection attempt at time t against the best tower."""
    tower_id, drawn = select_tower(node, city.towers, city, params, rng)
    tower = city.tower_by_id(tower_id)
    if any(w.contains(t) for w in tower.outages):
        outcome = Outcome.FAIL_OUTAGE
    elif drawn < params.sensitivity_dbm:
        outcome = Outcome.FAIL_WEAK
    else:
        outcome = Outcome.SUCCESS
    return ConnectionAttempt(node.id, tower_id, t, drawn, outcome)


def sample_latency(params: RadioParams, rng: np.random.Generator) -> int:
    """Transmit latency draw for a successful direct transmission, whole seconds."""
    ks, cum = params.latency_support()
    return int(ks[np.searchsorted(cum, rng.random(), side="right")])


def ici_candidates(city: CityModel, spread_fraction: float = 0.2):
    """Sites whose three nearest towers sit at near-equal distances.

    A geometric screen only: a spread within +-spread_fraction of the mean
    distance marks a candidate for inter-cell interference.
    """
    out = []
    for site in city.sites:
        if len(city.towers) < 3:
            continue
        by_dist = sorted(city.towers, key=lambda t: (distance(site.position, t.position), t.id))
        trio = by_dist[:3]
        dists = [distance(site.position, t.position) for t in trio]
        mean = sum(dists) / 3.0
        lo, hi = mean * (1 - spread_fraction), mean * (1 + spread_fraction)
        if all(lo <= d <= hi for d in dists):
            out.append((site.id, [t.id for t in trio], dists))
    return out
