"""Measurement pipeline: cleaning, KPI tables, dead-zone forensics, power-outage
statistics, delay concentration, equity accounting and predictability fits.

All operations are pure over immutable frames and deterministic: medians use
the lower of two middles, permutation tests take explicit seeds, and grouping
output is sorted. See stats.py for the test machinery.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .geo import CityModel, building_stats, distance
from .ledger import UNKNOWN_TOWER
from .stats import (RegressionFit, logistic_fit, mann_whitney, median_low,
                    ols_fit, spearman_permutation)

DAY_SECONDS = 86400
DEFAULT_LATENCY_THRESHOLDS = (7, 10, 15, 20, 30, 60, 120, 300, 3600, 7200)
DEAD_SENTINEL_DBM = -130
DELAYED_THRESHOLD_S = 30


@dataclass(frozen=True, slots=True)
class CleanReport:
    input_count: int
    kept_count: int
    dropped_no_connectivity: int
    dropped_zero_signal: int
    dropped_out_of_bounds_tower: int
    dropped_delay_gt_24h: int
    flagged_unknown_tower: int

    def __post_init__(self):
        total = (self.kept_count + self.dropped_no_connectivity + self.dropped_zero_signal
                 + self.dropped_out_of_bounds_tower + self.dropped_delay_gt_24h)
        if total != self.input_count:
            raise ValueError("clean categories do not partition the input")


def clean(df: pd.DataFrame, city: CityModel) -> tuple[pd.DataFrame, CleanReport]:
    """Apply the four drop rules in their fixed order, then flag UNKNOWN towers.

    Order matters for the category counts: missing signal, zero signal, known
    tower out of bounds, then delays of strictly more than 24 hours. Rows with
    an UNKNOWN tower are kept but flagged (excluded only from distance and
    direction analyses).
    """
    n_input = len(df)
    rss = df["rss_dbm"]
    m_missing = rss.isna().to_numpy()
    m_zero = (~m_missing) & (rss == 0).to_numpy()
    bounds = city.bounds()
    out_ids = {t.id for t in city.towers
               if not bounds.contains(t.position)}
    known_oob = df["tower_id"].isin(out_ids).to_numpy()
    m_oob = (~m_missing) & (~m_zero) & known_oob
    m_delay = (~m_missing) & (~m_zero) & (~m_oob) & (df["latency_s"] > DAY_SECONDS).to_numpy()
    drop = m_missing | m_zero | m_oob | m_delay
    kept = df.loc[~drop].reset_index(drop=True)
    report = CleanReport(
        input_count=n_input,
        kept_count=len(kept),
        dropped_no_connectivity=int(m_missing.sum()),
        dropped_zero_signal=int(m_zero.sum()),
        dropped_out_of_bounds_tower=int(m_oob.sum()),
        dropped_delay_gt_24h=int(m_delay.sum()),
        flagged_unknown_tower=int((kept["tower_id"] == UNKNOWN_TOWER).sum()),
    )
    return kept, report


def latency_table(df: pd.DataFrame,
                  thresholds=DEFAULT_LATENCY_THRESHOLDS) -> pd.DataFrame:
    """Counts and percentages of rows at or above each latency threshold."""
    total = len(df)
    lat = np.sort(df["latency_s"].to_numpy()) if total else np.array([], dtype=np.int64)
    rows = []
    for thr in thresholds:
        count = total - int(np.searchsorted(lat, thr, side="left"))
        pct = round(100.0 * count / total, 2) if total else 0.0
        rows.append({"min_latency_s": thr, "count": count, "pct": pct})
    return pd.DataFrame(rows)


@dataclass(frozen=True, slots=True)
class NodeSummary:
    node_id: str
    median_rss: float
    median_latency: float | None
    reading_count: int
    delayed_count_10: int
    delayed_count_30: int
    delayed_count_60: int


def node_summaries(df: pd.DataFrame, all_site_ids=None,
                   dead_sentinel: float = DEAD_SENTINEL_DBM) -> list[NodeSummary]:
    """Per-node medians; sites with no rows at all get the dead sentinel."""
    out = {}
    for node_id, g in df.groupby("node_id", observed=True, sort=True):
        lat = g["latency_s"].to_numpy()
        out[str(node_id)] = NodeSummary(
            node_id=str(node_id),
            median_rss=median_low(g["rss_dbm"].to_numpy()),
            median_latency=median_low(lat),
            reading_count=len(g),
            delayed_count_10=int((lat >= 10).sum()),
            delayed_count_30=int((lat >= 30).sum()),
            delayed_count_60=int((lat >= 60).sum()),
        )
    if all_site_ids is not None:
        for sid in all_site_ids:
            if sid not in out:
                out[sid] = NodeSummary(sid, float(dead_sentinel), None, 0, 0, 0, 0)
    return [out[k] for k in sorted(out)]


def detect_dead_zones(summaries, threshold_success_rate: float = 0.0) -> list[str]:
    """Sites whose connection success rate over the run is at the threshold (zero)."""
    del threshold_success_rate  # only the zero-success criterion is defined
    return [s.node_id for s in summaries if s.reading_count == 0]


def dead_vs_relocated(city: CityModel, dead_sites, relocated_sites) -> dict:
    """Tallest-building-within-100 m pairs and a one-sided rank-sum p-value.

    Tests whether the dead locations sit among taller near buildings than the
    locations their nodes were moved to. Missing neighborhoods count as zero.
    """
    if len(dead_sites) != len(relocated_sites):
        raise ValueError("paired lists must have equal length")

    def tallest(site_id):
        st = building_stats(city.site_by_id(site_id), city.buildings, 100.0)
        return st.tallest_height if st.tallest_height is not None else 0.0

    dead_h = [tallest(s) for s in dead_sites]
    rel_h = [tallest(s) for s in relocated_sites]
    res = mann_whitney(dead_h, rel_h, alternative="greater")
    return {
        "pairs": [{"dead_site": d, "dead_tallest_100m": dh,
                   "relocated_site": r, "relocated_tallest_100m": rh}
                  for d, dh, r, rh in zip(dead_sites, dead_h, relocated_sites, rel_h)],
        "rank_sum_u": res.u,
        "rank_sum_p": res.p_value,
        "method": res.method,
    }


def nearest_tower_distance(city: CityModel, site_id: str) -> float:
    site = city.site_by_id(site_id)
    return min(distance(site.position, t.position) for t in city.towers)


def distance_comparison(city: CityModel, dead_sites, healthy_sites) -> dict:
    """Two-sided rank-sum on nearest-tower distance, dead vs healthy sites."""
    dead_d = [nearest_tower_distance(city, s) for s in dead_sites]
    healthy_d = [nearest_tower_distance(city, s) for s in healthy_sites]
    res = mann_whitney(dead_d, healthy_d, alternative="two-sided")
    return {
        "dead_median_m": median_low(dead_d) if dead_d else None,
        "healthy_median_m": median_low(healthy_d) if healthy_d else None,
        "rank_sum_p": res.p_value,
        "method": res.method,
    }


def psm_stats(episodes, sampling_interval_s: int = 300) -> dict:
    """Aggregate power-saving episodes; lost readings are floor(total/interval)."""
    if isinstance(episodes, pd.DataFrame):
        durations = episodes["duration_s"].astype(np.int64).tolist()
        node_ids = episodes["node_id"].astype(str).tolist()
    else:
        durations = [e.duration_s for e in episodes]
        node_ids = [e.node_id for e in episodes]
    if not durations:
        return {"episode_count": 0, "total_s": 0, "median_len_s": 0, "max_len_s": 0,
                "min_len_s": 0, "per_device_totals": {}, "device_count": 0,
                "lost_readings_estimate": 0}
    per_device: dict[str, int] = {}
    for nid, d in zip(node_ids, durations):
        per_device[nid] = per_device.get(nid, 0) + d
    total = int(sum(durations))
    return {
        "episode_count": len(durations),
        "total_s": total,
        "median_len_s": int(median_low(durations)),
        "max_len_s": int(max(durations)),
        "min_len_s": int(min(durations)),
        "per_device_totals": dict(sorted(per_device.items())),
        "device_count": len(per_device),
        "lost_readings_estimate": total // sampling_interval_s,
    }


def delayed_concentration(df: pd.DataFrame, latency_threshold: int = DELAYED_THRESHOLD_S,
                          group_by: str = "date") -> pd.DataFrame:
    """Per-group share of delayed readings next to its share of all readings."""
    if group_by == "date":
        keys = df["sample_time"].dt.strftime("%Y-%m-%d")
    elif group_by == "node":
        keys = df["node_id"]
    elif group_by == "tower":
        keys = df["tower_id"]
    else:
        raise ValueError(f"unknown group_by {group_by!r}")
    keys = pd.Series(keys.to_numpy(), name="group")
    delayed_mask = (df["latency_s"] >= latency_threshold).to_numpy()
    total_by = keys.groupby(keys, sort=True).size()
    delayed_by = keys[delayed_mask].groupby(keys[delayed_mask], sort=True).size()
    n_total = len(df)
    n_delayed = int(delayed_mask.sum())
    out = pd.DataFrame({
        "group": total_by.index,
        "total_count": total_by.to_numpy(),
        "delayed_count": delayed_by.reindex(total_by.index, fill_value=0).to_numpy(),
    })
    out["pct_of_total"] = (100.0 * out.total_count / n_total).round(4) if n_total else 0.0
    out["pct_of_delayed"] = ((100.0 * out.delayed_count / n_delayed).round(4)
                             if n_delayed else 0.0)
    out = out.sort_values(["delayed_count", "group"],
                          ascending=[False, True]).reset_index(drop=True)
    return out


def _local_hour_weekday(df: pd.DataFrame, lon: float):
    """Clock features in local standard time (fixed offset from the longitude)."""
    offset_h = int(round(lon / 15.0))
    local = df["sample_time"] + pd.Timedelta(hours=offset_h)
    return local.dt.hour.to_numpy(), local.dt.weekday.to_numpy(), \
        local.dt.strftime("%Y-%m-%d")


def temporal_null_check(df: pd.DataFrame, weather: pd.DataFrame | None = None,
                        lon: float = -87.63, n_perm: int = 1000, seed: int = 0,
                        max_rows: int = 100_000) -> pd.DataFrame:
    """Spearman correlations of RSS/latency against clock and weather features.

    Uses an evenly strided deterministic subsample (permutation tests over
    millions of rows would otherwise dominate the runtime) and seeded
    permutation p-values.
    """
    if len(df) > max_rows:
        idx = np.unique(np.linspace(0, len(df) - 1, max_rows).astype(np.int64))
        df = df.iloc[idx]
    hour, weekday, datestr = _local_hour_weekday(df, lon)
    features: dict[str, np.ndarray | None] = {"hour": hour, "weekday": weekday}
    if weather is not None:
        # boundary samples map to a local date just outside the series; pad it
        wx = weather.set_index("date").sort_index()
        for col in ("temp_c", "precip_mm"):
            joined = wx[col].reindex(datestr.unique()).ffill().bfill()
            features[col] = joined.reindex(datestr).to_numpy(dtype=float)
    rows = []
    for mi, metric in enumerate(("rss_dbm", "latency_s")):
        y = df[metric].to_numpy(dtype=float)
        for fi, (fname, x) in enumerate(sorted(features.items())):
            if x is None or np.isnan(np.asarray(x, dtype=float)).any():
                rows.append({"feature": fname, "metric": metric, "rho": None,
                             "p_value": None, "note": "feature unavailable"})
                continue
            rng = np.random.default_rng([seed, mi, fi])
            res = spearman_permutation(x, y, n_perm=n_perm, rng=rng)
            rows.append({"feature": fname, "metric": metric, "rho": res.rho,
                         "p_value": res.p_value, "note": res.note})
    return pd.DataFrame(rows)


def equity_report(issue_sites, city: CityModel) -> dict:
    """Zone-class shares for an issue-site set against the all-sites baseline."""
    all_ids = {s.id for s in city.sites}
    issue = list(issue_sites)
    unknown = [s for s in issue if s not in all_ids]
    if unknown:
        raise ValueError(f"issue sites not in the city: {unknown[:5]}")

    def shares(site_ids):
        if not site_ids:
            return None, None
        dis = maj = 0
        for sid in site_ids:
            zone = city.zone_by_id(city.site_by_id(sid).zone_id)
            dis += zone.disadvantaged
            maj += zone.pct_minority > 0.5
        return dis / len(site_ids), maj / len(site_ids)

    base_dis, base_maj = shares([s.id for s in city.sites])
    if not issue:
        return {"n_issue_sites": 0, "pct_issue_in_disadvantaged": None,
                "pct_issue_in_majority_minority": None,
                "baseline_pct_disadvantaged": base_dis,
                "baseline_pct_majority_minority": base_maj,
                "note": "undefined: empty issue set"}
    dis, maj = shares(issue)
    return {"n_issue_sites": len(issue), "pct_issue_in_disadvantaged": dis,
            "pct_issue_in_majority_minority": maj,
            "baseline_pct_disadvantaged": base_dis,
            "baseline_pct_majority_minority": base_maj, "note": None}


FEATURE_COLUMNS = ["closest_building_distance_m", "closest_building_height_m",
                   "tallest_100m", "mean_100m", "median_100m",
                   "tallest_250m", "mean_250m", "median_250m",
                   "tallest_500m", "mean_500m", "median_500m",
                   "winter_shadow_minutes"]


def site_feature_table(city: CityModel, shadow_minutes_by_site: dict) -> pd.DataFrame:
    """The building/shadow feature matrix used by the predictability fits.

    Empty neighborhoods contribute zeros (no buildings means zero heights).
    """
    rows = []
    for site in sorted(city.sites, key=lambda s: s.id):
        rec = {"node_id": site.id}
        st100 = building_stats(site, city.buildings, 100.0)
        st250 = building_stats(site, city.buildings, 250.0)
        st500 = building_stats(site, city.buildings, 500.0)
        rec["closest_building_distance_m"] = (st500.closest_distance
                                              if st500.closest_distance is not None else 500.0)
        rec["closest_building_height_m"] = st500.closest_height or 0.0
        for label, st in (("100m", st100), ("250m", st250), ("500m", st500)):
            rec[f"tallest_{label}"] = st.tallest_height or 0.0
            rec[f"mean_{label}"] = st.mean_height or 0.0
            rec[f"median_{label}"] = st.median_height or 0.0
        rec["winter_shadow_minutes"] = float(shadow_minutes_by_site.get(site.id, 0.0))
        rows.append(rec)
    return pd.DataFrame(rows).set_index("node_id")


def predict_psm(site_features: pd.DataFrame, psm_flags, psm_durations) -> dict:
    """Logistic fit for entering power saving, linear fit for time spent in it."""
    X = site_features.to_numpy(dtype=float)
    y_flag = np.asarray(psm_flags, dtype=float)
    y_dur = np.asarray(psm_durations, dtype=float)
    if not (len(X) == len(y_flag) == len(y_dur)):
        raise ValueError("features and outcomes must align")
    logit = logistic_fit(X, y_flag)
    linear = ols_fit(X, y_dur)
    return {
        "feature_names": ["intercept"] + list(site_features.columns),
        "logistic": logit,
        "linear": linear,
        "perfect_separation": logit.separated,
    }


# -- report assembly -----------------------------------------------------------


def fit_to_dict(fit: RegressionFit, names) -> dict:
    return {
        "coef": {n: float(c) for n, c in zip(names, fit.coef)},
        "p_values": {n: float(p) for n, p in zip(names, fit.p_values)},
        "converged": fit.converged,
        "separated": fit.separated,
        "n_iter": fit.n_iter,
    }


def percentages_svg(conc: pd.DataFrame, path, threshold_s: int = DELAYED_THRESHOLD_S) -> None:
    """Scatter of per-date delayed share against total share, as a standalone SVG."""
    w, h, m = 640, 480, 56
    xs = conc["pct_of_total"].to_numpy(dtype=float)
    ys = conc["pct_of_delayed"].to_numpy(dtype=float)
    xmax = max(1e-9, float(xs.max()) if len(xs) else 1.0) * 1.08
    ymax = max(1e-9, float(ys.max()) if len(ys) else 1.0) * 1.08
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
             f'<rect width="{w}" height="{h}" fill="white"/>',
             f'<line x1="{m}" y1="{h-m}" x2="{w-m}" y2="{h-m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h-m}" stroke="black"/>',
             f'<text x="{w//2}" y="{h-14}" text-anchor="middle" font-size="13">'
             f'share of all readings per date (%)</text>',
             f'<text x="16" y="{h//2}" transform="rotate(-90 16 {h//2})" text-anchor="middle"'
             f' font-size="13">share of readings delayed &#8805;{threshold_s}s (%)</text>']
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        px = m + frac * (w - 2 * m)
        py = h - m - frac * (h - 2 * m)
        parts.append(f'<text x="{px:.1f}" y="{h-m+16}" text-anchor="middle" font-size="10">'
                     f'{frac*xmax:.2f}</text>')
        parts.append(f'<text x="{m-6}" y="{py:.1f}" text-anchor="end" font-size="10">'
                     f'{frac*ymax:.2f}</text>')
    for x, y in zip(xs, ys):
        px = m + (x / xmax) * (w - 2 * m)
        py = h - m - (y / ymax) * (h - 2 * m)
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="steelblue" '
                     f'fill-opacity="0.7"/>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
