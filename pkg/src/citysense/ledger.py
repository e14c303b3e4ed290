"""Cloud-side reading ledger: latency computation and a fixed CSV interchange format.

The CSV contract (stable, bit-exact):
  header  node_id,tower_id,sample_time,arrival_time,latency_s,rss_dbm,battery_pct,payload
  times   ISO-8601 UTC with trailing Z, whole seconds
  tower   the literal UNKNOWN when the serving tower could not be resolved
  rss     integer dBm; battery_pct one decimal; payload free text without commas/newlines
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

UNKNOWN_TOWER = "UNKNOWN"
DEFAULT_UNKNOWN_FRACTION = 0.127

LEDGER_COLUMNS = ["node_id", "tower_id", "sample_time", "arrival_time",
                  "latency_s", "rss_dbm", "battery_pct", "payload"]
_HEADER = ",".join(LEDGER_COLUMNS) + "\n"
_TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True, slots=True)
class Reading:
    """A reading as handed over by a node, before the cloud stamps it."""

    node_id: str
    tower_id: str
    sample_time: datetime
    rss_dbm: float
    battery_pct: float
    payload: str = ""


@dataclass(frozen=True, slots=True)
class LedgerRow:
    node_id: str
    tower_id: str
    sample_time: datetime
    arrival_time: datetime
    latency_s: int
    rss_dbm: float
    battery_pct: float
    payload: str = ""

    def __post_init__(self):
        if self.arrival_time < self.sample_time:
            raise ValueError("arrival precedes sample time")
        if self.latency_s != math.floor((self.arrival_time - self.sample_time).total_seconds()):
            raise ValueError("latency must be the floored whole-second difference")


def ingest(reading: Reading, arrival_time: datetime) -> LedgerRow:
    """Stamp a reading with its arrival; latency is floored to whole seconds."""
    if arrival_time < reading.sample_time:
        raise ValueError("arrival precedes sample time")
    latency = math.floor((arrival_time - reading.sample_time).total_seconds())
    return LedgerRow(reading.node_id, reading.tower_id, reading.sample_time,
                     arrival_time, latency, reading.rss_dbm, reading.battery_pct,
                     reading.payload)


def rows_to_frame(rows) -> pd.DataFrame:
    return pd.DataFrame({
        "node_id": [r.node_id for r in rows],
        "tower_id": [r.tower_id for r in rows],
        "sample_time": pd.to_datetime([r.sample_time for r in rows]),
        "arrival_time": pd.to_datetime([r.arrival_time for r in rows]),
        "latency_s": np.array([r.latency_s for r in rows], dtype=np.int64),
        "rss_dbm": np.array([round(r.rss_dbm) for r in rows], dtype=np.int64),
        "battery_pct": np.array([round(r.battery_pct, 1) for r in rows], dtype=np.float64),
        "payload": [r.payload for r in rows],
    })


def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame({
        "node_id": pd.Series(dtype=str),
        "tower_id": pd.Series(dtype=str),
        "sample_time": pd.Series(dtype="datetime64[ns]"),
        "arrival_time": pd.Series(dtype="datetime64[ns]"),
        "latency_s": pd.Series(dtype=np.int64),
        "rss_dbm": pd.Series(dtype=np.int64),
        "battery_pct": pd.Series(dtype=np.float64),
        "payload": pd.Series(dtype=str),
    })


def _string_lut(values: pd.Series, suffix: str) -> np.ndarray:
    """Map a low-cardinality string column to bytes with a suffix attached."""
    cat = pd.Categorical(values)
    if cat.categories.str.contains(",|\n").any():
        raise ValueError("ledger string fields must not contain commas or newlines")
    lut = np.array([s + suffix for s in cat.categories], dtype="S")
    return lut[cat.codes]


def _stamp_luts(seconds: np.ndarray, suffix: str):
    day = seconds // 86400
    sod = seconds % 86400
    d0, d1 = int(day.min()), int(day.max())
    dates = np.char.add(
        np.datetime_as_string((np.arange(d0, d1 + 1)).astype("datetime64[D]"), unit="D"),
        "T").astype("S11")
    s = np.arange(86400)
    times = np.array([f"{h:02d}:{m:02d}:{sec:02d}Z{suffix}"
                      for h, m, sec in zip(s // 3600, (s // 60) % 60, s % 60)], dtype="S")
    return dates[day - d0], times[sod]


def write_ledger(df: pd.DataFrame, path) -> None:
    """Write the fixed-format ledger CSV (fast fixed-width byte assembly)."""
    with open(path, "wb", buffering=1 << 22) as f:
        f.write(_HEADER.encode())
        n = len(df)
        if n == 0:
            return
        sample_s = df["sample_time"].to_numpy().astype("datetime64[s]").astype(np.int64)
        arrival_s = df["arrival_time"].to_numpy().astype("datetime64[s]").astype(np.int64)
        lat = df["latency_s"].to_numpy().astype(np.int64)
        rss = np.rint(df["rss_dbm"].to_numpy()).astype(np.int64)
        b10 = np.rint(df["battery_pct"].to_numpy() * 10.0).astype(np.int64)
        cols = [
            _string_lut(df["node_id"], ","),
            _string_lut(df["tower_id"], ","),
        ]
        sd, st = _stamp_luts(sample_s, ",")
        ad, at = _stamp_luts(arrival_s, ",")
        lat_lut = np.array([b"%d," % v for v in range(int(lat.max()) + 1)], dtype="S")
        r_lo = int(rss.min())
        rss_lut = np.array([b"%d," % v for v in range(r_lo, int(rss.max()) + 1)], dtype="S")
        b_lut = np.array([("%.1f," % (v / 10.0)).encode() for v in range(int(b10.max()) + 1)],
                         dtype="S")
        cols += [sd, st, ad, at, lat_lut[lat], rss_lut[rss - r_lo], b_lut[b10],
                 _string_lut(df["payload"], "\n")]
        widths = [c.dtype.itemsize for c in cols]
        rec = np.dtype([(f"f{i}", f"S{w}") for i, w in enumerate(widths)])
        chunk = 1_000_000
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            buf = np.empty(hi - lo, dtype=rec)
            for i, c in enumerate(cols):
                buf[f"f{i}"] = c[lo:hi]
            f.write(buf.tobytes().replace(b"\x00", b""))


def read_ledger(path) -> pd.DataFrame:
    """Read a ledger CSV back into the canonical frame (lossless round-trip)."""
    df = pd.read_csv(path, dtype={"node_id": str, "tower_id": str, "payload": str},
                     keep_default_na=False)
    if list(df.columns) != LEDGER_COLUMNS:
        raise ValueError(f"unexpected ledger header in {path}")
    if len(df) == 0:
        return _empty_frame()
    df["sample_time"] = pd.to_datetime(df["sample_time"], format=_TIME_FORMAT)
    df["arrival_time"] = pd.to_datetime(df["arrival_time"], format=_TIME_FORMAT)
    df["latency_s"] = df["latency_s"].astype(np.int64)
    df["rss_dbm"] = df["rss_dbm"].astype(np.int64)
    df["battery_pct"] = df["battery_pct"].astype(np.float64)
    return df
