"""Deterministic discrete-event engine binding city, radio, solar, power and firmware.

One run is single-threaded over its event queue; per-node randomness comes
from substreams keyed by (master_seed, node id hash), so adding or editing one
node never perturbs another node's draws. Time is integer seconds from the
scenario start; the battery integrates on the one-minute solar grid between
events, with sampling/transmit pulses applied at event boundaries.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np
import pandas as pd

from . import __version__ as _pkg_version
from .firmware import NodeState, wake as fw_wake
from .geo import CityModel, TimeWindow
from .ledger import DEFAULT_UNKNOWN_FRACTION, LEDGER_COLUMNS, UNKNOWN_TOWER, write_ledger
from .power import BatteryState, Mode, PowerParams, PsmEpisode, write_psm_csv
from .radio import Outcome, RadioParams, path_loss_db
from .solar import PanelSpec, shading_mask, sun_angles

TICK_S = 60  # battery integration grid (one solar minute)


@dataclass(frozen=True, slots=True)
class OutageWindow:
    start_s: int
    end_s: int
    tower_ids: tuple[str, ...] | None = None  # None applies to every tower

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError("outage window must have start < end")


@dataclass
class ScenarioConfig:
    city: CityModel
    start: datetime
    duration_days: int
    master_seed: int = 0
    sampling_interval_s: int = 300
    radio: RadioParams = field(default_factory=RadioParams)
    power: PowerParams = field(default_factory=PowerParams)
    panel: PanelSpec = field(default_factory=PanelSpec)
    outages: list[OutageWindow] = field(default_factory=list)
    cloud_attenuation: list[float] = field(default_factory=list)  # per day
    weather_temp_c: list[float] | None = None
    weather_precip_mm: list[float] | None = None
    unknown_tower_fraction: float = DEFAULT_UNKNOWN_FRACTION
    event_log_level: str = "transitions"  # "full" | "transitions"
    solar_block_days: int = 7
    activation_s: dict[str, int] = field(default_factory=dict)

    def validate(self) -> None:
        if self.duration_days <= 0:
            raise ValueError("duration_days must be > 0")
        if self.sampling_interval_s <= 0 or self.sampling_interval_s % TICK_S != 0:
            raise ValueError("sampling_interval_s must be a positive multiple of 60")
        if self.event_log_level not in ("full", "transitions"):
            raise ValueError("event_log_level must be 'full' or 'transitions'")
        if not 0 <= self.unknown_tower_fraction < 1:
            raise ValueError("unknown_tower_fraction outside [0, 1)")
        self.city.validate()
        site_ids = {s.id for s in self.city.sites}
        for sid, act in self.activation_s.items():
            if sid not in site_ids:
                raise ValueError(f"activation for unknown site {sid}")
            if act % self.sampling_interval_s != 0 or act < 0:
                raise ValueError("activation times must be non-negative interval multiples")
        tower_ids = {t.id for t in self.city.towers}
        for w in self.outages:
            if w.tower_ids is not None:
                for tid in w.tower_ids:
                    if tid not in tower_ids:
                        raise ValueError(f"outage references unknown tower {tid}")

    @property
    def duration_s(self) -> int:
        return self.duration_days * 86400

    def cloud_for_day(self, day: int) -> float:
        if day < len(self.cloud_attenuation):
            return self.cloud_attenuation[day]
        return 0.0

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "city": self.city.to_dict(),
            "start": self.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "duration_days": self.duration_days,
            "master_seed": self.master_seed,
            "sampling_interval_s": self.sampling_interval_s,
            "radio": {
                "ref_path_loss_db": self.radio.ref_path_loss_db,
                "d0_m": self.radio.d0_m,
                "path_loss_exponent": self.radio.path_loss_exponent,
                "shadowing_sigma_db": self.radio.shadowing_sigma_db,
                "shadowing_clip_sigmas": self.radio.shadowing_clip_sigmas,
                "blockage_loss_db": self.radio.blockage_loss_db,
                "sensitivity_dbm": self.radio.sensitivity_dbm,
                "dead_sentinel_dbm": self.radio.dead_sentinel_dbm,
                "base_latency_pmf": {str(k): v for k, v in self.radio.base_latency_pmf.items()},
                "lte_bands": list(self.radio.lte_bands),
            },
            "power": {
                "nominal_capacity_mah": self.power.nominal_capacity_mah,
                "usable_fraction": self.power.usable_fraction,
                "nominal_voltage_v": self.power.nominal_voltage_v,
                "sleep_current_ma": self.power.sleep_current_ma,
                "gas_sample_current_ma": self.power.gas_sample_current_ma,
                "gas_sample_duration_s": self.power.gas_sample_duration_s,
                "gas_sample_interval_s": self.power.gas_sample_interval_s,
                "pm_sample_current_ma": self.power.pm_sample_current_ma,
                "pm_sample_duration_s": self.power.pm_sample_duration_s,
                "modem_tx_current_ma": self.power.modem_tx_current_ma,
                "modem_fail_duration_s": self.power.modem_fail_duration_s,
                "charge_efficiency": self.power.charge_efficiency,
                "psm_enter_pct": self.power.psm_enter_pct,
                "psm_exit_pct": self.power.psm_exit_pct,
            },
            "panel": {"rated_power_w": self.panel.rated_power_w},
            "outages": [{"start_s": w.start_s, "end_s": w.end_s,
                         "tower_ids": list(w.tower_ids) if w.tower_ids else None}
                        for w in self.outages],
            "cloud_attenuation": list(self.cloud_attenuation),
            "weather_temp_c": self.weather_temp_c,
            "weather_precip_mm": self.weather_precip_mm,
            "unknown_tower_fraction": self.unknown_tower_fraction,
            "event_log_level": self.event_log_level,
            "solar_block_days": self.solar_block_days,
            "activation_s": dict(self.activation_s),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        radio = RadioParams(
            ref_path_loss_db=d["radio"]["ref_path_loss_db"],
            d0_m=d["radio"]["d0_m"],
            path_loss_exponent=d["radio"]["path_loss_exponent"],
            shadowing_sigma_db=d["radio"]["shadowing_sigma_db"],
            shadowing_clip_sigmas=d["radio"]["shadowing_clip_sigmas"],
            blockage_loss_db=d["radio"]["blockage_loss_db"],
            sensitivity_dbm=d["radio"]["sensitivity_dbm"],
            dead_sentinel_dbm=d["radio"]["dead_sentinel_dbm"],
            base_latency_pmf={int(k): v for k, v in d["radio"]["base_latency_pmf"].items()},
            lte_bands=tuple(d["radio"]["lte_bands"]),
        )
        power = PowerParams(**d["power"])
        cfg = cls(
            city=CityModel.from_dict(d["city"]),
            start=datetime.strptime(d["start"], "%Y-%m-%dT%H:%M:%SZ"),
            duration_days=d["duration_days"],
            master_seed=d["master_seed"],
            sampling_interval_s=d["sampling_interval_s"],
            radio=radio,
            power=power,
            panel=PanelSpec(**d["panel"]),
            outages=[OutageWindow(w["start_s"], w["end_s"],
                                  tuple(w["tower_ids"]) if w["tower_ids"] else None)
                     for w in d["outages"]],
            cloud_attenuation=list(d["cloud_attenuation"]),
            weather_temp_c=d.get("weather_temp_c"),
            weather_precip_mm=d.get("weather_precip_mm"),
            unknown_tower_fraction=d["unknown_tower_fraction"],
            event_log_level=d["event_log_level"],
            solar_block_days=d["solar_block_days"],
            activation_s=dict(d.get("activation_s") or {}),
        )
        cfg.validate()
        return cfg

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class EventQueue:
    """Priority queue ordered by (time, insertion sequence); causality enforced."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = -math.inf

    def push(self, t, item) -> None:
        if t < self.now:
            raise ValueError(f"event scheduled at {t} before current time {self.now}")
        heapq.heappush(self._heap, (t, self._seq, item))
        self._seq += 1

    def pop(self):
        t, seq, item = heapq.heappop(self._heap)
        self.now = t
        return t, seq, item

    def __len__(self) -> int:
        return len(self._heap)


def _stable_site_key(node_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(node_id.encode(), digest_size=8).digest(), "big")


class _NodeRt:
    """Engine-side runtime bundle for one node."""

    __slots__ = ("site", "idx", "state", "act", "n_wakes", "best_tower_idx",
                 "best_exp_rss", "noise", "lat_draws", "unk", "outage",
                 "capture_cum", "last_t", "charge", "psm_start",
                 "wakes", "emitted", "buffered_end", "suppressed_psm",
                 "suppressed_recording", "reboots", "fail_weak", "fail_outage",
                 "psm_seconds", "psm_count", "successes")

    def __init__(self, site, idx):
        self.site = site
        self.idx = idx
        self.psm_start = None
        self.wakes = 0
        self.emitted = 0
        self.buffered_end = 0
        self.suppressed_psm = 0
        self.suppressed_recording = 0
        self.reboots = 0
        self.fail_weak = 0
        self.fail_outage = 0
        self.psm_seconds = 0
        self.psm_count = 0
        self.successes = 0


@dataclass
class SimOutput:
    ledger: pd.DataFrame
    events: list[dict]
    psm_episodes: list[PsmEpisode]
    node_accounting: pd.DataFrame
    manifest: dict
    config: ScenarioConfig
    attempts: list[dict] | None = None

    def write(self, outdir) -> None:
        import os
        os.makedirs(outdir, exist_ok=True)
        write_ledger(self.ledger, os.path.join(outdir, "ledger.csv"))
        base = self.config.start
        with open(os.path.join(outdir, "events.jsonl"), "w") as f:
            for e in self.events:
                rec = {"t": (base + timedelta(seconds=e["t"])).strftime("%Y-%m-%dT%H:%M:%SZ"),
                       "node_id": e["node_id"], "event": e["event"],
                       "detail": e.get("detail", {})}
                f.write(json.dumps(rec, sort_keys=True) + "\n")
        if self.attempts:
            with open(os.path.join(outdir, "attempts.jsonl"), "w") as f:
                for a in self.attempts:
                    rec = dict(a)
                    rec["t"] = (base + timedelta(seconds=a["t"])).strftime("%Y-%m-%dT%H:%M:%SZ")
                    f.write(json.dumps(rec, sort_keys=True) + "\n")
        write_psm_csv(self.psm_episodes, os.path.join(outdir, "psm.csv"))
        self.node_accounting.to_csv(os.path.join(outdir, "nodes.csv"), index=False)
        if self.config.weather_temp_c is not None:
            wdf = weather_frame(self.config)
            wdf.to_csv(os.path.join(outdir, "weather.csv"), index=False)
        with open(os.path.join(outdir, "manifest.json"), "w") as f:
            json.dump(self.manifest, f, indent=1, sort_keys=True)
            f.write("\n")


def weather_frame(config: ScenarioConfig) -> pd.DataFrame:
    days = pd.date_range(config.start.date(), periods=config.duration_days, freq="D")
    return pd.DataFrame({
        "date": days.strftime("%Y-%m-%d"),
        "temp_c": config.weather_temp_c,
        "precip_mm": config.weather_precip_mm,
        "cloud_attenuation": [config.cloud_for_day(i) for i in range(config.duration_days)],
    })


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


class _Sim:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.city = config.city
        self.sites = sorted(self.city.sites, key=lambda s: s.id)
        self.towers = sorted(self.city.towers, key=lambda t: t.id)
        self.site_ids = [s.id for s in self.sites]
        self.tower_ids = [t.id for t in self.towers]
        self.events: list[dict] = []
        self.attempt_log: list[dict] = []
        self.episodes: list[tuple[str, int, int]] = []

    # -- precompute ------------------------------------------------------------

    def _links(self):
        r = self.cfg.radio
        sx = np.array([s.position.x for s in self.sites])
        sy = np.array([s.position.y for s in self.sites])
        sh = np.array([s.mount_height for s in self.sites])
        tx = np.array([t.position.x for t in self.towers])
        ty = np.array([t.position.y for t in self.towers])
        th = np.array([t.mast_height for t in self.towers])
        d = np.hypot(sx[:, None] - tx[None, :], sy[:, None] - ty[None, :])
        d = np.maximum(d, r.d0_m)
        pl = r.ref_path_loss_db + 10.0 * r.path_loss_exponent * np.log10(d / r.d0_m)
        from .geo import los_blocked_matrix
        blocked = los_blocked_matrix(sx, sy, sh, tx, ty, th, self.city.buildings)
        txp = np.array([t.tx_power_dbm for t in self.towers])
        exp = txp[None, :] - pl - np.where(blocked, r.blockage_loss_db, 0.0)
        best = np.argmax(exp, axis=1)  # towers are id-sorted: first max = lowest id
        return exp, best

    def _solar_profiles(self):
        """Per-site per-block cumulative clear-sky capture (sin altitude) minutes."""
        cfg = self.cfg
        n_days = cfg.duration_days
        block_days = max(1, cfg.solar_block_days)
        n_blocks = (n_days + block_days - 1) // block_days
        minutes = np.arange(1440) * 60.0
        profiles = [np.empty((n_blocks, 1441), dtype=np.float64) for _ in self.sites]
        lat, lon = self.city.origin_lat, self.city.origin_lon
        relevant = self._relevant_occluders()
        for b in range(n_blocks):
            day = b * block_days
            base = self.cfg.start + timedelta(days=day)
            alt, az = sun_angles(lat, lon, base, minutes)
            capture = np.where(alt > 0, np.sin(np.maximum(alt, 0.0)), 0.0)
            for i, site in enumerate(self.sites):
                bl, tr = relevant[i]
                if bl or tr:
                    shaded = shading_mask(site.position.x, site.position.y,
                                          site.mount_height, alt, az, bl, tr)
                    cap = np.where(shaded, 0.0, capture)
                else:
                    cap = capture
                profiles[i][b, 0] = 0.0
                np.cumsum(cap, out=profiles[i][b, 1:])
        return profiles, block_days

    def _relevant_occluders(self):
        """Occluders near enough to matter for a site's energy (reach ~ height / tan 2 deg)."""
        out = []
        reach_factor = 30.0
        for site in self.sites:
            px, py, ph = site.position.x, site.position.y, site.mount_height
            bl = [b for b in self.city.buildings
                  if b.height > ph and math.hypot(b.footprint.cx - px, b.footprint.cy - py)
                  <= reach_factor * b.height + max(b.footprint.width, b.footprint.depth)]
            tr = [t for t in self.city.trees
                  if t.height > ph and math.hypot(t.center.x - px, t.center.y - py)
                  <= reach_factor * t.height + t.canopy_radius]
            out.append((bl, tr))
        return out

    def _outage_flags(self, best_idx) -> list[np.ndarray]:
        """Per node: bool per wake, True when its serving tower is out at that wake."""
        cfg = self.cfg
        interval = cfg.sampling_interval_s
        flags = []
        windows_by_tower: dict[int, list[tuple[int, int]]] = {}
        for j, tower in enumerate(self.towers):
            wins = [(int(w.start), int(w.end)) for w in tower.outages]
            for w in cfg.outages:
                if w.tower_ids is None or tower.id in w.tower_ids:
                    wins.append((w.start_s, w.end_s))
            windows_by_tower[j] = sorted(wins)
        for i, site in enumerate(self.sites):
            act = cfg.activation_s.get(site.id, 0)
            n_wakes = max(0, (cfg.duration_s - act + interval - 1) // interval)
            wins = windows_by_tower[int(best_idx[i])]
            f = np.zeros(n_wakes, dtype=bool)
            if wins:
                t_arr = act + np.arange(n_wakes, dtype=np.int64) * interval
                starts = np.array([w[0] for w in wins])
                ends = np.array([w[1] for w in wins])
                pos = np.searchsorted(starts, t_arr, side="right") - 1
                valid = pos >= 0
                f[valid] = t_arr[valid] < ends[pos[valid]]
            flags.append(f)
        return flags

    # -- run ----------------------------------------------------------------------

    def run(self) -> SimOutput:
        cfg = self.cfg
        interval = cfg.sampling_interval_s
        duration_s = cfg.duration_s
        exp, best_idx = self._links()
        profiles, block_days = self._solar_profiles()
        outage_flags = self._outage_flags(best_idx)
        ks, lat_cum = cfg.radio.latency_support()
        clip_db = cfg.radio.shadowing_clip_sigmas * cfg.radio.shadowing_sigma_db

        # harvest rate per day: mAh credited per capture-minute
        rate = np.empty(cfg.duration_days + 1, dtype=np.float64)
        for day in range(cfg.duration_days + 1):
            att = cfg.cloud_for_day(min(day, cfg.duration_days - 1))
            rate[day] = (cfg.panel.rated_power_w * (1.0 - att) * cfg.power.charge_efficiency
                         / cfg.power.nominal_voltage_v * 1000.0 / 60.0)

        cap_mah = cfg.power.usable_capacity_mah
        sleep_mah_s = cfg.power.sleep_current_ma / 3600.0
        pm_mah = (cfg.power.pm_sample_current_ma * cfg.power.pm_sample_duration_s / 3600.0)
        gas_mah = (cfg.power.gas_sample_current_ma * cfg.power.gas_sample_duration_s
                   * (interval / cfg.power.gas_sample_interval_s) / 3600.0)
        modem_mah_per_s = cfg.power.modem_tx_current_ma / 3600.0
        fail_mah = modem_mah_per_s * cfg.power.modem_fail_duration_s
        enter_pct = cfg.power.psm_enter_pct
        exit_pct = cfg.power.psm_exit_pct
        sens = cfg.radio.sensitivity_dbm
        full_log = cfg.event_log_level == "full"

        nodes: list[_NodeRt] = []
        total_wakes = 0
        for i, site in enumerate(self.sites):
            rt = _NodeRt(site, i)
            rt.act = cfg.activation_s.get(site.id, 0)
            rt.n_wakes = max(0, (duration_s - rt.act + interval - 1) // interval)
            total_wakes += rt.n_wakes
            rt.best_tower_idx = int(best_idx[i])
            rt.best_exp_rss = float(exp[i, rt.best_tower_idx])
            gen = np.random.default_rng(
                np.random.SeedSequence([cfg.master_seed, _stable_site_key(site.id)]))
            rt.noise = np.clip(gen.normal(0.0, cfg.radio.shadowing_sigma_db, rt.n_wakes),
                               -clip_db, clip_db)
            rt.lat_draws = ks[np.searchsorted(lat_cum, gen.random(rt.n_wakes),
                                              side="right")].astype(np.int32)
            rt.unk = gen.random(rt.n_wakes) < cfg.unknown_tower_fraction
            rt.outage = outage_flags[i]
            rt.capture_cum = profiles[i]
            rt.last_t = rt.act
            rt.charge = cap_mah
            rt.state = NodeState(site.id, BatteryState(cap_mah, cap_mah))
            nodes.append(rt)

        # ledger columns, filled by cursor
        col_node = np.empty(total_wakes, dtype=np.int32)
        col_tower = np.empty(total_wakes, dtype=np.int32)
        col_sample = np.empty(total_wakes, dtype=np.int64)
        col_arrival = np.empty(total_wakes, dtype=np.int64)
        col_rss = np.empty(total_wakes, dtype=np.int32)
        col_b10 = np.empty(total_wakes, dtype=np.int32)
        cursor = 0

        # delivery context shared between the wake handler and the callback
        ctx_arrival = 0
        ctx_rss = 0.0
        ctx_rt: _NodeRt | None = None

        def deliver(sample_t, rss_at_sample, battery_pct, payload):
            nonlocal cursor
            rt = ctx_rt
            i = cursor
            col_node[i] = rt.idx
            k = (sample_t - rt.act) // interval
            col_tower[i] = -1 if rt.unk[k] else rt.best_tower_idx
            col_sample[i] = sample_t
            col_arrival[i] = ctx_arrival
            col_rss[i] = round(rss_at_sample if rss_at_sample is not None else ctx_rss)
            col_b10[i] = round(battery_pct * 10.0)
            cursor = i + 1
            rt.emitted += 1

        n_days = cfg.duration_days
        rday = rate  # local alias
        queue = EventQueue()
        for rt in nodes:
            if rt.n_wakes > 0:
                queue.push(rt.act, rt)
        events = self.events
        episodes = self.episodes

        while queue:
            t, _, rt = queue.pop()
            if t >= duration_s:
                continue
            rt.wakes += 1
            # battery integration since the previous event
            if t > rt.last_t:
                a = rt.last_t
                charge = rt.charge
                while a < t:
                    day = a // 86400
                    day_end = (day + 1) * 86400
                    b = t if t < day_end else day_end
                    blk = day // block_days
                    if blk >= rt.capture_cum.shape[0]:
                        blk = rt.capture_cum.shape[0] - 1
                    cum = rt.capture_cum[blk]
                    gained = (cum[(b - day * 86400) // 60] - cum[(a - day * 86400) // 60]) \
                        * rday[day if day < n_days else n_days - 1]
                    charge += gained - (b - a) * sleep_mah_s
                    if charge > cap_mah:
                        charge = cap_mah
                    elif charge < 0.0:
                        charge = 0.0
                    a = b
                rt.charge = charge
                rt.last_t = t
            pct = rt.charge / cap_mah * 100.0
            state = rt.state

            # power-saving hysteresis, evaluated at the wake boundary
            if state.mode is Mode.ACTIVE:
                if pct <= enter_pct:
                    state.mode = Mode.PSM
                    rt.psm_start = t
                    rt.psm_count += 1
                    rt.suppressed_psm += 1
                    events.append({"t": t, "node_id": state.node_id, "event": "PsmEnter",
                                   "detail": {"pct": round(pct, 2)}})
                    queue.push(t + interval, rt)
                    continue
            else:
                if pct >= exit_pct:
                    episodes.append((state.node_id, rt.psm_start, t))
                    rt.psm_seconds += t - rt.psm_start
                    rt.psm_start = None
                    state.mode = Mode.ACTIVE
                    events.append({"t": t, "node_id": state.node_id, "event": "PsmExit",
                                   "detail": {"pct": round(pct, 2)}})
                rt.suppressed_psm += 1
                queue.push(t + interval, rt)
                continue

            # active wake: decide the attempt outcome on the serving tower
            k = (t - rt.act) // interval
            rss_now = rt.best_exp_rss + rt.noise[k]
            if rt.outage[k]:
                outcome = Outcome.FAIL_OUTAGE
                rt.fail_outage += 1
            elif rss_now < sens:
                outcome = Outcome.FAIL_WEAK
                rt.fail_weak += 1
            else:
                outcome = Outcome.SUCCESS
                rt.successes += 1

            recording = state.recording_enabled
            if not recording:
                rt.suppressed_recording += 1

            # energy pulses at the event boundary
            pulses = 0.0
            if recording:
                pulses += pm_mah + gas_mah
            if outcome is Outcome.SUCCESS:
                latency = int(rt.lat_draws[k])
                pulses += modem_mah_per_s * latency
            else:
                latency = None
                pulses += fail_mah
            if pulses:
                rt.charge = max(0.0, rt.charge - pulses)
                state.battery = BatteryState(rt.charge, cap_mah)
            else:
                state.battery = BatteryState(rt.charge, cap_mah)

            ctx_rt = rt
            ctx_rss = rss_now
            if outcome is Outcome.SUCCESS:
                ctx_arrival = t + latency
            emissions_before = rt.emitted
            _, _, rebooted = fw_wake(state, t, outcome, rss_now, latency,
                                     interval, deliver)
            if full_log:
                events.append({"t": t, "node_id": state.node_id, "event": "Wake",
                               "detail": {"pct": round(pct, 2)}})
                if recording:
                    events.append({"t": t, "node_id": state.node_id, "event": "Sample",
                                   "detail": {"sample_time": t}})
                self.attempt_log.append({
                    "node_id": state.node_id, "tower_id": self.tower_ids[rt.best_tower_idx],
                    "t": t, "rss_dbm": round(rss_now, 2), "outcome": outcome.value})
            if outcome is Outcome.SUCCESS:
                if full_log:
                    events.append({"t": t, "node_id": state.node_id,
                                   "event": "ConnectSuccess",
                                   "detail": {"tower_id": self.tower_ids[rt.best_tower_idx],
                                              "rss_dbm": round(rss_now, 2),
                                              "latency_s": latency,
                                              "emitted": rt.emitted - emissions_before}})
            else:
                if full_log:
                    events.append({"t": t, "node_id": state.node_id, "event": "ConnectFail",
                                   "detail": {"tower_id": self.tower_ids[rt.best_tower_idx],
                                              "rss_dbm": round(rss_now, 2),
                                              "outcome": outcome.value,
                                              "retry_count": state.retry_count}})
                if rebooted:
                    rt.reboots += 1
                    events.append({"t": t, "node_id": state.node_id, "event": "Reboot",
                                   "detail": {"reboot_count": state.reboot_count}})
            queue.push(t + interval, rt)

        # close episodes still open at the end of the run
        for rt in nodes:
            if rt.psm_start is not None:
                episodes.append((rt.state.node_id, rt.psm_start, duration_s))
                rt.psm_seconds += duration_s - rt.psm_start
                rt.psm_start = None
            rt.buffered_end = len(rt.state.buffer)

        return self._collect(nodes, col_node[:cursor], col_tower[:cursor],
                             col_sample[:cursor], col_arrival[:cursor],
                             col_rss[:cursor], col_b10[:cursor])

    # -- output assembly -------------------------------------------------------------

    def _collect(self, nodes, col_node, col_tower, col_sample, col_arrival,
                 col_rss, col_b10) -> SimOutput:
        cfg = self.cfg
        base = np.datetime64(cfg.start.replace(tzinfo=None), "s")
        node_cats = pd.CategoricalDtype(categories=self.site_ids)
        tower_cats = list(self.tower_ids) + [UNKNOWN_TOWER]
        tower_codes = np.where(col_tower < 0, len(self.tower_ids), col_tower)
        ledger = pd.DataFrame({
            "node_id": pd.Categorical.from_codes(col_node, dtype=node_cats).astype(str),
            "tower_id": pd.Categorical.from_codes(
                tower_codes, categories=tower_cats).astype(str),
            "sample_time": base + col_sample.astype("timedelta64[s]"),
            "arrival_time": base + col_arrival.astype("timedelta64[s]"),
            "latency_s": (col_arrival - col_sample).astype(np.int64),
            "rss_dbm": col_rss.astype(np.int64),
            "battery_pct": col_b10.astype(np.float64) / 10.0,
            "payload": np.full(len(col_node), "", dtype=object),
        })
        start_dt = cfg.start
        eps = [PsmEpisode(nid, start_dt + timedelta(seconds=int(a)),
                          start_dt + timedelta(seconds=int(b)))
               for nid, a, b in self.episodes]
        acct = pd.DataFrame({
            "node_id": [rt.site.id for rt in nodes],
            "selection_kind": [rt.site.selection_kind for rt in nodes],
            "zone_id": [rt.site.zone_id for rt in nodes],
            "wakes": [rt.wakes for rt in nodes],
            "emitted": [rt.emitted for rt in nodes],
            "buffered_end": [rt.buffered_end for rt in nodes],
            "suppressed_psm": [rt.suppressed_psm for rt in nodes],
            "suppressed_recording": [rt.suppressed_recording for rt in nodes],
            "successes": [rt.successes for rt in nodes],
            "fail_weak": [rt.fail_weak for rt in nodes],
            "fail_outage": [rt.fail_outage for rt in nodes],
            "reboots": [rt.reboots for rt in nodes],
            "psm_count": [rt.psm_count for rt in nodes],
            "psm_seconds": [rt.psm_seconds for rt in nodes],
            "final_battery_pct": [round(rt.charge / cfg.power.usable_capacity_mah * 100, 2)
                                  for rt in nodes],
            "expected_rss_dbm": [round(rt.best_exp_rss, 1) for rt in nodes],
            "serving_tower": [self.tower_ids[rt.best_tower_idx] for rt in nodes],
        })
        manifest = {
            "config_sha256": cfg.config_hash(),
            "master_seed": cfg.master_seed,
            "git_describe": _git_describe(),
            "package_version": _pkg_version,
            "rows": int(len(ledger)),
            "events": len(self.events),
            "psm_episodes": len(eps),
            "nodes": len(nodes),
        }
        return SimOutput(ledger, self.events, eps, acct, manifest, cfg,
                         attempts=self.attempt_log or None)


def run(config: ScenarioConfig) -> SimOutput:
    """Execute one scenario deterministically; see module docstring for contracts."""
    config.validate()
    return _Sim(config).run()
