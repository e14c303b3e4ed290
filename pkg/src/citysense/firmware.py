"""Node firmware: duty-cycled sampling, buffering, retry/reboot, recording gate.

A NodeState has exactly one owner (the engine); the transition functions here
mutate it in place. Times are integer seconds since scenario start.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .power import BatteryState, Mode, PowerParams, psm_step
from .radio import Outcome

MAX_RETRIES = 10


@dataclass(slots=True)
class BufferedReading:
    sample_time: int
    rss_at_sample: float | None  # absent when the failed attempt saw no beacon
    battery_pct: float
    payload: str = ""


@dataclass(slots=True)
class Emission:
    """One reading handed to the cloud, before ledger ingestion."""

    node_id: str
    tower_id: str
    sample_time: int
    arrival_time: int
    rss_dbm: float
    battery_pct: float
    payload: str = ""


@dataclass(slots=True)
class NodeState:
    node_id: str
    battery: BatteryState
    mode: Mode = Mode.ACTIVE
    buffer: list[BufferedReading] = field(default_factory=list)
    retry_count: int = 0
    recording_enabled: bool = True
    next_wake: int = 0
    reboot_count: int = 0


def maybe_reboot(state: NodeState) -> bool:
    """Reboot after the 10th consecutive failure; the buffer survives.

    A reboot clears the retry counter and disables recording (no real-time
    clock) until the next successful connection.
    """
    if state.retry_count < MAX_RETRIES:
        return False
    state.retry_count = 0
    state.recording_enabled = False
    state.reboot_count += 1
    return True


def psm_gate(state: NodeState, params: PowerParams) -> str | None:
    """Apply the battery hysteresis at a wake boundary.

    Returns "enter"/"exit" when the mode flips, else None. An exiting wake
    does not sample; sampling resumes on the next interval.
    """
    new_mode = psm_step(state.battery.pct, state.mode, params)
    if new_mode is state.mode:
        return None
    state.mode = new_mode
    return "enter" if new_mode is Mode.PSM else "exit"


def wake(state: NodeState, t: int, outcome: Outcome, rss_dbm: float,
         latency_s: int | None, interval_s: int,
         on_deliver) -> tuple[int, int, bool]:
    """One wake cycle: sample (if recording), attempt, flush or buffer.

    The reading is timestamped at the wake instant. On success the whole
    buffer (oldest first) and then the new reading are handed to
    `on_deliver(sample_time, rss_at_sample | None, battery_pct, payload)`;
    the caller knows the arrival instant and the delivering link. Returns
    (delivered_count, next_wake, rebooted).
    """
    if state.mode is not Mode.ACTIVE:
        raise RuntimeError(f"node {state.node_id}: wake scheduled while in {state.mode}")
    sampled = state.recording_enabled
    battery_pct = state.battery.pct
    delivered = 0
    rebooted = False
    if outcome is Outcome.SUCCESS:
        if latency_s is None:
            raise ValueError("successful wake requires a latency draw")
        for buffered in state.buffer:  # oldest first
            on_deliver(buffered.sample_time, buffered.rss_at_sample,
                       buffered.battery_pct, buffered.payload)
            delivered += 1
        state.buffer.clear()
        if sampled:
            on_deliver(t, rss_dbm, battery_pct, "")
            delivered += 1
        state.retry_count = 0
        state.recording_enabled = True
    else:
        if sampled:
            state.buffer.append(BufferedReading(
                sample_time=t,
                rss_at_sample=rss_dbm if outcome is not Outcome.FAIL_OUTAGE else None,
                battery_pct=battery_pct,
            ))
        state.retry_count += 1
        rebooted = maybe_reboot(state)
    state.next_wake = t + interval_s
    return delivered, state.next_wake, rebooted


def wake_collect(state: NodeState, t: int, outcome: Outcome, rss_dbm: float,
                 tower_id: str, latency_s: int | None,
                 interval_s: int = 300) -> tuple[list[Emission], int, bool]:
    """Convenience wrapper over `wake` that materializes Emission records."""
    emissions: list[Emission] = []
    arrival = t + int(latency_s) if latency_s is not None else t

    def deliver(sample_time, rss_at_sample, battery_pct, payload):
        emissions.append(Emission(
            node_id=state.node_id,
            tower_id=tower_id,
            sample_time=sample_time,
            arrival_time=arrival,
            rss_dbm=rss_at_sample if rss_at_sample is not None else rss_dbm,
            battery_pct=battery_pct,
            payload=payload,
        ))

    _, next_wake, rebooted = wake(state, t, outcome, rss_dbm, latency_s,
                                  interval_s, deliver)
    return emissions, next_wake, rebooted
