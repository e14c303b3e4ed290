from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings, strategies as st

from citysense.power import (BatteryState, Mode, PowerParams, PsmEpisode,
                             average_load, psm_step, step_battery, write_psm_csv)

P = PowerParams()


def test_usable_capacity():
    assert P.usable_capacity_mah == pytest.approx(1440.0)


def test_full_battery_fifteen_days_at_4ma():
    # 1440 mAh at a flat 4 mA is exactly 360 h = 15 days
    state = BatteryState.full(P)
    hours = 0
    while state.charge_mah > 0:
        state = step_battery(state, 0.0, 4.0, 3600.0, P)
        hours += 1
        assert hours <= 361
    assert hours == 360


def test_equilibrium_harvest_keeps_charge():
    state = BatteryState(700.0, P.usable_capacity_mah)
    harvest_w = P.nominal_voltage_v * 4.0 / 1000.0 / P.charge_efficiency
    after = step_battery(state, harvest_w, 4.0, 600.0, P)
    assert after.charge_mah == pytest.approx(700.0, abs=1e-9)


def test_overcharge_clamped():
    state = BatteryState.full(P)
    after = step_battery(state, 6.0, 0.0, 3600.0, P)
    assert after.charge_mah == P.usable_capacity_mah


def test_discharge_clamped_at_zero():
    state = BatteryState(0.5, P.usable_capacity_mah)
    after = step_battery(state, 0.0, 100.0, 3600.0, P)
    assert after.charge_mah == 0.0


def test_step_requires_positive_dt():
    with pytest.raises(ValueError):
        step_battery(BatteryState.full(P), 0.0, 1.0, 0.0, P)


def test_energy_conservation_without_clipping():
    state = BatteryState(700.0, P.usable_capacity_mah)
    total_delta = 0.0
    for harvest_w, load_ma, dt in [(0.5, 3.0, 120.0), (0.0, 6.0, 300.0),
                                   (1.2, 0.04, 600.0), (0.2, 2.0, 60.0)]:
        harvest_ma = harvest_w * P.charge_efficiency / P.nominal_voltage_v * 1000.0
        total_delta += (harvest_ma - load_ma) * dt / 3600.0
        state = step_battery(state, harvest_w, load_ma, dt, P)
    assert state.charge_mah == pytest.approx(700.0 + total_delta, rel=1e-6)


@given(st.floats(min_value=0, max_value=100),
       st.lists(st.floats(min_value=1, max_value=600), min_size=1, max_size=20))
@settings(max_examples=60)
def test_pct_non_increasing_without_harvest(start_pct, dts):
    state = BatteryState(start_pct / 100 * P.usable_capacity_mah, P.usable_capacity_mah)
    prev = state.pct
    for dt in dts:
        state = step_battery(state, 0.0, 2.0, dt, P)
        assert state.pct <= prev + 1e-12
        prev = state.pct


# -- hysteresis -----------------------------------------------------------------


def test_psm_enter_at_threshold():
    assert psm_step(15.0, Mode.ACTIVE) is Mode.PSM


def test_psm_stays_inside_band():
    assert psm_step(39.9, Mode.PSM) is Mode.PSM
    assert psm_step(15.1, Mode.ACTIVE) is Mode.ACTIVE


def test_psm_exit_at_threshold():
    assert psm_step(40.0, Mode.PSM) is Mode.ACTIVE


@given(st.floats(min_value=0, max_value=100),
       st.sampled_from([Mode.ACTIVE, Mode.PSM]))
@settings(max_examples=200)
def test_psm_step_hysteresis_property(pct, mode):
    new = psm_step(pct, mode)
    if new is Mode.PSM and mode is Mode.ACTIVE:
        assert pct <= 15.0
    if new is Mode.ACTIVE and mode is Mode.PSM:
        assert pct >= 40.0
    if 15.0 < pct < 40.0:
        assert new is mode  # nothing moves inside the band


def test_psm_step_rejects_bad_pct():
    with pytest.raises(ValueError):
        psm_step(101.0, Mode.ACTIVE)


def test_params_threshold_order_enforced():
    with pytest.raises(ValueError):
        PowerParams(psm_enter_pct=50.0, psm_exit_pct=40.0)


# -- load model ------------------------------------------------------------------


def test_average_load_defaults_near_4ma():
    load = average_load(P, 300.0, 5.0)
    assert 3.0 <= load <= 5.0


def test_average_load_degenerate_profile():
    quiet = PowerParams(gas_sample_current_ma=0.0, pm_sample_current_ma=0.0,
                        modem_tx_current_ma=0.0)
    assert average_load(quiet, 300.0, 5.0) == pytest.approx(0.04)


def test_average_load_monotone_in_interval():
    assert average_load(P, 600.0, 5.0) < average_load(P, 300.0, 5.0)


def test_average_load_requires_positive_interval():
    with pytest.raises(ValueError):
        average_load(P, 0.0, 5.0)


# -- episodes --------------------------------------------------------------------


def test_episode_duration_and_order():
    e = PsmEpisode("n1", datetime(2021, 12, 1), datetime(2021, 12, 4, 12))
    assert e.duration_s == 3 * 86400 + 12 * 3600
    with pytest.raises(ValueError):
        PsmEpisode("n1", datetime(2021, 12, 4), datetime(2021, 12, 1))


def test_psm_csv_format(tmp_path):
    eps = [PsmEpisode("n1", datetime(2021, 12, 1), datetime(2021, 12, 2)),
           PsmEpisode("n2", datetime(2022, 1, 5, 6), datetime(2022, 1, 5, 18, 30))]
    path = tmp_path / "psm.csv"
    write_psm_csv(eps, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "node_id,start_iso8601,end_iso8601,duration_s"
    assert lines[1] == "n1,2021-12-01T00:00:00Z,2021-12-02T00:00:00Z,86400"
    assert lines[2].endswith(",45000")
