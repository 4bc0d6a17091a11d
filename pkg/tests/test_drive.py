import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdvoa.drive import (
    CalibrationError,
    CalibrationTargets,
    ThermoOpticShifter,
    VoltageRangeError,
    calibrate_chip,
    chip_operating_point,
    voltage_to_phase,
)
from qkdvoa.photonics import AttenuationCurve


@pytest.fixture(scope="module")
def chip():
    return calibrate_chip()


def test_calibration_reproduces_anchors(chip):
    assert float(chip.attenuation(11.0, 5.5)) == pytest.approx(39.14, abs=0.1)
    assert float(chip.attenuation(6.7, 11.1)) == pytest.approx(12.73, abs=0.1)


def test_max_anchor_sits_on_both_extrema(chip):
    p1, p2 = chip.phases(11.0, 5.5)
    assert math.cos(p1) == pytest.approx(-1.0, abs=1e-12)
    assert math.cos(p2) == pytest.approx(-1.0, abs=1e-12)
    # total = 2 * stage max + fixed loss
    assert chip.fixed_loss_db == pytest.approx(39.14 - 2 * AttenuationCurve(eta_bias=0.5).max_db, abs=1e-9)


def test_calibration_report(chip):
    r = chip.report
    assert r["fixed_loss_minus_nominal_db"] == pytest.approx(chip.fixed_loss_db - 8.0)
    assert r["design_min_db"] == pytest.approx(2 * r["stage_min_db"] + chip.fixed_loss_db)


def test_heater_law_is_quadratic(chip):
    s = chip.stage1.shifter
    u = np.array([1.0, 2.0, 4.0])
    lift = s.phase(u) - s.phase_offset_rad
    assert lift[1] / lift[0] == pytest.approx(4.0, rel=1e-9)
    assert lift[2] / lift[0] == pytest.approx(16.0, rel=1e-9)


def test_infeasible_max_target():
    with pytest.raises(CalibrationError):
        calibrate_chip(CalibrationTargets(max_point=(11.0, 5.5, 30.0)))


def test_infeasible_min_target():
    with pytest.raises(CalibrationError):
        calibrate_chip(CalibrationTargets(min_point=(6.7, 11.1, 8.0)))


def test_anchor_voltage_out_of_range():
    with pytest.raises(CalibrationError):
        calibrate_chip(CalibrationTargets(max_point=(13.0, 5.5, 39.14)))


def test_voltage_range_enforced(chip):
    with pytest.raises(VoltageRangeError):
        chip.attenuation(12.5, 1.0)
    with pytest.raises(VoltageRangeError):
        chip.stage1.shifter.phase(-0.1)


def test_quantisation_to_supply_step():
    s = ThermoOpticShifter(kappa_rad_per_watt=100.0)
    assert s.quantize(1.23449) == pytest.approx(1.234)
    assert s.phase(1.23449) == s.phase(1.234)
    assert voltage_to_phase(s, 2.0) == s.phase(2.0)


def test_phase_step_matches_difference():
    s = ThermoOpticShifter(kappa_rad_per_watt=100.0)
    u = 5.0
    diff = s.phase(u + s.voltage_step_v) - s.phase(u)
    assert s.phase_step(u) == pytest.approx(diff, rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(phi=st.floats(0.0, 2 * math.pi))
def test_voltage_for_phase_round_trip(phi):
    s = ThermoOpticShifter(kappa_rad_per_watt=400.0, phase_offset_rad=0.2)
    u = s.voltage_for_phase(phi)
    got = s.phase_offset_rad + s.kappa_rad_per_watt * u * u / s.resistance_ohm
    assert math.cos(got - phi) == pytest.approx(1.0, abs=1e-12)


def test_unreachable_phase():
    s = ThermoOpticShifter(kappa_rad_per_watt=1.0)
    with pytest.raises(VoltageRangeError):
        s.voltage_for_phase(3.0)


@pytest.mark.parametrize("kw", [{"resistance_ohm": 0}, {"kappa_rad_per_watt": 0}, {"voltage_step_v": 0}])
def test_shifter_validation(kw):
    args = {"kappa_rad_per_watt": 1.0, **kw}
    with pytest.raises(ValueError):
        ThermoOpticShifter(**args)


def test_operating_point_hits_target(chip):
    op = chip_operating_point(chip, 38.24)
    assert op.alpha_db == pytest.approx(38.24, abs=0.01)
    assert float(chip.attenuation(*op.voltages)) == pytest.approx(op.alpha_db, abs=1e-12)
    for u in op.voltages:
        assert round(u / 0.001) * 0.001 == pytest.approx(u, abs=1e-12)
    # equal split: both stages on the rising side, just short of pi
    for p in op.phases:
        assert 0 < math.pi - (p % (2 * math.pi)) < 0.2


def test_voltage_map_reflection_about_extremum(chip):
    # in phase coordinates each stage is even about pi
    st1 = chip.stage1
    for d in (0.05, 0.2, 0.5):
        lo = st1.shifter.voltage_for_phase(math.pi - d)
        hi = st1.shifter.voltage_for_phase(math.pi + d)
        p_lo = st1.shifter.phase_offset_rad + st1.shifter.kappa_rad_per_watt * lo ** 2 / 3000.0
        p_hi = st1.shifter.phase_offset_rad + st1.shifter.kappa_rad_per_watt * hi ** 2 / 3000.0
        assert st1.curve.evaluate(p_lo) == pytest.approx(st1.curve.evaluate(p_hi), abs=1e-9)
