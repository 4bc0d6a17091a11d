"""Thermo-optic drive and the two-stage biased-MZI chip model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .photonics import (
    FALLING,
    RISING,
    TWO_PI,
    AttenuationCurve,
    OperatingRangeError,
    attenuation,
    solve_operating_point,
)


class CalibrationError(ValueError):
    pass


class VoltageRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ThermoOpticShifter:
    """Resistive heater: phase grows with dissipated power U^2 / R."""

    kappa_rad_per_watt: float
    phase_offset_rad: float = 0.0
    resistance_ohm: float = 3000.0
    voltage_step_v: float = 0.001
    max_voltage_v: float = 12.0

    def __post_init__(self):
        if self.resistance_ohm <= 0:
            raise ValueError("resistance must be > 0")
        if self.kappa_rad_per_watt <= 0:
            raise ValueError("thermo-optic efficiency must be > 0")
        if self.voltage_step_v <= 0:
            raise ValueError("voltage step must be > 0")

    def quantize(self, voltage):
        steps = np.rint(np.asarray(voltage, dtype=float) / self.voltage_step_v)
        out = steps * self.voltage_step_v
        return float(out) if np.ndim(out) == 0 else out

    def phase(self, voltage):
        """Phase (rad) at a drive voltage, after 1-step quantisation."""
        u = np.asarray(voltage, dtype=float)
        if np.any(u < 0) or np.any(u > self.max_voltage_v):
            raise VoltageRangeError(
                f"voltage must be in [0, {self.max_voltage_v}] V, got {voltage}"
            )
        u = self.quantize(u)
        return self.phase_offset_rad + self.kappa_rad_per_watt * np.square(u) / self.resistance_ohm

    def voltage_for_phase(self, phi: float) -> float:
        """Smallest in-range voltage reaching ``phi`` modulo 2 pi (unquantised)."""
        lift = phi - self.phase_offset_rad
        lift -= TWO_PI * math.floor(lift / TWO_PI)
        u = math.sqrt(lift * self.resistance_ohm / self.kappa_rad_per_watt)
        if u > self.max_voltage_v:
            raise VoltageRangeError(f"phase {phi:.6g} rad needs {u:.4g} V")
        return u

    def phase_step(self, voltage: float) -> float:
        """Phase change per voltage step at ``voltage`` (small-signal)."""
        return 2.0 * self.kappa_rad_per_watt * voltage * self.voltage_step_v / self.resistance_ohm


def voltage_to_phase(shifter: ThermoOpticShifter, voltage):
    return shifter.phase(voltage)


@dataclass(frozen=True)
class ChipStage:
    curve: AttenuationCurve
    shifter: ThermoOpticShifter


@dataclass(frozen=True)
class ChipModel:
    stage1: ChipStage
    stage2: ChipStage
    fixed_loss_db: float
    report: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def stages(self):
        return (self.stage1, self.stage2)

    def phases(self, u1, u2):
        return self.stage1.shifter.phase(u1), self.stage2.shifter.phase(u2)

    def attenuation_at_phases(self, phi1, phi2):
        a1 = self.stage1.curve.evaluate(phi1)
        a2 = self.stage2.curve.evaluate(phi2)
        return a1 + a2 + self.fixed_loss_db

    def attenuation(self, u1, u2):
        """Total chip attenuation (dB) at drive voltages; broadcasts over arrays."""
        return self.attenuation_at_phases(*self.phases(u1, u2))


@dataclass(frozen=True)
class CalibrationTargets:
    """Measured (U1, U2, alpha) anchors of the chip's voltage response."""

    max_point: tuple = (11.0, 5.5, 39.14)
    min_point: tuple = (6.7, 11.1, 12.73)
    eta0: float = 0.5
    eta_bias: float = 0.5
    resistance_ohm: float = 3000.0
    voltage_step_v: float = 0.001
    max_voltage_v: float = 12.0
    nominal_coupler_loss_db: float = 8.0


def _fit_stage(curve, u_max, u_low, alpha_low_db, targets):
    """Quadratic heater law through (u_max -> pi) and (u_low -> alpha_low)."""
    if u_max == u_low:
        raise CalibrationError("stage anchor voltages must differ")
    # phase grows with |U|, so the low-attenuation anchor sits on the side of pi
    # that its voltage dictates
    branch = RISING if u_low < u_max else FALLING
    try:
        phi_low = solve_operating_point(curve, alpha_low_db, branch, snap_db=0.0)
    except OperatingRangeError as exc:
        raise CalibrationError(
            f"per-stage target {alpha_low_db:.4f} dB violates the stage bounds "
            f"[{exc.min_db:.4f}, {exc.max_db:.4f}] dB"
        ) from exc
    slope = (math.pi - phi_low) / (u_max ** 2 - u_low ** 2)  # rad / V^2
    kappa = slope * targets.resistance_ohm
    offset = math.pi - slope * u_max ** 2
    shifter = ThermoOpticShifter(
        kappa_rad_per_watt=kappa,
        phase_offset_rad=offset,
        resistance_ohm=targets.resistance_ohm,
        voltage_step_v=targets.voltage_step_v,
        max_voltage_v=targets.max_voltage_v,
    )
    return ChipStage(curve, shifter), phi_low


def calibrate_chip(targets: CalibrationTargets | None = None) -> ChipModel:
    """Fit heater laws and the fixed loss to the max/min voltage anchors.

    Both stages are pinned to their extremum (pi) at the max-attenuation
    voltages, which fixes the lumped fixed loss. The min-attenuation anchor is
    shared equally between the stages, each reached on the branch its voltage
    implies.
    """
    t = targets or CalibrationTargets()
    curve = AttenuationCurve(eta0=t.eta0, eta_bias=t.eta_bias)
    u1_max, u2_max, a_max = t.max_point
    u1_min, u2_min, a_min = t.min_point
    for u in (u1_max, u2_max, u1_min, u2_min):
        if not 0 <= u <= t.max_voltage_v:
            raise CalibrationError(f"anchor voltage {u} V outside [0, {t.max_voltage_v}] V")
    stage_max = curve.max_db
    stage_min = curve.min_db
    fixed = a_max - 2.0 * stage_max
    if fixed < 0:
        raise CalibrationError(
            f"max target {a_max} dB below two-stage extremum {2 * stage_max:.4f} dB"
        )
    per_stage_low = 0.5 * (a_min - fixed)
    if not stage_min <= per_stage_low <= stage_max:
        raise CalibrationError(
            f"min target {a_min} dB needs {per_stage_low:.4f} dB per stage, outside "
            f"[{stage_min:.4f}, {stage_max:.4f}] dB"
        )
    s1, phi1_low = _fit_stage(curve, u1_max, u1_min, per_stage_low, t)
    s2, phi2_low = _fit_stage(curve, u2_max, u2_min, per_stage_low, t)
    report = {
        "fixed_loss_db": fixed,
        "nominal_coupler_loss_db": t.nominal_coupler_loss_db,
        "fixed_loss_minus_nominal_db": fixed - t.nominal_coupler_loss_db,
        "stage_max_db": stage_max,
        "stage_min_db": stage_min,
        "per_stage_db_at_min_anchor": per_stage_low,
        "stage1_phase_at_min_anchor": phi1_low,
        "stage2_phase_at_min_anchor": phi2_low,
        "design_min_db": 2.0 * stage_min + fixed,
    }
    chip = ChipModel(s1, s2, fixed, report)
    for (u1, u2, target) in (t.max_point, t.min_point):
        got = float(chip.attenuation(u1, u2))
        if abs(got - target) > 0.1:
            raise CalibrationError(
                f"calibrated chip gives {got:.4f} dB at ({u1}, {u2}) V, target {target} dB"
            )
    return chip


@dataclass(frozen=True)
class OperatingPoint:
    """Quantised drive voltages and resulting stage phases for a chip."""

    voltages: tuple
    phases: tuple
    alpha_db: float


def chip_operating_point(chip: ChipModel, alpha_target_db: float, branch: str = RISING) -> OperatingPoint:
    """Drive both stages equally so the chip sits at ``alpha_target_db``.

    Phases are solved per stage, converted to voltages and quantised to the
    supply step; the returned phases and attenuation are the quantised ones.
    """
    per_stage = 0.5 * (alpha_target_db - chip.fixed_loss_db)
    volts, phases = [], []
    for stage in chip.stages:
        phi = solve_operating_point(stage.curve, per_stage, branch, snap_db=0.0)
        u = stage.shifter.quantize(stage.shifter.voltage_for_phase(phi))
        volts.append(u)
        phases.append(float(stage.shifter.phase(u)))
    alpha = sum(attenuation(s.curve, p) for s, p in zip(chip.stages, phases)) + chip.fixed_loss_db
    return OperatingPoint(tuple(volts), tuple(phases), alpha)
