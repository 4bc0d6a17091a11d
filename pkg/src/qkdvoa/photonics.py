"""Interferometer math for MZI-based variable optical attenuators.

A single MZI stage is described by :class:`MziParams` (splitter/coupler
transmittances and arm phases). The attenuator family used throughout the
package is the biased MZI, parametrised by a base transmittance ``eta0`` and a
bias coefficient ``eta_bias`` applied to one arm; ``eta_bias = 1`` is the
ordinary symmetric interferometer.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .kernels import TRANSMITTANCE_FLOOR

TWO_PI = 2.0 * math.pi
SATURATION_DB = -10.0 * math.log10(TRANSMITTANCE_FLOOR)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

RISING = "rising"
FALLING = "falling"
BRANCHES = (RISING, FALLING)


class SaturationError(ValueError):
    """Raised where a quantity is unbounded at a saturated (zero-power) point."""


class OperatingRangeError(ValueError):
    """Target attenuation outside what a curve can reach."""

    def __init__(self, target_db, min_db, max_db):
        self.target_db = target_db
        self.min_db = min_db
        self.max_db = max_db
        super().__init__(
            f"target {target_db:.6g} dB outside achievable range "
            f"[{min_db:.6g}, {max_db:.6g}] dB"
        )


def canonical_angle(phi):
    """Reduce an angle (scalar or array) to (-pi, pi]."""
    out = math.pi - np.mod(math.pi - np.asarray(phi, dtype=float), TWO_PI)
    return float(out) if np.ndim(out) == 0 else out


def _check_transmittance(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class FieldAmplitude:
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        object.__setattr__(self, "phase", canonical_angle(self.phase))

    @property
    def power(self) -> float:
        return self.amplitude ** 2

    @property
    def complex(self) -> complex:
        return cmath.rect(self.amplitude, self.phase)


@dataclass(frozen=True)
class MziParams:
    eta1: float = 0.5
    eta2: float = 0.5
    eta3: float = 0.5
    eta4: float = 0.5
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        for name in ("eta1", "eta2", "eta3", "eta4"):
            _check_transmittance(name, getattr(self, name))

    @property
    def delta_phi(self) -> float:
        return canonical_angle(self.phi1 - self.phi2)


@dataclass(frozen=True)
class AttenuationCurve:
    """Attenuation versus phase difference for one (biased) MZI stage."""

    eta0: float = 0.5
    eta_bias: float = 1.0
    excess_loss_db: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta0 <= 1.0:
            raise ValueError(f"eta0 must be in (0, 1], got {self.eta0}")
        if not 0.0 < self.eta_bias <= 1.0:
            raise ValueError(f"eta-bias must be in (0,1], got {self.eta_bias}")
        if self.excess_loss_db < 0:
            raise ValueError("excess loss must be >= 0 dB")

    @classmethod
    def symmetric(cls, eta0=0.5, excess_loss_db=0.0) -> "AttenuationCurve":
        return cls(eta0=eta0, eta_bias=1.0, excess_loss_db=excess_loss_db)

    @property
    def is_symmetric(self) -> bool:
        return self.eta_bias == 1.0

    def mzi_params(self, delta_phi: float = 0.0) -> MziParams:
        """Equivalent four-transmittance MZI (bias placed on the coupler arm)."""
        e = self.eta0
        return MziParams(e, e, e * self.eta_bias, e, phi1=delta_phi, phi2=0.0)

    def transmittance(self, delta_phi):
        """Linear P_out/P_in, without the excess loss and without clamping."""
        e, b = self.eta0, self.eta_bias
        return e * e * (1.0 + b + 2.0 * math.sqrt(b) * np.cos(delta_phi))

    def evaluate(self, delta_phi):
        """Attenuation in dB (vectorised); saturated points sit at the sentinel."""
        alpha, _ = self.evaluate_flagged(delta_phi)
        return float(alpha[0]) if np.ndim(delta_phi) == 0 else alpha

    def evaluate_flagged(self, delta_phi):
        alpha, sat = kernels.attenuation_db(
            delta_phi, self.eta0, self.eta_bias, self.excess_loss_db
        )
        shape = np.shape(delta_phi)
        return alpha.reshape(shape) if shape else alpha, sat.reshape(shape) if shape else sat

    @property
    def min_db(self) -> float:
        return attenuation(self, 0.0)

    @property
    def max_db(self) -> float:
        return attenuation(self, math.pi)


def mzi_output_field(params: MziParams, inp: FieldAmplitude) -> FieldAmplitude:
    """Output field of the interferometer for an input field."""
    z = inp.complex * (
        math.sqrt(params.eta1 * params.eta3) * cmath.exp(1j * params.phi1)
        + math.sqrt(params.eta2 * params.eta4) * cmath.exp(1j * params.phi2)
    )
    amp = abs(z)
    return FieldAmplitude(amp, cmath.phase(z) if amp > 0 else 0.0)


def mzi_output_power(params: MziParams, input_power: float) -> float:
    if input_power < 0:
        raise ValueError("input power must be nonnegative")
    p = params
    return input_power * (
        p.eta1 * p.eta3
        + p.eta2 * p.eta4
        + 2.0 * math.sqrt(p.eta1 * p.eta2 * p.eta3 * p.eta4) * math.cos(p.phi1 - p.phi2)
    )


def attenuation(curve: AttenuationCurve, delta_phi: float) -> float:
    """|10 log10(P_out/P_in)| plus the curve's excess loss, clamped at the floor."""
    t = float(curve.transmittance(float(delta_phi)))
    if t < TRANSMITTANCE_FLOOR:
        t = TRANSMITTANCE_FLOOR
    return abs(10.0 * math.log10(t)) + curve.excess_loss_db


def is_saturated(curve: AttenuationCurve, delta_phi: float) -> bool:
    return float(curve.transmittance(float(delta_phi))) < TRANSMITTANCE_FLOOR


def attenuation_sensitivity(curve: AttenuationCurve, delta_phi: float) -> float:
    """Analytic d(alpha)/d(delta_phi) in dB/rad."""
    t = float(curve.transmittance(delta_phi))
    if t < TRANSMITTANCE_FLOOR:
        raise SaturationError(
            f"sensitivity unbounded at delta_phi={delta_phi:.6g} (transmittance {t:.3g})"
        )
    dt = -2.0 * curve.eta0 ** 2 * math.sqrt(curve.eta_bias) * math.sin(delta_phi)
    # alpha = |10 log10 t|; sign flips where t crosses unity
    sign = -1.0 if t < 1.0 else 1.0
    return sign * 10.0 / math.log(10.0) * dt / t


def solve_operating_point(
    curve: AttenuationCurve,
    alpha_target_db: float,
    branch: str = RISING,
    snap_db: float = 0.01,
) -> float:
    """Phase difference giving ``alpha_target_db`` on the chosen branch.

    The rising branch lies in [0, pi], the falling branch is its mirror in
    [pi, 2 pi]. Targets outside the achievable range by at most ``snap_db``
    (rounded published figures) snap to the nearest extremum.
    """
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    lo_db, hi_db = curve.min_db, curve.max_db
    if alpha_target_db < lo_db - snap_db or alpha_target_db > hi_db + snap_db:
        raise OperatingRangeError(alpha_target_db, lo_db, hi_db)
    if alpha_target_db <= lo_db:
        x = 0.0
    elif alpha_target_db >= hi_db:
        x = math.pi
    else:
        x = brentq(
            lambda d: attenuation(curve, d) - alpha_target_db,
            0.0, math.pi, xtol=1e-15, rtol=1e-15, maxiter=500,
        )
    return x if branch == RISING else TWO_PI - x


@dataclass(frozen=True)
class DeviationResult:
    alpha0_db: float
    delta_max: float
    max_deviation_db: float
    alpha_min_db: float
    alpha_max_db: float
    saturated: bool = False

    @property
    def deviation_below_db(self) -> float:
        return self.alpha0_db - self.alpha_min_db

    @property
    def deviation_above_db(self) -> float:
        return self.alpha_max_db - self.alpha0_db

    @property
    def half_range_db(self) -> float:
        """Alternative convention: half the peak-to-peak swing."""
        return 0.5 * (self.alpha_max_db - self.alpha_min_db)


def _golden_section(f, a, b, tol=1e-13, maxiter=200):
    """Minimise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _refine(f, grid, values, idx, sign):
    """Golden-section polish of the grid extremum at ``idx`` (sign=+1 min, -1 max)."""
    best = sign * values[idx]
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, len(grid) - 1)]
    if hi > lo:
        x, fx = _golden_section(lambda t: sign * f(t), lo, hi)
        best = min(best, fx)
    return sign * best


def max_attenuation_deviation(
    curve: AttenuationCurve,
    delta_phi0: float,
    delta_max: float,
    grid_points: int = 10_001,
) -> DeviationResult:
    """Extremes of alpha over [delta_phi0 - delta_max, delta_phi0 + delta_max]."""
    if delta_max < 0:
        raise ValueError("delta_max must be >= 0")
    if grid_points < 10_000:
        raise ValueError("grid_points must be >= 10^4")
    alpha0 = attenuation(curve, delta_phi0)
    if delta_max == 0:
        sat = is_saturated(curve, delta_phi0)
        return DeviationResult(alpha0, 0.0, 0.0, alpha0, alpha0, sat)
    grid = np.linspace(delta_phi0 - delta_max, delta_phi0 + delta_max, grid_points)
    values, sat = curve.evaluate_flagged(grid)
    f = lambda t: attenuation(curve, t)
    a_min = min(_refine(f, grid, values, int(np.argmin(values)), +1.0), alpha0)
    if sat.any():
        a_max = float(values.max())
    else:
        a_max = max(_refine(f, grid, values, int(np.argmax(values)), -1.0), alpha0)
    dev = max(alpha0 - a_min, a_max - alpha0)
    return DeviationResult(alpha0, float(delta_max), dev, a_min, a_max, bool(sat.any()))


def cascade_attenuation(
    stages: Sequence[tuple[AttenuationCurve, float]], fixed_loss_db: float = 0.0
) -> float:
    """Total dB of stages in series plus fixed (coupler) loss.

    A saturated stage contributes the sentinel, so a saturated cascade is
    recognisable by ``total - fixed_loss_db >= SATURATION_DB``.
    """
    if fixed_loss_db < 0:
        raise ValueError("fixed loss must be >= 0 dB")
    return fixed_loss_db + sum(attenuation(c, d) for c, d in stages)


def cascade_saturated(stages: Sequence[tuple[AttenuationCurve, float]]) -> bool:
    return any(is_saturated(c, d) for c, d in stages)
