"""Phase-noise traces: slow Ornstein-Uhlenbeck drift plus fast white noise.

Every trace is drawn from a counter-based Philox stream keyed by
``(seed, stage_id, component)``, so a trace depends only on its key and the
config, never on how many other traces were generated before it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .photonics import FALLING, RISING, TWO_PI, AttenuationCurve

SLOW, FAST = 0, 1
CALIBRATION_SEEDS = tuple(range(9001, 9011))
REFERENCE_SLOW_TAU_SEC = 300.0
# fast:slow variance 1:4, total variance 1 at unit multiplier
REFERENCE_SLOW_SHARE = math.sqrt(4.0 / 5.0)
REFERENCE_FAST_SHARE = math.sqrt(1.0 / 5.0)


class NoiseCalibrationError(RuntimeError):
    pass


class InversionError(ValueError):
    def __init__(self, index, alpha_db, message):
        self.index = index
        self.alpha_db = alpha_db
        super().__init__(f"sample {index} (alpha={alpha_db:.6g} dB): {message}")


@dataclass(frozen=True)
class PhaseNoiseConfig:
    slow_sigma_rad: float = 0.0
    slow_tau_sec: float = REFERENCE_SLOW_TAU_SEC
    fast_sigma_rad: float = 0.0
    sample_rate_hz: float = 1.0
    duration_sec: float = 4800.0

    def __post_init__(self):
        if self.slow_sigma_rad < 0 or self.fast_sigma_rad < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.slow_tau_sec <= 0:
            raise ValueError("slow_tau_sec must be > 0")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be > 0")
        n = self.duration_sec * self.sample_rate_hz
        if n < 1 or abs(n - round(n)) > 1e-9:
            raise ValueError("duration_sec * sample_rate_hz must be a positive integer")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_sec * self.sample_rate_hz))

    @property
    def total_sigma_rad(self) -> float:
        return math.hypot(self.slow_sigma_rad, self.fast_sigma_rad)

    @classmethod
    def reference(cls, multiplier: float, duration_sec=4800.0, sample_rate_hz=1.0):
        """Reference shape (tau 300 s, fast:slow variance 1:4) with total std ``multiplier``."""
        return cls(
            slow_sigma_rad=multiplier * REFERENCE_SLOW_SHARE,
            slow_tau_sec=REFERENCE_SLOW_TAU_SEC,
            fast_sigma_rad=multiplier * REFERENCE_FAST_SHARE,
            sample_rate_hz=sample_rate_hz,
            duration_sec=duration_sec,
        )


@dataclass(frozen=True, eq=False)
class PhaseNoiseTrace:
    samples: np.ndarray
    seed: int
    config: PhaseNoiseConfig
    stage_id: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.config.sample_rate_hz

    def same_samples(self, other: "PhaseNoiseTrace") -> bool:
        return self.samples.shape == other.samples.shape and bool(
            np.array_equal(self.samples, other.samples)
        )


def _stream(seed: int, stage_id: int, component: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    key = np.random.SeedSequence([int(seed), int(stage_id), int(component)])
    return np.random.Generator(np.random.Philox(key))


def unit_components(n: int, tau_samples: float, seed: int, stage_id: int = 0):
    """Unit-variance OU and white components for one (seed, stage) key."""
    decay = math.exp(-1.0 / tau_samples)
    slow_xi = _stream(seed, stage_id, SLOW).standard_normal(n)
    fast_xi = _stream(seed, stage_id, FAST).standard_normal(n)
    # exact discretisation, started in the stationary distribution
    ou = kernels.ou_filter(math.sqrt(1.0 - decay * decay) * slow_xi, decay, slow_xi[0])
    return ou, fast_xi


def simulate_phase_noise(config: PhaseNoiseConfig, seed: int, stage_id: int = 0) -> PhaseNoiseTrace:
    n = config.n_samples
    ou, white = unit_components(n, config.slow_tau_sec * config.sample_rate_hz, seed, stage_id)
    samples = config.slow_sigma_rad * ou + config.fast_sigma_rad * white
    samples.setflags(write=False)
    return PhaseNoiseTrace(samples, int(seed), config, int(stage_id))


@dataclass(frozen=True)
class NoiseCalibration:
    config: PhaseNoiseConfig
    achieved_std_db: float
    target_std_db: float
    multiplier: float
    seeds: tuple
    iterations: int


def calibrate_noise_to_std(
    target_alpha_std_db: float,
    chip,
    stage_phases: Sequence[float],
    seeds: Sequence[int] = CALIBRATION_SEEDS,
    duration_sec: float = 4800.0,
    sample_rate_hz: float = 1.0,
    max_steps: int = 60,
    rel_tol: float = 0.05,
) -> NoiseCalibration:
    """Scale the reference noise shape until the chip's attenuation std hits a target.

    The figure of merit is the sample std of total chip attenuation, averaged
    over ``seeds``; each stage gets its own independent trace. Unit traces are
    drawn once and rescaled, so the objective is a deterministic, smooth
    function of the multiplier.
    """
    if not target_alpha_std_db > 0:
        raise NoiseCalibrationError("target attenuation std must be > 0")
    if len(seeds) < 10:
        raise NoiseCalibrationError("at least 10 calibration seeds are required")
    base = PhaseNoiseConfig.reference(1.0, duration_sec, sample_rate_hz)
    n = base.n_samples
    tau = base.slow_tau_sec * sample_rate_hz
    units = []
    for seed in seeds:
        per_stage = []
        for sid in range(len(chip.stages)):
            ou, white = unit_components(n, tau, seed, sid)
            per_stage.append(REFERENCE_SLOW_SHARE * ou + REFERENCE_FAST_SHARE * white)
        units.append(per_stage)

    def mean_std(m):
        stds = []
        for per_stage in units:
            total = chip.fixed_loss_db
            for stage, phi0, u in zip(chip.stages, stage_phases, per_stage):
                total = total + stage.curve.evaluate(phi0 + m * u)
            stds.append(np.std(total, ddof=1))
        return float(np.mean(stds))

    lo, hi = 0.0, 1e-3
    steps = 0
    while mean_std(hi) < target_alpha_std_db:
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > max_steps or hi > math.pi:
            raise NoiseCalibrationError(
                f"target std {target_alpha_std_db} dB not reachable below pi rad of phase noise"
            )
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if mean_std(mid) < target_alpha_std_db:
            lo = mid
        else:
            hi = mid
        steps += 1
        if hi - lo <= 1e-12 * hi:
            break
    m = 0.5 * (lo + hi)
    achieved = mean_std(m)
    if abs(achieved - target_alpha_std_db) > rel_tol * target_alpha_std_db:
        raise NoiseCalibrationError(
            f"bisection stalled at std {achieved:.4g} dB for target {target_alpha_std_db} dB"
        )
    return NoiseCalibration(
        config=PhaseNoiseConfig.reference(m, duration_sec, sample_rate_hz),
        achieved_std_db=achieved,
        target_std_db=float(target_alpha_std_db),
        multiplier=m,
        seeds=tuple(int(s) for s in seeds),
        iterations=steps,
    )


def invert_attenuation_to_phase(
    alpha_series_db,
    curve: AttenuationCurve,
    delta_phi0: float,
    branch: str = RISING,
) -> np.ndarray:
    """Phase deviations ``delta`` with ``alpha(delta_phi0 + delta) == alpha``.

    Closed-form inversion of the biased-MZI law. ``branch`` selects the side
    of the extremum: rising is [0, pi], falling is [pi, 2 pi]; both are taken
    in the 2 pi window that contains ``delta_phi0``.
    """
    if branch not in (RISING, FALLING):
        raise ValueError("branch must be 'rising' or 'falling'")
    e0, b = curve.eta0, curve.eta_bias
    if e0 * e0 * (1.0 + math.sqrt(b)) ** 2 > 1.0:
        raise ValueError("inversion requires a passive curve (transmittance <= 1)")
    alpha = np.asarray(alpha_series_db, dtype=float)
    t = 10.0 ** (-(alpha - curve.excess_loss_db) / 10.0)
    c = (t / (e0 * e0) - 1.0 - b) / (2.0 * math.sqrt(b))
    # rounding at the extrema can push |c| a hair past 1
    c = np.where(np.abs(c) - 1.0 < 1e-12, np.clip(c, -1.0, 1.0), c)
    bad = np.flatnonzero(~(np.abs(c) <= 1.0))
    if bad.size:
        i = int(bad[0])
        raise InversionError(i, float(alpha.flat[i]), "outside the curve's range")
    x = np.arccos(c)
    if branch == FALLING:
        x = TWO_PI - x
    window = TWO_PI * math.floor(delta_phi0 / TWO_PI)
    return x + window - delta_phi0


def save_trace_csv(trace: PhaseNoiseTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_sec", "delta_rad"])
        for t, d in zip(trace.times, trace.samples):
            w.writerow([format(float(t), ".12g"), format(float(d), ".12g")])
    return path


def load_trace_csv(path, config: PhaseNoiseConfig | None = None, seed: int = 0) -> PhaseNoiseTrace:
    """Read a ``t_sec, delta_rad`` CSV; the sample rate is inferred if no config is given."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["t_sec", "delta_rad"]:
            raise ValueError(f"unexpected trace header {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        raise ValueError("empty trace file")
    t = np.array([r[0] for r in rows])
    d = np.array([r[1] for r in rows])
    if config is None:
        rate = 1.0 if t.size < 2 else 1.0 / float(np.median(np.diff(t)))
        config = PhaseNoiseConfig(sample_rate_hz=rate, duration_sec=t.size / rate)
    elif config.n_samples != d.size:
        config = replace(config, duration_sec=d.size / config.sample_rate_hz)
    d.setflags(write=False)
    return PhaseNoiseTrace(d, seed, config)
