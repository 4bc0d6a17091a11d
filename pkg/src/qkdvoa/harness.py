"""Scenario orchestration: curve sweeps, chip voltage maps, and the 80-minute
free-running stability run comparing the biased cascade with a symmetric VOA.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .drive import CalibrationTargets, ChipModel, OperatingPoint, calibrate_chip, chip_operating_point
from .noise import (
    PhaseNoiseConfig,
    PhaseNoiseTrace,
    calibrate_noise_to_std,
    simulate_phase_noise,
)
from .photonics import (
    RISING,
    SATURATION_DB,
    AttenuationCurve,
    max_attenuation_deviation,
    solve_operating_point,
)
from .security import (
    FINITE_SIZE,
    QKDParams,
    key_rate_series,
    miscalibrated_estimates,
    modulation_variance_from_power,
    normalize_mode,
    secret_key_rate,
)

INPUT_POWER_DBM = -27.26
REFERENCE_POWER_DBM = -65.50
REFERENCE_VARIANCE_SNU = 4.4
DEFAULT_NOISE_TARGET_DB = 0.071
# fixed seed list for statistical suites
SEED_SUITE = tuple(range(1000, 1020))

BIASED = "biased"
SYMMETRIC = "symmetric"
VARIANTS = (BIASED, SYMMETRIC)
REFERENCE_MODES = ("run-mean", "nominal")
BLOCK_MODES = ("block-mean", "per-second-mean")


class ScenarioError(ValueError):
    pass


class TraceMismatchError(ScenarioError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    distance_km: float = 30.0
    voa_variant: str = BIASED
    symmetric_target_db: float = 30.0
    qkd: QKDParams = field(default_factory=QKDParams)
    skr_mode: str = FINITE_SIZE
    noise: PhaseNoiseConfig | None = None
    noise_target_std_db: float = DEFAULT_NOISE_TARGET_DB
    duration_sec: float = 4800.0
    block_sec: float = 600.0
    sample_rate_hz: float = 1.0
    seed: int = 0
    input_power_dbm: float = INPUT_POWER_DBM
    reference_power_dbm: float = REFERENCE_POWER_DBM
    reference_variance_snu: float = REFERENCE_VARIANCE_SNU
    reference_mode: str = "run-mean"
    block_skr_mode: str = "block-mean"
    shared_trace_with: str | None = None
    name: str = ""

    def __post_init__(self):
        if self.voa_variant not in VARIANTS:
            raise ScenarioError(f"voa_variant must be one of {VARIANTS}")
        if self.reference_mode not in REFERENCE_MODES:
            raise ScenarioError(f"reference_mode must be one of {REFERENCE_MODES}")
        if self.block_skr_mode not in BLOCK_MODES:
            raise ScenarioError(f"block_skr_mode must be one of {BLOCK_MODES}")
        object.__setattr__(self, "skr_mode", normalize_mode(self.skr_mode))
        if self.duration_sec <= 0 or self.block_sec <= 0:
            raise ScenarioError("duration_sec and block_sec must be > 0")
        ratio = self.duration_sec / self.block_sec
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioError("duration_sec must be divisible by block_sec")
        per_block = self.block_sec * self.sample_rate_hz
        if per_block < 1 or abs(per_block - round(per_block)) > 1e-9:
            raise ScenarioError("block_sec * sample_rate_hz must be a positive integer")
        if self.noise_target_std_db < 0:
            raise ScenarioError("noise_target_std_db must be >= 0")
        if self.seed < 0:
            raise ScenarioError("seed must be >= 0")
        if self.skr_mode == FINITE_SIZE and self.qkd.pe_fraction <= 0:
            raise ScenarioError("pe_fraction must be > 0 in finite-size mode")
        if self.qkd.distance_km != self.distance_km:
            object.__setattr__(self, "qkd", replace(self.qkd, distance_km=self.distance_km))

    @property
    def n_blocks(self) -> int:
        return int(round(self.duration_sec / self.block_sec))

    @property
    def required_attenuation_db(self) -> float:
        return self.input_power_dbm - self.reference_power_dbm


@lru_cache(maxsize=8)
def default_chip(targets: CalibrationTargets = CalibrationTargets()) -> ChipModel:
    return calibrate_chip(targets)


@lru_cache(maxsize=32)
def _operating_point(targets: CalibrationTargets, alpha_db: float) -> OperatingPoint:
    return chip_operating_point(default_chip(targets), alpha_db)


@lru_cache(maxsize=32)
def _calibrated_noise(targets, alpha_db, target_std_db, duration_sec, sample_rate_hz):
    op = _operating_point(targets, alpha_db)
    return calibrate_noise_to_std(
        target_std_db, default_chip(targets), op.phases,
        duration_sec=duration_sec, sample_rate_hz=sample_rate_hz,
    )


def resolve_noise(config: ScenarioConfig, targets: CalibrationTargets = CalibrationTargets()):
    """(PhaseNoiseConfig, calibration or None) for a scenario."""
    if config.noise is not None:
        return replace(config.noise, duration_sec=config.duration_sec, sample_rate_hz=config.sample_rate_hz), None
    if config.noise_target_std_db == 0:
        return PhaseNoiseConfig(duration_sec=config.duration_sec, sample_rate_hz=config.sample_rate_hz), None
    cal = _calibrated_noise(
        targets, config.required_attenuation_db, config.noise_target_std_db,
        config.duration_sec, config.sample_rate_hz,
    )
    return cal.config, cal


@dataclass(frozen=True)
class SeriesSummary:
    mean: float
    std: float
    min: float
    max: float
    count: int

    def to_dict(self):
        return {"mean": self.mean, "std": self.std, "min": self.min, "max": self.max, "count": self.count}


def summarize_series(values) -> SeriesSummary:
    """Mean, sample std (n - 1), min and max over the finite entries."""
    arr = np.asarray(values, dtype=float).ravel()
    arr = arr[np.isfinite(arr)]
    if arr.size < 2:
        raise ScenarioError(f"need at least 2 finite samples to summarise, got {arr.size}")
    return SeriesSummary(
        float(np.mean(arr)), float(np.std(arr, ddof=1)), float(arr.min()), float(arr.max()), int(arr.size)
    )


PER_SECOND_TRACKED = ("alpha_db", "output_power_dbm", "actual_va_snu", "believed_skr", "true_skr")
PER_BLOCK_TRACKED = ("believed_skr", "true_skr")


@dataclass(eq=False)
class ScenarioReport:
    config: ScenarioConfig
    per_second: dict
    per_block: dict
    summary: dict
    flags: dict
    meta: dict
    traces: tuple

    def summary_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.summary.items()}


def summarize(report: ScenarioReport) -> dict:
    """Recompute summary statistics from a report's per-second and per-block series."""
    out = {name: summarize_series(report.per_second[name]) for name in PER_SECOND_TRACKED}
    for name in PER_BLOCK_TRACKED:
        out[f"block_{name}"] = summarize_series(report.per_block[name])
    return out


def _biased_alpha(chip, op, traces):
    total = np.full(traces[0].samples.shape, chip.fixed_loss_db)
    sat = np.zeros(traces[0].samples.shape, dtype=bool)
    for stage, phi0, tr in zip(chip.stages, op.phases, traces):
        a, s = stage.curve.evaluate_flagged(phi0 + tr.samples)
        total = total + a
        sat |= s
    return total, sat


def run_scenario(
    config: ScenarioConfig,
    shared_trace: PhaseNoiseTrace | None = None,
    targets: CalibrationTargets = CalibrationTargets(),
) -> ScenarioReport:
    """Simulate the free-running transmitter second by second.

    delta(t) -> stage phases -> attenuation -> output power -> actual
    modulation variance -> believed and true key rates, then block
    aggregation and summary statistics. ``shared_trace`` replaces the first
    stage's trace (the symmetric comparator always rides on that one).
    """
    chip = default_chip(targets)
    op = _operating_point(targets, config.required_attenuation_db)
    noise_cfg, cal = resolve_noise(config, targets)
    traces = [simulate_phase_noise(noise_cfg, config.seed, sid) for sid in range(len(chip.stages))]
    if shared_trace is not None:
        if shared_trace.samples.shape != traces[0].samples.shape:
            raise TraceMismatchError(
                f"shared trace has {shared_trace.samples.size} samples, scenario needs {traces[0].samples.size}"
            )
        traces[0] = shared_trace

    alpha_biased, sat_biased = _biased_alpha(chip, op, traces)
    meta = {
        "operating_voltages_v": list(op.voltages),
        "operating_phases_rad": list(op.phases),
        "nominal_alpha_db": op.alpha_db,
        "chip_fixed_loss_db": chip.fixed_loss_db,
        "noise": {
            "slow_sigma_rad": noise_cfg.slow_sigma_rad,
            "slow_tau_sec": noise_cfg.slow_tau_sec,
            "fast_sigma_rad": noise_cfg.fast_sigma_rad,
            "calibrated": cal is not None,
            "calibration_achieved_std_db": cal.achieved_std_db if cal else None,
        },
    }
    if config.voa_variant == BIASED:
        alpha, sat = alpha_biased, sat_biased
        used_traces = tuple(traces)
    else:
        curve = AttenuationCurve.symmetric()
        x0 = solve_operating_point(curve, config.symmetric_target_db, RISING, snap_db=0.0)
        a_sym, sat = curve.evaluate_flagged(x0 + traces[0].samples)
        ok = ~(sat | sat_biased)
        # equal-mean comparison: fixed loss matches the biased chain's mean output
        fixed = float(np.mean(alpha_biased[ok]) - np.mean(a_sym[ok]))
        if fixed < 0:
            raise ScenarioError(
                f"symmetric target {config.symmetric_target_db} dB exceeds the chain's mean attenuation"
            )
        alpha = a_sym + fixed
        used_traces = (traces[0],)
        meta.update(symmetric_phase_rad=x0, symmetric_fixed_loss_db=fixed)

    valid = ~sat
    if not valid.any():
        raise ScenarioError("every sample saturated")
    power = config.input_power_dbm - alpha
    if config.reference_mode == "run-mean":
        ref_power = float(np.mean(power[valid]))
    else:
        ref_power = config.reference_power_dbm
    meta["reference_power_dbm"] = ref_power

    q = config.qkd
    va_set = config.reference_variance_snu
    va = np.where(valid, modulation_variance_from_power(power, ref_power, va_set), np.nan)
    t_hat, eps_hat = miscalibrated_estimates(va, va_set, q.T, q.excess_noise_snu)
    believed = key_rate_series(va_set, t_hat, eps_hat, q, config.skr_mode)
    true = key_rate_series(va, q.T, q.excess_noise_snu, q, config.skr_mode)
    target = secret_key_rate(replace(q, modulation_variance_snu=va_set), config.skr_mode).raw_key_rate
    meta["target_skr"] = target

    n = power.size
    t = np.arange(n) / config.sample_rate_hz
    per_second = {"t_sec": t}
    for i, tr in enumerate(used_traces):
        per_second[f"delta_rad_stage{i + 1}"] = tr.samples
    per_second.update(
        alpha_db=np.where(valid, alpha, np.nan),
        output_power_dbm=np.where(valid, power, np.nan),
        actual_va_snu=va,
        believed_skr=believed,
        true_skr=true,
        saturated=sat,
    )

    per = int(round(config.block_sec * config.sample_rate_hz))
    nb = config.n_blocks
    blocks = {k: np.empty(nb) for k in (
        "t_start_sec", "t_end_sec", "mean_alpha_db", "mean_power_dbm", "mean_va_snu",
        "estimated_transmittance", "estimated_excess_noise_snu", "believed_skr", "true_skr",
    )}
    blocks["block"] = np.arange(nb)
    for b in range(nb):
        sl = slice(b * per, (b + 1) * per)
        blocks["t_start_sec"][b] = t[sl][0]
        blocks["t_end_sec"][b] = t[sl][-1] + 1.0 / config.sample_rate_hz
        blocks["mean_alpha_db"][b] = np.nanmean(per_second["alpha_db"][sl])
        blocks["mean_power_dbm"][b] = np.nanmean(per_second["output_power_dbm"][sl])
        blocks["mean_va_snu"][b] = np.nanmean(va[sl])
        blocks["estimated_transmittance"][b] = np.nanmean(t_hat[sl])
        blocks["estimated_excess_noise_snu"][b] = np.nanmean(eps_hat[sl])
        if config.block_skr_mode == "block-mean":
            blocks["believed_skr"][b] = key_rate_series(
                va_set, blocks["estimated_transmittance"][b], blocks["estimated_excess_noise_snu"][b],
                q, config.skr_mode,
            )
            blocks["true_skr"][b] = key_rate_series(
                blocks["mean_va_snu"][b], q.T, q.excess_noise_snu, q, config.skr_mode
            )
        else:
            blocks["believed_skr"][b] = np.nanmean(believed[sl])
            blocks["true_skr"][b] = np.nanmean(true[sl])

    flags = {
        "saturated_samples": int(sat.sum()),
        "unphysical_estimates": int(np.sum(np.nan_to_num(t_hat) > 1.0)),
    }
    report = ScenarioReport(config, per_second, blocks, {}, flags, meta, used_traces)
    report.summary = summarize(report)
    return report


@dataclass
class ComparisonReport:
    a: ScenarioReport
    b: ScenarioReport
    per_second_delta: dict
    per_block_delta: dict
    ratios: dict


def _ratio(num, den):
    if num == den:
        return 1.0
    return num / den if den != 0 else math.inf


def compare_designs(config_a: ScenarioConfig, config_b: ScenarioConfig) -> ComparisonReport:
    """Run two designs on one phase-noise trace and compare their statistics.

    Ratios are B over A; with A the biased cascade and B the symmetric VOA
    they read as "how much worse is the symmetric design".
    """
    same_noise = (
        config_a.seed == config_b.seed
        and config_a.noise == config_b.noise
        and config_a.noise_target_std_db == config_b.noise_target_std_db
        and config_a.duration_sec == config_b.duration_sec
        and config_a.sample_rate_hz == config_b.sample_rate_hz
    )
    if not same_noise:
        raise TraceMismatchError("compared scenarios must share seed and noise settings")
    rep_a = run_scenario(config_a)
    rep_b = run_scenario(config_b, shared_trace=rep_a.traces[0])
    if not rep_a.traces[0].same_samples(rep_b.traces[0]):
        raise TraceMismatchError("designs did not consume the identical trace")

    ps = {
        k: rep_b.per_second[k] - rep_a.per_second[k]
        for k in ("alpha_db", "output_power_dbm", "believed_skr", "true_skr")
    }
    pb = {k: rep_b.per_block[k] - rep_a.per_block[k] for k in ("believed_skr", "true_skr", "mean_alpha_db")}
    sa, sb = rep_a.summary, rep_b.summary

    def overestimation(rep):
        return _ratio(rep.summary["block_believed_skr"].mean, rep.summary["block_true_skr"].mean)

    ratios = {
        "alpha_std": _ratio(sb["alpha_db"].std, sa["alpha_db"].std),
        "power_std": _ratio(sb["output_power_dbm"].std, sa["output_power_dbm"].std),
        "block_skr_std": _ratio(sb["block_believed_skr"].std, sa["block_believed_skr"].std),
        "per_second_skr_std": _ratio(sb["believed_skr"].std, sa["believed_skr"].std),
        "block_skr_mean": _ratio(sb["block_believed_skr"].mean, sa["block_believed_skr"].mean),
        "overestimation_a": overestimation(rep_a),
        "overestimation_b": overestimation(rep_b),
    }
    return ComparisonReport(rep_a, rep_b, ps, pb, ratios)


@dataclass
class CurvesDataset:
    delta_phi: np.ndarray
    alpha_db: dict
    saturated: dict


def sweep_attenuation_curves(eta_bias_list: Sequence[float], grid_size: int = 1001, eta0: float = 0.5) -> CurvesDataset:
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    grid = np.linspace(0.0, 2.0 * math.pi, grid_size)
    alphas, sats = {}, {}
    for eb in eta_bias_list:
        curve = AttenuationCurve(eta0=eta0, eta_bias=float(eb))
        a, s = curve.evaluate_flagged(grid)
        alphas[float(eb)] = a
        sats[float(eb)] = s
    return CurvesDataset(grid, alphas, sats)


@dataclass
class VoltageMap:
    u1: np.ndarray
    u2: np.ndarray
    alpha_db: np.ndarray  # [i, j] at (u1[i], u2[j])
    argmax: tuple


def sweep_voltage_map(chip: ChipModel, u1_grid, u2_grid) -> VoltageMap:
    u1 = np.asarray(u1_grid, dtype=float)
    u2 = np.asarray(u2_grid, dtype=float)
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    alpha = chip.attenuation(U1.ravel(), U2.ravel()).reshape(U1.shape)
    i, j = np.unravel_index(int(np.argmax(alpha)), alpha.shape)
    return VoltageMap(u1, u2, alpha, (float(u1[i]), float(u2[j]), float(alpha[i, j])))


@dataclass(frozen=True)
class TradeoffRow:
    eta_bias: float
    stage_min_db: float
    stage_max_db: float
    alpha0_db: float
    max_deviation_db: float
    half_range_db: float
    stages_needed: int
    covered_max_db: float


def bias_tradeoff_sweep(
    eta_bias_grid: Sequence[float],
    alpha_target_db: float = 38.0,
    delta_max: float = 0.016 * math.pi,
    reference_alpha0_db: float = 16.69,
    coupler_loss_db: float = 8.0,
) -> list[TradeoffRow]:
    """Range versus stability for each bias coefficient.

    Each stage is placed at ``reference_alpha0_db`` on its rising branch, or
    at its extremum when it cannot reach that far.
    """
    rows = []
    for eb in eta_bias_grid:
        curve = AttenuationCurve(eta_bias=float(eb))
        lo, hi = curve.min_db, curve.max_db
        x0 = solve_operating_point(curve, min(reference_alpha0_db, hi), RISING)
        dev = max_attenuation_deviation(curve, x0, delta_max)
        per_stage = min(hi, SATURATION_DB)
        stages = max(1, math.ceil((alpha_target_db - coupler_loss_db) / per_stage - 1e-12))
        rows.append(TradeoffRow(
            float(eb), float(lo), float(hi), float(dev.alpha0_db), float(dev.max_deviation_db),
            float(dev.half_range_db), stages, float(stages * per_stage + coupler_loss_db),
        ))
    return rows
