"""Secret key rate of Gaussian-modulated coherent-state CV-QKD.

Homodyne detection, reverse reconciliation, trusted detector noise. All
noises are in shot-noise units; the excess noise is referred to the channel
input. The private ``_rate_terms`` core is vectorised so the harness can push
whole per-second series through it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

ASYMPTOTIC = "asymptotic"
FINITE_SIZE = "finite-size"
_MODE_ALIASES = {
    "asymptotic": ASYMPTOTIC,
    "finite-size": FINITE_SIZE,
    "finitesize": FINITE_SIZE,
    "finite_size": FINITE_SIZE,
    "finite": FINITE_SIZE,
}

EIGEN_TOL = 1e-9

# Worst-case parameter-estimation quantile, fitted once by
# ``calibrate_pe_quantile`` so the 30 km default finite-size rate is 1.88e-2
# bits/pulse, then frozen for every other scenario.
PE_QUANTILE = 8878.596173863289


class UnphysicalStateError(ArithmeticError):
    pass


class EstimationError(ValueError):
    """Parameter estimation cannot produce a usable worst-case bound."""


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown key-rate mode {mode!r}") from None


def transmittance_from_distance(distance_km: float, loss_db_per_km: float = 0.2) -> float:
    if distance_km < 0:
        raise ValueError("distance must be >= 0")
    if loss_db_per_km <= 0:
        raise ValueError("loss coefficient must be > 0")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


@dataclass(frozen=True)
class QKDParams:
    modulation_variance_snu: float = 4.4
    distance_km: float = 30.0
    loss_coeff_db_per_km: float = 0.2
    transmittance: float | None = None
    excess_noise_snu: float = 0.05
    detector_efficiency: float = 0.6
    electronic_noise_snu: float = 0.1
    reconciliation_efficiency: float = 0.956
    block_length: float = 1e9
    pe_fraction: float = 0.5
    epsilon_smooth: float = 1e-10
    epsilon_pe: float = 1e-10

    def __post_init__(self):
        if not self.modulation_variance_snu > 0:
            raise ValueError("modulation variance must be > 0")
        if not 0 < self.T <= 1:
            raise ValueError("transmittance must be in (0, 1]")
        if self.excess_noise_snu < 0:
            raise ValueError("excess noise must be >= 0")
        if not 0 < self.detector_efficiency <= 1:
            raise ValueError("detector efficiency must be in (0, 1]")
        if self.electronic_noise_snu < 0:
            raise ValueError("electronic noise must be >= 0")
        if not 0 < self.reconciliation_efficiency <= 1:
            raise ValueError("reconciliation efficiency must be in (0, 1]")
        if self.block_length < 1:
            raise ValueError("block length must be >= 1")
        if not 0 <= self.pe_fraction < 1:
            raise ValueError("pe_fraction must be in [0, 1)")
        if not (0 < self.epsilon_smooth < 1 and 0 < self.epsilon_pe < 1):
            raise ValueError("security epsilons must be in (0, 1)")

    @property
    def T(self) -> float:
        if self.transmittance is not None:
            return float(self.transmittance)
        return transmittance_from_distance(self.distance_km, self.loss_coeff_db_per_km)

    @property
    def V(self) -> float:
        return self.modulation_variance_snu + 1.0

    @property
    def n_key(self) -> float:
        return self.block_length * (1.0 - self.pe_fraction)

    @property
    def n_pe(self) -> float:
        return self.block_length * self.pe_fraction

    def with_(self, **changes) -> "QKDParams":
        return replace(self, **changes)


def g_function(x):
    """(x+1) log2(x+1) - x log2 x, with G(0) = 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("g_function is defined for x >= 0")
    safe = np.where(arr > 0, arr, 1.0)
    out = (arr + 1.0) * np.log2(arr + 1.0) - np.where(arr > 0, arr * np.log2(safe), 0.0)
    return float(out) if out.ndim == 0 else out


def _g_of_eigen(lam):
    # symplectic eigenvalues within tolerance below 1 are rounding, not physics
    x = np.maximum((np.asarray(lam, dtype=float) - 1.0) / 2.0, 0.0)
    return g_function(x)


def noise_terms(T, eps, eta, v_el):
    chi_line = (1.0 - T) / T + eps
    chi_hom = (1.0 + v_el) / eta - 1.0
    chi_tot = chi_line + chi_hom / T
    return chi_line, chi_hom, chi_tot


def _mutual_information(V, chi_tot):
    return 0.5 * np.log2((V + chi_tot) / (1.0 + chi_tot))


def _symplectic_terms(V, T, chi_line, chi_hom, chi_tot):
    A = V * V * (1.0 - 2.0 * T) + 2.0 * T + T * T * (V + chi_line) ** 2
    B = T * T * (V * chi_line + 1.0) ** 2
    sqB = np.sqrt(B)
    C = (V * sqB + T * (V + chi_line) + A * chi_hom) / (T * (V + chi_tot))
    D = sqB * (V + sqB * chi_hom) / (T * (V + chi_tot))

    def pair(s, p):
        disc = np.sqrt(np.maximum(s * s - 4.0 * p, 0.0))
        return np.sqrt((s + disc) / 2.0), np.sqrt(np.maximum((s - disc) / 2.0, 0.0))

    l1, l2 = pair(A, B)
    l3, l4 = pair(C, D)
    return {"A": A, "B": B, "C": C, "D": D}, (l1, l2, l3, l4)


def _rate_terms(VA, T, eps, eta, v_el, beta, delta):
    """Vectorised core; no validation, so estimated (possibly unphysical) inputs pass."""
    with np.errstate(invalid="ignore", divide="ignore"):
        V = VA + 1.0
        chi_line, chi_hom, chi_tot = noise_terms(T, eps, eta, v_el)
        I_ab = _mutual_information(V, chi_tot)
        inter, lams = _symplectic_terms(V, T, chi_line, chi_hom, chi_tot)
        chi_be = (
            _g_of_eigen(lams[0]) + _g_of_eigen(lams[1])
            - _g_of_eigen(lams[2]) - _g_of_eigen(lams[3])
        )
        raw = beta * I_ab - chi_be - delta
    inter.update(chi_line=chi_line, chi_hom=chi_hom, chi_tot=chi_tot)
    return {"I_ab": I_ab, "chi_be": chi_be, "raw": raw, "lams": lams, "inter": inter}


def mutual_information(params: QKDParams) -> float:
    p = params
    _, _, chi_tot = noise_terms(p.T, p.excess_noise_snu, p.detector_efficiency, p.electronic_noise_snu)
    return float(_mutual_information(p.V, chi_tot))


@dataclass(frozen=True)
class HolevoResult:
    bits: float
    eigenvalues: tuple
    intermediates: dict = field(compare=False)


def holevo_bound(params: QKDParams) -> HolevoResult:
    p = params
    cl, ch, ct = noise_terms(p.T, p.excess_noise_snu, p.detector_efficiency, p.electronic_noise_snu)
    inter, lams = _symplectic_terms(p.V, p.T, cl, ch, ct)
    lams = tuple(float(x) for x in lams)
    if min(lams) < 1.0 - EIGEN_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalues {lams} below 1")
    bits = float(
        _g_of_eigen(lams[0]) + _g_of_eigen(lams[1]) - _g_of_eigen(lams[2]) - _g_of_eigen(lams[3])
    )
    inter = {k: float(v) for k, v in inter.items()}
    inter.update(chi_line=float(cl), chi_hom=float(ch), chi_tot=float(ct))
    return HolevoResult(bits, lams, inter)


def finite_size_delta(n_key: float, epsilon_smooth: float = 1e-10):
    n = np.asarray(n_key, dtype=float)
    if np.any(n < 1):
        raise ValueError("n_key must be >= 1")
    out = 7.0 * np.sqrt(math.log2(2.0 / epsilon_smooth) / n)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiniteSizeModel:
    """Worst-case parameter-estimation bounds.

    The transmittance estimate carries a relative per-sample dispersion
    ``t_dispersion`` (sigma_T = t_dispersion * T): with one-time shot-noise
    calibration the normalisation error scales every SNU-referred estimate
    multiplicatively, independent of distance. The excess-noise estimate
    carries an absolute per-sample dispersion ``eps_dispersion`` (SNU), off by
    default. Bounds are ``T - z sigma_T / sqrt(m)`` and
    ``eps + z sigma_eps / sqrt(m)`` for ``m`` estimation samples.
    """

    quantile: float = PE_QUANTILE
    t_dispersion: float = 1.0
    eps_dispersion: float = 0.0

    def worst_case(self, T, eps, n_pe):
        if n_pe < 1:
            raise EstimationError("finite-size mode needs pe_fraction > 0")
        shrink = self.quantile * self.t_dispersion / math.sqrt(n_pe)
        if shrink >= 1.0:
            raise EstimationError(
                f"{n_pe:.3g} estimation samples leave no transmittance bound (shrink {shrink:.3g})"
            )
        return T * (1.0 - shrink), eps + self.quantile * self.eps_dispersion / math.sqrt(n_pe)


DEFAULT_FINITE_SIZE = FiniteSizeModel()


@dataclass(frozen=True)
class SkrBreakdown:
    mode: str
    mutual_info_bits: float
    holevo_bits: float
    finite_size_bits: float
    raw_key_rate: float
    symplectic_eigenvalues: tuple
    modulation_variance_snu: float
    transmittance: float
    excess_noise_snu: float
    intermediates: dict = field(default_factory=dict, compare=False)
    unphysical_estimate: bool = False

    @property
    def clamped_key_rate(self) -> float:
        return max(0.0, self.raw_key_rate)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["symplectic_eigenvalues"] = list(self.symplectic_eigenvalues)
        d["clamped_key_rate"] = self.clamped_key_rate
        return d


def _breakdown(params, VA, T, eps, mode, model, unphysical=False) -> SkrBreakdown:
    mode = normalize_mode(mode)
    p = params
    if mode == FINITE_SIZE:
        T_used, eps_used = model.worst_case(T, eps, p.n_pe)
        delta = finite_size_delta(p.n_key, p.epsilon_smooth)
    else:
        T_used, eps_used, delta = T, eps, 0.0
    r = _rate_terms(
        VA, T_used, eps_used, p.detector_efficiency, p.electronic_noise_snu,
        p.reconciliation_efficiency, delta,
    )
    lams = tuple(float(x) for x in r["lams"])
    if not unphysical and min(lams) < 1.0 - EIGEN_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalues {lams} below 1")
    inter = {k: float(v) for k, v in r["inter"].items()}
    inter.update(transmittance_used=float(T_used), excess_noise_used=float(eps_used))
    return SkrBreakdown(
        mode=mode,
        mutual_info_bits=float(r["I_ab"]),
        holevo_bits=float(r["chi_be"]),
        finite_size_bits=float(delta),
        raw_key_rate=float(r["raw"]),
        symplectic_eigenvalues=lams,
        modulation_variance_snu=float(VA),
        transmittance=float(T),
        excess_noise_snu=float(eps),
        intermediates=inter,
        unphysical_estimate=unphysical,
    )


def secret_key_rate(
    params: QKDParams, mode: str = ASYMPTOTIC, model: FiniteSizeModel = DEFAULT_FINITE_SIZE
) -> SkrBreakdown:
    """beta * I_AB - chi_BE - Delta(n); Delta and worst-case estimation only in finite-size mode."""
    return _breakdown(params, params.modulation_variance_snu, params.T, params.excess_noise_snu, mode, model)


def modulation_variance_from_power(output_power_dbm, reference_power_dbm=-65.50, reference_variance_snu=4.4):
    """Modulation variance scales linearly with optical power at the modulator output."""
    if reference_variance_snu <= 0:
        raise ValueError("reference variance must be > 0")
    out = reference_variance_snu * 10.0 ** ((np.asarray(output_power_dbm, float) - reference_power_dbm) / 10.0)
    return float(out) if out.ndim == 0 else out


def miscalibrated_estimates(actual_va, assumed_va, T, eps):
    """Channel estimates when statistics follow ``actual_va`` but estimation assumes ``assumed_va``.

    The cross-correlation estimator scales the transmittance by the variance
    ratio; the residual-noise estimator, referred back through the estimated
    transmittance, scales the excess noise by its inverse.
    """
    ratio = np.asarray(actual_va, float) / assumed_va
    return T * ratio, eps / ratio


def skr_under_miscalibration(
    actual_va_snu: float,
    assumed_va_snu: float,
    params: QKDParams,
    mode: str = ASYMPTOTIC,
    model: FiniteSizeModel = DEFAULT_FINITE_SIZE,
) -> SkrBreakdown:
    """Key rate the operator believes in under one-time variance calibration."""
    if actual_va_snu <= 0 or assumed_va_snu <= 0:
        raise ValueError("modulation variances must be > 0")
    T_hat, eps_hat = miscalibrated_estimates(actual_va_snu, assumed_va_snu, params.T, params.excess_noise_snu)
    T_hat, eps_hat = float(T_hat), float(eps_hat)
    return _breakdown(params, assumed_va_snu, T_hat, eps_hat, mode, model, unphysical=T_hat > 1.0)


def key_rate_series(VA, T, eps, params: QKDParams, mode: str, model: FiniteSizeModel = DEFAULT_FINITE_SIZE):
    """Vectorised raw key rate for arrays of (V_A, T, eps) under fixed detector/protocol settings."""
    mode = normalize_mode(mode)
    T = np.asarray(T, float)
    eps = np.asarray(eps, float)
    if mode == FINITE_SIZE:
        T, eps = model.worst_case(T, eps, params.n_pe)
        delta = finite_size_delta(params.n_key, params.epsilon_smooth)
    else:
        delta = 0.0
    r = _rate_terms(
        np.asarray(VA, float), T, eps, params.detector_efficiency,
        params.electronic_noise_snu, params.reconciliation_efficiency, delta,
    )
    return r["raw"]


def calibrate_pe_quantile(
    target_rate: float = 1.88e-2,
    params: QKDParams | None = None,
    t_dispersion: float = 1.0,
    eps_dispersion: float = 0.0,
) -> float:
    """Quantile that makes the finite-size rate at ``params`` equal ``target_rate``."""
    p = params or QKDParams(distance_km=30.0)

    def resid(z):
        model = FiniteSizeModel(z, t_dispersion, eps_dispersion)
        return secret_key_rate(p, FINITE_SIZE, model).raw_key_rate - target_rate

    z_hi = 0.999 * math.sqrt(p.n_pe) / t_dispersion
    return brentq(resid, 0.0, z_hi, xtol=1e-10, rtol=1e-14)
