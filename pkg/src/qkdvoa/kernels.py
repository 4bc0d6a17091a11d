"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names (``ou_filter``, ``attenuation_db``) dispatch to the numba
versions unless ``QKDVOA_DISABLE_NUMBA`` is set. Both flavours stay importable
so they can be benchmarked and cross-checked against each other.
"""
import math

import numpy as np
from scipy.signal import lfilter

from ._accel import USE_NUMBA, optional_njit

# Linear transmittance floor (120 dB); values below are clamped and flagged.
TRANSMITTANCE_FLOOR = 1e-12


@optional_njit(cache=False)
def _ou_filter_numba(innovations, decay, x0):
    n = innovations.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    out[0] = x0
    for k in range(1, n):
        out[k] = decay * out[k - 1] + innovations[k]
    return out


def _ou_filter_numpy(innovations, decay, x0):
    innovations = np.asarray(innovations, dtype=np.float64)
    n = innovations.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    out[0] = x0
    if n > 1:
        out[1:], _ = lfilter([1.0], [1.0, -decay], innovations[1:], zi=[decay * x0])
    return out


@optional_njit(cache=False)
def _attenuation_db_numba(phases, eta0, eta_bias, excess_db, floor):
    n = phases.shape[0]
    alpha = np.empty(n, dtype=np.float64)
    saturated = np.zeros(n, dtype=np.bool_)
    base = eta0 * eta0
    cross = 2.0 * math.sqrt(eta_bias)
    for i in range(n):
        p = base * (1.0 + eta_bias + cross * math.cos(phases[i]))
        if p < floor:
            p = floor
            saturated[i] = True
        alpha[i] = abs(10.0 * math.log10(p)) + excess_db
    return alpha, saturated


def _attenuation_db_numpy(phases, eta0, eta_bias, excess_db, floor):
    phases = np.asarray(phases, dtype=np.float64)
    p = eta0 * eta0 * (1.0 + eta_bias + 2.0 * math.sqrt(eta_bias) * np.cos(phases))
    saturated = p < floor
    p = np.where(saturated, floor, p)
    return np.abs(10.0 * np.log10(p)) + excess_db, saturated


def ou_filter(innovations, decay, x0):
    """Run ``x[k] = decay * x[k-1] + innovations[k]`` from ``x[0] = x0``.

    ``innovations[0]`` is ignored.
    """
    innovations = np.ascontiguousarray(innovations, dtype=np.float64)
    if USE_NUMBA:
        return _ou_filter_numba(innovations, float(decay), float(x0))
    return _ou_filter_numpy(innovations, float(decay), float(x0))


def attenuation_db(phases, eta0, eta_bias, excess_db=0.0, floor=TRANSMITTANCE_FLOOR):
    """Elementwise biased-MZI attenuation in dB and the saturation mask."""
    phases = np.ascontiguousarray(np.atleast_1d(phases), dtype=np.float64).ravel()
    args = (float(eta0), float(eta_bias), float(excess_db), float(floor))
    if USE_NUMBA:
        return _attenuation_db_numba(phases, *args)
    return _attenuation_db_numpy(phases, *args)


KERNELS = {
    "ou_filter": (_ou_filter_numba, _ou_filter_numpy),
    "attenuation_db": (_attenuation_db_numba, _attenuation_db_numpy),
}
