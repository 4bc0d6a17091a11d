"""Numeric symplectic-eigenvalue oracle for the Holevo bound.

Builds the entanglement-based covariance matrices explicitly (Alice-Bob EPR
state through the channel, trusted detector modelled as a beam splitter fed by
an EPR pair) and diagonalises ``i Omega gamma``. Independent of the closed
forms in :mod:`qkdvoa.security`; used to cross-check them.
"""
import numpy as np

_Z = np.diag([1.0, -1.0])
_I = np.eye(2)
_OMEGA1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), _OMEGA1)


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Sorted (descending) symplectic spectrum of a 2n x 2n covariance matrix."""
    n = gamma.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ gamma))
    ev = np.sort(ev)[::-1]
    return 0.5 * (ev[0::2] + ev[1::2])


def epr_block(v: float, c: float) -> np.ndarray:
    return np.block([[v * _I, c * _Z], [c * _Z, v * _I]])


def alice_bob_covariance(V, T, chi_line) -> np.ndarray:
    return epr_block(V, np.sqrt(T * (V * V - 1.0))) + np.block(
        [[np.zeros((2, 2)), np.zeros((2, 2))], [np.zeros((2, 2)), (T * (V + chi_line) - V) * _I]]
    )


def _beam_splitter(n_modes, i, j, eta):
    s = np.eye(2 * n_modes)
    a, b = np.sqrt(eta), np.sqrt(1.0 - eta)
    ii, jj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
    s[ii, ii] = a * _I
    s[ii, jj] = b * _I
    s[jj, ii] = -b * _I
    s[jj, jj] = a * _I
    return s


def conditional_on_homodyne_x(gamma: np.ndarray, mode: int) -> np.ndarray:
    """Covariance of the other modes after homodyning the x quadrature of ``mode``."""
    idx = np.arange(gamma.shape[0])
    m = slice(2 * mode, 2 * mode + 2)
    rest = np.setdiff1d(idx, idx[m])
    g_r = gamma[np.ix_(rest, rest)]
    sigma = gamma[np.ix_(rest, idx[m])]
    pinv = np.array([[1.0 / gamma[2 * mode, 2 * mode], 0.0], [0.0, 0.0]])
    return g_r - sigma @ pinv @ sigma.T


def holevo_oracle(VA, T, eps, eta, v_el):
    """(chi_BE, (l1, l2), (l3, l4, l5)) from explicit covariance matrices.

    Requires ``eta < 1`` unless ``v_el == 0`` (the detector EPR variance
    diverges otherwise).
    """
    V = VA + 1.0
    chi_line = (1.0 - T) / T + eps
    g_ab = alice_bob_covariance(V, T, chi_line)
    l12 = symplectic_eigenvalues(g_ab)

    if eta >= 1.0:
        if v_el != 0:
            raise ValueError("oracle needs eta < 1 when electronic noise is present")
        v = 1.0
    else:
        v = 1.0 + v_el / (1.0 - eta)
    # mode order: A, B, F0, G ; F0-G is the detector-noise EPR pair
    gamma = np.zeros((8, 8))
    gamma[:4, :4] = g_ab
    gamma[4:, 4:] = epr_block(v, np.sqrt(v * v - 1.0))
    s = _beam_splitter(4, 1, 2, eta)
    gamma = s @ gamma @ s.T
    cond = conditional_on_homodyne_x(gamma, 1)  # remaining: A, F, G
    l345 = symplectic_eigenvalues(cond)

    def g(lam):
        x = max((lam - 1.0) / 2.0, 0.0)
        return (x + 1.0) * np.log2(x + 1.0) - (x * np.log2(x) if x > 0 else 0.0)

    chi = sum(g(x) for x in l12) - sum(g(x) for x in l345)
    return float(chi), tuple(float(x) for x in l12), tuple(float(x) for x in l345)
