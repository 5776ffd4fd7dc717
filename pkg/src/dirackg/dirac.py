"""Massive Dirac operator in the standard (Dirac) representation.

D_m = -i alpha . grad + beta m has symbol alpha . xi + beta m, whose square is
(m^2 + |xi|^2) I.  The free propagator e^{itD} is therefore applied exactly
in frequency space as cos(t<xi>) + i sin(t<xi>)/<xi> (alpha . xi + beta m).
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, UsageError
from .grid import SPACE, Grid3, SpinorField, fft, ifft

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

I2 = np.eye(2, dtype=complex)
Z2 = np.zeros((2, 2), dtype=complex)

BETA = np.block([[I2, Z2], [Z2, -I2]])
ALPHA = np.array([np.block([[Z2, s], [s, Z2]]) for s in SIGMA])
BETA_DIAG = np.real(np.diag(BETA))


def check_clifford() -> None:
    """Assert the anticommutation relations entrywise (exact arithmetic)."""
    eye = np.eye(4)
    for j in range(3):
        for k in range(3):
            anti = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            assert np.array_equal(anti, 2 * (j == k) * eye), (j, k)
        assert np.array_equal(ALPHA[j] @ BETA + BETA @ ALPHA[j], np.zeros((4, 4)))
        assert np.array_equal(ALPHA[j], ALPHA[j].conj().T)
    assert np.array_equal(BETA @ BETA, eye)
    assert np.array_equal(BETA, BETA.conj().T)


check_clifford()


def dirac_symbol(xi, m: float = 1.0) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.tensordot(xi, ALPHA, axes=(0, 0)) + m * BETA


def apply_symbol(uh: np.ndarray, grid: Grid3, m: float = 1.0) -> np.ndarray:
    """(alpha . xi + beta m) applied to a spectrum of shape (4, n, n, n).

    Written out blockwise: with u = (a, b) in 2-spinors,
    alpha.xi u = (sigma.xi b, sigma.xi a) and beta u = (a, -b).
    """
    KX, KY, KZ = grid.freqs
    u0, u1, u2, u3 = uh
    kp = KX + 1j * KY
    km = KX - 1j * KY
    out = np.empty_like(uh)
    out[0] = KZ * u2 + km * u3 + m * u0
    out[1] = kp * u2 - KZ * u3 + m * u1
    out[2] = KZ * u0 + km * u1 - m * u2
    out[3] = kp * u0 - KZ * u1 - m * u3
    return out


def propagate_hat(uh: np.ndarray, grid: Grid3, t: float, m: float = 1.0) -> np.ndarray:
    """e^{itD} on a spectrum; ``t`` may be negative."""
    if t == 0:
        return uh.copy()
    w = np.sqrt(m * m + grid.k2)
    c = np.cos(t * w)
    s = np.sin(t * w) / w  # w >= m > 0, no small denominators
    return c * uh + 1j * s * apply_symbol(uh, grid, m)


def free_step(u: SpinorField, t: float, m: float = 1.0) -> SpinorField:
    """Exact free Dirac evolution e^{itD} u."""
    if u.domain != SPACE:
        raise UsageError("free_step expects a space-domain spinor")
    out = ifft(propagate_hat(fft(u.values), u.grid, t, m))
    return SpinorField(u.grid, out)


def beta_form(values: np.ndarray) -> np.ndarray:
    """<u, beta u>_{C^4} = |u1|^2 + |u2|^2 - |u3|^2 - |u4|^2 (real)."""
    a = np.abs(values) ** 2
    return a[0] + a[1] - a[2] - a[3]


def nonlinearity_values(values: np.ndarray, p: float) -> np.ndarray:
    if p <= 3:
        raise ConfigurationError(f"nonlinearity exponent must satisfy p > 3, got p={p}")
    amp = np.abs(beta_form(values)) ** ((p - 1) / 2)
    return amp * (BETA_DIAG[:, None, None, None] * values)


def covariant_nonlinearity(u: SpinorField, p: float) -> SpinorField:
    """|<u, beta u>|^{(p-1)/2} beta u, pointwise."""
    if u.domain != SPACE:
        raise UsageError("covariant_nonlinearity expects a space-domain spinor")
    return SpinorField(u.grid, nonlinearity_values(u.values, p))


def gaussian_spinor(grid: Grid3, amplitude=1.0, width=1.0, center=(0.0, 0.0, 0.0),
                    spin=(1, 0, 0, 0), momentum=(0.0, 0.0, 0.0)) -> SpinorField:
    """A * exp(-|x-c|^2 / (2 w^2)) e^{i k.x} times a constant 4-vector."""
    X, Y, Z = grid.coords
    cx, cy, cz = center
    env = amplitude * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2) / (2 * width ** 2))
    kx, ky, kz = momentum
    env = env * np.exp(1j * (kx * X + ky * Y + kz * Z))
    spin = np.asarray(spin, dtype=complex)
    vals = spin[:, None, None, None] * np.broadcast_to(env, grid.shape)[None]
    return SpinorField(grid, vals)
