"""Closed-form kernels of the Klein-Gordon resolvent and their lattice versions.

With the transform convention ``f(x) = (2 pi)^{-3} \\int f_hat(xi) e^{i x.xi} dxi``
the three kernels are

    1/<xi>^2  ->  Y(x) = e^{-|x|} / (4 pi |x|)
    1/<xi>^4  ->  Z(x) / (8 pi),   Z(x) = e^{-|x|}
    1/<xi>    ->  K1(|x|) / (2 pi^2 |x|)

:func:`lattice_kernel` evaluates the inverse transform of a symbol sampled on
the grid without the spectral cut-off error of a plain inverse FFT: the symbol
is summed over aliased copies ``xi + 2K j`` (so the inverse DFT samples the
full-space kernel) and the truncation in ``|j| <= J`` is removed by Richardson
extrapolation in 1/J.
"""
from __future__ import annotations

import numpy as np
from scipy.special import k1

from .errors import DomainError
from .grid import Grid3

YUKAWA_NORM = 1.0 / (4.0 * np.pi)
Z_NORM = 1.0 / (8.0 * np.pi)


def _radius(x):
    x = np.asarray(x, dtype=float)
    if x.ndim and x.shape[0] == 3:
        return np.sqrt(np.sum(x ** 2, axis=0))
    return np.abs(x)


def kernel_Y(x):
    """Yukawa kernel; ``x`` is a radius array or a stacked (3, ...) position."""
    r = _radius(x)
    if np.any(r == 0):
        raise DomainError("kernel_Y is singular at x = 0")
    return np.exp(-r) / (4.0 * np.pi * r)


def kernel_Z(x):
    return np.exp(-_radius(x))


def kernel_K1(x):
    """K1(|x|)/|x|, the kernel shape attached to 1/<xi>.

    K1 comes from scipy (Chebyshev expansions on [0, 2] and (2, inf)).
    """
    r = _radius(x)
    if np.any(r == 0):
        raise DomainError("kernel_K1 is singular at x = 0")
    return k1(r) / r


# -- lattice evaluation --------------------------------------------------------

def lattice_kernel(grid: Grid3, symbol, folds=(2, 3, 4)) -> np.ndarray:
    """Full-space inverse transform of ``symbol(KX, KY, KZ)`` sampled on the grid.

    Returns a real array in box-centred layout (origin at index n/2).  The
    aliased sums for each J in ``folds`` are combined by polynomial
    extrapolation to J = infinity.
    """
    period = 2.0 * np.pi / grid.dx
    KX, KY, KZ = grid.freqs
    sums = {}
    acc = np.zeros(grid.shape)
    done = -1
    for J in sorted(folds):
        # add the shell done < max|j| <= J
        for a in range(-J, J + 1):
            for b in range(-J, J + 1):
                for c in range(-J, J + 1):
                    if max(abs(a), abs(b), abs(c)) <= done:
                        continue
                    acc += symbol(KX + a * period, KY + b * period, KZ + c * period)
        done = J
        sums[J] = acc.copy()
    if len(sums) == 1:
        P = acc
    else:
        J = np.array(sorted(folds), dtype=float)
        weights = np.linalg.inv(np.vander(1.0 / J, len(J), increasing=True))[0]
        P = sum(w * sums[j] for w, j in zip(weights, sorted(folds)))
    k = np.fft.ifftn(P).real / grid.cell_volume
    return np.fft.fftshift(k)


def radial_inverse_transform(m, r, tail: float = 0.0):
    """Inverse transform of a radial symbol m(|xi|) at radius r > 0.

    Uses f(r) = (2 pi^2 r)^{-1} int_0^inf k m(k) sin(kr) dk.  When k m(k) tends
    to a constant ``tail`` the constant part is integrated in closed form
    (int sin(kr) dk = 1/r in the Abel sense) and only the remainder is passed
    to the Fourier-weighted quadrature.
    """
    from scipy import integrate
    r = float(r)
    if r <= 0:
        raise DomainError("radial transform needs r > 0")
    val, _ = integrate.quad(lambda k: k * m(k) - tail, 0, np.inf, weight="sin", wvar=r,
                            limlst=200)
    return (tail / r + val) / (2 * np.pi ** 2 * r)
