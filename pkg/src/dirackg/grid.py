"""Periodic 3D grid, spectral transforms and Fourier multipliers.

Coordinates are box-centred, ``x_j = (j - n/2) dx`` so that index ``n/2``
is the origin.  Frequencies are stored in FFT order (``numpy.fft.fftfreq``),
which keeps the Nyquist mode at ``-(n/2) dk``.

Two transform layers exist:

* :func:`fft` / :func:`ifft` act on raw arrays over the last three axes with
  numpy's default normalisation.  Multipliers only need these.
* :func:`transform` acts on :class:`ScalarField` / :class:`SpinorField` and
  approximates the unitary continuum transform
  ``(2 pi)^{-3/2} \\int f(x) e^{-i x.xi} dx`` so that Parseval reads
  ``sum |f|^2 dx^3 == sum |f_hat|^2 dk^3`` without constants.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, NumericError, UsageError

_WORKERS = 1


def set_threads(n: int) -> None:
    """Number of FFT worker threads used by every transform."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def fft(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, axes=(-3, -2, -1), workers=_WORKERS)


def ifft(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, axes=(-3, -2, -1), workers=_WORKERS)


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` points per axis on a box of side ``L``."""

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 4:
            raise ConfigurationError(f"n must be an integer >= 4, got {self.n!r}")
        if self.n % 2:
            raise ConfigurationError(f"n must be even, got {self.n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ConfigurationError(f"box length L must be positive, got {self.L!r}")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def x1d(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    @cached_property
    def k1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n) * self.dk

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sparse (broadcastable) coordinate arrays X, Y, Z."""
        return tuple(np.meshgrid(self.x1d, self.x1d, self.x1d, indexing="ij", sparse=True))

    @cached_property
    def freqs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sparse frequency arrays in FFT order."""
        return tuple(np.meshgrid(self.k1d, self.k1d, self.k1d, indexing="ij", sparse=True))

    @cached_property
    def r(self) -> np.ndarray:
        X, Y, Z = self.coords
        return np.sqrt(X ** 2 + Y ** 2 + Z ** 2)

    @cached_property
    def japanese_x(self) -> np.ndarray:
        """<x> = sqrt(1 + |x|^2) on the grid."""
        return np.sqrt(1.0 + self.r ** 2)

    @cached_property
    def k2(self) -> np.ndarray:
        KX, KY, KZ = self.freqs
        return KX ** 2 + KY ** 2 + KZ ** 2

    @cached_property
    def bracket(self) -> np.ndarray:
        """<xi> = sqrt(1 + |xi|^2) on the frequency lattice."""
        return np.sqrt(1.0 + self.k2)

    @cached_property
    def _phase(self) -> np.ndarray:
        # e^{i k L/2} per axis; k L / 2 = pi * m so the factor is (-1)^m
        m = np.rint(self.k1d / self.dk).astype(int)
        s = np.where(m % 2 == 0, 1.0, -1.0)
        return s[:, None, None] * s[None, :, None] * s[None, None, :]

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(X, Y, Z)`` on the grid (full array)."""
        X, Y, Z = self.coords
        return np.broadcast_to(func(X, Y, Z), self.shape).copy()

    def nyquist_mask(self) -> np.ndarray:
        """True on lattice points where any component sits on the Nyquist plane."""
        nyq = np.zeros(self.n, dtype=bool)
        nyq[self.n // 2] = True
        return nyq[:, None, None] | nyq[None, :, None] | nyq[None, None, :]


def make_grid(n: int, L: float) -> Grid3:
    return Grid3(int(n) if isinstance(n, (int, np.integer)) else n, float(L))


SPACE = "space"
FREQUENCY = "frequency"


def _check_domain(domain):
    if domain not in (SPACE, FREQUENCY):
        raise UsageError(f"domain must be {SPACE!r} or {FREQUENCY!r}, got {domain!r}")


@dataclass
class ScalarField:
    grid: Grid3
    values: np.ndarray
    domain: str = SPACE

    def __post_init__(self):
        _check_domain(self.domain)
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise UsageError(f"scalar field shape {self.values.shape} != grid {self.grid.shape}")

    def norm(self) -> float:
        w = self.grid.cell_volume if self.domain == SPACE else self.grid.dk ** 3
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.domain)


@dataclass
class SpinorField:
    grid: Grid3
    values: np.ndarray
    domain: str = SPACE

    def __post_init__(self):
        _check_domain(self.domain)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (4,) + self.grid.shape:
            raise UsageError(
                f"spinor field shape {self.values.shape} != (4,) + {self.grid.shape}")

    def norm(self) -> float:
        w = self.grid.cell_volume if self.domain == SPACE else self.grid.dk ** 3
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def density(self) -> np.ndarray:
        """|u(x)|^2_{C^4}."""
        if self.domain != SPACE:
            raise UsageError("density needs a space-domain field")
        return np.sum(np.abs(self.values) ** 2, axis=0)

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.values.copy(), self.domain)


def transform(f, direction: str):
    """Unitary-normalised transform; ``direction`` is 'forward' or 'inverse'."""
    g = f.grid
    scale = (g.dx / np.sqrt(2.0 * np.pi)) ** 3
    if direction == "forward":
        if f.domain != SPACE:
            raise UsageError("forward transform needs a space-domain field")
        out = fft(f.values) * (scale * g._phase)
        return type(f)(g, out, FREQUENCY)
    if direction == "inverse":
        if f.domain != FREQUENCY:
            raise UsageError("inverse transform needs a frequency-domain field")
        out = ifft(f.values * (g._phase / scale))
        return type(f)(g, out, SPACE)
    raise UsageError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _evaluate_multiplier(grid: Grid3, m):
    if callable(m):
        KX, KY, KZ = grid.freqs
        vals = np.asarray(m(KX, KY, KZ))
    else:
        vals = np.asarray(m)
    if not np.isfinite(vals).all():
        full = np.broadcast_to(vals, np.broadcast_shapes(vals.shape, grid.shape))
        idx = np.argwhere(~np.isfinite(full))[0]
        spatial = idx[-3:]
        xi = tuple(float(grid.k1d[i]) for i in spatial)
        raise NumericError(f"multiplier is not finite at xi = {xi}")
    return vals


def apply_multiplier(f, m):
    """Pointwise multiplication by ``m(xi)`` in frequency space.

    ``m`` is a callable ``m(KX, KY, KZ)`` (or a precomputed array) returning a
    scalar array broadcastable to the grid, or a ``(4, 4, n, n, n)`` matrix
    symbol for spinors.
    """
    if isinstance(f, (ScalarField, SpinorField)):
        if f.domain != SPACE:
            raise UsageError("apply_multiplier expects a space-domain field")
        out = _apply(f.grid, f.values, m)
        return type(f)(f.grid, out, SPACE)
    raise UsageError("apply_multiplier needs a ScalarField or SpinorField")


def _apply(grid, values, m):
    vals = _evaluate_multiplier(grid, m)
    fh = fft(values)
    if vals.ndim >= 5 and vals.shape[:2] == (4, 4):
        if fh.shape[0] != 4:
            raise UsageError("matrix multiplier needs a spinor field")
        fh = np.einsum("ab...,b...->a...", vals, fh)
    else:
        fh = fh * vals
    return ifft(fh)


def real_residue(spectrum: np.ndarray, grid: Grid3) -> float:
    """Relative size of the non-Hermitian part of a spectrum.

    Nyquist planes are excluded: there the lattice has no partner mode and a
    real field is represented cosine-only.
    """
    flipped = np.conj(np.roll(np.flip(spectrum, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1)))
    mask = ~grid.nyquist_mask()
    num = np.linalg.norm((spectrum - flipped)[..., mask])
    den = np.linalg.norm(spectrum[..., mask])
    return float(num / den) if den > 0 else 0.0


def boundary_mass(values: np.ndarray, grid: Grid3, width: int = 1) -> float:
    """max |f| on the outer ``width`` layers of the box relative to max |f|."""
    a = np.abs(values)
    if a.ndim == 4:
        a = np.sqrt(np.sum(a ** 2, axis=0))
    peak = a.max()
    if peak == 0:
        return 0.0
    inner = np.zeros(grid.shape, dtype=bool)
    s = slice(width, grid.n - width)
    inner[s, s, s] = True
    return float(a[~inner].max() / peak)


# -- field dumps -------------------------------------------------------------

_MAGIC = b"DKGA"
_VERSION = 1
_HEADER = struct.Struct("<4sIIdB")


def dump_field(f, path) -> None:
    """Write a field in the little-endian DKGA dump format."""
    if f.domain != SPACE:
        raise UsageError("only space-domain fields are dumped")
    kind = 1 if isinstance(f, SpinorField) else 0
    vals = np.asarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, f.grid.n, float(f.grid.L), kind))
        if kind:
            for c in range(4):
                fh.write(np.ravel(vals[c], order="F").tobytes())
        else:
            fh.write(np.ravel(vals, order="F").tobytes())


def load_field(path):
    data = Path(path).read_bytes()
    magic, version, n, L, kind = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise UsageError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise UsageError(f"{path}: unsupported version {version}")
    grid = Grid3(int(n), float(L))
    raw = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    ncomp = 4 if kind == 1 else 1
    if raw.size != ncomp * n ** 3:
        raise UsageError(f"{path}: payload has {raw.size} values, expected {ncomp * n ** 3}")
    if kind == 1:
        vals = np.stack([raw[c * n ** 3:(c + 1) * n ** 3].reshape(grid.shape, order="F")
                         for c in range(4)])
        return SpinorField(grid, vals.astype(complex))
    return ScalarField(grid, raw.reshape(grid.shape, order="F").astype(complex))
