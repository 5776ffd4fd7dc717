"""Klein-Gordon field driven by a moving charge, and its three-part splitting.

The field solves ``W_tt + (1 - Delta) W = chi(x - q(t))``.  In frequency space,
with ``a = <xi>``, ``g(t) = chi_hat e^{-i xi.q(t)}``, ``b = xi.q'(t)`` and
``c = xi.q''(t)``, Duhamel's formula reads

    W_hat(t) = cos(at) w0_hat + sin(at)/a w1_hat + int_0^t sin(a(t-s))/a g(s) ds

and one integration by parts of the source term splits it as W1 + W2 + W3:

    W1_hat = g(t) / (a^2 - b^2)
    W2_hat = cos(at) w0_hat + sin(at)/a w1_hat
             - g(0)/(2a) [e^{iat}/(a + b0) + e^{-iat}/(a - b0)]
    W3_hat = int_0^t g c/(2a) [e^{ia(t-s)}/(a+b)^2 - e^{-ia(t-s)}/(a-b)^2] ds

W1 follows the charge adiabatically, W2 is a free wave and disperses, W3 is
driven by the acceleration only.  All time integrals use the composite
trapezoid rule.

Spectra here are raw (unnormalised) FFTs of grid samples; since every formula
is linear in ``chi_hat`` the normalisation never matters.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigurationError, DomainError, RangeError, UsageError
from .grid import Grid3, ScalarField, fft, ifft

# -- Lorentz boosts ------------------------------------------------------------


def _check_velocity(v, limit=1.0):
    v = np.asarray(v, dtype=float).reshape(3)
    speed = float(np.linalg.norm(v))
    if not speed < limit:
        raise DomainError(f"|v| = {speed:.6g} must be < {limit:g}")
    return v, speed


def _split(v, speed, x):
    # parallel part (v.x / v.v) v and the remainder; x may be (3, ...)
    x = np.asarray(x, dtype=float)
    vv = v.reshape((3,) + (1,) * (x.ndim - 1))
    par = np.sum(vv * x, axis=0) / speed ** 2 * vv
    return par, x - par


def lorentz_map(v, x):
    """L_v x: stretch the component along v by 1/sqrt(1 - |v|^2)."""
    v, speed = _check_velocity(v)
    if speed == 0:
        return np.array(x, dtype=float)
    par, perp = _split(v, speed, x)
    return par / np.sqrt(1.0 - speed ** 2) + perp


def lorentz_map_inverse(v, x):
    v, speed = _check_velocity(v)
    if speed == 0:
        return np.array(x, dtype=float)
    par, perp = _split(v, speed, x)
    return par * np.sqrt(1.0 - speed ** 2) + perp


def boosted_bracket(v, xi):
    """sqrt(<xi>^2 - (xi.v)^2); ``xi`` is a 3-vector or a stacked (3, ...) array."""
    v, _ = _check_velocity(v)
    xi = [np.asarray(c, dtype=float) for c in xi]
    k2 = xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2
    dot = v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]
    return np.sqrt(1.0 + k2 - dot ** 2)


def boosted_yukawa(v, x):
    """Full-space inverse transform of 1/(<xi>^2 - (xi.v)^2)."""
    from .kernels import kernel_Y
    v, speed = _check_velocity(v)
    return kernel_Y(lorentz_map(v, x)) / np.sqrt(1.0 - speed ** 2)


# -- the charge ----------------------------------------------------------------


@dataclass
class ChargeDensity:
    """Nuclear charge profile sampled on a grid.

    ``kind`` is 'gaussian' (A exp(-|x|^2 / 2 sigma^2), ``width`` = sigma) or
    'bump' (A exp(1 - 1/(1 - |x|^2/rho^2)) inside |x| < rho, ``width`` = rho).
    """

    grid: Grid3
    amplitude: float = 0.01
    width: float = 1.0
    kind: str = "gaussian"
    delta: float = 0.5

    def __post_init__(self):
        if self.kind not in ("gaussian", "bump"):
            raise ConfigurationError(f"unknown charge profile {self.kind!r}")
        if self.amplitude < 0:
            raise ConfigurationError("charge amplitude must be nonnegative")
        if self.width <= 0:
            raise ConfigurationError("charge width must be positive")
        self._wk1 = {}

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r ** 2 / (2 * self.width ** 2))
        s = np.clip(r / self.width, 0, 1)
        inside = s < 1
        den = np.where(inside, 1.0 - s ** 2, 1.0)
        return np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / den), 0.0)

    @cached_property
    def values(self) -> np.ndarray:
        return self.profile(self.grid.r)

    @cached_property
    def hat(self) -> np.ndarray:
        return fft(self.values)

    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.values.copy())

    def scaled(self, factor: float) -> "ChargeDensity":
        return ChargeDensity(self.grid, self.amplitude * factor, self.width, self.kind, self.delta)

    def w_k1_norm(self, k: int) -> float:
        """Integer-order W^{k,1} norm: sum over |alpha| <= k of ||d^alpha chi||_{L^1}."""
        k = int(k)
        if k < 0:
            raise ConfigurationError("k must be nonnegative")
        if k not in self._wk1:
            from .norms import wk1_norm
            self._wk1[k] = wk1_norm(self.values, self.grid, k)
        return self._wk1[k]

    def weighted_sup(self, delta: float | None = None) -> float:
        """||<x>^{3+delta} chi||_inf."""
        d = self.delta if delta is None else delta
        return float(np.max(self.grid.japanese_x ** (3 + d) * np.abs(self.values)))

    def weighted_grad_sup(self, delta: float | None = None) -> float:
        """||<x>^{3+delta} grad chi||_inf (spectral gradient)."""
        d = self.delta if delta is None else delta
        g2 = np.zeros(self.grid.shape)
        for K in self.grid.freqs:
            g2 += ifft(self.hat * (1j * K)).real ** 2
        return float(np.max(self.grid.japanese_x ** (3 + d) * np.sqrt(g2)))

    def norms(self, s: float) -> dict:
        """Every norm the smallness hypotheses are phrased in, keyed by name."""
        out = {f"W{k},1": self.w_k1_norm(k) for k in range(int(np.ceil(s)) + 4)}
        out[f"<x>^{3 + self.delta:g} chi, Linf"] = self.weighted_sup()
        out[f"<x>^{3 + self.delta:g} grad chi, Linf"] = self.weighted_grad_sup()
        return out


# -- nucleus path --------------------------------------------------------------


class NucleusPath:
    """Sampled nucleus trajectory on uniform times 0 = t_0 < ... < t_K = T.

    ``func``, when given, returns exact ``(q, qdot, qddot)`` at any time and is
    used by :meth:`at`; otherwise values between nodes come from cubic Hermite
    interpolation.
    """

    def __init__(self, times, q, qdot, qddot, M: float = 1.0, func=None):
        self.times = np.asarray(times, dtype=float)
        self.q = np.asarray(q, dtype=float).reshape(-1, 3)
        self.qdot = np.asarray(qdot, dtype=float).reshape(-1, 3)
        self.qddot = np.asarray(qddot, dtype=float).reshape(-1, 3)
        self.M = float(M)
        self._func = func
        K = len(self.times)
        if K < 2:
            raise ConfigurationError("a path needs at least two samples")
        if not (len(self.q) == len(self.qdot) == len(self.qddot) == K):
            raise ConfigurationError("q, qdot, qddot must have one row per time")
        if abs(self.times[0]) > 1e-14:
            raise ConfigurationError("path must start at t = 0")
        steps = np.diff(self.times)
        if steps.min() <= 0 or np.ptp(steps) > 1e-9 * max(1.0, self.times[-1]):
            raise ConfigurationError("path times must be uniform and increasing")
        if self.M < 1:
            raise ConfigurationError(f"nucleus mass must be >= 1, got {self.M}")
        speed = self.sup_speed
        if not speed < 1:
            raise DomainError(f"path is not subluminal: sup|qdot| = {speed:.6g}")

    # constructors

    @classmethod
    def from_function(cls, func, T: float, dt: float, M: float = 1.0):
        """``func(t) -> (q, qdot, qddot)`` with 3-vector values."""
        times = uniform_times(T, dt)
        rows = [tuple(np.asarray(c, dtype=float) for c in func(t)) for t in times]
        q, qd, qdd = (np.array([r[i] for r in rows]) for i in range(3))
        return cls(times, q, qd, qdd, M=M, func=func)

    @classmethod
    def static(cls, T, dt, M=1.0, position=(0.0, 0.0, 0.0)):
        p = np.asarray(position, dtype=float)
        z = np.zeros(3)
        return cls.from_function(lambda t: (p, z, z), T, dt, M)

    @classmethod
    def inertial(cls, T, dt, v0, M=1.0):
        v = np.asarray(v0, dtype=float)
        z = np.zeros(3)
        return cls.from_function(lambda t: (v * t, v, z), T, dt, M)

    @classmethod
    def oscillating(cls, T, dt, amplitude=0.15, omega=1.0, direction=(1.0, 0.0, 0.0), M=1.0):
        """q = a (1 - cos wt) e: starts at rest at the origin."""
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
        a, w = float(amplitude), float(omega)

        def f(t):
            return (a * (1 - np.cos(w * t)) * e, a * w * np.sin(w * t) * e,
                    a * w * w * np.cos(w * t) * e)
        return cls.from_function(f, T, dt, M)

    @classmethod
    def from_acceleration(cls, times, qddot, v0, M=1.0):
        """Integrate q'' twice (trapezoid) from q(0) = 0, q'(0) = v0."""
        times = np.asarray(times, dtype=float)
        qddot = np.asarray(qddot, dtype=float).reshape(-1, 3)
        qdot = np.asarray(v0, dtype=float) + cumulative_trapezoid(qddot, times)
        q = cumulative_trapezoid(qdot, times)
        return cls(times, q, qdot, qddot, M=M)

    # basic quantities

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def v0(self) -> np.ndarray:
        return self.qdot[0].copy()

    @property
    def sup_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.qdot, axis=1)))

    @property
    def sup_displacement(self) -> float:
        return float(np.max(np.linalg.norm(self.q, axis=1)))

    @property
    def accel_l1(self) -> float:
        """||q''||_{L^1_T} by the trapezoid rule."""
        return float(_trapz(np.linalg.norm(self.qddot, axis=1), self.times))

    @property
    def admissible(self) -> bool:
        return self.accel_l1 <= 0.5 and self.sup_speed <= 0.5

    @cached_property
    def _splines(self):
        return (CubicHermiteSpline(self.times, self.q, self.qdot, axis=0),
                CubicHermiteSpline(self.times, self.qdot, self.qddot, axis=0))

    def at(self, t: float):
        """(q, qdot, qddot) at time t."""
        if t < -1e-12 or t > self.T * (1 + 1e-12) + 1e-12:
            raise RangeError(f"t = {t} outside the path horizon [0, {self.T}]")
        t = min(max(t, 0.0), self.T)
        if self._func is not None:
            return tuple(np.asarray(c, dtype=float) for c in self._func(t))
        j = int(round(t / self.dt))
        if abs(t - self.times[j]) < 1e-12 * max(1.0, self.T):
            return self.q[j].copy(), self.qdot[j].copy(), self.qddot[j].copy()
        sq, sv = self._splines
        acc = np.array([np.interp(t, self.times, self.qddot[:, i]) for i in range(3)])
        return sq(t), sv(t), acc

    def distance(self, other: "NucleusPath") -> float:
        """Z-norm distance ||q1 - q2||_inf + ||q1'' - q2''||_{L^1_T}."""
        if len(other.times) != len(self.times):
            raise UsageError("paths sampled on different time grids")
        dq = np.max(np.linalg.norm(self.q - other.q, axis=1))
        da = _trapz(np.linalg.norm(self.qddot - other.qddot, axis=1), self.times)
        return float(dq + da)

    # CSV

    HEADER = ["t", "qx", "qy", "qz", "vx", "vy", "vz", "ax", "ay", "az"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for j, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in
                                               (*self.q[j], *self.qdot[j], *self.qddot[j])])

    @classmethod
    def from_csv(cls, path, M: float = 1.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != cls.HEADER:
            raise ConfigurationError(f"{path}: header must be {','.join(cls.HEADER)}")
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        return cls(data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10], M=M)


def _trapz(y, x):
    return np.trapezoid(y, x, axis=0) if hasattr(np, "trapezoid") else np.trapz(y, x, axis=0)


def cumulative_trapezoid(y, x):
    y = np.asarray(y, dtype=float)
    h = np.diff(x)[:, None] if y.ndim == 2 else np.diff(x)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]), axis=0)
    return out


def uniform_times(T: float, dt: float) -> np.ndarray:
    steps = quadrature_steps(T, dt)
    return np.arange(steps + 1) * (T / steps)


def quadrature_steps(t: float, dt: float) -> int:
    """Number of dt-steps in t; dt must divide t."""
    if dt <= 0 or t < 0:
        raise ConfigurationError("need dt > 0 and t >= 0")
    steps = int(round(t / dt))
    if steps == 0 and t > 0 or abs(steps * dt - t) > 1e-9 * max(1.0, t):
        raise ConfigurationError(f"dt = {dt} does not divide t = {t}")
    return steps


# -- KG state and free flow --------------------------------------------------


@dataclass
class KGState:
    w: ScalarField
    wdot: ScalarField

    @classmethod
    def zero(cls, grid: Grid3) -> "KGState":
        return cls(ScalarField(grid, np.zeros(grid.shape)), ScalarField(grid, np.zeros(grid.shape)))

    @property
    def grid(self) -> Grid3:
        return self.w.grid

    def energy(self) -> float:
        """(||wdot||^2 + ||H w||^2) / 2."""
        g = self.grid
        wh = fft(self.w.values)
        hw2 = np.sum(np.abs(wh) ** 2 * (1.0 + g.k2)) / g.n ** 3
        wd2 = np.sum(np.abs(self.wdot.values) ** 2)
        return float(0.5 * (hw2 + wd2) * g.cell_volume)


def kg_free_step(state: KGState, t: float) -> KGState:
    """Exact homogeneous Klein-Gordon flow over time t."""
    g = state.grid
    a = g.bracket
    w0 = fft(state.w.values)
    w1 = fft(state.wdot.values)
    c, s = np.cos(a * t), np.sin(a * t)
    w = ifft(c * w0 + s / a * w1).real
    wd = ifft(-a * s * w0 + c * w1).real
    return KGState(ScalarField(g, w), ScalarField(g, wd))


def _homogeneous_hat(state: KGState | None, grid: Grid3, t: float):
    if state is None:
        return 0.0
    a = grid.bracket
    return np.cos(a * t) * fft(state.w.values) + np.sin(a * t) / a * fft(state.wdot.values)


def _phase(grid: Grid3, q) -> np.ndarray:
    KX, KY, KZ = grid.freqs
    return np.exp(-1j * (KX * q[0] + KY * q[1] + KZ * q[2]))


def _dot(grid: Grid3, v):
    KX, KY, KZ = grid.freqs
    return KX * v[0] + KY * v[1] + KZ * v[2]


def _check_path(path: NucleusPath, t: float):
    if t > path.T * (1 + 1e-12) + 1e-12:
        raise RangeError(f"t = {t} beyond the path horizon T = {path.T}")


def _trapezoid_nodes(t: float, dt_quad: float):
    steps = quadrature_steps(t, dt_quad)
    if steps == 0:
        return np.zeros(1), np.zeros(1)
    tau = np.arange(steps + 1) * (t / steps)
    w = np.full(steps + 1, t / steps)
    w[0] = w[-1] = 0.5 * t / steps
    return tau, w


def _real(grid, spectrum) -> ScalarField:
    return ScalarField(grid, ifft(spectrum).real)


# -- direct Duhamel ------------------------------------------------------------


def duhamel_direct_hat(chi: ChargeDensity, path: NucleusPath, state0: KGState | None,
                       t: float, dt_quad: float) -> np.ndarray:
    _check_path(path, t)
    g = chi.grid
    a = g.bracket
    acc = np.zeros(g.shape, dtype=complex)
    for tau, w in zip(*_trapezoid_nodes(t, dt_quad)):
        q, _, _ = path.at(tau)
        acc += (w * np.sin(a * (t - tau)) / a) * _phase(g, q)
    return _homogeneous_hat(state0, g, t) + chi.hat * acc


def kg_duhamel_direct(chi: ChargeDensity, path: NucleusPath, state0: KGState | None,
                      t: float, dt_quad: float) -> ScalarField:
    """W(t) from Duhamel's formula, source integral by the trapezoid rule."""
    return _real(chi.grid, duhamel_direct_hat(chi, path, state0, t, dt_quad))


# -- the three pieces ----------------------------------------------------------


def W1_hat(chi: ChargeDensity, q, qdot) -> np.ndarray:
    _check_velocity(qdot)
    g = chi.grid
    b = _dot(g, qdot)
    return chi.hat * _phase(g, q) / (g.bracket ** 2 - b ** 2)


def W2_hat(chi: ChargeDensity, state0: KGState | None, t: float,
           q0=(0.0, 0.0, 0.0), v0=(0.0, 0.0, 0.0)) -> np.ndarray:
    g = chi.grid
    _check_velocity(v0)
    a = g.bracket
    b0 = _dot(g, v0)
    g0 = chi.hat * _phase(g, q0)
    boundary = g0 / (2 * a) * (np.exp(1j * a * t) / (a + b0) + np.exp(-1j * a * t) / (a - b0))
    return _homogeneous_hat(state0, g, t) - boundary


def W3_hat(chi: ChargeDensity, path: NucleusPath, t: float, dt_quad: float) -> np.ndarray:
    _check_path(path, t)
    if path.sup_speed >= 1:
        raise DomainError("superluminal path")
    g = chi.grid
    a = g.bracket
    acc = np.zeros(g.shape, dtype=complex)
    for tau, w in zip(*_trapezoid_nodes(t, dt_quad)):
        q, qd, qdd = path.at(tau)
        c = _dot(g, qdd)
        if not np.any(qdd):
            continue
        b = _dot(g, qd)
        e = np.exp(1j * a * (t - tau))
        acc += (w * c * _phase(g, q)) * (e / (a + b) ** 2 - np.conj(e) / (a - b) ** 2)
    return chi.hat * acc / (2 * a)


def build_W1(chi: ChargeDensity, path: NucleusPath, t: float) -> ScalarField:
    """Adiabatic part chi_1(qdot, x - q(t))."""
    q, qd, _ = path.at(t)
    return _real(chi.grid, W1_hat(chi, q, qd))


def build_W2(chi: ChargeDensity, state0: KGState | None, t: float,
             q0=(0.0, 0.0, 0.0), v0=(0.0, 0.0, 0.0)) -> ScalarField:
    """Free-wave part; depends on the path only through q(0), q'(0)."""
    return _real(chi.grid, W2_hat(chi, state0, t, q0, v0))


def build_W3(chi: ChargeDensity, path: NucleusPath, t: float, dt_quad: float) -> ScalarField:
    """Acceleration-driven part; vanishes for inertial paths."""
    return _real(chi.grid, W3_hat(chi, path, t, dt_quad))


def decomposition_hat(chi, path, state0, t, dt_quad):
    q0, v0, _ = path.at(0.0)
    return (W1_hat(chi, *path.at(t)[:2]) + W2_hat(chi, state0, t, q0, v0)
            + W3_hat(chi, path, t, dt_quad))


def build_W(chi, path, state0, t, dt_quad) -> ScalarField:
    """W1 + W2 + W3."""
    return _real(chi.grid, decomposition_hat(chi, path, state0, t, dt_quad))


# -- time series for the solver ---------------------------------------------


@dataclass
class WSeries:
    """W on every node of a uniform time grid, plus the pieces when split."""

    times: np.ndarray
    values: np.ndarray                      # (K+1, n, n, n) real
    method: str
    parts: dict = field(default_factory=dict)


def build_W_series(chi: ChargeDensity, path: NucleusPath, state0: KGState | None,
                   times, method: str = "decomposition", substeps: int = 1,
                   keep_parts: bool = False) -> WSeries:
    """W(t_j) for all j in one forward pass.

    Both methods carry running integrals A(t) = int_0^t e^{-/+ia s} (...) ds
    through the trapezoid rule on a grid refined ``substeps`` times.
    """
    if method not in ("decomposition", "direct"):
        raise ConfigurationError(f"unknown W method {method!r}")
    times = np.asarray(times, dtype=float)
    _check_path(path, times[-1])
    g = chi.grid
    a = g.bracket
    K = len(times) - 1
    h = (times[1] - times[0]) / substeps if K else 0.0
    out = np.empty((K + 1,) + g.shape)
    parts = {k: np.empty((K + 1,) + g.shape) for k in ("W1", "W2", "W3")} if keep_parts else {}
    q0, v0, _ = path.at(0.0)
    Ap = np.zeros(g.shape, dtype=complex)
    Am = np.zeros(g.shape, dtype=complex)

    def integrand(tau):
        q, qd, qdd = path.at(tau)
        ph = _phase(g, q)
        if method == "direct":
            return np.exp(-1j * a * tau) * ph, np.exp(1j * a * tau) * ph
        c = _dot(g, qdd)
        b = _dot(g, qd)
        return (np.exp(-1j * a * tau) * c * ph / (a + b) ** 2,
                np.exp(1j * a * tau) * c * ph / (a - b) ** 2)

    prev = integrand(0.0)
    for j in range(K + 1):
        t = times[j]
        if j:
            for m in range(1, substeps + 1):
                cur = integrand(times[j - 1] + m * h)
                Ap += 0.5 * h * (prev[0] + cur[0])
                Am += 0.5 * h * (prev[1] + cur[1])
                prev = cur
        e = np.exp(1j * a * t)
        if method == "direct":
            src = chi.hat * (e * Ap - np.conj(e) * Am) / (2j * a)
            out[j] = ifft(_homogeneous_hat(state0, g, t) + src).real
        else:
            q, qd, _ = path.at(t)
            w1 = W1_hat(chi, q, qd)
            w2 = W2_hat(chi, state0, t, q0, v0)
            w3 = chi.hat * (e * Ap - np.conj(e) * Am) / (2 * a)
            out[j] = ifft(w1 + w2 + w3).real
            if keep_parts:
                parts["W1"][j] = ifft(w1).real
                parts["W2"][j] = ifft(w2).real
                parts["W3"][j] = ifft(w3).real
    return WSeries(times, out, method, parts)
