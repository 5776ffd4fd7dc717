"""Norms, weights and diagnostics evaluated on grid fields and time series.

Sobolev norms use ``<xi>^s`` in frequency space, so ``||f||_{H^s}`` is the L^2
norm of H^s f with H = sqrt(1 - Delta).  Time integrals use the rectangle rule
with the solver's dt: a series of K samples has total weight K dt.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from .errors import ConfigurationError, DataError, DomainError, NumericError, UsageError
from .grid import SPACE, Grid3, ScalarField, SpinorField, fft, ifft
from .kleingordon import boosted_bracket


def _space_values(f):
    if isinstance(f, (ScalarField, SpinorField)):
        if f.domain != SPACE:
            raise UsageError("norms are evaluated on space-domain fields")
        return f.grid, f.values
    raise UsageError("expected a ScalarField or SpinorField")


def _pointwise(values):
    # |f| for scalars, |u|_{C^4} for spinors
    a = np.abs(values)
    return np.sqrt(np.sum(a ** 2, axis=0)) if a.ndim == 4 else a


def lp_norm(values, grid: Grid3, r: float) -> float:
    a = _pointwise(values)
    if math.isinf(r):
        return float(a.max())
    return float((np.sum(a ** r) * grid.cell_volume) ** (1.0 / r))


def bessel_potential(values, grid: Grid3, s: float) -> np.ndarray:
    """H^s f = (1 - Delta)^{s/2} f on raw arrays (last three axes)."""
    if s == 0:
        return values
    return ifft(fft(values) * grid.bracket ** s)


def _hs(values, grid, s):
    fh = fft(values)
    w = grid.bracket ** (2 * s)
    return float(np.sqrt(np.sum(np.abs(fh) ** 2 * w) * grid.cell_volume / grid.n ** 3))


def sobolev_norm(f, s: float) -> float:
    """||<xi>^s f_hat||_{L^2}."""
    if s < 0:
        raise ConfigurationError(f"Sobolev order must be nonnegative, got s={s}")
    grid, vals = _space_values(f)
    return _hs(vals, grid, s)


def sobolev_sup(values, grid: Grid3, s: float) -> float:
    """||H^s f||_{L^inf}."""
    return lp_norm(bessel_potential(values, grid, s), grid, math.inf)


def weighted_norm(f, N: float) -> float:
    """||<x>^N f||_{L^2}."""
    grid, vals = _space_values(f)
    return float(np.sqrt(np.sum(_pointwise(vals) ** 2 * grid.japanese_x ** (2 * N)) * grid.cell_volume))


def weighted_sobolev(f, s: float, N: float, sign: int = -1) -> float:
    """||<x>^{sign N} H^s f||_{L^2}; the weight is applied after H^s."""
    if s < 0:
        raise ConfigurationError(f"Sobolev order must be nonnegative, got s={s}")
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    grid, vals = _space_values(f)
    hs = bessel_potential(vals, grid, s)
    w = grid.japanese_x ** (2 * sign * N)
    return float(np.sqrt(np.sum(_pointwise(hs) ** 2 * w) * grid.cell_volume))


def boosted_sobolev_norm(f, s: float, v) -> float:
    """||H_v^s f||_{L^2} with symbol (<xi>^2 - (xi.v)^2)^{s/2}."""
    grid, vals = _space_values(f)
    m = boosted_bracket(v, grid.freqs) ** s
    fh = fft(vals)
    return float(np.sqrt(np.sum(np.abs(fh * m) ** 2) * grid.cell_volume / grid.n ** 3))


def _series(series):
    if isinstance(series, (ScalarField, SpinorField)):
        series = [series]
    items = list(series)
    if not items:
        raise UsageError("empty time series")
    return items


def strichartz_norm(series, p: float, r: float, dt: float) -> float:
    """Discrete L^p_t L^r_x norm; p or r may be inf."""
    items = _series(series)
    for x, name in ((p, "p"), (r, "r")):
        if not (1 <= x <= math.inf):
            raise ConfigurationError(f"{name} must lie in [1, inf], got {x}")
    norms = np.array([lp_norm(*_space_values(f)[::-1], r) for f in items])
    if math.isinf(p):
        return float(norms.max())
    return float((np.sum(norms ** p) * dt) ** (1.0 / p))


def local_smoothing_norm(series, s: float, N: float, dt: float) -> float:
    """||u||_{L^2_T H^s(<x>^{-N})}, rectangle rule in time."""
    items = _series(series)
    return float(np.sqrt(sum(weighted_sobolev(f, s, N, -1) ** 2 for f in items) * dt))


def sup_sobolev(series, s: float) -> float:
    return max(sobolev_norm(f, s) for f in _series(series))


def x_norm(values_series, grid: Grid3, s: float, p: float, dt: float) -> float:
    """sup_t ||.||_{H^s} + ||.||_{L^{p-1}_T L^inf} on a raw (K, ..., n, n, n) array."""
    hs = max(_hs(u, grid, s) for u in values_series)
    sup = np.array([_pointwise(u).max() for u in values_series])
    return float(hs + (np.sum(sup ** (p - 1)) * dt) ** (1.0 / (p - 1)))


def w3_norm(W3_series, grid: Grid3, s: float, dt: float) -> float:
    """||W3||_{L^1_T H^{s,inf}} by the rectangle rule.

    The bound this is compared against is only known for 1 <= s <= 2, so other
    s are refused instead of reported.
    """
    if not 1.0 <= s <= 2.0:
        raise ConfigurationError(f"W3 diagnostic is defined for 1 <= s <= 2, got s = {s}")
    return float(sum(sobolev_sup(w, grid, s) for w in W3_series) * dt)


def smallness_functional(V_series, s: float, N: float, v=(0.0, 0.0, 0.0)) -> float:
    """sup_t ||H_v^s (<x>^{2N} V(t))||_{L^inf}.

    An upper-bound proxy for the operator norm of <x>^N H^s V H^{-s} <x>^N, not
    that norm itself.
    """
    vv = np.asarray(v, dtype=float)
    if np.linalg.norm(vv) > 0.5:
        raise ConfigurationError(f"boost speed |v| = {np.linalg.norm(vv):.4g} exceeds 1/2")
    items = _series(V_series)
    grid = items[0].grid
    weight = grid.japanese_x ** (2 * N)
    m = boosted_bracket(vv, grid.freqs) ** s
    out = 0.0
    for V in items:
        g, vals = _space_values(V)
        if g != grid:
            raise UsageError("potential snapshots on different grids")
        x = vals * weight
        if s != 0:
            x = ifft(fft(x) * m)
        out = max(out, float(np.abs(x).max()))
    return out


def wk1_norm(values, grid: Grid3, k: int) -> float:
    """Integer-order W^{k,1}: sum over |alpha| <= k of ||d^alpha f||_{L^1}."""
    fh = fft(values)
    KX, KY, KZ = grid.freqs
    total = 0.0
    for order in range(int(k) + 1):
        for a in range(order + 1):
            for b in range(order + 1 - a):
                c = order - a - b
                d = ifft(fh * (1j * KX) ** a * (1j * KY) ** b * (1j * KZ) ** c)
                total += np.sum(np.abs(d.real if np.isrealobj(values) else d))
    return float(total * grid.cell_volume)


# -- Hardy ----------------------------------------------------------------------


@lru_cache(maxsize=1)
def _cube_inverse_square() -> float:
    # int over [-1/2, 1/2]^3 of |x|^{-2}: six faces, each seen from the origin
    face, _ = integrate.dblquad(lambda y, x: 0.5 / (x * x + y * y + 0.25),
                                -0.5, 0.5, -0.5, 0.5, epsabs=1e-13, epsrel=1e-13)
    return 6.0 * face


def hardy_quotient(f) -> float:
    """||f/|x|||_{L^2} / ||f||_{H^1}; the origin cell is integrated exactly for 1/r^2."""
    grid, vals = _space_values(f)
    a2 = _pointwise(vals) ** 2
    r = grid.r
    centre = (grid.n // 2,) * 3
    inv = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0) ** 2, 0.0)
    lhs = np.sum(a2 * inv) * grid.cell_volume
    lhs += a2[centre] * _cube_inverse_square() * grid.dx
    return float(np.sqrt(lhs) / _hs(vals, grid, 1.0))


# -- virial multiplier ----------------------------------------------------------


def _radial_check(r, R):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or R < 0:
        raise DomainError("psi_R needs r >= 0 and R >= 0")
    return r, math.sqrt(1.0 + R * R)


def psi_R(r, R: float):
    """Radial multiplier with psi(0) = 0, quadratic inside r <= R, linear growth outside."""
    r, jR = _radial_check(r, R)
    inner = r ** 2 / (2 * jR)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = (R / jR) * (1.5 * r + R * R / (2 * r)) - 1.5 * R * R / jR
    return np.where(r <= R, inner, outer)


def psi_R_prime(r, R: float):
    r, jR = _radial_check(r, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = (R / jR) * (1.5 - 0.5 * R * R / r ** 2)
    return np.where(r <= R, r / jR, outer)


def psi_R_second(r, R: float):
    r, jR = _radial_check(r, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = (R / jR) * R * R / r ** 3
    return np.where(r <= R, 1.0 / jR, outer)


def psi_R_laplacian(r, R: float):
    """psi'' + 2 psi'/r, from the closed forms of each branch."""
    r, jR = _radial_check(r, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = 3 * R / (jR * r)
    return np.where(r <= R, 3.0 / jR, outer)


def psi_R_bilaplacian_jump(R: float) -> float:
    """Weight of the surface delta in Delta^2 psi_R.

    Delta psi is continuous at r = R and harmonic on each side, so Delta^2 psi
    is the jump of its radial derivative times delta(r - R).
    """
    jR = math.sqrt(1 + R * R)
    outer = -3 * R / (jR * R * R)   # d/dr of 3R/(<R> r) at r = R
    inner = 0.0
    return outer - inner


def psi_R_norm2(R: float, r=None) -> float:
    """sup|grad psi| + sup|Delta psi| on a radial sample (default: dense log grid)."""
    if r is None:
        r = np.concatenate([[0.0], np.geomspace(1e-6, 1e8, 20001), [R]])
    return float(np.max(np.abs(psi_R_prime(r, R))) + np.max(np.abs(psi_R_laplacian(r, R))))


def _gradient(values, grid):
    fh = fft(values)
    return [ifft(fh * (1j * K)) for K in grid.freqs]


def laplace_commutator(v, R: float) -> np.ndarray:
    """[-Delta, psi_R] v = (-Delta psi) v - 2 grad psi . grad v."""
    grid, vals = _space_values(v)
    r = grid.r
    lap = psi_R_laplacian(r, R)
    dpsi = psi_R_prime(r, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = [np.where(r > 0, X / np.where(r > 0, r, 1.0), 0.0) for X in grid.coords]
    grads = _gradient(vals, grid)
    dot = sum(dpsi * u * gk for u, gk in zip(unit, grads))
    return -lap * vals - 2 * dot


def _inner(a, b, grid):
    return np.vdot(a, b) * grid.cell_volume


def virial_theta(v, vdot, Vtilde_v, R: float) -> float:
    """2 Re<[-Delta,psi_R]v, dv/dt> + 2 Re<[-Delta,psi_R]v, i Vtilde v>.

    ``Vtilde_v`` is the already-evaluated field Vtilde v.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    if not (v.grid == vdot.grid == Vtilde_v.grid):
        raise UsageError("virial_theta fields live on different grids")
    grid, _ = _space_values(v)
    cv = laplace_commutator(v, R)
    t1 = _inner(cv, _space_values(vdot)[1], grid)
    t2 = _inner(cv, 1j * _space_values(Vtilde_v)[1], grid)
    return float(2 * t1.real + 2 * t2.real)


# -- admissible triples ---------------------------------------------------------

SCHRODINGER = "schrodinger_nonendpoint"
SPECIAL = "special_infinity"
INVALID = "invalid"


@dataclass(frozen=True)
class AdmissibleTriple:
    p: float
    r: float
    s: float
    kind: str
    ptilde: float | None = None

    @property
    def valid(self) -> bool:
        return self.kind != INVALID


def _inv(x):
    return 0.0 if math.isinf(x) else 1.0 / x


def classify_triple(p: float, r: float, s: float, tol: float = 1e-12) -> AdmissibleTriple:
    p, r, s = float(p), float(r), float(s)
    if (2 < p <= math.inf and 2 <= r <= 6
            and abs(2 * _inv(p) + 3 * _inv(r) - 1.5) <= tol
            and abs(s - (0.5 + _inv(p) - _inv(r))) <= tol):
        return AdmissibleTriple(p, r, s, SCHRODINGER)
    if math.isinf(r) and not math.isinf(p):
        pt = p + 1
        if pt > 3 and abs(s - (1.5 - 1.0 / p)) <= tol:
            return AdmissibleTriple(p, r, s, SPECIAL, pt)
    return AdmissibleTriple(p, r, s, INVALID)


# -- decay fits -----------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    stderr: float
    rvalue: float
    samples: int


def decay_fit(times, sup_norms, t_min: float = 5.0, t_max: float | None = None) -> DecayFit:
    """Least-squares slope of log(norm) against log(1 + t) over t in [t_min, t_max]."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(sup_norms, dtype=float)
    if t.shape != y.shape:
        raise DataError("times and norms differ in length")
    keep = t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    if keep.sum() < 8:
        raise DataError(f"decay fit needs >= 8 samples with t >= {t_min}, got {int(keep.sum())}")
    if np.any(y[keep] <= 0) or not np.all(np.isfinite(y[keep])):
        raise DataError("decay fit needs positive finite norms")
    res = stats.linregress(np.log1p(t[keep]), np.log(y[keep]))
    return DecayFit(float(res.slope), float(res.stderr), float(res.rvalue), int(keep.sum()))


# -- reports --------------------------------------------------------------------


@dataclass
class NormReport:
    """Named, parametrised scalar diagnostics."""

    entries: list = field(default_factory=list)

    def add(self, name: str, value: float, **params) -> float:
        value = float(value)
        if not np.isfinite(value) or value < 0:
            raise NumericError(f"report entry {name!r} is {value!r}")
        self.entries.append((name, params, value))
        return value

    def get(self, name: str, **params) -> float:
        for n, p, v in self.entries:
            if n == name and all(p.get(k) == x for k, x in params.items()):
                return v
        raise KeyError(name)

    @staticmethod
    def param_string(params: dict) -> str:
        return ";".join(f"{k}={params[k]}" for k in sorted(params))

    def to_csv(self, path) -> None:
        lines = ["name,param_string,value"]
        for n, p, v in self.entries:
            lines.append(f"{n},{self.param_string(p)},{v!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_json(self, path=None) -> str:
        text = json.dumps([{"name": n, "params": p, "value": v} for n, p, v in self.entries],
                          indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text
