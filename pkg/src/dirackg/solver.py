"""Fixed-point solvers for the Dirac equation with a Klein-Gordon potential.

System 1 fixes the nucleus path q(t) and solves

    u(t) = S0(t) u0 + i int_0^t S0(t - s) (W u + N(u))(s) ds,   S0(t) = e^{itD}

by Picard iteration on the whole time grid.  Each sweep evaluates the
integrand on every node, pulls it back to t = 0 with S0(-s) and accumulates a
cumulative trapezoid sum in frequency space.  Distances between sweeps are
measured in the X norm sup_t ||.||_{H^s} + ||.||_{L^{p-1}_T L^inf}.

System 2 adds the nucleus, M q'' = F(u, q), and iterates the map
q -> P(q) (solve system 1 along q, integrate the force twice) on the ball
B = {||q''||_{L^1} <= 1/2, ||q||_inf <= 1, q(0) = 0, q'(0) = v0}.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dirac import gaussian_spinor, nonlinearity_values, propagate_hat
from .errors import (BallViolationError, ConfigurationError, DivergenceError, GateError,
                     UsageError)
from .grid import Grid3, ScalarField, SpinorField, fft, ifft
from .kleingordon import (ChargeDensity, KGState, NucleusPath, W1_hat, build_W_series,
                          quadrature_steps, uniform_times)
from .norms import (NormReport, local_smoothing_norm, smallness_functional, sobolev_norm,
                    strichartz_norm, wk1_norm, x_norm, _hs)

log = logging.getLogger(__name__)

# -- configuration ----------------------------------------------------------------


def _vec(n):
    def parse(text):
        if isinstance(text, (list, tuple, np.ndarray)):
            vals = [float(x) for x in text]
        else:
            vals = [float(x) for x in str(text).replace(",", " ").split()]
        if len(vals) != n:
            raise ConfigurationError(f"expected {n} numbers, got {text!r}")
        return tuple(vals)
    return parse


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Every knob of a run.  Config files use the same names as ``key = value``."""

    # grid and time
    n: int = 32
    L: float = 20.0
    T: float = 2.0
    dt: float = 0.02
    # equation
    p: float = 5.0
    s: float = 1.5
    N: float = 1.75
    nonlinear: bool = True
    # nucleus
    M: float = 100.0
    v0: tuple = (0.0, 0.0, 0.0)
    path: str = "static"
    path_amplitude: float = 0.15
    path_omega: float = 1.0
    path_file: str = ""
    eps_soft: float = 0.0              # 0 means "use dx"
    # charge and initial data
    chi_kind: str = "gaussian"
    chi_amplitude: float = 0.01
    chi_width: float = 1.0
    delta: float = 0.5
    w0_amplitude: float = 0.0
    w0_width: float = 1.0
    w1_amplitude: float = 0.0
    w1_width: float = 1.0
    u0_kind: str = "gaussian"
    u0_amplitude: float = 0.01
    u0_width: float = 1.0
    u0_center: tuple = (0.0, 0.0, 0.0)
    u0_spin: tuple = (1.0, 0.0, 0.0, 0.0)
    u0_momentum: tuple = (0.0, 0.0, 0.0)
    u0_phase: float = 0.0
    # numerics
    w_method: str = "decomposition"
    w_substeps: int = 2
    picard_tol: float = 1e-10
    picard_max_iters: int = 40
    q_tol: float = 1e-13
    q_max_iters: int = 12
    # gates
    theorem_compliant: bool = True
    horizon_eta: float = 0.1
    gate_chi: float = 50.0
    gate_chi_weighted: float = 1.0
    gate_chi_grad_weighted: float = 1.0
    gate_w0: float = 1.0
    gate_w1: float = 1.0
    gate_u0: float = 1.0
    gate_V: float = 1.0
    seed: int = 0
    dump_every: int = 0                # 0 means first and last node only

    REQUIRED = ("n", "L", "T", "dt")
    _PARSERS = {"v0": _vec(3), "u0_center": _vec(3), "u0_spin": _vec(4), "u0_momentum": _vec(3)}

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RunConfig":
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 4 and self.n % 2 == 0):
            raise ConfigurationError(f"n must be an even integer >= 4, got {self.n!r}")
        if self.L <= 0:
            raise ConfigurationError("L must be positive")
        if self.T <= 0 or self.dt <= 0:
            raise ConfigurationError("T and dt must be positive")
        quadrature_steps(self.T, self.dt)
        if not self.p > 3:
            raise ConfigurationError(f"p = {self.p:g} is outside the supported range p > 3")
        if self.s < 0:
            raise ConfigurationError("s must be nonnegative")
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.path not in ("static", "inertial", "oscillating", "file"):
            raise ConfigurationError(f"unknown path kind {self.path!r}")
        if self.path == "file" and not self.path_file:
            raise ConfigurationError("path = file needs path_file")
        if self.w_method not in ("decomposition", "direct"):
            raise ConfigurationError(f"w_method must be decomposition or direct, got {self.w_method!r}")
        if self.u0_kind not in ("gaussian", "random"):
            raise ConfigurationError(f"unknown u0_kind {self.u0_kind!r}")
        if self.w_substeps < 1 or self.picard_max_iters < 1 or self.q_max_iters < 1:
            raise ConfigurationError("substeps and iteration caps must be >= 1")
        if self.eps_soft < 0:
            raise ConfigurationError("eps_soft must be >= 0")
        return self

    @property
    def grid(self) -> Grid3:
        return Grid3(int(self.n), float(self.L))

    @property
    def steps(self) -> int:
        return quadrature_steps(self.T, self.dt)

    @property
    def times(self) -> np.ndarray:
        return uniform_times(self.T, self.dt)

    @property
    def softening(self) -> float:
        return self.eps_soft if self.eps_soft > 0 else self.L / self.n

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in dataclasses.fields(self)}

    def to_text(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if isinstance(v, list):
                v = ", ".join(repr(float(x)) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def coerce(cls, key: str, value):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        if key not in fields:
            raise ConfigurationError(f"unknown config key: {key}")
        if key in cls._PARSERS:
            return cls._PARSERS[key](value)
        kind = type(fields[key].default)
        try:
            if kind is bool:
                return _bool(value)
            if kind is int:
                f = float(value)
                if f != int(f):
                    raise ValueError
                return int(f)
            if kind is float:
                return float(value)
        except ValueError:
            raise ConfigurationError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None
        return str(value).strip()

    @classmethod
    def from_mapping(cls, values: dict, require: bool = False) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        if require:
            missing = [k for k in cls.REQUIRED if k not in values]
            if missing:
                raise ConfigurationError(
                    f"missing required keys: {', '.join(missing)} (only n, L, T, dt are "
                    "required; every other key falls back to its documented default)")
        return cls(**{k: cls.coerce(k, v) for k, v in values.items()})

    @staticmethod
    def read_pairs(text: str) -> dict:
        """``key = value`` lines to a dict; ``#`` starts a comment, duplicates are errors."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
            k, v = (x.strip() for x in line.split("=", 1))
            if k in values:
                raise ConfigurationError(f"line {lineno}: duplicate key {k!r}")
            values[k] = v
        return values

    @classmethod
    def parse(cls, text: str, require: bool = True, overrides: dict | None = None) -> "RunConfig":
        values = cls.read_pairs(text)
        values.update(overrides or {})
        return cls.from_mapping(values, require=require)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        return cls.parse(Path(path).read_text(), overrides=overrides)


# -- problem data --------------------------------------------------------------------


def make_charge(cfg: RunConfig, grid: Grid3 | None = None) -> ChargeDensity:
    return ChargeDensity(grid or cfg.grid, cfg.chi_amplitude, cfg.chi_width, cfg.chi_kind, cfg.delta)


def make_kg_state(cfg: RunConfig, grid: Grid3 | None = None) -> KGState:
    g = grid or cfg.grid
    r2 = g.r ** 2
    w0 = cfg.w0_amplitude * np.exp(-r2 / (2 * cfg.w0_width ** 2))
    w1 = cfg.w1_amplitude * np.exp(-r2 / (2 * cfg.w1_width ** 2))
    return KGState(ScalarField(g, w0), ScalarField(g, w1))


def make_u0(cfg: RunConfig, grid: Grid3 | None = None) -> SpinorField:
    g = grid or cfg.grid
    spin = np.asarray(cfg.u0_spin, dtype=complex)
    if cfg.u0_kind == "random":
        rng = np.random.default_rng(cfg.seed)
        spin = rng.normal(size=4) + 1j * rng.normal(size=4)
    spin = spin / np.linalg.norm(spin)
    u = gaussian_spinor(g, cfg.u0_amplitude, cfg.u0_width, cfg.u0_center, spin, cfg.u0_momentum)
    if cfg.u0_phase:
        u.values *= np.exp(1j * cfg.u0_phase)
    return u


def make_path(cfg: RunConfig) -> NucleusPath:
    if cfg.path == "static":
        return NucleusPath.static(cfg.T, cfg.dt, cfg.M)
    if cfg.path == "inertial":
        return NucleusPath.inertial(cfg.T, cfg.dt, cfg.v0, cfg.M)
    if cfg.path == "oscillating":
        return NucleusPath.oscillating(cfg.T, cfg.dt, cfg.path_amplitude, cfg.path_omega, M=cfg.M)
    path = NucleusPath.from_csv(cfg.path_file, M=cfg.M)
    if abs(path.T - cfg.T) > 1e-9 * cfg.T or abs(path.dt - cfg.dt) > 1e-9 * cfg.dt:
        raise ConfigurationError("path file does not match T and dt of the config")
    return path


# -- gates ---------------------------------------------------------------------------


@dataclass
class Hypothesis:
    name: str
    kind: str               # path | regularity | smallness | horizon
    value: float
    threshold: float
    relation: str           # "<=", "<", ">=" or ">"
    passed: bool
    margin: float | None    # threshold/value for upper bounds, value/threshold for lower

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class GateReport:
    system: int
    hypotheses: list = field(default_factory=list)

    def check(self, name, kind, value, threshold, relation="<="):
        value, threshold = float(value), float(threshold)
        if relation == "<=":
            ok = value <= threshold
        elif relation == "<":
            ok = value < threshold
        elif relation == ">=":
            ok = value >= threshold
        elif relation == ">":
            ok = value > threshold
        else:
            raise ValueError(relation)
        if relation in (">=", ">"):
            margin = value / threshold if threshold > 0 else None
        else:
            margin = threshold / value if value > 0 else None
        self.hypotheses.append(Hypothesis(name, kind, value, threshold, relation, bool(ok), margin))

    @property
    def passed(self) -> bool:
        return all(h.passed for h in self.hypotheses)

    @property
    def violated(self) -> list:
        return [h.name for h in self.hypotheses if not h.passed]

    def min_margin(self, kind: str | None = None) -> float:
        ms = [h.margin for h in self.hypotheses
              if (kind is None or h.kind == kind) and h.margin is not None]
        return min(ms) if ms else math.inf

    def to_dict(self) -> dict:
        return {"system": self.system, "passed": self.passed, "violated": self.violated,
                "hypotheses": [h.to_dict() for h in self.hypotheses]}

    def summary(self) -> str:
        lines = []
        for h in self.hypotheses:
            m = "-" if h.margin is None else f"{h.margin:.3g}"
            lines.append(f"{'PASS' if h.passed else 'FAIL'}  {h.name:<28} {h.value:.6g} "
                         f"{h.relation} {h.threshold:.6g}  margin {m}")
        return "\n".join(lines)


def _potential_smallness(chi: ChargeDensity, path: NucleusPath, cfg: RunConfig) -> float:
    """Smallness proxy sup_t ||H_v^s <x>^{2N} W1(t)||_inf with v = q'(t)."""
    g = chi.grid
    worst = 0.0
    for j, t in enumerate(path.times):
        q, qd = path.q[j], path.qdot[j]
        if np.linalg.norm(qd) > 0.5:
            qd = np.zeros(3)     # speed hypothesis already fails; fall back to v = 0
        W1 = ScalarField(g, ifft(W1_hat(chi, q, qd)).real)
        worst = max(worst, smallness_functional([W1], cfg.s, cfg.N, qd))
    return worst


def gate_report(cfg: RunConfig, path: NucleusPath | None = None, system: int = 1,
                u0: SpinorField | None = None) -> GateReport:
    """Check the hypotheses of the well-posedness statements for this run."""
    path = path if path is not None else make_path(cfg)
    g = cfg.grid
    chi = make_charge(cfg, g)
    state = make_kg_state(cfg, g)
    u0 = u0 if u0 is not None else make_u0(cfg, g)
    rep = GateReport(system)
    rep.check("accel_L1 <= 1/2", "path", path.accel_l1, 0.5)
    rep.check("speed <= 1/2", "path", path.sup_speed, 0.5)
    s, p = cfg.s, cfg.p
    if system == 1:
        rep.check("s >= 3/2 - 1/(p-1)", "regularity", s, 1.5 - 1.0 / (p - 1), ">=")
    else:
        rep.check("s > 3/2", "regularity", s, 1.5, ">")
    rep.check("s <= 2", "regularity", s, 2.0)
    if not (p % 2 == 1):
        rep.check("s < (p-1)/2", "regularity", s, (p - 1) / 2, "<")
    k_chi = int(math.ceil(2 + s)) if system == 1 else int(math.ceil(max(2 + s, s + 1)))
    rep.check(f"chi W{k_chi},1", "smallness", chi.w_k1_norm(k_chi), cfg.gate_chi)
    rep.check(f"<x>^{3 + cfg.delta:g} chi Linf", "smallness", chi.weighted_sup(), cfg.gate_chi_weighted)
    if system == 2:
        rep.check(f"<x>^{3 + cfg.delta:g} grad chi Linf", "smallness", chi.weighted_grad_sup(),
                  cfg.gate_chi_grad_weighted)
    k0, k1 = int(math.ceil(s + 3)), int(math.ceil(s + 2))
    rep.check(f"w0 W{k0},1", "smallness", wk1_norm(state.w.values, g, k0), cfg.gate_w0)
    rep.check(f"w1 W{k1},1", "smallness", wk1_norm(state.wdot.values, g, k1), cfg.gate_w1)
    rep.check("u0 H^s", "smallness", sobolev_norm(u0, s), cfg.gate_u0)
    rep.check("V smallness proxy", "smallness", _potential_smallness(chi, path, cfg), cfg.gate_V)
    if system == 2:
        speed = float(np.linalg.norm(cfg.v0))
        bound = cfg.horizon_eta * min(math.sqrt(cfg.M), 1.0 / speed if speed > 0 else math.inf)
        rep.check("T <= eta min(sqrt M, 1/|v0|)", "horizon", cfg.T, bound)
    return rep


# -- system 1 ----------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    u: np.ndarray                       # (K+1, 4, n, n, n)
    W: np.ndarray                       # (K+1, n, n, n)
    grid: Grid3
    path: NucleusPath
    cfg: RunConfig
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    reports: NormReport = field(default_factory=NormReport)
    gate: GateReport | None = None
    timings: dict = field(default_factory=dict)
    q_distances: list = field(default_factory=list)
    q_ratios: list = field(default_factory=list)
    forces: np.ndarray | None = None

    def u_field(self, j: int) -> SpinorField:
        return SpinorField(self.grid, self.u[j])

    def W_field(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.W[j])

    @property
    def sweeps(self) -> int:
        return len(self.distances)


def duhamel_sweep_u(u_prev: np.ndarray, W: np.ndarray, u0: np.ndarray, grid: Grid3,
                    cfg: RunConfig) -> tuple[np.ndarray, float]:
    """One Picard sweep; returns the new iterate and its X-distance to ``u_prev``."""
    times = cfg.times
    dt = cfg.dt
    u0h = fft(u0)
    out = np.empty_like(u_prev)
    acc = np.zeros_like(u0h)
    prev = None
    for j, t in enumerate(times):
        F = W[j] * u_prev[j]
        if cfg.nonlinear:
            F = F + nonlinearity_values(u_prev[j], cfg.p)
        G = propagate_hat(fft(F), grid, -t)
        if j:
            acc += 0.5 * dt * (prev + G)
        prev = G
        uh = propagate_hat(u0h + 1j * acc, grid, t)
        out[j] = ifft(uh)
        if not np.all(np.isfinite(out[j])):
            raise DivergenceError(f"non-finite iterate at t = {t:g} (node {j})", node=j)
    dist = x_norm(out - u_prev, grid, cfg.s, cfg.p, dt)
    return out, dist


def picard_solve(u0: np.ndarray, W: np.ndarray, grid: Grid3, cfg: RunConfig):
    """Iterate sweeps from the zero iterate until the X-distance drops below tolerance."""
    K = cfg.steps
    u = np.zeros((K + 1,) + u0.shape, dtype=complex)
    distances, ratios = [], []
    above = 0
    for k in range(cfg.picard_max_iters):
        u, d = duhamel_sweep_u(u, W, u0, grid, cfg)
        distances.append(d)
        if len(distances) > 1:
            r = d / distances[-2] if distances[-2] > 0 else 0.0
            ratios.append(r)
            above = above + 1 if r >= 1 else 0
            if above >= 3:
                raise DivergenceError("Picard ratios >= 1 for 3 consecutive sweeps",
                                      ratios=ratios)
        size = x_norm(u, grid, cfg.s, cfg.p, cfg.dt)
        log.debug("sweep %d: distance %.3e ratio %s", k + 1, d, ratios[-1:] or "-")
        if d <= cfg.picard_tol * max(size, 1e-300) or d == 0:
            return u, distances, ratios
    raise DivergenceError(f"no convergence in {cfg.picard_max_iters} sweeps", ratios=ratios)


def _report(traj: Trajectory) -> NormReport:
    cfg, g = traj.cfg, traj.grid
    rep = NormReport()
    fields = [traj.u_field(j) for j in range(len(traj.times))]
    s, p, N = cfg.s, cfg.p, cfg.N
    rep.add("sup_t H^s", max(sobolev_norm(f, s) for f in fields), s=s)
    rep.add("u0 H^s", sobolev_norm(fields[0], s), s=s)
    rep.add("Strichartz", strichartz_norm(fields, p - 1, math.inf, cfg.dt), p=p - 1, r="inf")
    rep.add("local smoothing", local_smoothing_norm(fields, s, N, cfg.dt), s=s, N=N)
    l2 = [f.norm() for f in fields]
    rep.add("L2 drift", abs(l2[-1] - l2[0]) / l2[0] if l2[0] > 0 else 0.0)
    rep.add("sup_t W Linf", float(np.max(np.abs(traj.W))))
    rep.add("X norm", x_norm(traj.u, g, s, p, cfg.dt), s=s, p=p)
    return rep


def solve_system1(cfg: RunConfig, path: NucleusPath | None = None,
                  u0: SpinorField | None = None, check_gate: bool = True,
                  W: np.ndarray | None = None) -> Trajectory:
    """Global Picard solution along a prescribed nucleus path."""
    t0 = time.perf_counter()
    g = cfg.grid
    path = path if path is not None else make_path(cfg)
    u0 = u0 if u0 is not None else make_u0(cfg, g)
    gate = None
    if check_gate:
        gate = gate_report(cfg, path, 1, u0)
        if cfg.theorem_compliant and not gate.passed:
            raise GateError("hypotheses violated: " + ", ".join(gate.violated),
                            gate.violated, gate)
    t1 = time.perf_counter()
    if W is None:
        W = build_W_series(make_charge(cfg, g), path, make_kg_state(cfg, g), cfg.times,
                           cfg.w_method, cfg.w_substeps).values
    t2 = time.perf_counter()
    u, distances, ratios = picard_solve(u0.values, W, g, cfg)
    t3 = time.perf_counter()
    traj = Trajectory(cfg.times, u, W, g, path, cfg, distances, ratios, gate=gate)
    traj.reports = _report(traj)
    traj.timings = {"gate": t1 - t0, "W": t2 - t1, "picard": t3 - t2,
                    "per_sweep": (t3 - t2) / max(1, len(distances)),
                    "report": time.perf_counter() - t3}
    return traj


def step_doubling_error(cfg: RunConfig, path_factory=None, **kw) -> dict:
    """Richardson estimate of the dt error in sup_t ||u||_{H^s} and in the fields."""
    coarse = solve_system1(cfg, path_factory(cfg) if path_factory else None, **kw)
    fine_cfg = cfg.replace(dt=cfg.dt / 2)
    fine = solve_system1(fine_cfg, path_factory(fine_cfg) if path_factory else None, **kw)
    g = cfg.grid
    diff = max(_hs(coarse.u[j] - fine.u[2 * j], g, cfg.s) for j in range(len(coarse.times)))
    return {"coarse": coarse, "fine": fine, "field_error": diff * 4.0 / 3.0,
            "norm_error": abs(coarse.reports.get("sup_t H^s") - fine.reports.get("sup_t H^s")) * 4 / 3}


# -- nucleus ------------------------------------------------------------------------


def hellman_feynman_force(u, q, eps_soft: float, grid: Grid3 | None = None) -> np.ndarray:
    """int |u|^2 (x - q) / (|x - q|^2 + eps^2)^{3/2} dx by the grid sum."""
    if eps_soft <= 0:
        raise ConfigurationError("softening length must be positive")
    if isinstance(u, SpinorField):
        grid, vals = u.grid, u.values
    else:
        if grid is None:
            raise UsageError("raw arrays need a grid")
        vals = u
    rho = np.sum(np.abs(vals) ** 2, axis=0)
    X, Y, Z = grid.coords
    d = [X - q[0], Y - q[1], Z - q[2]]
    w = rho / (d[0] ** 2 + d[1] ** 2 + d[2] ** 2 + eps_soft ** 2) ** 1.5
    return np.array([np.sum(w * c) for c in d]) * grid.cell_volume


@dataclass
class BallReport:
    accel_l1: float
    sup_q: float
    q0: float
    v0_error: float
    inside: bool
    broken: str | None = None
    time: float | None = None


def ball_check(path: NucleusPath, v0) -> BallReport:
    v0 = np.asarray(v0, dtype=float)
    a = np.linalg.norm(path.qddot, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(path.times) * (a[1:] + a[:-1]))])
    qn = np.linalg.norm(path.q, axis=1)
    rep = BallReport(float(cum[-1]), float(qn.max()), float(np.linalg.norm(path.q[0])),
                     float(np.linalg.norm(path.qdot[0] - v0)), True)
    if rep.q0 > 1e-12:
        rep.inside, rep.broken, rep.time = False, "q(0) = 0", 0.0
    elif rep.v0_error > 1e-12:
        rep.inside, rep.broken, rep.time = False, "q'(0) = v0", 0.0
    elif cum[-1] > 0.5:
        j = int(np.argmax(cum > 0.5))
        rep.inside, rep.broken, rep.time = False, "||q''||_L1 <= 1/2", float(path.times[j])
    elif qn.max() > 1.0:
        j = int(np.argmax(qn > 1.0))
        rep.inside, rep.broken, rep.time = False, "||q||_inf <= 1", float(path.times[j])
    return rep


def flow_lipschitz_ratio(cfg: RunConfig, q1: NucleusPath, q2: NucleusPath,
                         u0: SpinorField | None = None) -> float:
    """||Psi_{q1} u0 - Psi_{q2} u0||_X / ||q1 - q2||_Z, measured.

    Only an empirical number: the continuity constant of the flow in the path
    is not known explicitly.
    """
    dq = q1.distance(q2)
    if dq == 0:
        raise UsageError("paths coincide; the ratio is undefined")
    u0 = u0 if u0 is not None else make_u0(cfg)
    a = solve_system1(cfg, q1, u0, check_gate=False)
    b = solve_system1(cfg, q2, u0, check_gate=False)
    return x_norm(a.u - b.u, cfg.grid, cfg.s, cfg.p, cfg.dt) / dq


def picard_map_q(q_iter: NucleusPath, u0: SpinorField, cfg: RunConfig, W: np.ndarray | None = None):
    """P(q): solve system 1 along q, then integrate M q'' = F(u, q) from q(0)=0, q'(0)=v0.

    Returns (new path, system-1 trajectory, ball report of the output).
    """
    before = ball_check(q_iter, cfg.v0)
    if not before.inside:
        raise BallViolationError(f"input path leaves B: {before.broken} at t = {before.time}",
                                 before.broken, before.time, before)
    traj = solve_system1(cfg, q_iter, u0, check_gate=False, W=W)
    eps = cfg.softening
    F = np.array([hellman_feynman_force(traj.u[j], q_iter.q[j], eps, traj.grid)
                  for j in range(len(traj.times))])
    new = NucleusPath.from_acceleration(q_iter.times, F / cfg.M, cfg.v0, M=cfg.M)
    traj.forces = F
    after = ball_check(new, cfg.v0)
    if not after.inside:
        raise BallViolationError(f"P(q) leaves B: {after.broken} at t = {after.time}",
                                 after.broken, after.time, after)
    return new, traj, after


def solve_system2(cfg: RunConfig, u0: SpinorField | None = None,
                  check_gate: bool = True) -> Trajectory:
    """Alternate q -> P(q) from the free path v0 t until the Z-distance is below q_tol."""
    t0 = time.perf_counter()
    g = cfg.grid
    u0 = u0 if u0 is not None else make_u0(cfg, g)
    q = NucleusPath.inertial(cfg.T, cfg.dt, cfg.v0, cfg.M)
    q = NucleusPath(q.times, q.q, q.qdot, q.qddot, M=cfg.M)   # sampled, no closed form
    gate = None
    if check_gate:
        gate = gate_report(cfg, q, 2, u0)
        if cfg.theorem_compliant and not gate.passed:
            raise GateError("hypotheses violated: " + ", ".join(gate.violated),
                            gate.violated, gate)
    distances, ratios = [], []
    traj = None
    for k in range(cfg.q_max_iters):
        new, traj, _ = picard_map_q(q, u0, cfg)
        d = new.distance(q)
        distances.append(d)
        if len(distances) > 1 and distances[-2] > 0:
            ratios.append(d / distances[-2])
        log.debug("q-iteration %d: Z-distance %.3e", k + 1, d)
        q = new
        if d <= cfg.q_tol:
            break
    traj.path = q
    traj.gate = gate
    traj.q_distances = distances
    traj.q_ratios = ratios
    traj.reports.add("q accel L1", q.accel_l1)
    traj.reports.add("q sup", q.sup_displacement)
    traj.timings["total"] = time.perf_counter() - t0
    return traj


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
