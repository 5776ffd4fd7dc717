"""Command-line entry point ``dirackg``.

Exit codes: 0 success, 1 a gate or verification check failed, 2 bad
configuration or usage.  Every command that gets as far as an output
directory writes ``manifest.json`` there, also on failure.

Configuration precedence, lowest first: RunConfig defaults, the config file,
environment variables ``DIRACKG_<KEY>`` (e.g. ``DIRACKG_T=1.0``), then
``--set key=value`` and the ``--seed`` flag.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (BallViolationError, ConfigurationError, DataError, DivergenceError,
                     DomainError, GateError, UsageError)
from .grid import Grid3, ScalarField, SpinorField, dump_field, load_field, set_threads
from .kernels import (Z_NORM, kernel_K1, kernel_Y, kernel_Z, lattice_kernel,
                      radial_inverse_transform)
from .kleingordon import (ChargeDensity, KGState, NucleusPath, boosted_yukawa, build_W,
                          build_W2, kg_duhamel_direct)
from .norms import decay_fit, sobolev_norm
from .solver import (RunConfig, dump_json, gate_report, make_u0, solve_system1,
                     solve_system2)

ENV_PREFIX = "DIRACKG_"
log = logging.getLogger("dirackg")


class VerificationFailed(Exception):
    pass


# -- helpers -------------------------------------------------------------------------


def git_hash(data: bytes) -> str:
    """Content hash in git's blob form: sha1("blob <len>\\0" + data)."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def env_overrides(environ=None) -> dict:
    """Config keys from ``DIRACKG_<KEY>`` variables, matched case-insensitively."""
    environ = os.environ if environ is None else environ
    names = {f.lower(): f for f in RunConfig().to_dict()}
    out = {}
    for k, v in environ.items():
        if not k.startswith(ENV_PREFIX) or k == ENV_PREFIX + "THREADS":
            continue
        key = k[len(ENV_PREFIX):]
        out[names.get(key.lower(), key)] = v
    return out


def load_config(args, defaults: dict | None = None) -> RunConfig:
    values = dict(defaults or {})
    path = getattr(args, "config", None)
    if path:
        pairs = RunConfig.read_pairs(Path(path).read_text())
        missing = [k for k in RunConfig.REQUIRED if k not in pairs]
        if missing:
            raise ConfigurationError(f"{path}: missing required keys: {', '.join(missing)}")
        values.update(pairs)
    values.update(env_overrides())
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return RunConfig.from_mapping(values)


class Run:
    """Output directory bookkeeping and the manifest."""

    def __init__(self, command: str, out_dir, argv):
        self.command = command
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.manifest = {"command": command, "argv": list(argv), "version": __version__,
                         "status": "started", "timings": {}}
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def write_csv(self, name: str, header, rows) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(x) for x in row))
        self.write_text(name, "\n".join(lines) + "\n")

    def set_config(self, cfg: RunConfig, extra_inputs: bytes = b"") -> None:
        text = cfg.to_text()
        self.manifest["config"] = cfg.to_dict()
        self.manifest["input_hash"] = git_hash(text.encode() + extra_inputs)

    def finish(self, status: str, exit_code: int, message: str = "") -> int:
        self.manifest["status"] = status
        self.manifest["exit_code"] = exit_code
        if message:
            self.manifest["message"] = message
        self.manifest["timings"]["wall"] = time.perf_counter() - self.t0
        listed = []
        for name in sorted(set(self.files)):
            p = self.out / name
            if p.exists():
                listed.append({"name": name, "size": p.stat().st_size, "sha256": sha256_file(p)})
        self.manifest["files"] = listed
        dump_json(self.manifest, self.out / "manifest.json")
        return exit_code


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# -- commands ------------------------------------------------------------------------


def _trajectory_outputs(run: Run, traj, cfg: RunConfig) -> None:
    from .norms import lp_norm
    g = traj.grid
    rows = []
    for j, t in enumerate(traj.times):
        u = traj.u_field(j)
        rows.append([t, u.norm(), sobolev_norm(u, cfg.s), lp_norm(u.values, g, math.inf),
                     float(np.max(np.abs(traj.W[j])))])
    run.write_csv("norms.csv", ["t", "L2", "Hs", "Linf", "W_Linf"], rows)
    run.write_csv("contraction.csv", ["sweep", "distance", "ratio"],
                  [[k + 1, d, (traj.distances[k] / traj.distances[k - 1]) if k else ""]
                   for k, d in enumerate(traj.distances)])
    traj.reports.to_csv(run.path("report.csv"))
    traj.reports.to_json(run.path("report.json"))
    traj.path.to_csv(run.path("path.csv"))
    every = cfg.steps if cfg.dump_every <= 0 else cfg.dump_every
    for j in range(0, len(traj.times), every):
        dump_field(traj.u_field(j), run.path(f"u_{j:05d}.dkga"))
        dump_field(ScalarField(g, traj.W[j].astype(complex)), run.path(f"W_{j:05d}.dkga"))
    if (len(traj.times) - 1) % every:
        j = len(traj.times) - 1
        dump_field(traj.u_field(j), run.path(f"u_{j:05d}.dkga"))
        dump_field(ScalarField(g, traj.W[j].astype(complex)), run.path(f"W_{j:05d}.dkga"))
    run.manifest["timings"].update(traj.timings)
    run.manifest["contraction_ratios"] = list(traj.ratios)


def _gate_to_manifest(run: Run, gate) -> None:
    run.manifest["gate"] = gate.to_dict()


def cmd_simulate(args, run: Run, system: int) -> int:
    cfg = load_config(args)
    extra = Path(cfg.path_file).read_bytes() if cfg.path == "file" else b""
    run.set_config(cfg, extra)
    u0 = make_u0(cfg)
    if system == 1:
        from .solver import make_path
        path = make_path(cfg)
        gate = gate_report(cfg, path, 1, u0)
    else:
        path = NucleusPath.inertial(cfg.T, cfg.dt, cfg.v0, cfg.M)
        gate = gate_report(cfg, path, 2, u0)
    _gate_to_manifest(run, gate)
    print(gate.summary())
    run.manifest["theorem_labeled"] = bool(cfg.theorem_compliant)
    if cfg.theorem_compliant and not gate.passed:
        msg = "refused: hypotheses violated: " + ", ".join(gate.violated)
        print(msg, file=sys.stderr)
        return run.finish("gate-refused", 1, msg)
    if system == 1:
        traj = solve_system1(cfg, path, u0, check_gate=False)
    else:
        traj = solve_system2(cfg, u0, check_gate=False)
        run.write_csv("q_iterations.csv", ["iteration", "z_distance", "ratio"],
                      [[k + 1, d, (traj.q_distances[k] / traj.q_distances[k - 1]) if k else ""]
                       for k, d in enumerate(traj.q_distances)])
        run.manifest["q_ratios"] = list(traj.q_ratios)
    _trajectory_outputs(run, traj, cfg)
    print(f"converged in {traj.sweeps} sweeps; ratios "
          + " ".join(f"{r:.3g}" for r in traj.ratios))
    return run.finish("ok", 0)


def cmd_gate_report(args, run: Run) -> int:
    cfg = load_config(args)
    run.set_config(cfg)
    from .solver import make_path
    path = make_path(cfg) if args.system == 1 else NucleusPath.inertial(cfg.T, cfg.dt, cfg.v0, cfg.M)
    gate = gate_report(cfg, path, args.system)
    _gate_to_manifest(run, gate)
    print(gate.summary())
    print("gate:", "PASS" if gate.passed else "FAIL")
    dump_json(gate.to_dict(), run.path("gate.json"))
    return run.finish("ok" if gate.passed else "gate-failed", 0 if gate.passed else 1)


def verify_decomposition(cfg: RunConfig, levels=(50, 100, 200, 400)):
    """Residual of W1+W2+W3 against direct Duhamel on an oscillating path."""
    g = cfg.grid
    chi = ChargeDensity(g, cfg.chi_amplitude, cfg.chi_width, cfg.chi_kind)
    path = NucleusPath.oscillating(cfg.T, cfg.dt, cfg.path_amplitude, cfg.path_omega, M=cfg.M)
    state = KGState(ScalarField(g, np.zeros(g.shape)), ScalarField(g, np.zeros(g.shape)))
    rows = []
    for N in levels:
        h = cfg.T / N
        direct = kg_duhamel_direct(chi, path, state, cfg.T, h).values
        split = build_W(chi, path, state, cfg.T, h).values
        rows.append((N, h, float(np.linalg.norm(split - direct) / np.linalg.norm(direct))))
    orders = [math.log2(rows[i][2] / rows[i + 1][2]) for i in range(len(rows) - 1)]
    return rows, orders, path


def cmd_verify_decomposition(args, run: Run) -> int:
    cfg = load_config(args, {"n": 32, "L": 20.0, "T": 4.0, "dt": 0.01, "path": "oscillating",
                             "chi_amplitude": 1.0})
    run.set_config(cfg)
    rows, orders, path = verify_decomposition(cfg)
    run.write_csv("decomposition.csv", ["N", "dt_quad", "residual"], rows)
    ok = rows[-1][2] < 1e-4 and all(1.8 <= o <= 2.2 for o in orders)
    for (N, h, r), o in zip(rows, [None] + orders):
        print(f"dt_quad = T/{N:<4d} residual {r:.3e}" + (f"  order {o:.3f}" if o else ""))
    print(f"path: ||q''||_L1 = {path.accel_l1:.4f}, sup|q'| = {path.sup_speed:.4f}")
    print("decomposition:", "PASS" if ok else "FAIL")
    run.manifest["result"] = {"rows": rows, "orders": orders, "passed": ok}
    return run.finish("ok" if ok else "verification-failed", 0 if ok else 1)


def kernel_table(n: int = 64, L: float = 40.0, v=(0.5, 0.0, 0.0)):
    """Mismatch of lattice-evaluated symbols against the closed-form kernels."""
    g = Grid3(n, L)
    r = g.r
    mask = (r >= 2 * g.dx) & (r <= L / 4)
    X, Y, Z = g.coords
    pos = np.stack(np.broadcast_arrays(X, Y, Z))[:, mask]
    rel = lambda a, b: float(np.linalg.norm(a - b) / np.linalg.norm(b))
    rows = []
    k0 = lattice_kernel(g, lambda a, b, c: 1.0 / (1 + a * a + b * b + c * c))
    rows.append(("1/<xi>^2 vs Y", rel(k0[mask], kernel_Y(pos)), 1e-3))
    vx, vy, vz = v
    kv = lattice_kernel(g, lambda a, b, c: 1.0 / (1 + a * a + b * b + c * c - (vx * a + vy * b + vz * c) ** 2))
    rows.append((f"1/(<xi>^2-(xi.v)^2) vs Y(L_v x)/sqrt(1-v^2), v={tuple(v)}",
                 rel(kv[mask], boosted_yukawa(v, pos)), 1e-3))
    kz = lattice_kernel(g, lambda a, b, c: 1.0 / (1 + a * a + b * b + c * c) ** 2)
    rows.append(("1/<xi>^4 vs Z/(8 pi)", rel(kz[mask], Z_NORM * kernel_Z(pos)), 1e-3))
    radii = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 6.0])
    quad = np.array([radial_inverse_transform(lambda k: 1 / np.sqrt(1 + k * k), x, 1.0) for x in radii])
    rows.append(("1/<xi> (radial quadrature) vs K1/(2 pi^2 |x|)",
                 rel(quad, kernel_K1(radii) / (2 * np.pi ** 2)), 1e-6))
    return rows


def cmd_verify_kernels(args, run: Run) -> int:
    cfg = load_config(args, {"n": 64, "L": 40.0, "T": 1.0, "dt": 1.0})
    run.set_config(cfg)
    rows = kernel_table(cfg.n, cfg.L)
    ok = all(err <= tol for _, err, tol in rows)
    run.write_csv("kernels.csv", ["check", "mismatch", "tolerance"], [[f'"{a}"', b, c] for a, b, c in rows])
    for name, err, tol in rows:
        print(f"{'PASS' if err <= tol else 'FAIL'}  {err:.3e} <= {tol:g}  {name}")
    run.manifest["result"] = {"rows": rows, "passed": ok}
    return run.finish("ok" if ok else "verification-failed", 0 if ok else 1)


def decay_series(cfg: RunConfig, t_min=5.0, t_max=40.0, samples=36):
    g = cfg.grid
    chi = ChargeDensity(g, cfg.chi_amplitude, cfg.chi_width, cfg.chi_kind)
    from .solver import make_kg_state
    state = make_kg_state(cfg, g)
    ts = np.linspace(t_min, t_max, samples)
    sup = np.array([np.abs(build_W2(chi, state, t).values).max() for t in ts])
    return ts, sup


def cmd_decay_fit(args, run: Run) -> int:
    cfg = load_config(args, {"n": 64, "L": 80.0, "T": 40.0, "dt": 1.0, "chi_amplitude": 1.0})
    run.set_config(cfg)
    ts, sup = decay_series(cfg, 5.0, cfg.T)
    fit = decay_fit(ts, sup, 5.0, cfg.T)
    run.write_csv("decay.csv", ["t", "W2_Linf"], zip(ts, sup))
    ok = abs(fit.exponent + 1.5) <= 0.15
    print(f"exponent {fit.exponent:.4f} +- {fit.stderr:.4f} (r = {fit.rvalue:.5f}, {fit.samples} samples)")
    print("decay:", "PASS" if ok else "FAIL", "(target -1.5 +- 0.15)")
    run.manifest["result"] = {"exponent": fit.exponent, "stderr": fit.stderr, "passed": ok}
    return run.finish("ok" if ok else "verification-failed", 0 if ok else 1)


def _read_norms(path: Path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data


def compare_runs(dir_a, dir_b, s: float | None = None) -> dict:
    """Field distances at shared dumped nodes and deltas of the norm series."""
    a, b = Path(dir_a), Path(dir_b)
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ca, cb = ma.get("config", {}), mb.get("config", {})
    for key in ("n", "L", "T", "dt"):
        if ca.get(key) != cb.get(key):
            raise UsageError(f"incompatible runs: {key} = {ca.get(key)} vs {cb.get(key)}")
    s = ca.get("s", 1.5) if s is None else s
    ha, na = _read_norms(a / "norms.csv")
    hb, nb = _read_norms(b / "norms.csv")
    deltas = {h: float(np.max(np.abs(na[:, i] - nb[:, i]))) for i, h in enumerate(ha) if h != "t"}
    nodes = []
    names = sorted(f["name"] for f in ma["files"] if f["name"].startswith("u_"))
    shared = [x for x in names if (b / x).exists()]
    for name in shared:
        ua, ub = load_field(a / name), load_field(b / name)
        diff = SpinorField(ua.grid, ua.values - ub.values)
        nodes.append({"node": int(name[2:7]), "Hs": sobolev_norm(diff, s),
                      "Linf": float(np.max(np.abs(diff.values)))})
    return {"norm_deltas": deltas, "field_distances": nodes,
            "max_field_Hs": max((x["Hs"] for x in nodes), default=0.0)}


def cmd_compare(args, run: Run) -> int:
    rep = compare_runs(args.run_a, args.run_b)
    dump_json(rep, run.path("compare.json"))
    for k, v in rep["norm_deltas"].items():
        print(f"max |delta {k}| = {v:.3e}")
    for x in rep["field_distances"]:
        print(f"node {x['node']:5d}: ||u_a - u_b||_Hs = {x['Hs']:.3e}")
    run.manifest["result"] = rep
    return run.finish("ok", 0)


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirackg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="dirackg-out", help="artifact directory")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial data")
    common.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate-system1", "Dirac-KG along a prescribed nucleus path"),
                        ("simulate-system2", "Dirac-KG with nucleus dynamics")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("config")
    p = sub.add_parser("gate-report", parents=[common], help="check theorem hypotheses")
    p.add_argument("config")
    p.add_argument("--system", type=int, choices=(1, 2), default=1)
    for name, help_ in [("verify-decomposition", "W1+W2+W3 against direct Duhamel"),
                        ("verify-kernels", "lattice kernels against closed forms"),
                        ("decay-fit", "dispersive decay exponent of W2")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("config", nargs="?")
    p = sub.add_parser("compare", parents=[common], help="A/B two run directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    return ap


COMMANDS = {
    "simulate-system1": lambda a, r: cmd_simulate(a, r, 1),
    "simulate-system2": lambda a, r: cmd_simulate(a, r, 2),
    "gate-report": cmd_gate_report,
    "verify-decomposition": cmd_verify_decomposition,
    "verify-kernels": cmd_verify_kernels,
    "decay-fit": cmd_decay_fit,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or int(os.environ.get(ENV_PREFIX + "THREADS", "1"))
    set_threads(threads)
    try:
        run = Run(args.command, args.out_dir, argv)
    except OSError as exc:
        print(f"error: cannot use output directory: {exc}", file=sys.stderr)
        return 2
    run.manifest["threads"] = threads
    try:
        return COMMANDS[args.command](args, run)
    except (ConfigurationError, UsageError, DomainError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return run.finish("config-error", 2, str(exc))
    except GateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        if exc.report is not None:
            _gate_to_manifest(run, exc.report)
        return run.finish("gate-refused", 1, str(exc))
    except (DivergenceError, BallViolationError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return run.finish("diverged", 1, str(exc))


if __name__ == "__main__":
    sys.exit(main())
