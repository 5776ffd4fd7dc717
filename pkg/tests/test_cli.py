import hashlib
import json

import pytest

from dirackg.cli import compare_runs, env_overrides, git_hash, main

CONFIG = "n = 16\nL = 12\nT = 0.2\ndt = 0.05\nchi_amplitude = 0.05\nu0_amplitude = 0.05\n"


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CONFIG)
    return p


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_git_style_hash():
    # same convention as `git hash-object`
    assert git_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_simulate_writes_complete_manifest(tmp_path, cfg_file):
    out = tmp_path / "a"
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(out)]) == 0
    m = manifest(out)
    assert m["status"] == "ok" and m["exit_code"] == 0
    assert m["config"]["n"] == 16 and m["config"]["p"] == 5.0
    names = {f["name"] for f in m["files"]}
    assert {"norms.csv", "contraction.csv", "path.csv", "report.csv", "report.json",
            "u_00000.dkga", "u_00004.dkga", "W_00004.dkga"} <= names
    for f in m["files"]:
        data = (out / f["name"]).read_bytes()
        assert f["size"] == len(data)
        assert f["sha256"] == hashlib.sha256(data).hexdigest()
    hyps = {h["name"]: h for h in m["gate"]["hypotheses"]}
    assert {"accel_L1 <= 1/2", "speed <= 1/2", "u0 H^s"} <= set(hyps)
    assert all("margin" in h and "value" in h for h in hyps.values())
    assert "picard" in m["timings"]


def test_runs_are_byte_identical(tmp_path, cfg_file):
    sums = []
    for name in ("a", "b"):
        assert main(["simulate-system1", str(cfg_file), "--out-dir", str(tmp_path / name)]) == 0
        sums.append({f["name"]: f["sha256"] for f in manifest(tmp_path / name)["files"]})
    assert sums[0] == sums[1]
    assert manifest(tmp_path / "a")["input_hash"] == manifest(tmp_path / "b")["input_hash"]


def test_dump_every(tmp_path, cfg_file):
    out = tmp_path / "d"
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(out), "--set", "dump_every=1"]) == 0
    assert len(list(out.glob("u_*.dkga"))) == 5


def test_gate_refusal_exit_code(tmp_path, cfg_file, capsys):
    out = tmp_path / "r"
    code = main(["simulate-system1", str(cfg_file), "--out-dir", str(out),
                 "--set", "path=inertial", "--set", "v0=0.6,0,0"])
    assert code == 1
    m = manifest(out)
    assert m["status"] == "gate-refused"
    assert m["gate"]["violated"] == ["speed <= 1/2"]
    assert "speed <= 1/2" in capsys.readouterr().err
    assert not list(out.glob("*.dkga"))


@pytest.mark.parametrize("extra", [["--set", "bogus=1"], ["--set", "p=3"], ["--set", "novalue"]])
def test_config_errors_exit_two(tmp_path, cfg_file, extra):
    out = tmp_path / "e"
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(out)] + extra) == 2
    assert manifest(out)["status"] == "config-error"


def test_missing_required_key(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("n = 16\nL = 12\n")
    assert main(["gate-report", str(p), "--out-dir", str(tmp_path / "o")]) == 2
    assert "T, dt" in manifest(tmp_path / "o")["message"]


def test_bad_usage_exit_two(tmp_path):
    assert main(["no-such-command"]) == 2
    assert main(["compare", str(tmp_path / "x"), str(tmp_path / "y"), "--out-dir",
                 str(tmp_path / "o")]) == 2


def test_environment_overrides(tmp_path, cfg_file, monkeypatch):
    assert env_overrides({"DIRACKG_T": "1", "DIRACKG_CHI_AMPLITUDE": "2", "HOME": "/"}) == {
        "T": "1", "chi_amplitude": "2"}
    monkeypatch.setenv("DIRACKG_DT", "0.1")
    out = tmp_path / "env"
    assert main(["gate-report", str(cfg_file), "--out-dir", str(out)]) == 0
    assert manifest(out)["config"]["dt"] == 0.1
    # --set beats the environment
    out2 = tmp_path / "env2"
    assert main(["gate-report", str(cfg_file), "--out-dir", str(out2), "--set", "dt=0.025"]) == 0
    assert manifest(out2)["config"]["dt"] == 0.025


def test_seed_flag_controls_random_data(tmp_path, cfg_file):
    outs = []
    for seed in (1, 1, 2):
        out = tmp_path / f"s{len(outs)}"
        assert main(["simulate-system1", str(cfg_file), "--out-dir", str(out), "--seed", str(seed),
                     "--set", "u0_kind=random"]) == 0
        outs.append({f["name"]: f["sha256"] for f in manifest(out)["files"]})
    assert outs[0] == outs[1]
    assert outs[0]["u_00000.dkga"] != outs[2]["u_00000.dkga"]


def test_gate_report_system2(tmp_path, cfg_file):
    out = tmp_path / "g"
    assert main(["gate-report", str(cfg_file), "--system", "2", "--out-dir", str(out)]) == 1
    assert "s > 3/2" in manifest(out)["gate"]["violated"]
    assert main(["gate-report", str(cfg_file), "--system", "2", "--set", "s=1.75",
                 "--out-dir", str(out)]) == 0


def test_simulate_system2(tmp_path, cfg_file):
    out = tmp_path / "s2"
    code = main(["simulate-system2", str(cfg_file), "--out-dir", str(out), "--set", "s=1.75",
                 "--set", "v0=0.05,0,0", "--set", "u0_center=1,0.5,0"])
    assert code == 0
    lines = (out / "q_iterations.csv").read_text().splitlines()
    assert lines[0] == "iteration,z_distance,ratio"
    assert len(lines) >= 3


def test_compare(tmp_path, cfg_file):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(a)]) == 0
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(b), "--set", "w_method=direct"]) == 0
    rep = compare_runs(a, b)
    assert 0 < rep["max_field_Hs"] < 1e-6
    assert set(rep["norm_deltas"]) == {"L2", "Hs", "Linf", "W_Linf"}
    assert main(["compare", str(a), str(b), "--out-dir", str(tmp_path / "cmp")]) == 0
    assert main(["simulate-system1", str(cfg_file), "--out-dir", str(c), "--set", "dt=0.1"]) == 0
    assert main(["compare", str(a), str(c), "--out-dir", str(tmp_path / "cmp2")]) == 2
    assert "dt" in manifest(tmp_path / "cmp2")["message"]


def test_verify_kernels_small_grid(tmp_path, capsys):
    assert main(["verify-kernels", "--out-dir", str(tmp_path), "--set", "n=32", "--set", "L=20"]) == 0
    assert capsys.readouterr().out.count("PASS") == 4
