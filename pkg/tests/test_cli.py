import csv
import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from viscoflux import cli, solver, verify
from viscoflux.model import read_snapshot

SMALL = "[grid]\nN = 16\n[init]\nband_hi = 3\n[time]\nT_end = 0.2\ndt = 0.02\nrecord_every = 2\n"


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _check_manifest(out):
    man = json.loads((out / "manifest.json").read_text())
    for entry in man["outputs"]:
        data = (out / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    assert not [f for f in os.listdir(out) if f.startswith(".tmp")]
    return man


def test_partition(tmp_path, capsys):
    assert cli.main(["partition", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "partition.csv")
    assert [int(r["j"]) for r in rows] == list(range(-1, 6))
    assert max(float(r["max_partition_deviation"]) for r in rows) < 1e-10
    assert max(float(r["max_offdiagonal_residual"]) for r in rows) < 1e-14
    assert max(float(r["bernstein_ratio"]) for r in rows) <= 8 / 3
    assert "R0 = 2" in capsys.readouterr().out
    man = _check_manifest(tmp_path)
    assert man["command"] == "partition" and man["seed"] == 0


def test_modes(tmp_path):
    assert cli.main(["modes", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "modes.csv")
    assert len(rows) == 10 and rows[4]["regime_P"] == "critical"
    b = _rows(tmp_path / "modes_boundary.csv")
    assert float(b[0]["abs_error"]) < 1e-12 and float(b[0]["boundary"]) == 2.0


def test_simulate_outputs(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", small_cfg, "--out", str(out), "--seed", "3"]) == 0
    for name in ("trajectory.csv", "energy.csv", "fits.csv", "monitor.csv", "shells.csv",
                 "snapshot_final.vflx"):
        assert (out / name).exists()
    traj = _rows(out / "trajectory.csv")
    assert [float(r["t"]) for r in traj] == pytest.approx([0.0, 0.04, 0.08, 0.12, 0.16, 0.2])
    header, fields = read_snapshot(out / "snapshot_final.vflx")
    assert header["t"] == pytest.approx(0.2) and set(fields) == {"a", "p", "tau", "u"}
    man = _check_manifest(out)
    assert man["seed"] == 3 and man["config"]["grid"]["N"] == 16
    mon = _rows(out / "monitor.csv")
    assert mon[0]["quantity"] == "E_norm" and mon[0]["monitored"] == "true"


def test_simulate_snapshots_and_float_repr(tmp_path):
    cfgp = tmp_path / "c.ini"
    cfgp.write_text(SMALL + "[run]\nsnapshot_every = 2\nmode = primitive\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(cfgp), "--out", str(out)]) == 0
    snaps = sorted(f for f in os.listdir(out) if f.startswith("snapshot_0"))
    assert snaps == ["snapshot_00000.vflx", "snapshot_00002.vflx", "snapshot_00004.vflx"]
    _, fields = read_snapshot(out / snaps[0])
    assert set(fields) == {"rho", "u", "F"}
    cfg = cli.configmod.load(str(cfgp))
    tr = solver.simulate(cfg.sim)
    rows = _rows(out / "trajectory.csv")
    # floats are written with repr, so they round-trip exactly
    assert [float(r["min_det"]) for r in rows] == tr.scalars["min_det"]


def test_simulate_is_deterministic(tmp_path, small_cfg):
    digests = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        cli.main(["simulate", "--config", small_cfg, "--out", str(out), "--seed", "5"])
        digests.append((out / "trajectory.csv").read_bytes())
    assert digests[0] == digests[1]


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nbogus = 1\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["modes", "--config", str(tmp_path / "missing.ini")]) == 2


def test_bad_thread_count_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv("VISCOFLUX_THREADS", "zero")
    assert cli.main(["modes", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("VISCOFLUX_THREADS", "1")
    assert cli.main(["modes", "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("status,code", [("blowup", 3), ("instability", 5)])
def test_failed_runs_exit_codes(tmp_path, small_cfg, monkeypatch, status, code):
    real = cli.simulate

    def failing(config, on_record=None):
        tr = real(config, on_record)
        tr.status, tr.error = status, "forced"
        return tr

    monkeypatch.setattr(cli, "simulate", failing)
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", small_cfg, "--out", str(out)]) == code
    assert (out / "manifest.json").exists()


def test_verify_pass_and_fail(tmp_path, monkeypatch, capsys):
    assert cli.main(["verify", "--suite", "spectrum", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "verify_spectrum.csv")
    assert rows and all(r["status"] == "pass" for r in rows)
    assert "PASS spectrum.vieta_identities" in capsys.readouterr().out

    def failing(name, **kw):
        return [verify.Check("forced", "fail", 1.0, 0.5)]

    monkeypatch.setattr(verify, "run_suite", failing)
    assert cli.main(["verify", "--suite", "spectrum", "--out", str(tmp_path)]) == 4


def test_entry_point_module(tmp_path):
    res = subprocess.run([sys.executable, "-m", "viscoflux", "modes", "--out", str(tmp_path)],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "modes.csv").exists()


def test_fit_rows_columns(tmp_path):
    cfg = cli.configmod.load_text("[grid]\nN = 32\n[time]\nT_end = 2\n")
    tr = solver.simulate(cfg.sim)
    rows = cli.fit_rows(tr, cfg.fit_window)
    assert all(len(r) == len(cli.FIT_COLUMNS) for r in rows)
    high = [r for r in rows if r[0] == "theta_high"][0]
    assert high[5] == 1.0 and np.isfinite(high[3])
