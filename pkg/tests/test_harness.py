import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from avalanche_lab import cli, dynamics, formats, harness
from avalanche_lab.harness import ExperimentConfig
from avalanche_lab.lattice import Annulus, Ball, Lozenge


def test_parse_region():
    assert harness.parse_region("ball:12") == Ball(12)
    assert harness.parse_region("lozenge:8") == Lozenge(8)
    assert harness.parse_region("annulus:2:6") == Annulus(2, 6)
    with pytest.raises(ValueError):
        harness.parse_region("torus:4")


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="nope").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(kind="fp").validate()  # missing N
    with pytest.raises(ValueError):
        ExperimentConfig(kind="ffwor", zeta=0.1).validate()  # missing horizon
    with pytest.raises(ValueError):
        ExperimentConfig(kind="fp", n_threshold=5, replicas=0).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(kind="birth", times=(0.5, 0.1)).validate()
    ExperimentConfig(kind="fp", n_threshold=5).validate()


def test_run_experiment_deterministic_across_parallelism(tmp_path):
    cfg = ExperimentConfig(kind="fp", region="ball:8", n_threshold=10,
                           replicas=6, seed=42, radii=(4, 8))
    r1 = harness.run_experiment(cfg, threads=1)
    r2 = harness.run_experiment(cfg, threads=2)
    assert r1.data_csv == r2.data_csv
    m1 = dict(r1.manifest)
    m2 = dict(r2.manifest)
    m1.pop("wall_time")
    m2.pop("wall_time")
    assert formats.dump_summary_json(m1) == formats.dump_summary_json(m2)
    # repeated run byte-identical
    r3 = harness.run_experiment(cfg, threads=1)
    assert r3.data_csv == r1.data_csv


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("AVALANCHE_THREADS", "1")
    assert harness.thread_cap(8) == 1
    monkeypatch.delenv("AVALANCHE_THREADS")
    assert harness.thread_cap(2) == 2


def test_run_experiment_ffwor_and_outputs(tmp_path):
    cfg = ExperimentConfig(kind="ffwor", region="ball:8", zeta=0.05,
                           horizon=1.5, replicas=3, seed=1,
                           out=str(tmp_path / "o"))
    res = harness.run_experiment(cfg)
    data, man = (tmp_path / "o" / "ffwor_data.csv",
                 tmp_path / "o" / "ffwor_manifest.json")
    assert data.exists() and man.exists()
    manifest = json.loads(man.read_text())
    assert manifest["config"]["zeta"] == 0.05
    assert len(manifest["replica_seeds"]) == 3
    assert manifest["truncation_flags"]["dead_partition_ok"] == [True, True, True]


def test_fp_zero_freeze_rows_when_threshold_unreachable():
    cfg = ExperimentConfig(kind="fp", region="ball:4", n_threshold=10**6,
                           replicas=2, seed=3)
    res = harness.run_experiment(cfg)
    # only the header: no surrounding clusters, no freezes at all
    assert res.data_csv.strip().splitlines()[1:] == []


def test_birth_and_impurity_runners():
    cfg = ExperimentConfig(kind="birth", region="ball:10", times=(0.1, 0.7),
                           replicas=2, seed=5)
    res = harness.run_experiment(cfg)
    assert "replica," in res.data_csv
    cfg2 = ExperimentConfig(kind="impurity", region="ball:10", p=0.5,
                            zeta=0.05, eps_bar=0.3, m_scale=4.0,
                            replicas=2, seed=5)
    res2 = harness.run_experiment(cfg2)
    assert "occupied_fraction" in res2.data_csv


def test_selftest_suites_pass():
    for suite in ("oracle", "duality", "invariants", "scales"):
        rep = harness.selftest(suite)
        assert rep.passed, rep.lines


def test_selftest_detects_corrupted_engine():
    def corrupted(region, N, rule="original", seed=0, replica=0, birth_order=None):
        final, log = dynamics.run_frozen(region, N, rule, seed=seed,
                                         replica=replica, birth_order=birth_order)
        log.time = log.time + 1e-9  # perturb the log
        return final, log

    rep = harness.selftest("oracle", frozen_engine=corrupted)
    assert not rep.passed


def test_selftest_rejects_unknown_suite():
    with pytest.raises(ValueError):
        harness.selftest("bogus")


# ---------------------------------------------------------------------------
# CLI


def test_cli_simulate_and_files(tmp_path):
    rc = cli.main(["simulate", "fp", "--region", "ball:8", "--N", "10",
                   "--replicas", "2", "--seed", "9", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "fp_data.csv").exists()
    assert (tmp_path / "fp_manifest.json").exists()


def test_cli_invalid_config_exits_nonzero(capsys):
    rc = cli.main(["simulate", "fp", "--region", "ball:8", "--replicas", "1"])
    assert rc == 2
    assert "invalid config" in capsys.readouterr().err


def test_cli_config_file(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("region = ball:6\nn_threshold = 8\nreplicas = 2\n")
    rc = cli.main(["simulate", "fp", "--config", str(cfgfile), "--seed", "4",
                   "--out", str(tmp_path / "out")])
    assert rc == 0
    manifest = json.loads((tmp_path / "out" / "fp_manifest.json").read_text())
    assert manifest["config"]["region"] == "ball:6"
    assert manifest["config"]["n_threshold"] == 8


def test_cli_verify_and_scales(tmp_path, capsys):
    assert cli.main(["verify", "duality"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "OK" in out
    rc = cli.main(["scales", "schedule", "--model", "fp", "--ln-param", "1e6",
                   "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "schedule.csv").exists()
    assert (tmp_path / "scales_manifest.json").exists()
    rc = cli.main(["scales", "constants", "--model", "ff", "--zeta", "1e-4",
                   "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "constants.csv").exists()


def test_cli_estimate(tmp_path):
    rc = cli.main(["estimate", "pi1", "--n", "4,8", "--samples", "50",
                   "--seed", "2", "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "pi1.csv").read_text()
    assert text.startswith("n,estimate")
    rc = cli.main(["estimate", "theta", "--p", "0.7", "--n", "16",
                   "--samples", "50", "--out", str(tmp_path)])
    assert rc == 0


def test_cli_entrypoint_subprocess(tmp_path):
    env = dict(os.environ)
    env["PYTHONPATH"] = str(Path(__file__).resolve().parents[1] / "src")
    proc = subprocess.run(
        [sys.executable, "-m", "avalanche_lab.cli", "verify", "scales"],
        capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "OK" in proc.stdout
