"""End-to-end command line behavior through subprocesses: exit codes,
state files, and byte-level reproducibility of emitted CSVs."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from moesemcom.data import load_dataset, make_dataset, save_dataset
from moesemcom.errors import ConfigError

CMD = [sys.executable, "-m", "moesemcom"]

SMALL = {
    "dataset": {"n_train": 512, "n_test": 256},
    "training": {
        "epochs_normal": 4, "epochs_robust": 3, "epochs_private": 4,
        "epochs_covert_auto": 30, "epochs_covert_chan": 6,
        "epochs_eaves": 4, "gate_samples": 512, "gate_epochs": 8,
    },
    "eval_samples": 96,
}


def run(*args):
    return subprocess.run(CMD + list(args), capture_output=True, text=True)


@pytest.fixture(scope="module")
def station(tmp_path_factory):
    """A workdir holding dataset + normal + robust + gate, built via the CLI.

    The private expert is deliberately left untrained so runtime failures
    have something real to trip over."""
    root = tmp_path_factory.mktemp("cli")
    cfg = dict(SMALL)
    cfg["paths"] = {"workdir": str(root / "work")}
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    flags = ["--config", str(cfg_path)]
    for step in (["gen-data"], ["train", "--expert", "normal"],
                 ["train", "--expert", "robust"], ["train-gate"]):
        proc = run(*step, *flags)
        assert proc.returncode == 0, proc.stderr
    return root, flags


# -------------------------------------------------------------- exit codes


def test_no_arguments_is_a_usage_error():
    assert run().returncode == 1


def test_unknown_subcommand_prints_usage():
    proc = run("frobnicate")
    assert proc.returncode == 1
    assert "usage" in proc.stderr.lower()


def test_help_exits_clean():
    proc = run("--help")
    assert proc.returncode == 0
    for name in ("gen-data", "train", "train-gate", "attack-eval",
                 "run-scenario", "report"):
        assert name in proc.stdout


def test_covert_training_requires_rho(station):
    _, flags = station
    proc = run("train", "--expert", "covert", *flags)
    assert proc.returncode == 1
    assert "--rho" in proc.stderr


def test_seed_must_be_u64():
    proc = run("gen-data", "--seed", str(2 ** 64))
    assert proc.returncode == 1


def test_missing_expert_is_a_runtime_failure(station):
    _, flags = station
    proc = run("run-scenario", "--id", "d", *flags)
    assert proc.returncode == 2
    assert "not registered" in proc.stderr


def test_private_training_needs_the_normal_carrier(tmp_path):
    cfg = dict(SMALL)
    cfg["paths"] = {"workdir": str(tmp_path / "empty")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = run("train", "--expert", "private", "--config", str(cfg_path))
    assert proc.returncode == 2
    assert "normal" in proc.stderr


def test_bad_config_file_is_a_runtime_failure(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dataset": {"mystery_knob": 3}}')
    proc = run("gen-data", "--config", str(bad))
    assert proc.returncode == 2
    assert "mystery_knob" in proc.stderr


def test_report_with_no_results_fails(tmp_path):
    cfg = dict(SMALL)
    cfg["paths"] = {"workdir": str(tmp_path / "empty")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = run("report", "--out", str(tmp_path / "r.csv"),
               "--config", str(cfg_path))
    assert proc.returncode == 2


# ------------------------------------------------------------- happy path


def test_gen_data_writes_the_configured_split(station):
    root, _ = station
    ds = load_dataset(root / "work" / "dataset.npz")
    fresh = make_dataset(k=8, n_train=512, n_test=256, seed=0)
    assert ds.k == 8 and ds.class_names == fresh.class_names
    assert np.array_equal(ds.x_train, fresh.x_train)
    assert np.array_equal(ds.y_test, fresh.y_test)


def test_scenario_csv_is_reproducible(station):
    root, flags = station
    csv_path = root / "work" / "scenario_a.csv"
    assert run("run-scenario", "--id", "a", *flags).returncode == 0
    first = csv_path.read_bytes()
    assert run("run-scenario", "--id", "a", *flags).returncode == 0
    assert csv_path.read_bytes() == first
    header = first.decode().splitlines()[0]
    assert header == "scenario,expert_set,snr_db,metric,value,seed"


def test_report_merges_scenario_files(station):
    root, flags = station
    out = root / "merged.csv"
    proc = run("report", "--out", str(out), *flags)
    assert proc.returncode == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scenario,expert_set,snr_db,metric,value,seed"
    assert len(lines) > 1
    assert all(line.startswith("a,") for line in lines[1:])


def test_attack_eval_reports_json(station):
    root, flags = station
    spec = root / "spec.json"
    spec.write_text(json.dumps({"surface": "source", "epsilon": 0.03,
                                "steps": 3, "kinds": ["robust"],
                                "snr_db": 12}))
    proc = run("attack-eval", "--spec", str(spec), *flags)
    assert proc.returncode == 0
    out = json.loads(proc.stdout)
    assert out["surface"] == "source"
    assert 0.0 <= out["accuracy"] <= 1.0


def test_attack_eval_rejects_unknown_keys(station):
    root, flags = station
    spec = root / "bad_spec.json"
    spec.write_text(json.dumps({"surface": "source", "budget": 1}))
    proc = run("attack-eval", "--spec", str(spec), *flags)
    assert proc.returncode == 2
    assert "budget" in proc.stderr


def test_checkpoint_flag_overrides_the_default_path(station, tmp_path):
    root, flags = station
    alt = tmp_path / "alt.smck"
    proc = run("train", "--expert", "normal", *flags,
               "--checkpoint", str(alt))
    assert proc.returncode == 0
    assert alt.exists()
    # the shared fixture checkpoint is untouched
    assert (root / "work" / "checkpoint.smck").exists()


# ---------------------------------------------------------- npz round trip


def test_dataset_round_trip(tmp_path):
    ds = make_dataset(k=4, n_train=32, n_test=16, seed=11)
    path = tmp_path / "ds.npz"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.k == ds.k and back.seed == ds.seed
    assert back.class_names == ds.class_names
    for field in ("x_train", "y_train", "x_test", "y_test"):
        assert np.array_equal(getattr(back, field), getattr(ds, field))
    assert back.y_train.dtype == np.int64


def test_unreadable_dataset_file(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"not a zipfile at all")
    with pytest.raises(ConfigError):
        load_dataset(path)
