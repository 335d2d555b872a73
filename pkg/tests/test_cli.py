import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mecoffload.cli import main

DESK = "seed = 3\n[sim]\nnum_mds = 3\nnum_eds = 2\nepisode_slots = 20\n"
TRAIN = ("[train]\nstep_max = 240\nn_rollout = 2\nchunk_len = 5\nhidden = 8\n"
         "eval_interval = 120\neval_episodes = 2\n")


@pytest.fixture
def files(tmp_path):
    (tmp_path / "env.toml").write_text(DESK)
    (tmp_path / "train.toml").write_text(TRAIN)
    return tmp_path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _ok(*argv):
    assert main([str(a) for a in argv]) == 0


def test_simulate_omd_has_no_transmission_energy(files):
    _ok("simulate", "--config", files / "env.toml", "--policy", "omd", "--episodes", 3,
        "--out", files / "omd")
    rows = _rows(files / "omd" / "episodes.csv")
    assert len(rows) == 3 and all(float(r["e_tra_j"]) == 0.0 for r in rows)
    summary = json.loads((files / "omd" / "summary.json").read_text())
    assert summary["neg_cost"] == -summary["cost"] and summary["episodes"] == 3


def test_simulate_is_repeatable(files):
    for out in ("a", "b"):
        _ok("simulate", "--config", files / "env.toml", "--episodes", 2, "--out", files / out)
    for name in ("episodes.csv", "summary.json"):
        assert (files / "a" / name).read_bytes() == (files / "b" / name).read_bytes()


def test_oed_with_edge_devices_down_always_fails(files):
    (files / "down.toml").write_text(DESK + "ed_disconnect_prob = 1.0\nmd_disconnect_prob = 0.0\n")
    _ok("simulate", "--config", files / "down.toml", "--policy", "oed", "--episodes", 3,
        "--out", files / "down")
    summary = json.loads((files / "down" / "summary.json").read_text())
    assert summary["fail_rate"] == 1.0


def test_train_zero_steps_then_resume(files):
    _ok("train", "--config", files / "env.toml", "--train-config", files / "train.toml",
        "--steps", 0, "--out", files / "t0")
    assert (files / "t0" / "checkpoint.npz").exists()
    assert len(_rows(files / "t0" / "curve.csv")) == 0
    _ok("train", "--config", files / "env.toml", "--train-config", files / "train.toml",
        "--steps", 120, "--out", files / "t1")
    _ok("train", "--config", files / "env.toml", "--train-config", files / "train.toml",
        "--checkpoint", files / "t1" / "checkpoint.npz", "--out", files / "t2")
    first, resumed = _rows(files / "t1" / "curve.csv"), _rows(files / "t2" / "curve.csv")
    assert [r["total_steps"] for r in first] == ["120"]
    assert [r["total_steps"] for r in resumed] == ["120", "240"]
    assert resumed[0] == first[0]
    for r in resumed:
        assert float(r["eval_neg_cost"]) == -float(r["eval_mean_cost"])
    assert set(resumed[0]) >= {"eval_cost_epri", "eval_cost_drop", "eval_cost_fail",
                               "eval_cost_bd", "agent0_cost", "agent2_cost"}


def test_evaluate_reads_env_config_from_checkpoint(files):
    _ok("train", "--config", files / "env.toml", "--train-config", files / "train.toml",
        "--steps", 0, "--out", files / "t")
    ck = files / "t" / "checkpoint.npz"
    _ok("evaluate", "--checkpoint", ck, "--episodes", 2, "--out", files / "e1")
    _ok("evaluate", "--checkpoint", ck, "--config", files / "env.toml", "--episodes", 2,
        "--out", files / "e2")
    assert (files / "e1" / "summary.json").read_bytes() == (files / "e2" / "summary.json").read_bytes()


def test_sweep_trends_for_random_policy(files):
    _ok("sweep", "--config", files / "env.toml", "--axis", "battery", "--values",
        "600,800,1000,1200", "--policy", "random,omd", "--episodes", 4, "--out", files / "b.csv")
    rows = _rows(files / "b.csv")
    assert len(rows) == 4 * 2 * 4
    means = [np.mean([float(r["cost"]) for r in rows if r["policy"] == "random" and float(r["value"]) == v])
             for v in (600, 800, 1000, 1200)]
    assert all(a >= b for a, b in zip(means, means[1:]))
    _ok("sweep", "--config", files / "env.toml", "--axis", "genprob", "--values", "0.5,0.7,0.9",
        "--episodes", 4, "--out", files / "g.csv")
    rows = _rows(files / "g.csv")
    means = [np.mean([float(r["cost"]) for r in rows if float(r["value"]) == v]) for v in (0.5, 0.7, 0.9)]
    assert all(a <= b for a, b in zip(means, means[1:]))


def test_sweep_cpufreq_with_per_value_checkpoints(files):
    _ok("train", "--config", files / "env.toml", "--train-config", files / "train.toml",
        "--steps", 0, "--out", files / "dvfs")
    (files / "fixed.toml").write_text(DESK + "[dvfs.md]\nfrequencies = [1.8e9]\nvoltages = [1.2]\n"
                                      "[dvfs.ed]\nfrequencies = [2.6e9]\nvoltages = [1.3]\n")
    _ok("train", "--config", files / "fixed.toml", "--train-config", files / "train.toml",
        "--steps", 0, "--out", files / "fixed")
    _ok("sweep", "--config", files / "env.toml", "--axis", "cpufreq", "--values", "dvfs,fixed-max",
        "--policy", "trained,random", "--checkpoint", f"dvfs={files / 'dvfs' / 'checkpoint.npz'}",
        "--checkpoint", f"fixed-max={files / 'fixed' / 'checkpoint.npz'}", "--episodes", 2,
        "--out", files / "c.csv")
    rows = _rows(files / "c.csv")
    assert {(r["policy"], r["value"]) for r in rows} == {
        ("trained", "dvfs"), ("trained", "fixed-max"), ("random", "dvfs"), ("random", "fixed-max")}


def test_trace_conservation_and_coverage(files):
    _ok("trace", "--config", files / "env.toml", "--out", files / "tr")
    tasks = [json.loads(line) for line in (files / "tr" / "tasks.jsonl").read_text().splitlines()]
    keys = [(t["agent"], t["g"]) for t in tasks]
    assert len(keys) == len(set(keys))
    for a in range(3):
        gs = sorted(g for ag, g in keys if ag == a)
        assert gs == list(range(1, len(gs) + 1))
    per_device = np.zeros(5)
    for t in tasks:
        per_device[t["agent"]] += t["E_tra"]
        per_device[t["target"]] += t["E_rec"] + t["E_exe"]
        if t["Ds"]:
            assert t["E_tra"] == t["E_rec"] == t["E_exe"] == 0.0
    devices = _rows(files / "tr" / "devices.csv")
    drain = np.array([float(d["drain_j"]) for d in devices])
    assert np.allclose(drain, per_device, atol=1e-9, rtol=0)
    battery = _rows(files / "tr" / "battery.csv")
    drawn = np.zeros(5)
    for r in battery:
        drawn[int(r["device"])] += float(r["power_w"]) * float(r["duration_s"])
    assert np.allclose(drawn, drain, atol=1e-9, rtol=0)
    assert list(battery[0]) == ["device", "t_start_s", "duration_s", "power_w", "b_start_j"]


@pytest.mark.parametrize("argv,field", [
    (["simulate", "--policy", "dqn"], "policy"),
    (["simulate", "--config", "/no/such.toml"], "config"),
    (["sweep", "--axis", "speed", "--values", "1"], "axis"),
    (["sweep", "--axis", "battery", "--values", "a,b"], "values"),
    (["sweep", "--axis", "battery", "--values", "-5"], "values"),
    (["sweep", "--axis", "cpufreq", "--values", "turbo"], "values"),
    (["evaluate", "--checkpoint", "/no/such.npz"], "checkpoint"),
    (["simulate", "--episodes", "0"], "episodes"),
    (["frobnicate"], "args"),
])
def test_invalid_input_exits_1(files, capsys, argv, field):
    argv = argv + ["--out", str(files / "x.csv" if argv[0] == "sweep" else files / "x")] \
        if argv[0] != "frobnicate" else argv
    assert main(argv) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    record = json.loads(err[0])
    assert record["error"] == "invalid" and record["field"] == field


def test_bad_config_value_names_field(files, capsys):
    (files / "bad.toml").write_text("[link]\nn_tot = 0\n")
    assert main(["simulate", "--config", str(files / "bad.toml"), "--out", str(files / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["field"] == "n_tot"


def test_unwritable_output(files, capsys):
    (files / "blocker").write_text("")
    assert main(["simulate", "--out", str(files / "blocker" / "sub")]) == 1
    assert json.loads(capsys.readouterr().err)["field"] == "out"


def test_console_entry_point_exit_codes(files):
    proc = subprocess.run([sys.executable, "-m", "mecoffload", "simulate", "--policy", "nope",
                           "--out", str(files / "o")], capture_output=True, text=True)
    assert proc.returncode == 1 and len(proc.stderr.strip().splitlines()) == 1
    proc = subprocess.run([sys.executable, "-m", "mecoffload", "simulate", "--config",
                           str(files / "env.toml"), "--episodes", "1", "--out", str(files / "o")],
                          capture_output=True, text=True, env={"MECOFFLOAD_LOG": "INFO",
                                                               "PATH": "/usr/bin:/bin"})
    assert proc.returncode == 0 and "mean cost" in proc.stderr


def test_runtime_failure_exits_2(files, capsys, monkeypatch):
    import mecoffload.cli as cli

    def boom(*a, **k):
        raise RuntimeError("simulated fault")

    monkeypatch.setattr(cli, "_episodes", boom)
    assert main(["simulate", "--out", str(files / "o")]) == 2
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "runtime" and "simulated fault" in record["message"]
