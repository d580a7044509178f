import json

import numpy as np
import pytest

from cio import cli, sim_world
from cio.contact_solver import TotalWrench, forward_wrench, random_contact
from cio.errors import NonFiniteState
from cio.params import VehicleParams


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "maze"
    assert cli.main(["run", "--config", "maze", "--duration", "2", "--out", str(out)]) == 0
    for name in ("run.jsonl", "metrics.json", "traces.csv"):
        assert (out / name).exists()
    assert json.loads(capsys.readouterr().out)["duration"] == pytest.approx(2.0)


def test_same_seed_same_metrics(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "--config", "corridor", "--seed", "42", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "metrics.json").read_bytes() == (tmp_path / "b" / "metrics.json").read_bytes()
    assert (tmp_path / "a" / "run.jsonl").read_bytes() == (tmp_path / "b" / "run.jsonl").read_bytes()


def test_malformed_config_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("version: 1\nnoise:\n  accel_sigma: -1\n")
    assert cli.main(["run", "--config", str(path)]) == 1
    assert "noise.accel_sigma" in capsys.readouterr().err


def test_missing_config_exit_1():
    assert cli.main(["run", "--config", "/no/such/file.cfg"]) == 1


def test_simulation_error_exit_2(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise NonFiniteState("injected")

    monkeypatch.setattr(sim_world, "predict", broken)
    assert cli.main(["run", "--config", "empty", "--out", str(tmp_path)]) == 2
    assert "t=0.0000s" in capsys.readouterr().err


def test_overrides(tmp_path, capsys):
    assert cli.main(["run", "--config", "corridor", "--duration", "1", "--no-cio", "--out", str(tmp_path)]) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["cio"] is False and m["duration"] == pytest.approx(1.0)


def test_batch_merges_by_seed(tmp_path):
    out = tmp_path / "batch"
    args = ["run", "--config", "corridor", "--duration", "1", "--batch", "3", "--workers", "2", "--out", str(out)]
    assert cli.main(args) == 0
    merged = json.loads((out / "batch.json").read_text())
    assert [r["seed"] for r in merged] == [11, 12, 13]
    assert all((out / f"seed_{s}" / "metrics.json").exists() for s in (11, 12, 13))


def test_compare_empty_identical(tmp_path, capsys):
    assert cli.main(["compare", "--config", "empty", "--duration", "2", "--out", str(tmp_path)]) == 0
    data = np.genfromtxt(tmp_path / "compare.csv", delimiter=",", names=True)
    np.testing.assert_array_equal(data["ex_cio"], data["ex_pred"])
    np.testing.assert_array_equal(data["err_cio"], data["err_pred"])


def test_compare_corridor(tmp_path, capsys):
    assert cli.main(["compare", "--config", "corridor", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_updates"] >= 1
    assert summary["max_err_cio"] <= summary["max_err_pred"]


def test_solve_contacts(tmp_path):
    p = VehicleParams.load()
    rng = np.random.default_rng(0)
    truths = [random_contact(rng, p) for _ in range(5)]
    records = [forward_wrench(s, p).to_record() for s in truths]
    records.insert(2, TotalWrench([-2.0, 0.0, p.m_t * p.g], [0.0, 0.0, 0.0], 5.0, 5.0).to_record())
    src = tmp_path / "w.jsonl"
    src.write_text("".join(json.dumps(r) + "\n" for r in records))
    dst = tmp_path / "s.jsonl"
    assert cli.main(["solve-contacts", str(src), "--out", str(dst)]) == 0
    out = [json.loads(line) for line in dst.read_text().splitlines()]
    assert len(out) == 6 and "error" in out[2]
    for rec in out[:2] + out[3:]:
        for key in ("p_l", "p_r"):
            assert abs(np.hypot(rec[key][0], rec[key][2]) - p.R) < 1e-9


def test_solve_contacts_empty(tmp_path):
    src = tmp_path / "empty.jsonl"
    src.write_text("")
    dst = tmp_path / "out.jsonl"
    assert cli.main(["solve-contacts", str(src), "--out", str(dst)]) == 0
    assert dst.read_text() == ""


def test_validate(capsys):
    assert cli.main(["validate"]) == 0
    report = capsys.readouterr().out
    assert "max residual" in report and "FAIL" not in report


def test_validate_mutation_detected(capsys):
    assert cli.main(["validate", "--mutate"]) == 1
    lines = capsys.readouterr().out.splitlines()
    solver = [line for line in lines if line.startswith("contact solver: analytic vs brute force")]
    assert solver and solver[0].endswith("FAIL")
