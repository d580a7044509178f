import csv
import json

import numpy as np
import pytest

from cio import config, sim_world
from cio.errors import NonFiniteState, SimulationError
from cio.sim_world import (CSV_COLUMNS, EncoderModel, SensorNoise, imu_model, run_scenario, wall_trial)


@pytest.fixture(scope="module")
def empty_run():
    return run_scenario(config.load(config.bundled("empty")))


@pytest.fixture(scope="module")
def corridor_run():
    return run_scenario(config.load(config.bundled("corridor")))


def test_imu_noise_is_seeded():
    noise = SensorNoise(0.05, 0.001, [0.1, 0.0, 0.0])
    a = imu_model(np.zeros(3), np.zeros(3), noise, np.random.default_rng(1))
    b = imu_model(np.zeros(3), np.zeros(3), noise, np.random.default_rng(1))
    np.testing.assert_array_equal(a.a, b.a)


def test_imu_bias_mean():
    noise = SensorNoise(0.05, 0.0, [0.1, -0.2, 0.0])
    rng = np.random.default_rng(0)
    samples = np.array([imu_model(np.zeros(3), np.zeros(3), noise, rng).a for _ in range(20000)])
    np.testing.assert_allclose(samples.mean(axis=0), [0.1, -0.2, 0.0], atol=2e-3)
    np.testing.assert_allclose(samples.std(axis=0), 0.05, rtol=0.03)


def test_encoder_differentiates_rate():
    enc = EncoderModel(SensorNoise(0.0, 0.0, encoder_sigma=0.0), np.random.default_rng(0), 0.005)
    out = [enc.sample(2.0 * k * 0.005, -1.0 * k * 0.005, k * 0.005) for k in range(5)]
    assert out[-1].gamma_dot_l == pytest.approx(2.0)
    assert out[-1].gamma_dot_r == pytest.approx(-1.0)


def test_noiseless_empty_flight_tracks_truth(empty_run):
    m = empty_run.metrics
    assert m["n_events"] == 0 and m["n_updates"] == 0
    assert m["max_err_cio"] < 1e-9 and m["max_err_pred"] < 1e-9
    np.testing.assert_allclose(m["final_position"], [5.0, 0.0, 1.0], atol=1e-3)


def test_without_updates_both_filters_agree(empty_run):
    tr = np.asarray(empty_run.traces)
    np.testing.assert_array_equal(tr[:, 7:10], tr[:, 10:13])


def test_wall_hit_reduces_perpendicular_error(corridor_run):
    updates = corridor_run.of_type("update")
    assert corridor_run.metrics["n_impacts"] >= 1 and len(updates) >= 1
    u = updates[0]
    assert u["err_normal_after"] < u["err_normal_before"]
    assert u["trace_after"] < u["trace_before"]


def test_detection_follows_impact(corridor_run):
    impact = corridor_run.of_type("impact")[0]
    contact = corridor_run.of_type("contact")[0]
    assert 0.0 <= contact["t"] - impact["t"] < 0.05


def test_prediction_only_ablation():
    cfg = config.load(config.bundled("corridor")).replace(cio=False, record_ticks=False)
    m = run_scenario(cfg).metrics
    assert m["n_updates"] == 0 and m["n_events"] >= 1


def test_run_log_files(corridor_run, tmp_path):
    corridor_run.write(tmp_path)
    lines = (tmp_path / "run.jsonl").read_text().splitlines()
    assert {json.loads(line)["type"] for line in lines} >= {"tick", "impact", "contact", "update", "reference"}
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["name"] == "corridor"
    with open(tmp_path / "traces.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + len(corridor_run.traces)


def test_module_errors_carry_sim_time(monkeypatch):
    calls = {"n": 0}
    real = sim_world.predict

    def failing(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] > 100:
            raise NonFiniteState("injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim_world, "predict", failing)
    cfg = config.load(config.bundled("empty")).replace(comparison=False)
    with pytest.raises(SimulationError) as info:
        run_scenario(cfg)
    assert info.value.t == pytest.approx(100 * sim_world.DT_SENSOR)
    assert isinstance(info.value.cause, NonFiniteState)


def test_bouncing_scenario_improves_vertical_error():
    m = run_scenario(config.load(config.bundled("bounce")).replace(record_ticks=False)).metrics
    assert m["n_updates"] >= 5
    assert m["bounce_improved_fraction"] >= 0.9


def test_rolling_scenario_constraint(tmp_path):
    cfg = config.load(config.bundled("rolling")).replace(duration=5.0)
    m = run_scenario(cfg).metrics
    assert m["max_constraint_residual"] < 1e-8


def test_wall_trial_direction():
    err = wall_trial(45.0, seed=0)
    assert err is not None and np.rad2deg(err) < 15.0


@pytest.mark.slow
def test_maze_traversal():
    m = run_scenario(config.load(config.bundled("maze")).replace(record_ticks=False, comparison=False)).metrics
    assert m["n_events"] >= 3
    assert m["exited_start_cell"]
