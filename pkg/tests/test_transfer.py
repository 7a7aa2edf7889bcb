import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qreplay import transfer as tmod
from qreplay.envs import NoiseModel
from qreplay.harness import ConfigError, load_config
from qreplay.replay import ReplayBuffer
from qreplay.transfer import (
    DEFAULT_WEIGHTS, relative_improvement, run_transfer, steps_to_threshold, transfer_score,
)

finite = st.floats(-1e6, 1e6)


def tiny_config():
    return load_config("transfer_heisenberg_3q").resolved(desk_scale=True).with_overrides({
        "env.n_qubits": 2, "env.max_steps": 4, "env.max_layers": 4, "env.m": 2,
        "env.max_iter": 20, "experiment.episodes": 3, "transfer.source_episodes": 3,
        "agent.hidden": [16], "agent.batch_size": 8, "agent.target_sync": 5,
    })


def test_score_examples():
    assert DEFAULT_WEIGHTS == (0.4, 0.1, 0.2, 0.3)
    assert transfer_score((50, 10, 20, 30)) == pytest.approx(34.0, abs=1e-12)
    assert transfer_score((0, 0, 0, 0)) == 0.0
    with pytest.raises(ValueError):
        transfer_score((1, 2, 3))


@settings(max_examples=100, deadline=None)
@given(st.tuples(finite, finite, finite, finite), st.tuples(finite, finite, finite, finite),
       st.floats(-10, 10))
def test_score_linear(a, b, k):
    lhs = transfer_score([x + k * y for x, y in zip(a, b)])
    rhs = transfer_score(a) + k * transfer_score(b)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


def test_relative_improvement():
    assert relative_improvement(200, 50) == 75.0
    assert relative_improvement(100, 150) == -50.0
    assert relative_improvement(0, 0) == 0.0


def test_steps_to_threshold_examples():
    series = [(10, 1.0), (20, 0.5), (30, 1e-4), (40, 0.2)]
    assert steps_to_threshold(series, 1.6e-3) == 30
    assert steps_to_threshold([(5, 1.0), (9, 0.4)], 1e-3) is None
    assert steps_to_threshold(series, 2.0) == 10
    assert steps_to_threshold([], 1.0) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=40), st.floats(0, 5))
def test_steps_to_threshold_oracle(errors, threshold):
    series = [(3 * (i + 1), e) for i, e in enumerate(errors)]
    hits = [s for s, e in series if e <= threshold]
    assert steps_to_threshold(series, threshold) == (hits[0] if hits else None)


def test_mismatched_buffer_aborts_before_training(monkeypatch):
    calls = []
    monkeypatch.setattr(tmod, "train_run", lambda *a, **k: calls.append(1))
    wrong = ReplayBuffer(10, state_dim=5, strategy="uniform", action_count=2)
    with pytest.raises(ConfigError):
        run_transfer(tiny_config(), seeds=[0], source_buffer=wrong)
    assert calls == []


def test_degenerate_transfer_report(tmp_path):
    cfg = tiny_config()
    report = run_transfer(cfg, seeds=[0, 1], noise=NoiseModel(0.0, 0.0), out_dir=tmp_path)
    assert all(math.isfinite(x) for x in report.deltas)
    assert report.score == pytest.approx(
        sum(w * d for w, d in zip(DEFAULT_WEIGHTS, report.deltas)), abs=1e-12)
    assert len(report.transfer_runs) == len(report.baseline_runs) == 2
    body = json.loads((tmp_path / "transfer_report.json").read_text())
    assert body["weights_sum"] == pytest.approx(1.0)
    assert set(body["deltas"]) == {"steps", "rot", "cnot", "err"}
    assert (tmp_path / "source.buf").is_file()
    again = run_transfer(cfg, seeds=[0, 1], noise=NoiseModel(0.0, 0.0))
    strip = lambda runs: [{k: v for k, v in r.__dict__.items() if k != "wall_ms"} for r in runs]  # noqa: E731
    assert strip(again.transfer_runs) == strip(report.transfer_runs)
    assert strip(again.baseline_runs) == strip(report.baseline_runs)


def test_transfer_from_buffer_file(tmp_path):
    cfg = tiny_config()
    first = run_transfer(cfg, seeds=[0], noise=NoiseModel(0.0, 0.0), out_dir=tmp_path)
    second = run_transfer(cfg, seeds=[0], source_buffer_file=tmp_path / "source.buf",
                          noise=NoiseModel(0.0, 0.0))
    assert second.source_buffer_file.endswith("source.buf")
    assert np.isfinite(second.score)
    assert [r.total_steps for r in second.baseline_runs] == \
        [r.total_steps for r in first.baseline_runs]
    with pytest.raises(FileNotFoundError):
        run_transfer(cfg, seeds=[0], source_buffer_file=tmp_path / "missing.buf")
