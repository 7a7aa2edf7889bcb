import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qreplay.envs import (
    CircuitTensor, CostFunction, Curriculum, NoiseModel, OptimizerConfig, QasConfig, QasEnv,
    build_circuit, circuit_energy, discrete_actions, encode_action_I, encode_action_II,
    encode_circuit, episode_stats, evaluation_steps, optimize_parameters, placements, qas_reward,
)
from qreplay.envs.qas import Encoding, EpisodeOver, PlacementError
from qreplay.qcore import (
    GateSpec, PauliHamiltonian, exact_ground_energy, expectation, heisenberg_hamiltonian,
    run_density, run_statevector,
)

Z1 = PauliHamiltonian(1, ((1.0, "Z"),))


def _env(h=None, **kw):
    h = h or heisenberg_hamiltonian(2)
    cfg = QasConfig(h, **{"optimizer": OptimizerConfig("none"), **kw})
    return QasEnv(cfg, Curriculum(xi=-1.0))


# -- amortization ------------------------------------------------------------------

def test_evaluation_count_law():
    rng = np.random.default_rng(0)
    for T, m in zip(rng.integers(1, 501, size=10_000), rng.choice([1, 3, 5, 7, 10, 15], 10_000)):
        steps = evaluation_steps(int(T), int(m))
        assert len(steps) == math.ceil(T / m) and steps[-1] == T
    assert evaluation_steps(25, 10) == [10, 20, 25]
    assert evaluation_steps(7, 1) == list(range(1, 8))


@pytest.mark.parametrize("T,m", [(25, 10), (12, 1), (9, 3), (11, 5), (4, 15)])
def test_environment_evaluates_on_schedule(T, m):
    env = _env(max_steps=T, max_layers=T + 1, m=m, mask_repeats=False)
    env.reset()
    rng = np.random.default_rng(T)
    evaluated, rewards, done = [], [], False
    while not done:
        _, r, done, info = env.step(int(rng.integers(env.n_actions)))
        rewards.append(r)
        if info["evaluated"]:
            evaluated.append(env.t)
    assert evaluated == evaluation_steps(T, m)
    assert all(r == 0.0 for t, r in enumerate(rewards, 1) if t not in evaluated)
    assert rewards[-1] == -5.0
    with pytest.raises(EpisodeOver):
        env.step(0)


def test_stale_cost_between_evaluations():
    env = _env(max_steps=10, max_layers=12, m=4)
    obs0 = env.reset()
    obs1, _, _, info = env.step(env.n_actions - 1)
    assert not info["evaluated"] and obs1[-1] == obs0[-1] == env.empty_cost


# -- reward and curriculum -------------------------------------------------------

def test_reward_examples():
    assert qas_reward(2.0, 1.0, 0.0) == 0.5
    assert qas_reward(2.0, 10.0, 0.0) == -1.0
    assert qas_reward(0.0, -5.0, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-60, 0))
def test_reward_clamped(prev, cost, c_min):
    r = qas_reward(prev, cost, c_min)
    assert -1.0 <= r <= 1.0


def test_success_reward_and_termination():
    env = QasEnv(QasConfig(Z1, optimizer=OptimizerConfig("cobyla", max_iter=200), max_steps=5),
                 Curriculum(xi=1e-3))
    env.reset()
    rx = next(i for i, a in enumerate(env.actions) if a == (1, 0, 0, 1))
    _, r, done, info = env.step(rx)
    assert info["success"] and done and r == 5.0
    assert info["error"] < 1e-3


def test_curriculum_examples():
    c = Curriculum(xi=0.5, shift_ball=0.001, shift_time=2000, success_threshold=50)
    for _ in range(1999):
        c.update(False)
    assert c.xi == 0.5
    c.update(False)
    assert c.xi == pytest.approx(0.499, abs=1e-15)
    assert Curriculum(xi=0.3).xi == 0.3


def test_curriculum_non_increasing():
    rng = np.random.default_rng(1)
    c = Curriculum(xi=1.0, shift_time=100, success_threshold=5)
    seq = [c.xi]
    for _ in range(10_000):
        seq.append(c.update(bool(rng.random() < 0.3), float(rng.exponential(0.2))))
    assert all(b <= a for a, b in zip(seq, seq[1:]))
    assert seq[-1] >= c.floor


# -- tensor encodings --------------------------------------------------------------

def test_encode_I_examples():
    s = CircuitTensor(3, 5)
    assert encode_action_I(s, [3, 0, 3, 1]) == [] and not s.tensor.any()
    writes = encode_action_I(s, [0, 1, 2, 3])
    assert len(writes) == 2 and np.count_nonzero(s.tensor) == 2
    assert s.tensor[0, 1, 0] == 1  # CNOT control 0, target 1
    assert s.tensor[0, 3 + 2, 2] == 1  # RZ on qubit 2
    assert list(s.moments) == [1, 1, 1]
    with pytest.raises(PlacementError):
        encode_action_I(s, [4, 0, 3, 1])


def test_encode_II_labels():
    s = CircuitTensor(3, 5)
    assert encode_action_II(s, [3] * 7 + [1]) == [] and not s.tensor.any()
    encode_action_II(s, [3, 0, 0, 2, 3, 0, 3, 1])
    assert s.tensor[0, 2, 0] == 2
    assert s.tensor.shape == (5, 6, 3)
    encode_action_II(s, [1, 1, 3, 0, 3, 0, 3, 1])
    encode_action_II(s, [3, 0, 3, 0, 0, 1, 3, 1])
    assert sorted(s.tensor[s.tensor > 0]) == [1, 2, 3]
    specs = [p[3].kind.value for p in placements(s.tensor, Encoding.II)]
    assert specs == ["RYY", "RXX", "RZZ"]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.lists(st.tuples(st.integers(0, 4), st.integers(0, 3),
                                             st.integers(0, 4), st.integers(1, 3)),
                                   max_size=25))
def test_moments_are_causal_and_round_trip(n, raw):
    s = CircuitTensor(n, 30)
    last = {}
    for a0, a1, a2, a3 in raw:
        a0, a2 = min(a0, n), min(a2, n)
        off = 1 + a1 % (n - 1)
        for layer, row, col in encode_action_I(s, [a0, off, a2, a3]):
            touched = (col, row) if row < n else (col,)
            for q in touched:
                assert layer > last.get(q, -1)
                last[q] = layer
    gates = build_circuit(s.tensor, "I")
    again = encode_circuit(gates, n, 30, "I")
    assert np.array_equal(again.tensor, s.tensor)


def test_build_circuit_examples():
    h = heisenberg_hamiltonian(2)
    empty = CircuitTensor(2, 4)
    assert build_circuit(empty.tensor, "I") == []
    zero = np.zeros(4, complex)
    zero[0] = 1
    assert circuit_energy([], h) == pytest.approx(expectation(h, zero), abs=1e-15)
    s = CircuitTensor(1, 2)
    s.place_rotation(0, 1)
    for theta in np.linspace(-3, 3, 7):
        gates = build_circuit(s.tensor, "I", [theta])
        assert circuit_energy(gates, Z1) == pytest.approx(math.cos(theta), abs=1e-12)
    with pytest.raises(ValueError):
        build_circuit(s.tensor, "I", [0.1, 0.2])


def test_discrete_action_counts():
    assert len(discrete_actions(3, "I")) == 3 * 2 + 3 * 3
    assert len(discrete_actions(3, "II")) == 3 * 3 * 2 + 3 * 3


# -- optimizer -----------------------------------------------------------------------

@pytest.mark.parametrize("method", ["cobyla", "nelder_mead", "param_shift_adam"])
def test_optimizer_single_rotation(method):
    cost = CostFunction([GateSpec("RX", (0,), 0.0)], Z1)
    theta, value = optimize_parameters(cost, OptimizerConfig(method, max_iter=500), [0.4])
    assert value == pytest.approx(-1.0, abs=1e-4)
    assert abs(math.cos(theta[0]) + 1) < 1e-4


def test_optimizer_never_worse_than_warm_start():
    h = heisenberg_hamiltonian(3)
    rng = np.random.default_rng(2)
    template = [GateSpec("RY", (q,), 0.0) for q in range(3)] + \
        [GateSpec("CNOT", (0, 1)), GateSpec("CNOT", (1, 2))] + \
        [GateSpec("RX", (q,), 0.0) for q in range(3)]
    for method in ("cobyla", "nelder_mead"):
        for _ in range(5):
            warm = rng.uniform(-np.pi, np.pi, 6)
            cost = CostFunction(template, h)
            start = cost(warm)
            _, value = optimize_parameters(cost, OptimizerConfig(method, max_iter=30), warm)
            assert value <= start


def test_two_qubit_ansatz_matches_grid_oracle():
    h = heisenberg_hamiltonian(2)
    template = [GateSpec("RY", (0,), 0.0), GateSpec("CNOT", (0, 1)), GateSpec("RY", (1,), 0.0)]
    # independent oracle: dense matrices with qubit 0 most significant
    ry = lambda t: np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    hm = h.matrix()
    grid = np.linspace(0, 2 * np.pi, 120, endpoint=False)
    best = np.inf
    for a in grid:
        for b in grid:
            psi = np.kron(np.eye(2), ry(b)) @ cnot @ np.kron(ry(a), np.eye(2))[:, 0]
            best = min(best, float(np.real(psi.conj() @ hm @ psi)))
    _, value = optimize_parameters(CostFunction(template, h), OptimizerConfig("cobyla"), [0.3, 0.2])
    assert value <= best + 1e-6
    assert value <= -3 + 0.2


def test_noise_free_density_matches_statevector():
    h = heisenberg_hamiltonian(3)
    rng = np.random.default_rng(3)
    gates = [GateSpec("RY", (0,), 0.4), GateSpec("CNOT", (0, 2)), GateSpec("RZ", (1,), -1.1),
             GateSpec("RXX", (1, 2), 0.7), GateSpec("RX", (2,), float(rng.normal()))]
    psi = run_statevector(gates, 3)
    rho = run_density(gates, 3, 0.0, 0.0)
    assert abs(expectation(h, psi) - expectation(h, rho)) < 1e-9
    assert circuit_energy(gates, h, NoiseModel(0.0, 0.0)) == pytest.approx(expectation(h, psi),
                                                                          abs=1e-9)
    noisy = circuit_energy(gates, h, NoiseModel(0.01, 0.02))
    assert noisy != pytest.approx(expectation(h, psi), abs=1e-6)


# -- episode statistics --------------------------------------------------------------

def test_episode_stats():
    env = _env(h=heisenberg_hamiltonian(3), max_steps=8, max_layers=8)
    env.reset()
    stats = episode_stats(env)
    assert stats["total_gates"] == 0
    assert stats["min_error"] == pytest.approx(env.empty_cost - exact_ground_energy(
        heisenberg_hamiltonian(3)))
    n = 3
    env.step(env.actions.index((0, 1, n, 1)))
    env.step(env.actions.index((n, 0, 0, 2)))
    env.step(env.actions.index((n, 0, 1, 3)))
    stats = env.end_episode()
    assert (stats["total_gates"], stats["cnot_count"], stats["rot_count"]) == (3, 1, 2)


def test_gate_identity_on_random_episodes():
    rng = np.random.default_rng(4)
    env = _env(h=heisenberg_hamiltonian(3), max_steps=15, max_layers=6, m=5)
    for _ in range(20):
        env.reset()
        done = False
        while not done:
            legal = np.flatnonzero(env.legal_mask())
            _, _, done, _ = env.step(int(rng.choice(legal)))
        stats = env.end_episode()
        assert stats["total_gates"] == stats["cnot_count"] + stats["rot_count"]
        assert stats["evals"] == len(env.evaluations)


def test_config_validation():
    with pytest.raises(ValueError):
        QasConfig(Z1, m=0)
    with pytest.raises(ValueError):
        QasEnv(QasConfig(Z1, c_min=0.0))
