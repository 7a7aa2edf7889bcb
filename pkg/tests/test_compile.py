import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qreplay.envs import CompileConfig, CompileEnv, action_space, evaluate
from qreplay.envs.compile import (
    EpisodeOver, decode_unitary, encode_unitary, step_reward, trace_fidelity,
)
from qreplay.qcore.gates import gate_matrix
from qreplay.qcore.unitary import haar_random_unitary
from qreplay.replay import Transition


def test_observation_and_action_sizes():
    one = CompileEnv(CompileConfig())
    two = CompileEnv(CompileConfig(gateset="two_qubit"))
    assert one.reset(np.eye(2)).shape == (8,) and two.reset(np.eye(4)).shape == (32,)
    assert [CompileEnv(CompileConfig(gateset=g)).n_actions
            for g in ("small_rotations_1q", "hrc_1q", "two_qubit")] == [6, 3, 8]


def test_identity_target_starts_at_fidelity_one():
    env = CompileEnv(CompileConfig())
    obs = env.reset(np.eye(2))
    assert np.array_equal(obs, [1, 0, 0, 1, 0, 0, 0, 0])
    assert env.fidelity() == 1.0


def test_reward_examples():
    dense = CompileConfig(max_len=130, tolerance=0.9)
    assert step_reward(dense, 0.95, 5) == (126.0, True)
    r, ok = step_reward(dense, 0.5, 5)
    assert not ok and r == pytest.approx(-0.5 / 130)
    sparse = CompileConfig(max_len=130, reward_mode="sparse", tolerance=0.9)
    assert step_reward(sparse, 0.5, 7) == (-1 / 130, False)
    assert step_reward(sparse, 0.95, 7) == (0.0, True)


def test_single_gate_target_immediate_success():
    cfg = CompileConfig(tolerance=0.9999)
    env = CompileEnv(cfg)
    rx = env.actions.index(next(g for g in env.actions if g.kind.value == "RX" and g.angle > 0))
    env.reset(gate_matrix(env.actions[rx], 1))
    _, reward, done, info = env.step(rx)
    assert done and info["success"] and info["fidelity"] == pytest.approx(1.0, abs=1e-12)
    assert reward == cfg.max_len
    with pytest.raises(EpisodeOver):
        env.step(rx)


def test_episode_ends_at_max_len():
    env = CompileEnv(CompileConfig(max_len=4, tolerance=0.9999), np.random.default_rng(0))
    env.reset(np.diag([1, 1j]))
    dones = [env.step(0)[2] for _ in range(4)]
    assert dones == [False, False, False, True]


@pytest.mark.parametrize("gateset", ["small_rotations_1q", "hrc_1q", "two_qubit"])
def test_residual_matches_direct_product(gateset):
    rng = np.random.default_rng(1)
    cfg = CompileConfig(gateset=gateset, max_len=60, tolerance=0.999999)
    env = CompileEnv(cfg, rng)
    target = haar_random_unitary(rng, cfg.dim)
    env.reset(target)
    u = np.eye(cfg.dim, dtype=complex)
    for a in rng.integers(env.n_actions, size=50):
        obs, r, done, info = env.step(a)
        u = u @ gate_matrix(env.actions[a], cfg.n_qubits)
        direct = u.conj().T @ target
        assert np.allclose(decode_unitary(obs, cfg.dim), direct, atol=1e-10)
        assert info["fidelity"] == pytest.approx(abs(np.trace(direct)) / cfg.dim, abs=1e-12)
        assert np.allclose(env.accumulated, u, atol=1e-12)
        if not info["success"]:
            assert -1 / cfg.max_len <= r <= 0
        if done:
            break


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * np.pi))
def test_fidelity_phase_invariant(seed, phi):
    u = haar_random_unitary(np.random.default_rng(seed), 2)
    assert trace_fidelity(u) == pytest.approx(trace_fidelity(np.exp(1j * phi) * u), abs=1e-12)


def test_hrc_observation_entries_bounded():
    rng = np.random.default_rng(2)
    env = CompileEnv(CompileConfig(gateset="hrc_1q", max_len=130, tolerance=0.999999), rng)
    obs, done = env.reset(), False
    while not done:
        obs, _, done, _ = env.step(rng.integers(3))
        assert np.all(np.abs(obs) <= 1 + 1e-12)


def test_random_policy_rarely_succeeds():
    rng = np.random.default_rng(3)
    cfg = CompileConfig(tolerance=0.9999, max_len=130)
    report = evaluate(lambda obs, mask: int(rng.integers(6)), cfg, 1000, [0.9999], rng)
    assert report[0.9999]["success_rate"] < 0.05


def test_inverse_gate_policy_solves_single_gate_targets():
    rng = np.random.default_rng(4)
    cfg = CompileConfig(gateset="hrc_1q", tolerance=0.9999)
    mats = [gate_matrix(g, 1) for g in action_space(cfg)]

    def copy_gate(obs, mask):
        o = decode_unitary(obs, 2)
        return int(np.argmax([abs(np.trace(m.conj().T @ o)) for m in mats]))

    targets = [mats[k] for k in rng.integers(3, size=50)]
    report = evaluate(copy_gate, cfg, 0, [0.9999], rng, targets=targets)
    assert report[0.9999]["success_rate"] == 1.0 and report[0.9999]["mean_len"] == 1.0


def test_untouched_fidelity_matches_haar_average():
    # eigenphase density of Haar U(2) is proportional to sin^2 of half the gap,
    # which gives E|Tr U|/2 = 4 / (3 pi)
    rng = np.random.default_rng(5)
    env = CompileEnv(CompileConfig(), rng)
    fids = np.array([trace_fidelity(env.sample_target()) for _ in range(20_000)])
    se = fids.std() / np.sqrt(fids.size)
    assert abs(fids.mean() - 4 / (3 * np.pi)) < 4 * se


def test_circuit_targets_reachable():
    rng = np.random.default_rng(6)
    cfg = CompileConfig(target_mode="circuit", target_max_len=20)
    env = CompileEnv(cfg, rng)
    for _ in range(20):
        u = env.sample_target()
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-10)


def test_her_hooks_relabel_consistently():
    rng = np.random.default_rng(7)
    cfg = CompileConfig(tolerance=0.99, max_len=30)
    env = CompileEnv(cfg, rng)
    obs = env.reset()
    goal = env.goal
    transitions = []
    for t in range(12):
        a = int(rng.integers(6))
        nxt, r, done, _ = env.step(a)
        transitions.append(Transition(obs, a, r, nxt, done, 0, t + 1, goal=goal))
        obs = nxt
        if done:
            break
    for i, tr in enumerate(transitions):
        achieved = env.achieved_goal(tr)
        s, s_next = env.relabel_states(tr, achieved)
        assert np.allclose(decode_unitary(s_next, 2), np.eye(2), atol=1e-10)
        reward, success = env.relabel_reward(tr, achieved)
        assert success and reward == cfg.max_len - tr.step + 1
        for later in transitions[i + 1:]:
            g = env.achieved_goal(later)
            _, s_next = env.relabel_states(tr, g)
            fid = trace_fidelity(decode_unitary(s_next, 2))
            _, ok = env.relabel_reward(tr, g)
            assert ok == (1 - fid < cfg.epsilon)


def test_encode_round_trip_and_validation():
    u = haar_random_unitary(np.random.default_rng(8), 4)
    assert np.array_equal(decode_unitary(encode_unitary(u), 4), u)
    env = CompileEnv(CompileConfig())
    with pytest.raises(ValueError):
        env.reset(np.eye(4))
    env.reset(np.eye(2))
    with pytest.raises(IndexError):
        env.step(6)
    with pytest.raises(ValueError):
        CompileConfig(tolerance=1.0)
