import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qreplay.agent import (
    Adam, AgentConfig, DQNAgent, NetworkError, NStepAccumulator, QNetwork, clip_global_norm,
    compute_target, decay_epsilon, load_network, masked_argmax, network_bytes,
    network_from_bytes, save_network, select_action,
)
from qreplay.envs import ChainConfig, ChainEnv
from qreplay.replay import ReplayBuffer, Transition


def oracle_forward(net, x):
    h = np.atleast_2d(x)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < len(net.weights) - 1:
            if net.activation.value == "relu":
                h = np.maximum(h, 0)
            else:
                h = 1.0507009873554805 * np.where(h > 0, h, 1.6732632423543772 * (np.exp(h) - 1))
    return h


def finite_difference_check(net, x, a, y, w, loss, n_checks, rng, h=1e-5):
    _, grads, _ = net.loss_and_grad(x, a, y, w, loss=loss)
    flat_grad = np.concatenate([g.ravel() for g in grads])
    theta = net.get_flat()
    worst = 0.0
    for k in rng.choice(theta.size, size=n_checks, replace=False):
        plus, minus = theta.copy(), theta.copy()
        plus[k] += h
        minus[k] -= h
        net.set_flat(plus)
        lp = net.loss_and_grad(x, a, y, w, loss=loss)[0]
        net.set_flat(minus)
        lm = net.loss_and_grad(x, a, y, w, loss=loss)[0]
        net.set_flat(theta)
        num = (lp - lm) / (2 * h)
        denom = max(abs(num), abs(flat_grad[k]), 1e-8)
        worst = max(worst, abs(num - flat_grad[k]) / denom)
    return worst


# -- network -----------------------------------------------------------------------

def test_forward_examples():
    net = QNetwork([4, 8, 3])
    for p in net.params():
        p[...] = 0
    assert np.array_equal(net.forward(np.ones(4)), np.zeros(3))
    lin = QNetwork([3, 3])
    lin.weights[0][...] = np.eye(3)
    x = np.array([0.5, -2.0, 7.0])
    assert np.array_equal(lin.forward(x), x)


@pytest.mark.parametrize("activation", ["relu", "selu"])
def test_forward_matches_matmul_oracle(activation):
    rng = np.random.default_rng(0)
    for sizes in ([5, 7, 2], [3, 16, 16, 4], [8, 1]):
        net = QNetwork(sizes, activation, rng)
        for b in net.biases:
            b[...] = rng.normal(size=b.shape)
        x = rng.normal(size=(11, sizes[0]))
        assert np.allclose(net.forward_batch(x), oracle_forward(net, x), atol=1e-10)
        assert np.allclose(net.forward(x[0]), oracle_forward(net, x[0])[0], atol=1e-10)


def test_dimension_mismatch():
    net = QNetwork([4, 2])
    with pytest.raises(NetworkError):
        net.forward(np.zeros(5))
    with pytest.raises(NetworkError):
        QNetwork([4])


@pytest.mark.parametrize("sizes", [[5, 9, 3], [5, 9, 7, 3]])
@pytest.mark.parametrize("activation", ["relu", "selu"])
@pytest.mark.parametrize("loss", ["huber", "mse"])
def test_gradient_finite_differences(sizes, activation, loss):
    rng = np.random.default_rng(1)
    net = QNetwork(sizes, activation, rng)
    for b in net.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=(16, sizes[0]))
    a = rng.integers(sizes[-1], size=16)
    y = rng.normal(scale=3, size=16)
    w = rng.uniform(0.1, 1, size=16)
    assert finite_difference_check(net, x, a, y, w, loss, 50, rng) < 1e-4


def test_targets_equal_q_give_zero_gradient():
    rng = np.random.default_rng(2)
    net = QNetwork([4, 8, 3], rng=rng)
    x = rng.normal(size=(10, 4))
    a = rng.integers(3, size=10)
    y = net.forward_batch(x)[np.arange(10), a]
    loss, grads, td = net.loss_and_grad(x, a, y)
    assert loss == 0 and np.all(td == 0)
    assert all(np.all(g == 0) for g in grads)
    before = net.get_flat()
    Adam(net.params(), lr=0.1).step(net.params(), grads)
    assert np.array_equal(net.get_flat(), before)


def test_unit_weights_equal_unweighted():
    rng = np.random.default_rng(3)
    net = QNetwork([4, 8, 3], rng=rng)
    x = rng.normal(size=(10, 4))
    a = rng.integers(3, size=10)
    y = rng.normal(size=10)
    l1, g1, _ = net.loss_and_grad(x, a, y)
    l2, g2, _ = net.loss_and_grad(x, a, y, np.ones(10))
    assert l1 == l2 and all(np.array_equal(p, q) for p, q in zip(g1, g2))


def test_clip_global_norm():
    grads = [np.full(3, 2.0), np.full(1, 2.0)]
    norm = clip_global_norm(grads, 1.0)
    assert norm == pytest.approx(4.0)
    assert np.sqrt(sum((g ** 2).sum() for g in grads)) == pytest.approx(1.0)
    small = [np.full(2, 0.1)]
    clip_global_norm(small, 1.0)
    assert np.allclose(small[0], 0.1)


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0, -1.0])]
    Adam(p, lr=0.01).step(p, [np.array([3.0, -0.5])])
    assert np.allclose(p[0], [0.99, -0.99])


def test_checkpoint_round_trip(tmp_path):
    net = QNetwork([6, 5, 4], "selu", np.random.default_rng(4))
    path = tmp_path / "net.ckpt"
    save_network(net, path)
    back = load_network(path)
    assert back.layer_sizes == net.layer_sizes and back.activation == net.activation
    assert np.array_equal(back.get_flat(), net.get_flat())
    data = network_bytes(net)
    with pytest.raises(NetworkError):
        network_from_bytes(b"ABCD" + data[4:])
    with pytest.raises(NetworkError):
        network_from_bytes(data[:-8])


# -- policy ------------------------------------------------------------------------

class FixedQ:
    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)
        self.output_dim = self.q.size

    def forward(self, state):
        return self.q


def test_select_action_examples():
    rng = np.random.default_rng(5)
    assert select_action(FixedQ([1, 5, 3]), None, 0.0, None, rng) == 1
    assert select_action(FixedQ([9, 5, 3]), None, 0.0, [False, True, True], rng) == 1
    assert select_action(FixedQ([2, 2, 2]), None, 0.0, None, rng) == 0
    with pytest.raises(ValueError):
        select_action(FixedQ([1, 2]), None, 0.5, [False, False], rng)


def test_epsilon_one_is_uniform_over_legal_and_never_masked():
    rng = np.random.default_rng(6)
    mask = np.array([True, False, True, True, False])
    picks = np.array([select_action(FixedQ(np.arange(5)), None, 1.0, mask, rng)
                      for _ in range(100_000)])
    assert not np.isin(picks, [1, 4]).any()
    freq = np.bincount(picks, minlength=5)[mask] / picks.size
    assert np.max(np.abs(freq - 1 / 3)) < 0.01


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=12), st.data())
def test_masked_argmax_oracle(q, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(q), max_size=len(q)))
    if not any(mask):
        mask[0] = True
    legal = [i for i in range(len(q)) if mask[i]]
    best = max(q[i] for i in legal)
    assert masked_argmax(q, mask) == min(i for i in legal if q[i] == best)


def _constant_net(values, state_dim=2):
    net = QNetwork([state_dim, len(values)])
    net.weights[0][...] = 0
    net.biases[0][...] = values
    return net


def test_compute_target_examples():
    online, target = _constant_net([0.0, 10.0]), _constant_net([10.0, 0.0])
    s = np.zeros((1, 2))
    assert compute_target([1.0], [0], s, online, target, 1.0, False)[0] == 11.0
    assert compute_target([1.0], [0], s, online, target, 1.0, True)[0] == 1.0
    assert compute_target([2.0], [1], s, online, target, 0.9, True)[0] == 2.0
    rng = np.random.default_rng(7)
    net = QNetwork([3, 8, 4], rng=rng)
    s = rng.normal(size=(20, 3))
    r = rng.normal(size=20)
    d = rng.random(20) < 0.3
    a = compute_target(r, d, s, net, net, 0.9, False)
    b = compute_target(r, d, s, net, net, 0.9, True)
    assert np.allclose(a, b)
    assert np.allclose(a, r + 0.9 * (1 - d) * net.forward_batch(s).max(axis=1))


def test_compute_target_respects_next_masks():
    target = _constant_net([10.0, 0.0])
    s = np.zeros((1, 2))
    assert compute_target([0.0], [0], s, target, target, 1.0, False, [[False, True]])[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 1.0), st.floats(0.0, 0.5), st.floats(0.5, 0.9999),
       st.integers(1, 300))
def test_epsilon_decay_sequence(start, floor, decay, steps):
    eps, seq = start, [start]
    for _ in range(steps):
        eps = decay_epsilon(eps, floor, decay)
        seq.append(eps)
    assert all(b <= a for a, b in zip(seq, seq[1:]))
    assert min(seq) >= floor


# -- n-step ------------------------------------------------------------------------

def _episode(rewards, eid=0):
    n = len(rewards)
    return [Transition(np.array([t], float), t % 2, r, np.array([t + 1], float), t == n - 1,
                       eid, t + 1) for t, r in enumerate(rewards)]


def _collect(acc, episode):
    out = []
    for tr in episode:
        out += acc.push(tr)
    return out + acc.flush()


def test_nstep_examples():
    ep = _episode([1.0, 2.0, 3.0])
    out = _collect(NStepAccumulator(1, 0.9), ep)
    assert [(o.reward, o.step) for o in out] == [(1.0, 1), (2.0, 2), (3.0, 3)]
    acc = NStepAccumulator(3, 0.5)
    ep = _episode([1.0, 1.0, 1.0, 0.0])
    ep[-1].done = False
    first = []
    for tr in ep[:3]:
        first += acc.push(tr)
    assert len(first) == 1
    assert first[0].reward == 1.75 and first[0].next_state[0] == 3 and not first[0].done
    acc = NStepAccumulator(3, 0.5)
    out = _collect(acc, _episode([1.0, 1.0]))
    assert out[0].reward == 1.5 and out[0].done and out[0].next_state[0] == 2


def test_nstep_cross_episode_guard():
    acc = NStepAccumulator(3, 0.9)
    ep = _episode([1.0, 1.0, 1.0])
    acc.push(ep[0])
    with pytest.raises(ValueError):
        acc.push(_episode([0.0], eid=1)[0])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.lists(st.floats(-10, 10), min_size=1, max_size=30),
       st.floats(0.0, 1.0))
def test_nstep_matches_brute_force(n, rewards, gamma):
    out = _collect(NStepAccumulator(n, gamma), _episode(rewards))
    assert len(out) == len(rewards)
    T = len(rewards)
    for t, tr in enumerate(out):
        horizon = min(n, T - t)
        expected = sum(gamma ** k * rewards[t + k] for k in range(horizon))
        assert tr.reward == pytest.approx(expected, abs=1e-9)
        assert tr.step == t + 1
        assert tr.next_state[0] == t + horizon
        assert tr.done == (t + horizon == T)


# -- agent ---------------------------------------------------------------------------

def _chain_agent(seed, **overrides):
    cfg = AgentConfig(**{"hidden": (16,), "batch_size": 8, "target_sync": 3, "gamma": 0.9,
                         "lr": 1e-3, **overrides})
    env = ChainEnv(ChainConfig(length=4, max_steps=10), np.random.default_rng(seed))
    buf = ReplayBuffer(500, env.obs_dim, "reaper_plus", action_count=2)
    return env, DQNAgent(env.obs_dim, 2, cfg, buf, np.random.default_rng(seed))


def _run(env, agent, episodes):
    for _ in range(episodes):
        obs, done = env.reset(), False
        eid = agent.buffer.new_episode_id()
        step = 0
        while not done:
            a = agent.act(obs, env.legal_mask())
            nxt, r, done, info = env.step(a)
            step += 1
            agent.observe(Transition(obs, a, r, nxt, info["terminal"], eid, step))
            obs = nxt
        agent.end_episode(eid)


def test_target_sync_counting_and_isolation():
    env, agent = _chain_agent(0)
    _run(env, agent, 10)
    assert agent.stats.syncs == 10 // 3
    before = agent.target.get_flat()
    agent.learn()
    agent.learn()
    assert np.array_equal(agent.target.get_flat(), before)
    agent.sync_target()
    x = np.random.default_rng(1).normal(size=(5, env.obs_dim))
    assert np.array_equal(agent.target.forward_batch(x), agent.online.forward_batch(x))


def test_step_based_sync():
    env, agent = _chain_agent(0, target_sync=7, target_sync_unit="steps")
    _run(env, agent, 5)
    assert agent.stats.syncs == agent.steps // 7


def test_training_is_deterministic():
    e1, a1 = _chain_agent(3)
    e2, a2 = _chain_agent(3)
    _run(e1, a1, 15)
    _run(e2, a2, 15)
    assert np.array_equal(a1.online.get_flat(), a2.online.get_flat())
    assert a1.stats.updates > 0


def test_agent_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(gamma=0.0)
    with pytest.raises(ValueError):
        AgentConfig(eps_start=0.1, eps_min=0.2)
    with pytest.raises(ValueError):
        AgentConfig(n_step=0)
    with pytest.raises(ValueError):
        AgentConfig(target_sync_unit="hours")
