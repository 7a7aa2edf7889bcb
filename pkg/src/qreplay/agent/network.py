"""Fully-connected Q-network with hand-written reverse-mode gradients."""
from __future__ import annotations

import enum
import struct
from pathlib import Path

import numpy as np

_SELU_ALPHA = 1.6732632423543772
_SELU_SCALE = 1.0507009873554805


class Activation(str, enum.Enum):
    RELU = "relu"
    SELU = "selu"


class NetworkError(ValueError):
    pass


def _act(x, kind):
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    return _SELU_SCALE * np.where(x > 0, x, _SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def _act_grad(x, kind):
    if kind is Activation.RELU:
        return (x > 0).astype(x.dtype)
    return _SELU_SCALE * np.where(x > 0, 1.0, _SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


class QNetwork:
    """Affine layers with an activation between them and a linear output.

    Weights are stored as ``(fan_in, fan_out)`` so a batch of row vectors is
    pushed through with ``x @ W + b``.
    """

    def __init__(self, layer_sizes, activation="relu", rng: np.random.Generator | None = None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise NetworkError(f"bad layer sizes {layer_sizes}")
        self.layer_sizes = sizes
        self.activation = Activation(activation)
        rng = rng or np.random.default_rng(0)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params():
            raise NetworkError("flat parameter vector has the wrong length")
        pos = 0
        for p in self.params():
            p[...] = flat[pos:pos + p.size].reshape(p.shape)
            pos += p.size

    def copy_from(self, other: "QNetwork") -> None:
        if other.layer_sizes != self.layer_sizes:
            raise NetworkError("layer sizes differ")
        for mine, theirs in zip(self.params(), other.params()):
            mine[...] = theirs

    def clone(self) -> "QNetwork":
        net = QNetwork(self.layer_sizes, self.activation)
        net.copy_from(self)
        return net

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise NetworkError(f"input dim {x.shape[-1]} != {self.input_dim}")
        return x

    def forward(self, state) -> np.ndarray:
        x = self._check_input(state)
        single = x.ndim == 1
        q = self.forward_batch(x[None, :] if single else x)
        return q[0] if single else q

    def forward_batch(self, states) -> np.ndarray:
        h = self._check_input(states)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = _act(h, self.activation)
        return h

    def _forward_cache(self, x):
        pre, post = [], [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = _act(z, self.activation) if i < last else z
            post.append(h)
        return pre, post

    def loss_and_grad(self, states, actions, targets, weights=None, loss="huber",
                      huber_delta: float = 1.0):
        """Weighted mean regression loss on ``Q(s, a)`` and its parameter gradient.

        Returns ``(loss, grads, td)`` where ``grads`` follows :meth:`params`
        order and ``td = Q(s, a) - target``.
        """
        x = self._check_input(states)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=float)
        n = x.shape[0]
        if actions.shape != (n,) or targets.shape != (n,):
            raise NetworkError("batch, actions and targets are not aligned")
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        pre, post = self._forward_cache(x)
        q = post[-1]
        if not np.isfinite(q).all():
            raise FloatingPointError("non-finite Q-values in forward pass")
        rows = np.arange(n)
        td = q[rows, actions] - targets
        if loss == "huber":
            a = np.abs(td)
            per = np.where(a <= huber_delta, 0.5 * td * td, huber_delta * (a - 0.5 * huber_delta))
            dper = np.clip(td, -huber_delta, huber_delta)
        elif loss == "mse":
            per = 0.5 * td * td
            dper = td
        else:
            raise NetworkError(f"unknown loss {loss!r}")
        value = float(np.mean(w * per))
        dq = np.zeros_like(q)
        dq[rows, actions] = w * dper / n

        grads_w, grads_b = [None] * len(self.weights), [None] * len(self.weights)
        delta = dq
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = post[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * _act_grad(pre[i - 1], self.activation)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads += [gw, gb]
        return value, grads, td


def clip_global_norm(grads, max_norm: float):
    """Scale gradients in place so their joint L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm and max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


class Adam:
    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# checkpoint: b"QNCK" | u32 version | u8 activation | u32 layers | u32 sizes[] | f64 params
_CK_MAGIC = b"QNCK"
_CK_VERSION = 1


def network_bytes(net: QNetwork) -> bytes:
    acts = list(Activation)
    head = struct.pack("<4sIBI", _CK_MAGIC, _CK_VERSION, acts.index(net.activation),
                       len(net.layer_sizes))
    sizes = struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes)
    return head + sizes + net.get_flat().astype("<f8").tobytes()


def network_from_bytes(data: bytes) -> QNetwork:
    hs = struct.calcsize("<4sIBI")
    if len(data) < hs:
        raise NetworkError("truncated checkpoint")
    magic, version, act, nl = struct.unpack("<4sIBI", data[:hs])
    if magic != _CK_MAGIC:
        raise NetworkError(f"bad checkpoint magic {magic!r}")
    if version != _CK_VERSION:
        raise NetworkError(f"unsupported checkpoint version {version}")
    end = hs + 4 * nl
    if len(data) < end:
        raise NetworkError("truncated checkpoint")
    sizes = struct.unpack(f"<{nl}I", data[hs:end])
    net = QNetwork(sizes, list(Activation)[act])
    flat = np.frombuffer(data[end:], dtype="<f8")
    if flat.size != net.n_params():
        raise NetworkError("checkpoint parameter count does not match its layer sizes")
    net.set_flat(flat)
    return net


def save_network(net: QNetwork, path) -> None:
    Path(path).write_bytes(network_bytes(net))


def load_network(path) -> QNetwork:
    return network_from_bytes(Path(path).read_bytes())
