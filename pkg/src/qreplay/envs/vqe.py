"""Energy evaluation and angle optimization for parameterized circuits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ..qcore.hamiltonian import PauliHamiltonian, expectation
from ..qcore.sim import run_density, run_statevector, run_trajectory

EXACT_DENSITY_MAX_QUBITS = 6


class OptimizerMethod(str, enum.Enum):
    NELDER_MEAD = "nelder_mead"
    COBYLA = "cobyla"
    PARAM_SHIFT_ADAM = "param_shift_adam"
    NONE = "none"  # evaluate at the warm start only


@dataclass(frozen=True)
class OptimizerConfig:
    method: OptimizerMethod = OptimizerMethod.COBYLA
    max_iter: int = 1000
    warm_start: bool = True
    lr: float = 0.1  # parameter-shift Adam only
    tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "method", OptimizerMethod(self.method))
        if self.max_iter <= 0:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    trajectories: int = 256  # used above EXACT_DENSITY_MAX_QUBITS

    @property
    def active(self) -> bool:
        return self.p1 > 0.0 or self.p2 > 0.0


class CostFunction:
    """``theta -> <H>`` for a gate template whose parameterized slots take ``theta`` in order."""

    def __init__(self, template, hamiltonian: PauliHamiltonian,
                 noise: Optional[NoiseModel] = None, seed: int = 0):
        self.template = list(template)
        self.slots = [i for i, g in enumerate(self.template) if g.parameterized]
        self.h = hamiltonian
        self.n = hamiltonian.n_qubits
        self.noise = noise if noise is not None and noise.active else None
        self.seed = seed
        self.calls = 0

    @property
    def n_params(self) -> int:
        return len(self.slots)

    def circuit(self, theta) -> list:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} angles, got {theta.shape}")
        gates = list(self.template)
        for i, th in zip(self.slots, theta):
            gates[i] = gates[i].with_angle(float(th))
        return gates

    def __call__(self, theta) -> float:
        self.calls += 1
        gates = self.circuit(theta)
        if self.noise is None:
            value = expectation(self.h, run_statevector(gates, self.n))
        elif self.n <= EXACT_DENSITY_MAX_QUBITS:
            value = expectation(self.h, run_density(gates, self.n, self.noise.p1, self.noise.p2))
        else:
            # common random numbers: the same trajectories for every theta
            rng = np.random.default_rng(self.seed)
            value = float(np.mean([
                expectation(self.h, run_trajectory(gates, self.n, self.noise.p1,
                                                   self.noise.p2, rng))
                for _ in range(self.noise.trajectories)]))
        if not math.isfinite(value):
            raise FloatingPointError("non-finite cost")
        return float(value)

    def gradient(self, theta) -> np.ndarray:
        """Exact parameter-shift gradient (every slot is ``exp(-i theta P / 2)``)."""
        theta = np.asarray(theta, dtype=float)
        grad = np.empty_like(theta)
        for k in range(theta.size):
            shift = np.zeros_like(theta)
            shift[k] = 0.5 * math.pi
            grad[k] = 0.5 * (self(theta + shift) - self(theta - shift))
        return grad


def _adam_descent(cost: CostFunction, theta0, config: OptimizerConfig):
    theta = np.array(theta0, dtype=float)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    best_theta, best = theta.copy(), cost(theta)
    # each iteration spends 2k+1 cost calls
    for it in range(1, config.max_iter + 1):
        g = cost.gradient(theta)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - config.lr * (m / (1 - 0.9 ** it)) / (np.sqrt(v / (1 - 0.999 ** it)) + 1e-8)
        c = cost(theta)
        if c < best:
            best_theta, best = theta.copy(), c
        if np.linalg.norm(g) < config.tol:
            break
    return best_theta, best


def optimize_parameters(cost: CostFunction, config: OptimizerConfig, warm_theta=None):
    """Minimize ``cost``; never returns a cost above the starting point's."""
    k = cost.n_params
    theta0 = np.zeros(k) if warm_theta is None or not config.warm_start else \
        np.asarray(warm_theta, dtype=float)
    if theta0.shape != (k,) or not np.isfinite(theta0).all():
        raise ValueError("warm start must be a finite vector with one angle per slot")
    start = cost(theta0)
    if k == 0 or config.method is OptimizerMethod.NONE:
        return theta0, start
    if config.method is OptimizerMethod.PARAM_SHIFT_ADAM:
        theta, value = _adam_descent(cost, theta0, config)
    else:
        method = "Nelder-Mead" if config.method is OptimizerMethod.NELDER_MEAD else "COBYLA"
        opts = {"maxiter": config.max_iter}
        if method == "Nelder-Mead":
            opts.update(xatol=config.tol, fatol=config.tol, adaptive=k > 4)
        else:
            opts.update(rhobeg=0.5, tol=config.tol)
        res = minimize(cost, theta0, method=method, options=opts)
        theta, value = np.asarray(res.x, dtype=float), float(res.fun)
        value = cost(theta)
    if value > start:
        return theta0, start
    return theta, value


def circuit_energy(gates, hamiltonian: PauliHamiltonian, noise: Optional[NoiseModel] = None,
                   seed: int = 0) -> float:
    """Energy of a fully bound circuit."""
    cost = CostFunction(gates, hamiltonian, noise, seed)
    return cost(np.array([gates[i].angle for i in cost.slots], dtype=float))
