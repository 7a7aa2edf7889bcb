"""Unitary distance metrics and target-unitary samplers."""
from __future__ import annotations

import numpy as np

from .gates import circuit_unitary, gate_matrix, two_qubit_gateset


def fidelity(a: np.ndarray, b: np.ndarray, squared: bool = False) -> float:
    """Global-phase-invariant overlap ``|Tr(a^dagger b)| / dim``."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    f = abs(np.vdot(a, b)) / a.shape[0]  # vdot conjugates a and sums a*_ij b_ij
    f = min(1.0, float(f))
    return f * f if squared else f


def distance(a: np.ndarray, b: np.ndarray, squared: bool = False) -> float:
    return 1.0 - fidelity(a, b, squared)


def haar_random_unitary(rng: np.random.Generator, dim: int = 2, size=None) -> np.ndarray:
    """Haar sample from U(dim) via QR with the phases of R's diagonal removed."""
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def haar_random_1q(rng: np.random.Generator) -> np.ndarray:
    return haar_random_unitary(rng, 2)


def random_circuit_target(rng: np.random.Generator, gateset, n_qubits: int,
                          min_len: int, max_len: int) -> np.ndarray:
    """Product of ``N ~ Uniform{min_len..max_len}`` gates drawn uniformly from ``gateset``.

    Each new gate multiplies on the left, so the first draw acts first.
    """
    length = int(rng.integers(min_len, max_len + 1))
    picks = rng.integers(len(gateset), size=length)
    mats = [gate_matrix(g, n_qubits) for g in gateset]
    u = np.eye(1 << n_qubits, dtype=complex)
    for i in picks:
        u = mats[i] @ u
    return u


def random_2q_target(rng: np.random.Generator) -> np.ndarray:
    """2-qubit target from random words of length 6..9999 over the 2-qubit basis."""
    return random_circuit_target(rng, two_qubit_gateset(), 2, 6, 10 ** 4 - 1)


__all__ = [
    "fidelity", "distance", "haar_random_unitary", "haar_random_1q",
    "random_circuit_target", "random_2q_target", "circuit_unitary",
]
