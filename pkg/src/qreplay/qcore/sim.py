"""Statevector and density-matrix simulation with depolarizing noise."""
from __future__ import annotations

import itertools

import numpy as np

from .gates import GateSpec, apply_gate, pauli_signed_permutation

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def zero_density(n_qubits: int) -> np.ndarray:
    rho = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def run_statevector(gates, n_qubits: int, psi: np.ndarray | None = None) -> np.ndarray:
    psi = zero_state(n_qubits) if psi is None else psi
    for g in gates:
        psi = apply_gate(psi, g, n_qubits)
    return psi


def conjugate_by_gate(rho: np.ndarray, spec: GateSpec, n_qubits: int) -> np.ndarray:
    """``U rho U^dagger`` without forming ``U``."""
    left = apply_gate(rho, spec, n_qubits)
    return apply_gate(left.conj().T, spec, n_qubits).conj().T


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")


def apply_depolarizing(rho: np.ndarray, qubits, p: float, n_qubits: int) -> np.ndarray:
    """k-qubit depolarizing channel on ``qubits``.

    ``(1-p) rho + p/(4^k-1) * sum_{P != I} P rho P``, evaluated through the
    identity ``sum_P P rho P / 4^k = Tr_Q(rho) (x) I/2^k``.
    """
    _check_probability(p)
    if p == 0.0:
        return rho
    qubits = tuple(qubits)
    k = len(qubits)
    d_k = 4 ** k
    twirl = _twirl(rho, qubits, n_qubits)
    keep = 1.0 - p - p / (d_k - 1)
    mix = p * d_k / (d_k - 1)
    return keep * rho + mix * twirl


def _twirl(rho: np.ndarray, qubits: tuple, n_qubits: int) -> np.ndarray:
    """Replace the reduced state on ``qubits`` by the maximally mixed state."""
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = letters[:n_qubits]
    cols = letters[n_qubits:2 * n_qubits]
    # tie traced column labels to their row labels
    traced_cols = "".join(rows[q] if q in qubits else cols[q] for q in range(n_qubits))
    rest_rows = "".join(rows[q] for q in range(n_qubits) if q not in qubits)
    rest_cols = "".join(cols[q] for q in range(n_qubits) if q not in qubits)
    t = rho.reshape((2,) * (2 * n_qubits))
    reduced = np.einsum(f"{rows}{traced_cols}->{rest_rows}{rest_cols}", t)
    operands = [reduced]
    subs = [rest_rows + rest_cols]
    half_eye = np.eye(2) / 2.0
    for q in qubits:
        operands.append(half_eye)
        subs.append(rows[q] + cols[q])
    out = np.einsum(",".join(subs) + "->" + rows + cols, *operands)
    dim = 1 << n_qubits
    return out.reshape(dim, dim)


def depolarizing_kraus(k: int, p: float) -> list:
    """Kraus operators of the k-qubit depolarizing channel (local ``2^k`` space)."""
    _check_probability(p)
    ops = []
    for labels in itertools.product("IXYZ", repeat=k):
        m = np.array([[1.0]], dtype=complex)
        for lab in labels:
            m = np.kron(m, PAULI_MATRICES[lab])
        if all(lab == "I" for lab in labels):
            ops.append(np.sqrt(1.0 - p) * m)
        else:
            ops.append(np.sqrt(p / (4 ** k - 1)) * m)
    return ops


def run_density(gates, n_qubits: int, p1: float = 0.0, p2: float = 0.0,
                rho: np.ndarray | None = None) -> np.ndarray:
    """Exact noisy evolution; depolarizing noise after each gate on the qubits it touches."""
    rho = zero_density(n_qubits) if rho is None else rho
    for g in gates:
        rho = conjugate_by_gate(rho, g, n_qubits)
        p = p1 if len(g.qubits) == 1 else p2
        if p > 0.0:
            rho = apply_depolarizing(rho, g.qubits, p, n_qubits)
    return rho


_NONTRIVIAL = {1: ["X", "Y", "Z"], 2: [a + b for a in "IXYZ" for b in "IXYZ"][1:]}


def run_trajectory(gates, n_qubits: int, p1: float, p2: float,
                   rng: np.random.Generator) -> np.ndarray:
    """One Pauli-trajectory sample of the noisy circuit (pure state)."""
    psi = zero_state(n_qubits)
    for g in gates:
        psi = apply_gate(psi, g, n_qubits)
        p = p1 if len(g.qubits) == 1 else p2
        if p > 0.0 and rng.random() < p:
            options = _NONTRIVIAL[len(g.qubits)]
            choice = options[rng.integers(len(options))]
            for lab, q in zip(choice, g.qubits):
                if lab != "I":
                    psi = _apply_pauli(psi, lab, q, n_qubits)
    return psi


def _apply_pauli(psi: np.ndarray, label: str, qubit: int, n_qubits: int) -> np.ndarray:
    perm, phase = pauli_signed_permutation(label, (qubit,), n_qubits)
    return phase * psi[perm]


def is_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> bool:
    if not np.allclose(rho, rho.conj().T, atol=atol):
        return False
    if abs(np.trace(rho) - 1.0) > atol:
        return False
    return float(np.linalg.eigvalsh(rho).min()) >= -1e-8
