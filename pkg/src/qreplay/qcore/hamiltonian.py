"""Pauli-sum Hamiltonians: construction, file I/O, expectation values."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gates import pauli_signed_permutation

MAX_DENSE_QUBITS = 12


class HamiltonianError(ValueError):
    pass


@dataclass(frozen=True)
class PauliHamiltonian:
    n_qubits: int
    terms: tuple  # ((coefficient, pauli_string), ...)
    _groups: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple((float(c), str(p).upper()) for c, p in self.terms)
        for c, p in terms:
            if not math.isfinite(c):
                raise HamiltonianError(f"non-finite coefficient for {p}")
            if len(p) != self.n_qubits:
                raise HamiltonianError(
                    f"Pauli string {p!r} has length {len(p)}, expected {self.n_qubits}")
            if set(p) - set("IXYZ"):
                raise HamiltonianError(f"invalid Pauli string {p!r}")
        object.__setattr__(self, "terms", terms)

    def scaled(self, factors) -> "PauliHamiltonian":
        return PauliHamiltonian(self.n_qubits,
                                tuple((c * f, p) for (c, p), f in zip(self.terms, factors)))

    def coefficient_bound(self) -> float:
        """-sum |c_k|, a guaranteed lower bound on the spectrum."""
        return -sum(abs(c) for c, _ in self.terms)

    def _flip_groups(self):
        # Terms sharing a bit-flip pattern collapse into one diagonal vector:
        # (H psi)[i] = sum_f D_f[i] psi[i ^ f]
        if self._groups is None:
            groups = {}
            for c, p in self.terms:
                src, phase = pauli_signed_permutation(p, tuple(range(self.n_qubits)), self.n_qubits)
                key = int(src[0])
                if key in groups:
                    groups[key] = (groups[key][0], groups[key][1] + c * phase)
                else:
                    groups[key] = (src, c * phase)
            object.__setattr__(self, "_groups", list(groups.values()))
        return self._groups

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for src, diag in self._flip_groups():
            out += diag * psi[src]
        return out

    def matrix(self) -> np.ndarray:
        if self.n_qubits > MAX_DENSE_QUBITS:
            raise HamiltonianError(
                f"{self.n_qubits} qubits exceeds dense limit of {MAX_DENSE_QUBITS}")
        dim = 1 << self.n_qubits
        return self.apply(np.eye(dim, dtype=complex))


def expectation(h: PauliHamiltonian, state: np.ndarray) -> float:
    """<H> for a statevector (1-D) or density matrix (2-D)."""
    dim = 1 << h.n_qubits
    if state.shape[0] != dim:
        raise HamiltonianError(
            f"state dimension {state.shape[0]} does not match {h.n_qubits}-qubit Hamiltonian")
    if state.ndim == 1:
        value = np.vdot(state, h.apply(state))
    else:
        # Tr(H rho) = sum_i sum_f D_f[i] rho[i ^ f, i]
        idx = np.arange(dim)
        value = 0.0
        for src, diag in h._flip_groups():
            value = value + np.sum(diag * state[src, idx])
    return float(np.real(value))


def heisenberg_hamiltonian(n: int) -> PauliHamiltonian:
    """Open isotropic Heisenberg chain with a unit longitudinal field."""
    if n < 2:
        raise HamiltonianError("Heisenberg chain needs at least 2 sites")
    terms = []
    for i in range(n - 1):
        for p in "XYZ":
            s = ["I"] * n
            s[i] = s[i + 1] = p
            terms.append((1.0, "".join(s)))
    for i in range(n):
        s = ["I"] * n
        s[i] = "Z"
        terms.append((1.0, "".join(s)))
    return PauliHamiltonian(n, tuple(terms))


def exact_ground_energy(h: PauliHamiltonian) -> float:
    return float(np.linalg.eigvalsh(h.matrix())[0])


def ground_state(h: PauliHamiltonian):
    vals, vecs = np.linalg.eigh(h.matrix())
    return float(vals[0]), vecs[:, 0]


def parse_hamiltonian(text: str) -> PauliHamiltonian:
    n_qubits = None
    terms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("qubits:"):
            try:
                n_qubits = int(line.split(":", 1)[1])
            except ValueError as exc:
                raise HamiltonianError(f"line {lineno}: bad qubit header") from exc
            continue
        parts = line.split()
        if len(parts) != 2:
            raise HamiltonianError(f"line {lineno}: expected '<coefficient> <pauli-string>'")
        try:
            coef = float(parts[0])
        except ValueError as exc:
            raise HamiltonianError(f"line {lineno}: bad coefficient {parts[0]!r}") from exc
        terms.append((coef, parts[1]))
    if n_qubits is None:
        raise HamiltonianError("missing 'qubits: <n>' header")
    return PauliHamiltonian(n_qubits, tuple(terms))


def format_hamiltonian(h: PauliHamiltonian) -> str:
    lines = [f"qubits: {h.n_qubits}"]
    lines += [f"{c!r} {p}" for c, p in h.terms]
    return "\n".join(lines) + "\n"


def read_hamiltonian(path) -> PauliHamiltonian:
    return parse_hamiltonian(Path(path).read_text(encoding="utf-8"))
