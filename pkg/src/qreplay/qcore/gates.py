"""Gate definitions and fast state-update kernels.

Every gate in the supported set can be written as ``a*I + b*P`` where ``P``
is either a Pauli string or the CNOT permutation.  ``P`` acts on a basis
index as a signed permutation, so applying a gate to a state costs a gather
and two multiply-adds instead of a dense matrix product.

Conventions: dense matrices are row-major and qubit 0 is the most
significant bit of the basis index.  For two-qubit gates ``qubits[0]`` is
the control (CNOT) or the first tensor factor.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np


class GateKind(str, enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    RXX = "RXX"
    RYY = "RYY"
    RZZ = "RZZ"
    XX = "XX"
    YY = "YY"
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"


PARAMETERIZED = frozenset(
    {GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RXX, GateKind.RYY,
     GateKind.RZZ, GateKind.XX, GateKind.YY}
)
TWO_QUBIT = frozenset(
    {GateKind.CNOT, GateKind.RXX, GateKind.RYY, GateKind.RZZ, GateKind.XX, GateKind.YY}
)

# Pauli generator for each rotation-type gate.
_GENERATOR = {
    GateKind.RX: "X", GateKind.RY: "Y", GateKind.RZ: "Z",
    GateKind.RXX: "XX", GateKind.RYY: "YY", GateKind.RZZ: "ZZ",
    GateKind.XX: "XX", GateKind.YY: "YY",
    GateKind.V1: "X", GateKind.V2: "Y", GateKind.V3: "Z",
}

_INV_SQRT5 = 1.0 / math.sqrt(5.0)


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    qubits: tuple
    angle: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise GateError(f"{self.kind.value} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise GateError(f"repeated qubit index in {self.qubits}")
        if self.kind in PARAMETERIZED:
            if self.angle is None:
                raise GateError(f"{self.kind.value} requires an angle")
            if not math.isfinite(self.angle):
                raise GateError("angle must be finite")
        elif self.angle is not None:
            raise GateError(f"{self.kind.value} takes no angle")

    @property
    def parameterized(self) -> bool:
        return self.kind in PARAMETERIZED

    def with_angle(self, angle: float) -> "GateSpec":
        return GateSpec(self.kind, self.qubits, float(angle))

    def check(self, n_qubits: int) -> None:
        for q in self.qubits:
            if not 0 <= q < n_qubits:
                raise GateError(f"qubit {q} out of range for {n_qubits} qubit(s)")


def coefficients(spec: GateSpec) -> tuple:
    """Return ``(a, b)`` with ``U = a*I + b*P``."""
    kind = spec.kind
    if kind is GateKind.CNOT:
        return 0.0, 1.0
    if kind in (GateKind.V1, GateKind.V2, GateKind.V3):
        return _INV_SQRT5, 2j * _INV_SQRT5
    half = 0.5 * spec.angle
    return math.cos(half), -1j * math.sin(half)


def pauli_signed_permutation(pauli: str, qubits: tuple, n_qubits: int):
    """Index map and phases of a Pauli string placed on ``qubits``.

    Returns ``(perm, phase)`` such that ``(P psi)[i] = phase[i] * psi[perm[i]]``.
    """
    dim = 1 << n_qubits
    idx = np.arange(dim)
    flip = 0
    for p, q in zip(pauli, qubits):
        if p in "XY":
            flip |= 1 << (n_qubits - 1 - q)
    src = idx ^ flip
    # P|j> = ph(j)|j^flip>, so (P psi)[i] = ph(i^flip) psi[i^flip]
    phase = np.ones(dim, dtype=complex)
    for p, q in zip(pauli, qubits):
        bit = (src >> (n_qubits - 1 - q)) & 1
        sign = 1 - 2 * bit
        if p == "Z":
            phase = phase * sign
        elif p == "Y":
            phase = phase * (1j * sign)
    return src, phase


def _cnot_permutation(control: int, target: int, n_qubits: int):
    idx = np.arange(1 << n_qubits)
    cbit = (idx >> (n_qubits - 1 - control)) & 1
    perm = idx ^ (cbit << (n_qubits - 1 - target))
    return perm, np.ones(idx.size, dtype=complex)


@lru_cache(maxsize=4096)
def signed_permutation(kind: GateKind, qubits: tuple, n_qubits: int):
    if kind is GateKind.CNOT:
        perm, phase = _cnot_permutation(qubits[0], qubits[1], n_qubits)
    else:
        perm, phase = pauli_signed_permutation(_GENERATOR[kind], qubits, n_qubits)
    perm.setflags(write=False)
    phase.setflags(write=False)
    real = bool(np.all(phase.imag == 0))
    return perm, (phase.real.copy() if real else phase)


def apply_gate(state: np.ndarray, spec: GateSpec, n_qubits: int) -> np.ndarray:
    """Apply a gate along axis 0 of ``state`` (a vector or a stack of columns)."""
    perm, phase = signed_permutation(spec.kind, spec.qubits, n_qubits)
    a, b = coefficients(spec)
    moved = state[perm]
    if state.ndim > 1:
        moved = moved * phase.reshape((-1,) + (1,) * (state.ndim - 1))
    else:
        moved = moved * phase
    if a == 0.0:
        return b * moved if b != 1.0 else moved
    return a * state + b * moved


def gate_matrix(spec: GateSpec, n_qubits: int) -> np.ndarray:
    """Full ``2^n x 2^n`` unitary of ``spec`` with identity on the other qubits."""
    spec.check(n_qubits)
    return apply_gate(np.eye(1 << n_qubits, dtype=complex), spec, n_qubits)


def circuit_unitary(gates, n_qubits: int) -> np.ndarray:
    """Unitary of a gate list applied in order (first gate acts first)."""
    u = np.eye(1 << n_qubits, dtype=complex)
    for g in gates:
        u = apply_gate(u, g, n_qubits)
    return u


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))) < atol


SMALL_ANGLE = math.pi / 128


def small_rotation_gateset() -> list:
    return [GateSpec(k, (0,), s * SMALL_ANGLE)
            for k in (GateKind.RX, GateKind.RY, GateKind.RZ) for s in (1, -1)]


def hrc_gateset() -> list:
    return [GateSpec(GateKind.V1, (0,)), GateSpec(GateKind.V2, (0,)), GateSpec(GateKind.V3, (0,))]


def two_qubit_gateset() -> list:
    out = []
    for s in (1, -1):
        out.append(GateSpec(GateKind.RZ, (0,), s * SMALL_ANGLE))
    for s in (1, -1):
        out.append(GateSpec(GateKind.RZ, (1,), s * SMALL_ANGLE))
    for s in (1, -1):
        out.append(GateSpec(GateKind.XX, (0, 1), s * SMALL_ANGLE))
    for s in (1, -1):
        out.append(GateSpec(GateKind.YY, (0, 1), s * SMALL_ANGLE))
    return out
