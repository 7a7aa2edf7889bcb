"""Quantum core: gates, simulation, noise, Hamiltonians, unitary metrics."""
from .gates import (
    GateError, GateKind, GateSpec, apply_gate, circuit_unitary, gate_matrix,
    hrc_gateset, is_unitary, small_rotation_gateset, two_qubit_gateset, SMALL_ANGLE,
)
from .hamiltonian import (
    HamiltonianError, PauliHamiltonian, exact_ground_energy, expectation,
    format_hamiltonian, ground_state, heisenberg_hamiltonian, parse_hamiltonian,
    read_hamiltonian,
)
from .sim import (
    apply_depolarizing, depolarizing_kraus, is_density_matrix, run_density,
    run_statevector, run_trajectory, zero_density, zero_state,
)
from .unitary import (
    distance, fidelity, haar_random_1q, haar_random_unitary, random_2q_target,
    random_circuit_target,
)
