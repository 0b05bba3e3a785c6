"""Truncated Fock-space machinery: bases, ladder operators, sparse builders.

Occupation bases over a finite mode set, compressed second-quantized
operators on them (fixed-number Hamiltonians, the condensate-factored
excitation Hamiltonian assembled term by term, number and pair-dressed
observables), the bijection between the two pictures, and a plain-text
COO export.
"""

from bogoscope.fock.basis import FockBasis, OccupationState, build_basis
from bogoscope.fock.builders import (
    ExcitationHamiltonian,
    ExcitationMap,
    Observables,
    build_excitation_hamiltonian,
    build_excitation_map,
    build_hamiltonian_full,
    build_observables,
    ladder_apply,
    ladder_matrix,
    pair_amplitudes,
    transfer_matrix,
)
from bogoscope.fock.sparse import (
    SparseOperator,
    StateVector,
    basis_state,
    condensate_state,
    read_coo,
    vacuum_state,
    write_coo,
)

__all__ = [
    "ExcitationHamiltonian",
    "ExcitationMap",
    "FockBasis",
    "Observables",
    "OccupationState",
    "SparseOperator",
    "StateVector",
    "basis_state",
    "build_basis",
    "build_excitation_hamiltonian",
    "build_excitation_map",
    "build_hamiltonian_full",
    "build_observables",
    "condensate_state",
    "ladder_apply",
    "ladder_matrix",
    "pair_amplitudes",
    "read_coo",
    "transfer_matrix",
    "vacuum_state",
    "write_coo",
]
