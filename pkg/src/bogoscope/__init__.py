"""Bogoliubov-theory toolkit for dilute Bose gases on the unit torus.

The package computes scattering lengths (ODE, Born series, and box-adjusted
lattice series), the pair-correlation profile entering quasi-free trial
states, quadratic-form coefficients and spectral predictions, and validates
them against exact diagonalization and explicit matrix conjugations on
truncated Fock spaces.
"""

from bogoscope._backend import BACKEND, HAS_NUMBA

__version__ = "0.1.0"

__all__ = ["BACKEND", "HAS_NUMBA", "__version__"]
