"""Independent reference solutions used to check the MPS engine."""

from .dense import DenseState, dense_evolve, dense_from_mps, dense_ground_state
from .linear import (
    LinearSolution,
    bogoliubov_diagonalize,
    coherent_output,
    nphoton_smatrix_linear,
    permanent,
    single_excitation_solve,
    single_photon_field,
    single_photon_smatrix,
    two_photon_map_linear,
)

__all__ = [
    "DenseState",
    "dense_evolve",
    "dense_from_mps",
    "dense_ground_state",
    "LinearSolution",
    "bogoliubov_diagonalize",
    "coherent_output",
    "nphoton_smatrix_linear",
    "permanent",
    "single_excitation_solve",
    "single_photon_field",
    "single_photon_smatrix",
    "two_photon_map_linear",
]
