"""MPS simulation of few-photon scattering off qubits and oscillators in a 1D waveguide."""

from .errors import (
    ArgumentError,
    ConfigurationError,
    ConvergenceError,
    DimensionError,
    InconsistentRunError,
    ModelError,
    NumericError,
    ResourceError,
    SpectrumError,
    WaveguideMPSError,
)
from .model import ModelSpec, ScattererSpec, build_terms, dicke_ladder, dispersion, group_velocity
from .mps import MPSState, LocalOperator, product_state, vacuum_state
from .scattering import EngineConfig, ScatteringResult, ScatteringRun, Wavepacket, prepare_ground_state, run
from .tensor import DenseTensor, SvdTruncation, contract, truncated_svd
from .trotter import TrotterPlan, evolve

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "ConfigurationError",
    "ConvergenceError",
    "DimensionError",
    "InconsistentRunError",
    "ModelError",
    "NumericError",
    "ResourceError",
    "SpectrumError",
    "WaveguideMPSError",
    "ModelSpec",
    "ScattererSpec",
    "build_terms",
    "dicke_ladder",
    "dispersion",
    "group_velocity",
    "MPSState",
    "LocalOperator",
    "product_state",
    "vacuum_state",
    "EngineConfig",
    "ScatteringResult",
    "ScatteringRun",
    "Wavepacket",
    "prepare_ground_state",
    "run",
    "DenseTensor",
    "SvdTruncation",
    "contract",
    "truncated_svd",
    "TrotterPlan",
    "evolve",
]
