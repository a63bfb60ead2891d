"""Brute-force state-vector reference for tiny chains.

The Trotter mode applies exactly the same gates, in exactly the same order, as
:func:`waveguide_mps.trotter.evolve`, so any difference to an MPS run is due to
bond truncation alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from ..errors import ArgumentError, ResourceError
from ..model import ModelSpec, build_terms, dense_hamiltonian
from ..mps import MPSState, to_dense
from ..trotter import TrotterPlan, trotter_schedule

__all__ = ["DenseState", "dense_from_mps", "dense_evolve", "dense_ground_state", "MAX_DIM", "MAX_EIG_DIM"]

MAX_DIM = 2**24
MAX_EIG_DIM = 2**14
# full eigendecomposition beyond this needs more memory than a desk machine has
_EIGH_LIMIT = 2**12


@dataclass
class DenseState:
    """Amplitude vector over the row-major product basis of ``dims``."""

    dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.amplitudes.size != int(np.prod(self.dims, dtype=np.int64)):
            raise ArgumentError("amplitude vector does not match dims")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def basis(self):
        """Occupation tuples (local basis indices per site) in storage order."""
        return itertools.product(*(range(d) for d in self.dims))

    def normalized(self) -> "DenseState":
        return DenseState(self.dims, self.amplitudes / np.linalg.norm(self.amplitudes))

    def fidelity(self, other: "DenseState") -> float:
        a, b = self.amplitudes, other.amplitudes
        return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def dense_from_mps(state: MPSState) -> DenseState:
    return DenseState(tuple(state.local_dims), to_dense(state))


def _check_dim(dims, limit=MAX_DIM):
    dim = int(np.prod(dims, dtype=np.int64))
    if dim > limit:
        raise ResourceError(f"Hilbert-space dimension {dim} exceeds limit {limit}")
    return dim


def _apply_gate(psi: np.ndarray, dims, bond: int, gate: np.ndarray) -> np.ndarray:
    left = int(np.prod(dims[:bond], dtype=np.int64))
    right = int(np.prod(dims[bond + 2:], dtype=np.int64))
    view = psi.reshape(left, dims[bond] * dims[bond + 1], right)
    return np.matmul(gate, view).reshape(-1)


def trotter_evolve_vector(psi: np.ndarray, plan: TrotterPlan, steps: int) -> np.ndarray:
    dims = plan.dims
    for layers in trotter_schedule(steps):
        for parity, frac in layers:
            for b in plan.bonds_of(parity):
                psi = _apply_gate(psi, dims, b, plan.gate(b, frac))
    return psi


def dense_evolve(model: ModelSpec, state: DenseState, t: float, dt: float = 0.05,
                 method: str = "trotter") -> DenseState:
    """Evolve ``state`` under ``model`` to time ``t``.

    ``method="trotter"`` uses ``round(t / dt)`` second-order steps with the MPS
    engine's gate ordering; ``method="exact"`` applies ``exp(-i H t)`` exactly
    (eigendecomposition up to dimension 4096, Taylor-series action beyond).
    """
    terms = build_terms(model)
    if tuple(terms.dims) != state.dims:
        raise ArgumentError("state dims do not match the model layout")
    if method == "trotter":
        _check_dim(state.dims)
        steps = int(round(t / dt))
        if steps and abs(steps * dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ArgumentError(f"t={t} is not a multiple of dt={dt}")
        plan = TrotterPlan.from_terms(terms, dt, "real")
        return DenseState(state.dims, trotter_evolve_vector(state.amplitudes.copy(), plan, steps))
    if method == "exact":
        dim = _check_dim(state.dims, MAX_EIG_DIM)
        h = dense_hamiltonian(terms)
        if dim <= _EIGH_LIMIT:
            w, v = np.linalg.eigh(h.toarray())
            out = v @ (np.exp(-1j * w * t) * (v.conj().T @ state.amplitudes))
        else:
            out = spla.expm_multiply(-1j * t * h.tocsc(), state.amplitudes)
        return DenseState(state.dims, out)
    raise ArgumentError(f"unknown method {method!r}")


def dense_ground_state(model: ModelSpec, k: int = 1):
    """Lowest ``k`` eigenpairs of the truncated model Hamiltonian.

    Large spaces use shift-invert Lanczos about a Gershgorin lower bound. Plain
    ``which="SA"`` Lanczos misses eigenvectors that decouple exactly, such as the
    RWA vacuum.
    """
    terms = build_terms(model)
    dim = _check_dim(terms.dims)
    h = dense_hamiltonian(terms)
    if dim <= 2048:
        w, v = np.linalg.eigh(h.toarray())
        return w[:k], v[:, :k]
    h = h.tocsc()
    diag = h.diagonal().real
    bound = float(np.min(diag - (abs(h).sum(axis=1).A1 - np.abs(diag))))
    w, v = spla.eigsh(h, k=k, sigma=bound - 1e-3, which="LM", tol=1e-13)
    order = np.argsort(w)
    return w[order], v[:, order]
