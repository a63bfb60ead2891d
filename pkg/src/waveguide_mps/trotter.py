"""Second-order Suzuki-Trotter evolution of MPS states (TEBD).

One step of length ``dt`` is ``U_even(dt/2) U_odd(dt) U_even(dt/2)``, where the
even (odd) layer holds the gates on bonds ``0, 2, 4, ...`` (``1, 3, ...``).
Within a multi-step run the trailing and leading half-steps of consecutive
steps are merged into one full even layer; :func:`trotter_schedule` is the
single source of that ordering and is shared with the dense oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ArgumentError, ResourceError
from .model import HamiltonianTerms
from .mps import MPSState, apply_layer, bond_expectations
from .tensor import SvdTruncation

__all__ = ["TrotterPlan", "EvolveDiagnostics", "trotter_schedule", "evolve", "energy"]


def trotter_schedule(steps: int):
    """Per-step lists of ``(parity, fraction)`` layers, parity 0 = even bonds.

    Each element of the returned list is one full Trotter step; the first and
    last steps carry the half even layers, intermediate even layers are merged.
    """
    out = []
    for s in range(steps):
        layers = []
        if s == 0:
            layers.append((0, 0.5))
        layers.append((1, 1.0))
        layers.append((0, 0.5 if s == steps - 1 else 1.0))
        out.append(layers)
    return out


@dataclass
class TrotterPlan:
    """Bond Hamiltonians plus the exponentiated gates for a fixed ``dt``.

    ``bond_hamiltonians[n]`` already contains the on-site terms split between
    neighbouring bonds. Gates are ``exp(-i h dt f)`` in real mode and
    ``exp(-h dt f)`` in imaginary mode, for layer fractions ``f``.
    """

    bond_hamiltonians: tuple
    dims: tuple
    dt: float
    mode: Literal["real", "imaginary"] = "real"
    order: int = 2
    _gates: dict = field(default_factory=dict, repr=False)
    _eig: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("real", "imaginary"):
            raise ArgumentError(f"mode must be 'real' or 'imaginary', got {self.mode!r}")
        if self.order != 2:
            raise ArgumentError("only the second-order symmetric splitting is implemented")
        for n, h in enumerate(self.bond_hamiltonians):
            if h.shape != (self.dims[n] * self.dims[n + 1],) * 2:
                raise ArgumentError(f"bond {n} Hamiltonian has shape {h.shape}")

    @classmethod
    def from_terms(cls, terms: HamiltonianTerms, dt: float, mode: str = "real") -> "TrotterPlan":
        hs = tuple(terms.bond_hamiltonian(n) for n in range(len(terms.dims) - 1))
        return cls(hs, tuple(terms.dims), float(dt), mode)

    def with_dt(self, dt: float, mode: str | None = None) -> "TrotterPlan":
        plan = TrotterPlan(self.bond_hamiltonians, self.dims, float(dt), mode or self.mode)
        plan._eig = self._eig
        return plan

    @property
    def n_bonds(self) -> int:
        return len(self.bond_hamiltonians)

    def bonds_of(self, parity: int) -> list[int]:
        return list(range(parity, self.n_bonds, 2))

    def gate(self, bond: int, fraction: float = 1.0) -> np.ndarray:
        key = (bond, fraction)
        g = self._gates.get(key)
        if g is None:
            if bond not in self._eig:
                self._eig[bond] = np.linalg.eigh(self.bond_hamiltonians[bond])
            w, v = self._eig[bond]
            tau = self.dt * fraction
            phase = np.exp(-1j * w * tau) if self.mode == "real" else np.exp(-w * tau)
            g = (v * phase[None, :]) @ v.conj().T
            self._gates[key] = g
        return g

    @property
    def bond_gates(self) -> list[np.ndarray]:
        """Full-``dt`` gate for every bond."""
        return [self.gate(n, 1.0) for n in range(self.n_bonds)]


@dataclass
class EvolveDiagnostics:
    sweep_max_discarded: list = field(default_factory=list)
    sweep_discarded: list = field(default_factory=list)
    sweep_norm_drift: list = field(default_factory=list)
    max_bond: int = 1
    aborted: bool = False

    @property
    def total_discarded(self) -> float:
        return float(sum(self.sweep_discarded))

    def extend(self, other: "EvolveDiagnostics") -> None:
        self.sweep_max_discarded += other.sweep_max_discarded
        self.sweep_discarded += other.sweep_discarded
        self.sweep_norm_drift += other.sweep_norm_drift
        self.max_bond = max(self.max_bond, other.max_bond)
        self.aborted = self.aborted or other.aborted


def evolve(state: MPSState, plan: TrotterPlan, steps: int, trunc: SvdTruncation,
           renormalize: bool = False, hard_cap: int = 256):
    """Advance ``state`` by ``steps`` second-order Trotter steps (in place).

    With ``renormalize`` the state's ``log_norm`` is reset to zero after every
    step (imaginary-time use); otherwise it accumulates, so ``exp(2 log_norm)``
    tracks the norm lost to truncation. Diagnostics record, per step, the largest
    single-gate discarded weight, the summed discarded weight and the norm drift
    ``1 - exp(2 log_norm)``.

    Raises :class:`ResourceError` (with the partial diagnostics attached) when a
    bond would need more than ``hard_cap`` states to meet the truncation tolerance.
    """
    if state.local_dims != list(plan.dims):
        raise ArgumentError("plan was built for different local dimensions")
    diag = EvolveDiagnostics(max_bond=state.max_bond)
    gates_cache = {}
    for layers in trotter_schedule(steps):
        wmax = 0.0
        wsum = 0.0
        for parity, frac in layers:
            key = (parity, frac)
            if key not in gates_cache:
                bonds = plan.bonds_of(parity)
                gates_cache[key] = (bonds, [plan.gate(b, frac) for b in bonds])
            bonds, gates = gates_cache[key]
            lmax, lsum, needed = apply_layer(state, bonds, gates, trunc)
            wmax = max(wmax, lmax)
            wsum += lsum
            if needed > hard_cap:
                diag.aborted = True
                diag.max_bond = max(diag.max_bond, state.max_bond)
                raise ResourceError(
                    f"bond dimension {needed} required to meet tolerance {trunc.discard_tolerance} exceeds hard cap {hard_cap}",
                    diagnostics=diag,
                )
        diag.sweep_max_discarded.append(wmax)
        diag.sweep_discarded.append(wsum)
        if renormalize:
            diag.sweep_norm_drift.append(0.0)
            state.log_norm = 0.0
        else:
            diag.sweep_norm_drift.append(1.0 - math.exp(2.0 * state.log_norm))
        diag.max_bond = max(diag.max_bond, state.max_bond)
    return state, diag


def energy(state: MPSState, plan: TrotterPlan) -> float:
    """``<H>`` per unit norm, from the bond Hamiltonians of ``plan``."""
    return float(np.sum(bond_expectations(state, plan.bond_hamiltonians)).real)
