"""Exact evolution inside a fixed-excitation sector of an RWA model.

With the rotating-wave coupling the total excitation number is conserved, so
an ``N``-photon experiment on the vacuum lives in a sector whose basis is the
set of multisets of ``N`` mode labels (cavities ``0..n_cav-1`` followed by one
label per scatterer). For ``N <= 3`` on a desk-scale chain the sector has at most
a few hundred thousand states and ``exp(-i H t)`` is applied exactly with a
sparse Krylov/Taylor action, independently of the MPS machinery.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ModelError, ResourceError
from ..model import ModelSpec

__all__ = ["SectorBasis", "SectorModel", "sector_model"]

MAX_SECTOR_DIM = 2_000_000


@dataclass(frozen=True)
class SectorBasis:
    n_exc: int
    states: tuple              # sorted tuples of mode labels
    index: dict

    @property
    def dim(self) -> int:
        return len(self.states)


class SectorModel:
    """Mode ladder data plus sparse Hamiltonians and creation maps per sector."""

    def __init__(self, model: ModelSpec):
        if model.coupling != "rwa":
            raise ModelError("fixed-excitation sectors exist only for RWA coupling")
        self.model = model
        n = model.n_cav
        self.n_cav = n
        self.scatterers = list(model.scatterers)
        self.n_modes = n + len(self.scatterers)
        self.energy = np.concatenate([np.full(n, model.epsilon), [sc.delta for sc in self.scatterers]])
        self._bases = {}
        self._hams = {}
        # (mode i, mode j, amplitude) for number-conserving hops i <- j, listed once per direction
        hops = []
        for x in range(n - 1):
            hops.append((x, x + 1, -model.hopping))
            hops.append((x + 1, x, -model.hopping))
        for s, sc in enumerate(self.scatterers):
            c = n + s
            x = model.site_of(sc.position)
            hops.append((c, x, sc.collective_g))
            hops.append((x, c, sc.collective_g))
        self.hops = hops

    # ladder matrix element <occ+1| raise |occ> for every mode type
    def raise_amp(self, mode: int, occ: int) -> float:
        if mode < self.n_cav:
            return math.sqrt(occ + 1)
        sc = self.scatterers[mode - self.n_cav]
        if sc.kind == "qubit":
            if occ + 1 > sc.count:
                return 0.0
            return math.sqrt((occ + 1) * (1.0 - occ / sc.count))
        if occ + 1 > sc.n_osc:
            return 0.0
        return math.sqrt(occ + 1)

    def basis(self, n_exc: int) -> SectorBasis:
        if n_exc not in self._bases:
            dim = math.comb(self.n_modes + n_exc - 1, n_exc)
            if dim > MAX_SECTOR_DIM:
                raise ResourceError(f"sector dimension {dim} exceeds {MAX_SECTOR_DIM}")
            states = []
            for combo in itertools.combinations_with_replacement(range(self.n_modes), n_exc):
                if all(self._allowed(m, combo.count(m)) for m in set(combo)):
                    states.append(combo)
            self._bases[n_exc] = SectorBasis(n_exc, tuple(states), {s: i for i, s in enumerate(states)})
        return self._bases[n_exc]

    def _allowed(self, mode: int, occ: int) -> bool:
        if mode < self.n_cav:
            return True
        sc = self.scatterers[mode - self.n_cav]
        return occ <= (sc.count if sc.kind == "qubit" else sc.n_osc)

    def hamiltonian(self, n_exc: int) -> sp.csr_matrix:
        if n_exc in self._hams:
            return self._hams[n_exc]
        b = self.basis(n_exc)
        rows, cols, vals = [], [], []
        for col, st in enumerate(b.states):
            rows.append(col)
            cols.append(col)
            vals.append(float(sum(self.energy[m] for m in st)))
            occ = {m: st.count(m) for m in set(st)}
            for i, j, amp in self.hops:
                nj = occ.get(j, 0)
                if nj == 0:
                    continue
                ni = occ.get(i, 0)
                a = amp * self.raise_amp(j, nj - 1) * self.raise_amp(i, ni)
                if a == 0.0:
                    continue
                new = list(st)
                new.remove(j)
                new.append(i)
                row = b.index.get(tuple(sorted(new)))
                if row is not None:
                    rows.append(row)
                    cols.append(col)
                    vals.append(a)
        h = sp.csr_matrix((vals, (rows, cols)), shape=(b.dim, b.dim), dtype=np.complex128)
        self._hams[n_exc] = h
        return h

    def create(self, n_exc: int, amplitudes: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``sum_x amplitudes[x] a_x^dag`` from sector ``n_exc`` to ``n_exc + 1``."""
        src, dst = self.basis(n_exc), self.basis(n_exc + 1)
        rows, cols, vals = [], [], []
        for col, st in enumerate(src.states):
            for x in np.nonzero(amplitudes)[0]:
                occ = st.count(x)
                row = dst.index[tuple(sorted(st + (int(x),)))]
                rows.append(row)
                cols.append(col)
                vals.append(amplitudes[x] * math.sqrt(occ + 1))
        return sp.csr_matrix((vals, (rows, cols)), shape=(dst.dim, src.dim), dtype=np.complex128)

    def packet_state(self, phi: np.ndarray, n_photons: int) -> np.ndarray:
        """Normalised ``(a_phi^dag)^N |0>`` as a sector vector."""
        phi = np.asarray(phi, dtype=np.complex128)
        v = np.ones(1, dtype=np.complex128)
        for n in range(n_photons):
            v = self.create(n, phi) @ v
        return v / np.linalg.norm(v)

    def evolve(self, vec: np.ndarray, n_exc: int, t: float) -> np.ndarray:
        if t == 0:
            return vec.copy()
        return spla.expm_multiply(-1j * t * self.hamiltonian(n_exc), vec)

    # --- observables ---------------------------------------------------------------

    def photon_correlations(self, vec: np.ndarray, n_exc: int) -> np.ndarray:
        """``<a_i^dag a_j>`` over cavities, as the Gram matrix of the vectors ``a_j |psi>``."""
        b = self.basis(n_exc)
        lower = self.basis(n_exc - 1)
        rows, cols, vals = [], [], []
        for idx, st in enumerate(b.states):
            for j in set(st):
                if j >= self.n_cav:
                    continue
                rest = list(st)
                rest.remove(j)
                rows.append(lower.index[tuple(rest)])
                cols.append(j)
                vals.append(vec[idx] * math.sqrt(st.count(j)))
        w = sp.csr_matrix((vals, (rows, cols)), shape=(lower.dim, self.n_cav), dtype=np.complex128)
        return np.asarray((w.conj().T @ w).todense())

    def scatterer_counts(self, vec: np.ndarray, n_exc: int) -> dict:
        b = self.basis(n_exc)
        w = np.abs(vec) ** 2
        out = {}
        for s, sc in enumerate(self.scatterers):
            mode = self.n_cav + s
            out[sc.position] = float(sum(w[i] * st.count(mode) for i, st in enumerate(b.states)))
        return out

    def photon_density(self, vec: np.ndarray, n_exc: int) -> np.ndarray:
        b = self.basis(n_exc)
        w = np.abs(vec) ** 2
        dens = np.zeros(self.n_cav)
        for i, st in enumerate(b.states):
            for m in st:
                if m < self.n_cav:
                    dens[m] += w[i]
        return dens

    def two_photon_map(self, vec: np.ndarray) -> np.ndarray:
        """``phi_{x1 x2} = 2^{-1/2} <0| a_x1 a_x2 |psi>`` over cavities for a two-excitation vector."""
        b = self.basis(2)
        n = self.n_cav
        out = np.zeros((n, n), dtype=np.complex128)
        for i, (x1, x2) in enumerate(b.states):
            if x2 >= n:
                continue
            if x1 == x2:
                out[x1, x1] = vec[i]
            else:
                out[x1, x2] = out[x2, x1] = vec[i] / math.sqrt(2.0)
        return out


def sector_model(model: ModelSpec) -> SectorModel:
    return SectorModel(model)
