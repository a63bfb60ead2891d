"""Waveguide + scatterer Hamiltonian on a nearest-neighbour chain.

The waveguide is an open array of ``n_cav = 2L + 1`` coupled cavities indexed
``x = -L..L`` (chain site ``n = x + L``). Each scatterer is fused with the
cavity it couples to, giving a composite site whose local basis index is
``photon * s + scatterer`` (cavity factor major), so every Hamiltonian term is
either on-site or acts on a single bond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, ConfigurationError

__all__ = [
    "ScattererSpec",
    "ModelSpec",
    "SiteLayout",
    "HamiltonianTerms",
    "dispersion",
    "group_velocity",
    "boson_ops",
    "dicke_ladder",
    "build_terms",
    "dense_hamiltonian",
    "excitation_number_operator",
    "parity_operator",
]

CouplingMode = Literal["rwa", "full"]


@dataclass(frozen=True)
class ScattererSpec:
    """A point scatterer: a group of ``count`` co-located identical qubits or a truncated oscillator.

    ``g`` is the per-qubit coupling; a qubit group couples collectively with ``g * sqrt(count)``.
    """

    position: int
    delta: float = 1.0
    g: float = 0.1
    kind: Literal["qubit", "oscillator"] = "qubit"
    count: int = 1
    n_osc: int = 2

    def __post_init__(self):
        if self.kind not in ("qubit", "oscillator"):
            raise ConfigurationError(f"unknown scatterer kind {self.kind!r}", "kind")
        if self.g < 0:
            raise ConfigurationError(f"coupling must be non-negative, got {self.g}", "g")
        if self.delta <= 0:
            raise ConfigurationError(f"frequency must be positive, got {self.delta}", "delta")
        if self.count < 1:
            raise ConfigurationError(f"qubit count must be >= 1, got {self.count}", "count")
        if self.n_osc < 1:
            raise ConfigurationError(f"oscillator truncation must be >= 1, got {self.n_osc}", "n_osc")

    @property
    def collective_g(self) -> float:
        return self.g * math.sqrt(self.count) if self.kind == "qubit" else self.g


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the chain Hamiltonian.

    ``dicke_cap`` limits the excitation ladder of qubit groups (``None`` keeps all
    ``count + 1`` symmetric levels). ``max_local_dim`` is the ceiling on any
    site's local dimension.
    """

    n_cav: int = 129
    epsilon: float = 1.0
    hopping: float = 1.0 / math.pi
    n_max: int = 2
    scatterers: tuple[ScattererSpec, ...] = ()
    coupling: CouplingMode = "rwa"
    dicke_cap: int | None = None
    max_local_dim: int = 64

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if self.n_cav < 3 or self.n_cav % 2 == 0:
            raise ConfigurationError(f"n_cav must be odd and >= 3, got {self.n_cav}", "n_cav")
        if self.n_max < 1:
            raise ConfigurationError(f"n_max must be >= 1, got {self.n_max}", "n_max")
        if self.coupling not in ("rwa", "full"):
            raise ConfigurationError(f"coupling must be 'rwa' or 'full', got {self.coupling!r}", "coupling")
        if self.dicke_cap is not None and self.dicke_cap < 1:
            raise ConfigurationError(f"dicke_cap must be >= 1, got {self.dicke_cap}", "dicke_cap")
        L = self.half_length
        seen = set()
        for sc in self.scatterers:
            if not -L < sc.position < L:
                raise ConfigurationError(
                    f"scatterer position {sc.position} must lie strictly inside [-{L}, {L}]", "scatterers"
                )
            if sc.position in seen:
                raise ConfigurationError(
                    f"two scatterers at x={sc.position}; express co-located qubits through count", "scatterers"
                )
            seen.add(sc.position)

    @property
    def half_length(self) -> int:
        return (self.n_cav - 1) // 2

    def site_of(self, x: int) -> int:
        return int(x) + self.half_length

    def positions(self) -> np.ndarray:
        L = self.half_length
        return np.arange(-L, L + 1)

    def with_updates(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    @cached_property
    def layout(self) -> "SiteLayout":
        return SiteLayout.from_spec(self)


def dispersion(k, spec: ModelSpec):
    """Free photon band ``epsilon - 2 J cos k``."""
    return spec.epsilon - 2.0 * spec.hopping * np.cos(k)


def group_velocity(k, spec: ModelSpec):
    return 2.0 * spec.hopping * np.sin(k)


def boson_ops(n_max: int):
    """Truncated bosonic ``(a, a_dag, n)`` on levels ``0..n_max``."""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(np.complex128)
    return a, a.conj().T.copy(), np.diag(np.arange(n_max + 1, dtype=float)).astype(np.complex128)


def dicke_ladder(m: int, cap: int):
    """Symmetric-sector ladder of ``m`` qubits truncated at ``cap`` excitations.

    Returns ``(raising, lowering, number)`` for the normalised collective
    operator ``b = sum(sigma_minus) / sqrt(m)``, with
    ``b_dag |n> = sqrt((n + 1) (1 - n/m)) |n + 1>``.
    """
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    if not 1 <= cap <= m:
        raise ArgumentError(f"cap must satisfy 1 <= cap <= m, got cap={cap}, m={m}")
    n = np.arange(cap, dtype=float)
    raising = np.diag(np.sqrt((n + 1.0) * (1.0 - n / m)), k=-1).astype(np.complex128)
    lowering = raising.conj().T.copy()
    number = np.diag(np.arange(cap + 1, dtype=float)).astype(np.complex128)
    return raising, lowering, number


@dataclass(frozen=True)
class SiteLayout:
    """Local dimensions and scatterer placement along the chain."""

    n_max: int
    dims: tuple[int, ...]
    scatterer_dims: tuple[int, ...]
    scatterer_sites: dict = field(default_factory=dict)

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> "SiteLayout":
        sdims = [1] * spec.n_cav
        sites = {}
        for sc in spec.scatterers:
            n = spec.site_of(sc.position)
            if sc.kind == "qubit":
                cap = sc.count if spec.dicke_cap is None else min(sc.count, spec.dicke_cap)
                sdims[n] = cap + 1
            else:
                sdims[n] = sc.n_osc + 1
            sites[n] = sc
        dims = tuple((spec.n_max + 1) * s for s in sdims)
        for n, d in enumerate(dims):
            if d > spec.max_local_dim:
                raise ConfigurationError(
                    f"local dimension {d} at site {n} (x={n - spec.half_length}) exceeds ceiling {spec.max_local_dim}",
                    "max_local_dim",
                )
        return cls(spec.n_max, dims, tuple(sdims), sites)

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    def photon_ops(self, n: int):
        """``(a, a_dag, a_dag a)`` acting on the cavity factor of site ``n``."""
        a, ad, num = boson_ops(self.n_max)
        eye = np.eye(self.scatterer_dims[n])
        return np.kron(a, eye), np.kron(ad, eye), np.kron(num, eye)

    def scatterer_ops(self, n: int):
        """``(b, b_dag, excitation count)`` acting on the scatterer factor of site ``n``.

        For a qubit group ``b`` is the normalised collective lowering operator and the
        count is the number of excited qubits; for an oscillator they are ``c, c_dag, c_dag c``.
        """
        sc = self.scatterer_sites[n]
        s = self.scatterer_dims[n]
        if sc.kind == "qubit":
            raising, lowering, number = dicke_ladder(sc.count, s - 1)
        else:
            lowering, raising, number = boson_ops(s - 1)
        eye = np.eye(self.n_max + 1)
        return np.kron(eye, lowering), np.kron(eye, raising), np.kron(eye, number)

    def qubit_sigma_ops(self, n: int):
        """``(sigma_plus, sigma_minus)`` summed over the group at site ``n``: ``sqrt(m) b_dag``, ``sqrt(m) b``."""
        sc = self.scatterer_sites[n]
        b, bd, _ = self.scatterer_ops(n)
        scale = math.sqrt(sc.count) if sc.kind == "qubit" else 1.0
        return scale * bd, scale * b


@dataclass(frozen=True)
class HamiltonianTerms:
    """``H = sum_n onsite[n] + sum_n bonds[n]`` with ``bonds[n]`` acting on sites ``(n, n+1)``."""

    dims: tuple[int, ...]
    onsite: tuple[np.ndarray, ...]
    bonds: tuple[np.ndarray, ...]

    def bond_hamiltonian(self, n: int) -> np.ndarray:
        """Bond term plus on-site terms split between the bonds touching each site.

        Interior sites contribute half of their on-site term to each neighbouring
        bond; the two chain ends contribute their full term to their only bond.
        """
        last = len(self.dims) - 1
        wl = 1.0 if n == 0 else 0.5
        wr = 1.0 if n + 1 == last else 0.5
        dl, dr = self.dims[n], self.dims[n + 1]
        return (
            self.bonds[n]
            + wl * np.kron(self.onsite[n], np.eye(dr))
            + wr * np.kron(np.eye(dl), self.onsite[n + 1])
        )


def build_terms(spec: ModelSpec) -> HamiltonianTerms:
    """Assemble on-site and bond matrices for ``spec`` on its :class:`SiteLayout`."""
    layout = spec.layout
    onsite = []
    for n in range(layout.n_sites):
        a, ad, num = layout.photon_ops(n)
        h = spec.epsilon * num
        if n in layout.scatterer_sites:
            sc = layout.scatterer_sites[n]
            b, bd, bnum = layout.scatterer_ops(n)
            gc = sc.collective_g
            h = h + sc.delta * bnum
            if spec.coupling == "rwa":
                h = h + gc * (bd @ a + b @ ad)
            else:
                h = h + gc * (b + bd) @ (a + ad)
        onsite.append(_hermitize(h))
    bonds = []
    for n in range(layout.n_sites - 1):
        a1, ad1, _ = layout.photon_ops(n)
        a2, ad2, _ = layout.photon_ops(n + 1)
        bonds.append(_hermitize(-spec.hopping * (np.kron(ad1, a2) + np.kron(a1, ad2))))
    return HamiltonianTerms(layout.dims, tuple(onsite), tuple(bonds))


def _hermitize(h: np.ndarray) -> np.ndarray:
    # exact Hermiticity at the bit level; inputs are Hermitian up to roundoff in products
    return 0.5 * (h + h.conj().T)


def _embed(op: np.ndarray, first: int, dims, width: int = 1) -> sp.csr_matrix:
    """Embed an operator acting on ``width`` consecutive sites starting at ``first``."""
    left = int(np.prod(dims[:first], dtype=np.int64))
    right = int(np.prod(dims[first + width:], dtype=np.int64))
    out = sp.csr_matrix(op)
    if left > 1:
        out = sp.kron(sp.identity(left, format="csr"), out, format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, format="csr"), format="csr")
    return out


def embed_local(op: np.ndarray, site: int, dims) -> sp.csr_matrix:
    return _embed(op, site, dims)


def dense_hamiltonian(terms: HamiltonianTerms) -> sp.csr_matrix:
    """Full many-body Hamiltonian (sparse) in the row-major product basis."""
    dims = terms.dims
    total = int(np.prod(dims, dtype=np.int64))
    h = sp.csr_matrix((total, total), dtype=np.complex128)
    for n, o in enumerate(terms.onsite):
        h = h + _embed(o, n, dims)
    for n, b in enumerate(terms.bonds):
        h = h + _embed(b, n, dims, width=2)
    return h.tocsr()


def excitation_number_operator(spec: ModelSpec) -> sp.csr_matrix:
    """Total photon plus scatterer excitation number on the full product space."""
    layout = spec.layout
    dims = layout.dims
    total = int(np.prod(dims, dtype=np.int64))
    op = sp.csr_matrix((total, total), dtype=np.complex128)
    for n in range(layout.n_sites):
        op = op + _embed(local_excitation_number(layout, n), n, dims)
    return op.tocsr()


def local_excitation_number(layout: SiteLayout, n: int) -> np.ndarray:
    num = layout.photon_ops(n)[2]
    if n in layout.scatterer_sites:
        num = num + layout.scatterer_ops(n)[2]
    return num


def parity_operator(spec: ModelSpec) -> sp.csr_matrix:
    """``(-1)^N`` for the total excitation number (diagonal in the product basis)."""
    diag = excitation_number_operator(spec).diagonal().real
    return sp.diags(np.where(np.round(diag).astype(int) % 2 == 0, 1.0, -1.0).astype(np.complex128)).tocsr()
