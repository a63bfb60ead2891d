"""Open-boundary matrix product states.

Site tensors have shape ``(D_left, d, D_right)`` with ``D = 1`` at both chain
ends. The physical state is ``exp(log_norm) * |psi>`` where ``|psi>`` is the
contraction of the stored tensors; when an orthogonality centre is set the
stored tensors represent a unit vector and all the norm lives in ``log_norm``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError
from .tensor import DenseTensor, SvdTruncation, svd_truncate_array

__all__ = [
    "MPSState",
    "LocalOperator",
    "product_state",
    "canonicalize",
    "move_center",
    "apply_two_site_gate",
    "apply_layer",
    "expectation_product",
    "expectation_two_point",
    "overlap",
    "local_expectations",
    "bond_expectations",
    "correlation_matrix",
    "apply_operator_sum",
    "compress",
    "to_dense",
    "from_dense",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass
class MPSState:
    """Chain of rank-3 site tensors plus normalisation bookkeeping."""

    tensors: list
    center: int | None = None
    log_norm: float = 0.0

    def __post_init__(self):
        self.tensors = [np.ascontiguousarray(t, dtype=np.complex128) for t in self.tensors]
        if not self.tensors:
            raise ArgumentError("an MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionError("open boundary bonds must have dimension 1")
        for n in range(len(self.tensors) - 1):
            if self.tensors[n].shape[2] != self.tensors[n + 1].shape[0]:
                raise DimensionError(
                    f"bond {n}: right extent {self.tensors[n].shape[2]} != left extent {self.tensors[n + 1].shape[0]}"
                )

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [1] + [t.shape[2] for t in self.tensors]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims)

    def site_tensor(self, n: int) -> DenseTensor:
        return DenseTensor(self.tensors[n])

    def copy(self) -> "MPSState":
        return MPSState([t.copy() for t in self.tensors], self.center, self.log_norm)

    def norm(self) -> float:
        """Norm of the represented vector including ``log_norm``."""
        return math.sqrt(abs(overlap(self, self)))

    def normalize(self) -> "MPSState":
        if self.center is None:
            canonicalize(self, 0)
        self.log_norm = 0.0
        return self


@dataclass(frozen=True)
class LocalOperator:
    site: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"local operator must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)


def product_state(local_dims: Sequence[int], local_vectors: Sequence) -> MPSState:
    """Bond-dimension-one MPS for a tensor product of unit vectors."""
    if len(local_dims) != len(local_vectors):
        raise ArgumentError("one local vector per site is required")
    tensors = []
    for n, (d, v) in enumerate(zip(local_dims, local_vectors)):
        v = np.asarray(v, dtype=np.complex128)
        if v.shape != (d,):
            raise ArgumentError(f"site {n}: vector of length {v.shape} for local dimension {d}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ArgumentError(f"site {n}: local vector is not normalised (norm {np.linalg.norm(v)})")
        tensors.append(v.reshape(1, d, 1))
    return MPSState(tensors, center=0, log_norm=0.0)


def vacuum_state(local_dims: Sequence[int]) -> MPSState:
    vecs = []
    for d in local_dims:
        v = np.zeros(d)
        v[0] = 1.0
        vecs.append(v)
    return product_state(local_dims, vecs)


# --- canonical forms --------------------------------------------------------

def _shift_right(state: MPSState, n: int) -> None:
    a = state.tensors[n]
    dl, d, dr = a.shape
    q, r = np.linalg.qr(a.reshape(dl * d, dr))
    state.tensors[n] = q.reshape(dl, d, q.shape[1])
    state.tensors[n + 1] = np.tensordot(r, state.tensors[n + 1], axes=(1, 0))


def _shift_left(state: MPSState, n: int) -> None:
    a = state.tensors[n]
    dl, d, dr = a.shape
    q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
    state.tensors[n] = np.ascontiguousarray(q.T).reshape(q.shape[1], d, dr)
    state.tensors[n - 1] = np.tensordot(state.tensors[n - 1], r.T, axes=(2, 0))


def _normalize_center(state: MPSState) -> None:
    c = state.center
    nrm = np.linalg.norm(state.tensors[c])
    if nrm == 0.0 or not np.isfinite(nrm):
        raise NumericError(f"state norm is {nrm}", shape=state.tensors[c].shape)
    state.tensors[c] = state.tensors[c] / nrm
    state.log_norm += math.log(nrm)


def canonicalize(state: MPSState, center: int = 0) -> MPSState:
    """Bring ``state`` into mixed canonical form around ``center`` (in place)."""
    if not 0 <= center < state.n_sites:
        raise ArgumentError(f"centre {center} out of range")
    for n in range(center):
        _shift_right(state, n)
    for n in range(state.n_sites - 1, center, -1):
        _shift_left(state, n)
    state.center = center
    _normalize_center(state)
    return state


def move_center(state: MPSState, target: int) -> MPSState:
    if state.center is None:
        return canonicalize(state, target)
    while state.center < target:
        _shift_right(state, state.center)
        state.center += 1
    while state.center > target:
        _shift_left(state, state.center)
        state.center -= 1
    return state


# --- gates -------------------------------------------------------------------

def _gate_update(state: MPSState, bond: int, gate: np.ndarray, trunc: SvdTruncation, direction: str):
    i = bond
    a, b = state.tensors[i], state.tensors[i + 1]
    dl, d1, _ = a.shape
    _, d2, dr = b.shape
    theta = np.tensordot(a, b, axes=(2, 0)).reshape(dl, d1 * d2, dr)
    theta = np.matmul(gate, theta).reshape(dl * d1, d2 * dr)
    u, s, vh, discarded, needed = svd_truncate_array(theta, trunc)
    nrm = float(np.linalg.norm(s))
    if nrm == 0.0 or not np.isfinite(nrm):
        raise NumericError(f"gate on bond {bond} produced norm {nrm}", shape=theta.shape)
    s = s / nrm
    state.log_norm += math.log(nrm)
    r = s.shape[0]
    if direction == "right":
        state.tensors[i] = u.reshape(dl, d1, r)
        state.tensors[i + 1] = (s[:, None] * vh).reshape(r, d2, dr)
        state.center = i + 1
    else:
        state.tensors[i] = (u * s[None, :]).reshape(dl, d1, r)
        state.tensors[i + 1] = vh.reshape(r, d2, dr)
        state.center = i
    return discarded, needed


def apply_two_site_gate(state: MPSState, bond: int, gate, trunc: SvdTruncation, direction: str = "right"):
    """Apply a two-site matrix on sites ``(bond, bond + 1)`` and re-truncate (in place).

    ``gate`` acts on the ``d_bond * d_{bond+1}`` dimensional pair space with the
    left site as the major index. Afterwards the orthogonality centre sits on the
    bond's right site (``direction="right"``) or left site (``"left"``).

    Returns ``(state, discarded_weight)``.
    """
    if not 0 <= bond < state.n_sites - 1:
        raise ArgumentError(f"bond {bond} out of range for {state.n_sites} sites")
    gate = np.asarray(gate, dtype=np.complex128)
    d1, d2 = state.tensors[bond].shape[1], state.tensors[bond + 1].shape[1]
    if gate.shape != (d1 * d2, d1 * d2):
        raise ArgumentError(f"gate shape {gate.shape} does not match pair dimension {d1 * d2}")
    if state.center is None:
        canonicalize(state, bond)
    elif state.center < bond:
        move_center(state, bond)
    elif state.center > bond + 1:
        move_center(state, bond + 1)
    discarded, _ = _gate_update(state, bond, gate, trunc, direction)
    return state, discarded


def apply_layer(state: MPSState, bonds: Sequence[int], gates: Sequence[np.ndarray], trunc: SvdTruncation):
    """Apply gates on mutually disjoint bonds in one sweep.

    The sweep direction follows the current orthogonality centre so that only one
    QR step separates consecutive gates. Returns ``(max discarded, summed
    discarded, max rank needed to meet the tolerance)``.
    """
    if state.center is None:
        canonicalize(state, bonds[0])
    order = list(range(len(bonds)))
    if state.center > (state.n_sites - 1) / 2:
        order.reverse()
        direction = "left"
    else:
        direction = "right"
    wmax = 0.0
    wsum = 0.0
    needed_max = 1
    for j in order:
        b = bonds[j]
        if direction == "right":
            if state.center < b:
                move_center(state, b)
            elif state.center > b + 1:
                move_center(state, b + 1)
        else:
            if state.center > b + 1:
                move_center(state, b + 1)
            elif state.center < b:
                move_center(state, b)
        w, needed = _gate_update(state, b, gates[j], trunc, direction)
        wsum += w
        if w > wmax:
            wmax = w
        if needed > needed_max:
            needed_max = needed
    return wmax, wsum, needed_max


# --- environments and expectation values -------------------------------------

def _transfer_left(env, bra_t, ket_t, op=None):
    tmp = np.tensordot(env, ket_t, axes=(1, 0))  # (a, t, d)
    if op is not None:
        tmp = np.tensordot(op, tmp, axes=(1, 1))  # (s, a, d)
        return np.tensordot(bra_t.conj(), tmp, axes=([0, 1], [1, 0]))
    return np.tensordot(bra_t.conj(), tmp, axes=([0, 1], [0, 1]))


def _transfer_right(env, bra_t, ket_t, op=None):
    tmp = np.tensordot(ket_t, env, axes=(2, 1))  # (b, t, c)
    if op is not None:
        tmp = np.tensordot(op, tmp, axes=(1, 1))  # (s, b, c)
        return np.tensordot(bra_t.conj(), tmp, axes=([1, 2], [0, 2]))
    return np.tensordot(bra_t.conj(), tmp, axes=([1, 2], [1, 2]))


def _check_pair(bra: MPSState, ket: MPSState):
    if bra.local_dims != ket.local_dims:
        raise ArgumentError("bra and ket have different local dimensions")


def _left_envs(bra: MPSState, ket: MPSState):
    """``envs[n]`` contracts sites ``< n``; ``envs[0]`` is the trivial boundary."""
    envs = [np.ones((1, 1), dtype=np.complex128)]
    for n in range(bra.n_sites):
        envs.append(_transfer_left(envs[-1], bra.tensors[n], ket.tensors[n]))
    return envs


def _right_envs(bra: MPSState, ket: MPSState):
    """``envs[n]`` contracts sites ``>= n``; ``envs[N]`` is the trivial boundary."""
    N = bra.n_sites
    envs = [None] * (N + 1)
    envs[N] = np.ones((1, 1), dtype=np.complex128)
    for n in range(N - 1, -1, -1):
        envs[n] = _transfer_right(envs[n + 1], bra.tensors[n], ket.tensors[n])
    return envs


def _scale(bra: MPSState, ket: MPSState) -> float:
    return math.exp(bra.log_norm + ket.log_norm)


def expectation_product(bra: MPSState, ket: MPSState, ops: Iterable[LocalOperator] = ()) -> complex:
    """``<bra| o_1 o_2 ... o_N |ket>`` for at most one local operator per site."""
    _check_pair(bra, ket)
    by_site = {}
    for op in ops:
        if not 0 <= op.site < ket.n_sites:
            raise ArgumentError(f"operator on site {op.site} outside chain of {ket.n_sites} sites")
        if op.site in by_site:
            raise ArgumentError(f"two operators on site {op.site}")
        if op.matrix.shape[0] != ket.local_dims[op.site]:
            raise ArgumentError(f"operator on site {op.site} has wrong dimension")
        by_site[op.site] = op.matrix
    env = np.ones((1, 1), dtype=np.complex128)
    for n in range(ket.n_sites):
        env = _transfer_left(env, bra.tensors[n], ket.tensors[n], by_site.get(n))
    return complex(env[0, 0]) * _scale(bra, ket)


def overlap(bra: MPSState, ket: MPSState) -> complex:
    return expectation_product(bra, ket, ())


def expectation_two_point(state: MPSState, op_a: LocalOperator, op_b: LocalOperator) -> complex:
    """``<psi| o_a o_b |psi>`` with ``op_a.site <= op_b.site``; equal sites multiply the matrices."""
    if op_a.site > op_b.site:
        raise ArgumentError("op_a must not lie to the right of op_b")
    if op_a.site == op_b.site:
        return expectation_product(state, state, [LocalOperator(op_a.site, op_a.matrix @ op_b.matrix)])
    return expectation_product(state, state, [op_a, op_b])


def local_expectations(bra: MPSState, ket: MPSState, ops: dict) -> dict:
    """``<bra|o_n|ket>`` for every ``site -> matrix`` in ``ops`` using cached environments."""
    _check_pair(bra, ket)
    left = _left_envs(bra, ket)
    right = _right_envs(bra, ket)
    out = {}
    scale = _scale(bra, ket)
    for n, op in ops.items():
        env = _transfer_left(left[n], bra.tensors[n], ket.tensors[n], np.asarray(op, dtype=np.complex128))
        out[n] = complex(np.sum(env * right[n + 1])) * scale
    return out


def bond_expectations(state: MPSState, bond_ops: Sequence[np.ndarray]) -> np.ndarray:
    """``<psi|h_n|psi> / <psi|psi>`` for two-site operators on every bond ``(n, n+1)``."""
    left = _left_envs(state, state)
    right = _right_envs(state, state)
    norm2 = complex(left[-1][0, 0]).real
    out = np.empty(len(bond_ops), dtype=np.complex128)
    for n, h in enumerate(bond_ops):
        a, b = state.tensors[n], state.tensors[n + 1]
        dl, d1, _ = a.shape
        _, d2, dr = b.shape
        theta = np.tensordot(a, b, axes=(2, 0)).reshape(dl, d1 * d2, dr)
        htheta = np.matmul(h, theta)
        tmp = np.tensordot(left[n], htheta, axes=(1, 0))  # (a, p, d)
        tmp = np.tensordot(theta.conj(), tmp, axes=([0, 1], [0, 1]))  # (c, d)
        out[n] = np.sum(tmp * right[n + 2])
    return out / norm2


def correlation_matrix(bra: MPSState, ket: MPSState, left_ops: dict, right_ops: dict,
                       diagonal_ops: dict | None = None) -> np.ndarray:
    """All two-point values ``C[i, j] = <bra| L_i R_j |ket>`` for ``i < j``.

    ``left_ops`` / ``right_ops`` map site -> matrix. Sites missing from either
    mapping give zero rows/columns. ``diagonal_ops[i]`` (the product ``L_i R_i``
    in the caller's operator order) fills ``C[i, i]``. Entries with ``i > j`` are
    left at zero. Cost is ``O(N^2)`` transfer steps thanks to cached environments.
    """
    _check_pair(bra, ket)
    N = ket.n_sites
    left = _left_envs(bra, ket)
    right = _right_envs(bra, ket)
    scale = _scale(bra, ket)
    out = np.zeros((N, N), dtype=np.complex128)
    for i, li in left_ops.items():
        env = _transfer_left(left[i], bra.tensors[i], ket.tensors[i], np.asarray(li, dtype=np.complex128))
        for j in range(i + 1, N):
            rj = right_ops.get(j)
            if rj is not None:
                closed = _transfer_left(env, bra.tensors[j], ket.tensors[j], np.asarray(rj, dtype=np.complex128))
                out[i, j] = np.sum(closed * right[j + 1])
            if j < N - 1:
                env = _transfer_left(env, bra.tensors[j], ket.tensors[j])
    if diagonal_ops:
        for i, dop in diagonal_ops.items():
            env = _transfer_left(left[i], bra.tensors[i], ket.tensors[i], np.asarray(dop, dtype=np.complex128))
            out[i, i] = np.sum(env * right[i + 1])
    return out * scale


# --- operator application and compression ------------------------------------

def apply_operator_sum(state: MPSState, ops: dict, trunc: SvdTruncation) -> MPSState:
    """Return ``sum_n o_n |state>`` for local operators ``ops`` (site -> matrix), compressed.

    The sum is built exactly with doubled bond dimension (an "operator applied or
    not yet applied" flag carried along the bond) and then re-compressed.
    """
    N = state.n_sites
    tensors = []
    for n, a in enumerate(state.tensors):
        dl, d, dr = a.shape
        op = ops.get(n)
        oa = np.zeros_like(a) if op is None else np.einsum("st,atb->asb", np.asarray(op, dtype=np.complex128), a)
        if N == 1:
            tensors.append(oa)
            continue
        if n == 0:
            t = np.zeros((1, d, 2 * dr), dtype=np.complex128)
            t[:, :, :dr] = a
            t[:, :, dr:] = oa
        elif n == N - 1:
            t = np.zeros((2 * dl, d, 1), dtype=np.complex128)
            t[:dl] = oa
            t[dl:] = a
        else:
            t = np.zeros((2 * dl, d, 2 * dr), dtype=np.complex128)
            # block (not-yet, not-yet)=A, (not-yet -> applied)=oA, (applied, applied)=A
            t[:dl, :, :dr] = a
            t[:dl, :, dr:] = oa
            t[dl:, :, dr:] = a
        tensors.append(t)
    out = MPSState(tensors, center=None, log_norm=state.log_norm)
    return compress(out, trunc)


def compress(state: MPSState, trunc: SvdTruncation) -> MPSState:
    """Canonicalise and SVD-truncate every bond (left-to-right sweep); in place.

    Leaves the centre on the last site. Returns the state.
    """
    canonicalize(state, state.n_sites - 1)
    # now right-to-left truncating sweep
    for n in range(state.n_sites - 1, 0, -1):
        a = state.tensors[n]
        dl, d, dr = a.shape
        u, s, vh, _, _ = svd_truncate_array(a.reshape(dl, d * dr), trunc)
        nrm = float(np.linalg.norm(s))
        s = s / nrm
        state.log_norm += math.log(nrm)
        state.tensors[n] = vh.reshape(len(s), d, dr)
        state.tensors[n - 1] = np.tensordot(state.tensors[n - 1], u * s[None, :], axes=(2, 0))
        state.center = n - 1
    _normalize_center(state)
    return state


# --- dense conversions ----------------------------------------------------------

def to_dense(state: MPSState) -> np.ndarray:
    """Full state vector (row-major over sites), including ``log_norm``."""
    psi = state.tensors[0].reshape(-1, state.tensors[0].shape[2])
    for t in state.tensors[1:]:
        psi = np.tensordot(psi, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return psi.reshape(-1) * math.exp(state.log_norm)


def from_dense(psi, local_dims: Sequence[int], trunc: SvdTruncation | None = None) -> MPSState:
    """Exact (or truncated) MPS of a dense vector via successive SVDs."""
    psi = np.asarray(psi, dtype=np.complex128)
    dims = list(local_dims)
    if psi.size != int(np.prod(dims)):
        raise DimensionError(f"vector of length {psi.size} does not match dims {dims}")
    trunc = trunc or SvdTruncation(max_rank=10**9, discard_tolerance=0.0)
    nrm = np.linalg.norm(psi)
    rest = (psi / nrm).reshape(1, -1)
    tensors = []
    dl = 1
    for d in dims[:-1]:
        m = rest.reshape(dl * d, -1)
        u, s, vh, _, _ = svd_truncate_array(m, trunc)
        tensors.append(u.reshape(dl, d, len(s)))
        rest = s[:, None] * vh
        dl = len(s)
    tensors.append(rest.reshape(dl, dims[-1], 1))
    state = MPSState(tensors, center=len(dims) - 1, log_norm=math.log(nrm))
    _normalize_center(state)
    return state


# --- checkpoints ------------------------------------------------------------------

_MAGIC = b"WGMPSCK\x00"
_VERSION = 1


def save_checkpoint(state: MPSState, path) -> None:
    """Write ``state`` in the versioned little-endian binary checkpoint format.

    Layout: 8-byte magic ``b"WGMPSCK\\0"``; ``<u4`` version; ``<u4`` site count N;
    ``<i4`` orthogonality centre (-1 for none); ``<f8`` log_norm; ``N`` x ``<u4``
    local dims; ``N + 1`` x ``<u4`` bond dims; then each site tensor
    ``(D_n, d_n, D_{n+1})`` in row-major order as ``<c16`` values.
    """
    N = state.n_sites
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIid", _VERSION, N, -1 if state.center is None else state.center, state.log_norm))
        fh.write(np.asarray(state.local_dims, dtype="<u4").tobytes())
        fh.write(np.asarray(state.bond_dims, dtype="<u4").tobytes())
        for t in state.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_checkpoint(path) -> MPSState:
    with open(Path(path), "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC or len(raw) < 8 + struct.calcsize("<IIid"):
        raise ArgumentError(f"{path}: not an MPS checkpoint")
    version, N, center, log_norm = struct.unpack_from("<IIid", raw, 8)
    if version != _VERSION:
        raise ArgumentError(f"{path}: unsupported checkpoint version {version}")
    off = 8 + struct.calcsize("<IIid")
    dims = np.frombuffer(raw, dtype="<u4", count=N, offset=off).astype(int)
    off += 4 * N
    bonds = np.frombuffer(raw, dtype="<u4", count=N + 1, offset=off).astype(int)
    off += 4 * (N + 1)
    tensors = []
    for n in range(N):
        shape = (bonds[n], dims[n], bonds[n + 1])
        count = int(np.prod(shape))
        if off + 16 * count > len(raw):
            raise ArgumentError(f"{path}: checkpoint truncated at site {n}")
        tensors.append(np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(shape).astype(np.complex128))
        off += 16 * count
    if off != len(raw):
        raise ArgumentError(f"{path}: {len(raw) - off} trailing bytes after the last tensor")
    return MPSState(tensors, center=None if center < 0 else center, log_norm=log_norm)
