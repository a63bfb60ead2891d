"""Dense complex tensors: contraction and rank-truncated SVD.

Tensors are stored as C-ordered (row-major) ``complex128`` arrays, so the flat
index of element ``(i_0, ..., i_{r-1})`` is ``sum_k i_k * prod(shape[k+1:])``.
The MPS engine works directly on the underlying ``numpy`` arrays through the
underscore helpers below; :class:`DenseTensor` is the validated public wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ArgumentError, DimensionError, NumericError

__all__ = ["DenseTensor", "SvdTruncation", "contract", "truncated_svd", "svd_truncate_array"]


class DenseTensor:
    """Immutable complex tensor of rank >= 1 in row-major layout.

    Parameters
    ----------
    data : array_like
        Values; converted to a C-contiguous ``complex128`` array.
    shape : sequence of int, optional
        If given, ``data`` is treated as flat and reshaped to ``shape``.
    """

    __slots__ = ("_array",)

    def __init__(self, data, shape: Sequence[int] | None = None):
        arr = np.array(data, dtype=np.complex128, order="C", copy=True)
        if shape is not None:
            shape = tuple(int(s) for s in shape)
            if any(s <= 0 for s in shape):
                raise ArgumentError(f"shape entries must be positive, got {shape}")
            if arr.size != int(np.prod(shape)):
                raise DimensionError(f"{arr.size} values cannot fill shape {shape}")
            arr = arr.reshape(shape)
        if arr.ndim == 0:
            raise ArgumentError("rank-0 tensors are not allowed; use shape [1] for scalars")
        if any(s <= 0 for s in arr.shape):
            raise ArgumentError(f"shape entries must be positive, got {arr.shape}")
        arr.setflags(write=False)
        self._array = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def rank(self) -> int:
        return self._array.ndim

    @property
    def data(self) -> np.ndarray:
        """Flat read-only view of the values in row-major order."""
        return self._array.reshape(-1)

    def to_numpy(self) -> np.ndarray:
        return self._array

    def __mul__(self, alpha) -> "DenseTensor":
        return DenseTensor(self._array * alpha)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"DenseTensor(shape={list(self.shape)})"


@dataclass(frozen=True)
class SvdTruncation:
    """Bond truncation policy.

    ``discard_tolerance`` bounds the discarded weight, i.e. the sum of the
    dropped squared singular values relative to the total.
    """

    max_rank: int = 64
    discard_tolerance: float = 1e-8

    def __post_init__(self):
        if int(self.max_rank) < 1:
            raise ArgumentError(f"max_rank must be positive, got {self.max_rank}")
        if not 0.0 <= self.discard_tolerance < 1.0:
            raise ArgumentError(f"discard_tolerance must lie in [0, 1), got {self.discard_tolerance}")


def contract(a: DenseTensor, b: DenseTensor, axis_pairs: Sequence[tuple[int, int]]) -> DenseTensor:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` followed by the free axes of ``b``,
    each in their original order. Contracting every axis yields shape ``[1]``.
    """
    axes_a = [int(p[0]) for p in axis_pairs]
    axes_b = [int(p[1]) for p in axis_pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ArgumentError(f"repeated axis in {list(axis_pairs)}")
    for ia, ib in zip(axes_a, axes_b):
        if not (0 <= ia < a.rank and 0 <= ib < b.rank):
            raise ArgumentError(f"axis pair ({ia}, {ib}) out of range for ranks {a.rank}, {b.rank}")
        if a.shape[ia] != b.shape[ib]:
            raise DimensionError(f"axis {ia} of a has extent {a.shape[ia]}, axis {ib} of b has {b.shape[ib]}")
    out = np.tensordot(a.to_numpy(), b.to_numpy(), axes=(axes_a, axes_b))
    if out.ndim == 0:
        out = out.reshape(1)
    return DenseTensor(out)


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    # gesdd occasionally fails on ill-conditioned input; gesvd is slower but more robust
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError("SVD did not converge", shape=m.shape) from exc


def _kept_rank(s: np.ndarray, trunc: SvdTruncation) -> tuple[int, int]:
    """Return (kept rank, rank needed to satisfy the tolerance alone)."""
    s2 = s * s
    total = s2.sum()
    if total == 0.0:
        return 1, 1
    # tail[r] = weight discarded when keeping r values
    tail = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]]) / total
    needed = int(np.argmax(tail <= trunc.discard_tolerance))
    needed = max(needed, 1)
    return min(needed, trunc.max_rank), needed


def svd_truncate_array(m: np.ndarray, trunc: SvdTruncation):
    """Array-level truncated SVD used by the engine.

    Returns ``(u, s, vh, discarded_weight, needed_rank)`` with ``u @ diag(s) @ vh``
    approximating ``m``.
    """
    u, s, vh = _svd(m)
    keep, needed = _kept_rank(s, trunc)
    total = float(np.dot(s, s))
    discarded = float(np.dot(s[keep:], s[keep:]) / total) if total > 0 else 0.0
    return u[:, :keep], s[:keep], vh[:keep, :], discarded, needed


def truncated_svd(m: DenseTensor, trunc: SvdTruncation):
    """Rank-truncated singular value decomposition of a matrix.

    Returns
    -------
    u : DenseTensor
        Shape ``(rows, r)`` with orthonormal columns.
    s : numpy.ndarray
        The ``r`` kept singular values, descending and non-negative.
    v : DenseTensor
        Shape ``(r, cols)`` with orthonormal rows.
    discarded_weight : float
        ``sum(dropped s**2) / sum(s**2)``, equal to the relative squared
        Frobenius error of ``u @ diag(s) @ v``.
    """
    if m.rank != 2:
        raise ArgumentError(f"truncated_svd needs a rank-2 tensor, got rank {m.rank}")
    u, s, vh, discarded, _ = svd_truncate_array(m.to_numpy(), trunc)
    return DenseTensor(u), s.copy(), DenseTensor(vh), discarded
