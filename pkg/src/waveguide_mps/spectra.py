"""Momentum-space helpers shared by the MPS observables and the oracles.

Conventions: ``a_k = N^{-1/2} sum_x exp(-i k x) a_x`` over chain positions
``x = -L..L`` with ``N = n_cav``. With ``oversample = s`` the grid is
``k = 2 pi m / (s N)`` for ``|m| <= s N / 2``; ``s = 1`` is the ordinary DFT
grid and ``s = 4`` places ``k = pi/2`` exactly on the grid.
"""

from __future__ import annotations

import numpy as np

from .errors import SpectrumError

__all__ = [
    "k_grid",
    "momentum_density_from_correlations",
    "project_momentum",
    "transmission_reflection_spectra",
    "elastic_ratios",
    "mirror_index",
]


def k_grid(n_cav: int, oversample: int = 1) -> np.ndarray:
    total = n_cav * oversample
    m = np.arange(-(total // 2), total // 2 + 1)
    if total % 2 == 0:
        m = m[1:]  # keep k = pi, drop the duplicate -pi
    return 2.0 * np.pi * m / total


def _phases(ks, x):
    return np.exp(1j * np.outer(ks, x))


def momentum_density_from_correlations(corr: np.ndarray, x: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """``n_k = N^{-1} sum_{x1 x2} exp(i k (x1 - x2)) <a_x1^dag a_x2>`` for ``corr[x1, x2]``."""
    e = _phases(ks, x)
    return np.einsum("ki,ij,kj->k", e, corr, e.conj()).real / len(x)


def project_momentum(field: np.ndarray, x: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """``<GS| a_k |psi>`` from the position amplitudes ``field[x] = <GS| a_x |psi>``."""
    return _phases(ks, x).conj() @ field / np.sqrt(len(x))


def mirror_index(ks: np.ndarray) -> np.ndarray:
    """Index of ``-k`` for every grid entry (``-1`` where absent)."""
    lookup = {round(float(k), 12): i for i, k in enumerate(ks)}
    return np.array([lookup.get(round(float(-k), 12), -1) for k in ks])


def _defined(ks, nk0, threshold):
    mask = (ks > 0) & (nk0 >= threshold)
    if not mask.any():
        raise SpectrumError(f"no positive-k bin carries input weight >= {threshold:g}")
    return mask


def transmission_reflection_spectra(ks, nk0, nk_out, threshold):
    """``T_k = n_k(out)/n_k(0)``, ``R_k = n_{-k}(out)/n_k(0)`` on positive bins.

    Returns ``(k, T, R)`` restricted to bins whose input weight reaches
    ``threshold``.
    """
    ks = np.asarray(ks)
    mask = _defined(ks, nk0, threshold)
    mirror = mirror_index(ks)
    idx = np.nonzero(mask)[0]
    return ks[idx], nk_out[idx] / nk0[idx], nk_out[mirror[idx]] / nk0[idx]


def elastic_ratios(ks, amp0, amp_out, nk0, threshold, phase=1.0):
    """``t_k = phase * <a_k>_out / <a_k>_0``, ``r_k`` likewise at ``-k``, on defined bins."""
    ks = np.asarray(ks)
    mask = _defined(ks, nk0, threshold)
    mirror = mirror_index(ks)
    idx = np.nonzero(mask)[0]
    return ks[idx], phase * amp_out[idx] / amp0[idx], phase * amp_out[mirror[idx]] / amp0[idx]
