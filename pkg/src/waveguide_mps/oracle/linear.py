"""Exact references for linear (harmonic) scatterers and the RWA one-excitation sector.

The quadratic Hamiltonian ``sum A_ij a_i^dag a_j + 1/2 sum (B_ij a_i^dag a_j^dag + h.c.)``
over cavity modes (chain order) followed by oscillator modes is brought to
``sum_l Lambda_l alpha_l^dag alpha_l`` with Colpa's Cholesky construction. With
``(a, a^dag) = T (alpha, alpha^dag)`` and ``T = [[X, Y*], [Y, X*]]`` one has
``alpha_l = sum_i chi_li a_i + eta_li a_i^dag`` where ``chi = X^dag`` and
``eta = -Y^dag``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, ModelError
from ..model import ModelSpec, dispersion
from ..spectra import elastic_ratios, project_momentum

__all__ = [
    "LinearSolution",
    "quadratic_form",
    "bogoliubov_diagonalize",
    "single_photon_field",
    "single_photon_smatrix",
    "two_photon_map_linear",
    "permanent",
    "nphoton_smatrix_linear",
    "coherent_output",
    "single_excitation_solve",
]


@dataclass(frozen=True)
class LinearSolution:
    """Bogoliubov modes of a harmonic-scatterer model.

    ``chi_a``/``eta_a`` have shape ``(n_modes, n_cav)``; ``chi_c``/``eta_c`` have
    shape ``(n_modes, n_oscillators)``.
    """

    model: ModelSpec
    frequencies: np.ndarray
    chi_a: np.ndarray
    eta_a: np.ndarray
    chi_c: np.ndarray
    eta_c: np.ndarray

    @property
    def x_block(self) -> np.ndarray:
        """``X[i, l] = [a_i, alpha_l^dag]`` for every mode ``i`` (cavities then oscillators)."""
        return np.hstack([self.chi_a, self.chi_c]).conj().T

    @property
    def y_block(self) -> np.ndarray:
        return -np.hstack([self.eta_a, self.eta_c]).conj().T

    def commutator_error(self) -> float:
        """Max deviation of ``[alpha_l, alpha_m^dag]`` from the identity and of ``[alpha_l, alpha_m]`` from zero."""
        chi = np.hstack([self.chi_a, self.chi_c])
        eta = np.hstack([self.eta_a, self.eta_c])
        comm = chi @ chi.conj().T - eta @ eta.conj().T
        anom = chi @ eta.T - eta @ chi.T
        return float(max(np.abs(comm - np.eye(len(comm))).max(), np.abs(anom).max()))


def quadratic_form(model: ModelSpec):
    """``(A, B)`` matrices of the harmonic model; oscillators follow the cavities."""
    bad = [sc for sc in model.scatterers if sc.kind != "oscillator"]
    if bad:
        raise ModelError(f"quadratic form needs oscillator scatterers only; got {bad[0].kind} at x={bad[0].position}")
    n = model.n_cav
    oscs = list(model.scatterers)
    size = n + len(oscs)
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = -model.hopping
    A[np.arange(n), np.arange(n)] = model.epsilon
    for j, sc in enumerate(oscs):
        c = n + j
        x = model.site_of(sc.position)
        A[c, c] = sc.delta
        A[c, x] = A[x, c] = sc.g
        if model.coupling == "full":
            B[c, x] = B[x, c] = sc.g
    return A, B


def bogoliubov_diagonalize(model: ModelSpec) -> LinearSolution:
    """Diagonalise the harmonic model; raises :class:`ModelError` when it is unstable.

    Modes are ordered by increasing frequency.
    """
    A, B = quadratic_form(model)
    n = A.shape[0]
    M = np.block([[A, B], [B.conj(), A.conj()]]).astype(np.complex128)
    try:
        chol = np.linalg.cholesky(M)  # M = chol chol^dag
    except np.linalg.LinAlgError:
        gs = [f"g={sc.g} at x={sc.position}" for sc in model.scatterers]
        raise ModelError(
            "quadratic Hamiltonian is not positive definite (a Bogoliubov mode would have "
            f"non-positive frequency); couplings: {', '.join(gs)}"
        ) from None
    K = chol.conj().T
    sigma = np.concatenate([np.ones(n), -np.ones(n)])
    W = (K * sigma[None, :]) @ K.conj().T
    w, U = np.linalg.eigh(W)
    pos = w > 0
    if pos.sum() != n:
        raise ModelError("Bogoliubov spectrum does not split into positive/negative halves")
    freqs = w[pos]
    vecs = U[:, pos]
    # columns (X; Y) of T for the positive branch
    cols = np.linalg.solve(K, vecs) * np.sqrt(freqs)[None, :]
    order = np.argsort(freqs, kind="stable")
    freqs = freqs[order]
    X = cols[:n, order]
    Y = cols[n:, order]
    chi = X.conj().T
    eta = -Y.conj().T
    nc = model.n_cav
    return LinearSolution(model, freqs, chi[:, :nc], eta[:, :nc], chi[:, nc:], eta[:, nc:])


def single_photon_field(sol: LinearSolution, phi: np.ndarray, t: float) -> np.ndarray:
    """``<GS| a_x exp(-i (H - E_GS) t) a_phi^dag |GS>`` for every cavity ``x``."""
    X = sol.x_block[: sol.model.n_cav]
    weights = X.conj().T @ np.asarray(phi, dtype=np.complex128)
    return X @ (np.exp(-1j * sol.frequencies * t) * weights)


def single_photon_smatrix(sol: LinearSolution, t_out: float, ks, phi: np.ndarray,
                          threshold: float = 1e-4):
    """Elastic amplitudes ``(k, t_k, r_k)`` for the packet ``phi`` scattered until ``t_out``.

    Uses the same momentum projection and undefined-bin threshold as the MPS
    observables, so both routes share their finite-packet systematics.
    """
    x = sol.model.positions()
    f0 = single_photon_field(sol, phi, 0.0)
    ft = single_photon_field(sol, phi, t_out)
    amp0 = project_momentum(f0, x, ks)
    ampt = project_momentum(ft, x, ks)
    X = sol.x_block[: sol.model.n_cav]
    norm2 = float(np.linalg.norm(X.conj().T @ np.asarray(phi, dtype=np.complex128)) ** 2)
    nk0 = np.abs(amp0) ** 2 / norm2
    return elastic_ratios(ks, amp0, ampt, nk0, threshold)


def two_photon_map_linear(sol: LinearSolution, phi: np.ndarray, t: float) -> np.ndarray:
    """``phi_{x1 x2}(t)`` for the input ``(a_phi^dag)^2 |0>`` by Wick factorisation.

    Valid when the ground state is the vacuum (RWA coupling). The single-photon
    field is normalised over every mode, scatterers included, so weight still
    held by the oscillator at time ``t`` is missing from the cavity map.
    """
    X = sol.x_block
    weights = X[: sol.model.n_cav].conj().T @ np.asarray(phi, dtype=np.complex128)
    f = single_photon_field(sol, phi, t) / np.linalg.norm(weights)
    return np.outer(f, f)


def permanent(m) -> complex:
    """Permanent of a square matrix by Ryser's inclusion-exclusion formula."""
    m = np.asarray(m, dtype=np.complex128)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ArgumentError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if mask >> j & 1]
        total += (-1) ** len(cols) * np.prod(m[:, cols].sum(axis=1))
    return complex((-1) ** n * total)


def _find(ks, k, tol=1e-9):
    hits = np.nonzero(np.abs(np.asarray(ks) - k) < tol)[0]
    return int(hits[0]) if hits.size else None


def nphoton_smatrix_linear(ks, t_k, r_k, k_in, p_out) -> complex:
    """N-photon S-matrix element of a linear scatterer as a permanent of one-photon elements.

    ``ks``, ``t_k``, ``r_k`` tabulate the one-photon amplitudes on positive
    momenta; ``<p|S|k> = t_k delta(p, k) + r_k delta(p, -k)``. Different photon
    numbers give exactly zero.
    """
    if len(k_in) != len(p_out):
        return 0.0 + 0.0j
    n = len(k_in)
    if n > 6:
        raise ArgumentError(f"N={n} photons exceeds the supported maximum of 6")

    def single(p, k):
        i = _find(ks, abs(k))
        if i is None:
            raise ArgumentError(f"momentum {k} not tabulated")
        val = 0.0 + 0.0j
        if abs(p - k) < 1e-9:
            val += t_k[i]
        if abs(p + k) < 1e-9:
            val += r_k[i]
        return val

    mat = np.array([[single(p, k) for k in k_in] for p in p_out])
    return permanent(mat)


def coherent_output(alpha: complex, t_k: complex, r_k: complex):
    """Output coherent amplitudes ``(t_k alpha, r_k alpha)`` of a linear scatterer."""
    return t_k * alpha, r_k * alpha


def single_excitation_solve(model: ModelSpec, ks):
    """Exact stationary ``(t_k, r_k)`` for a photon incident from the left, RWA one-excitation sector.

    Unknowns are the photon amplitudes on the scatterer region (padded by one
    free site on either side), one amplitude per scatterer, and ``r``, ``t``,
    with plane-wave boundary conditions ``psi = e^{ikx} + r e^{-ikx}`` on the left
    and ``psi = t e^{ikx}`` on the right.
    """
    if model.coupling != "rwa":
        raise ModelError("single_excitation_solve requires RWA coupling")
    if not model.scatterers:
        ks = np.asarray(ks, dtype=float)
        return np.ones_like(ks, dtype=complex), np.zeros_like(ks, dtype=complex)
    xs = sorted(sc.position for sc in model.scatterers)
    a, b = xs[0] - 1, xs[-1] + 1
    sites = list(range(a, b + 1))
    ns = len(sites)
    scs = list(model.scatterers)
    size = ns + len(scs) + 2
    ir, it = ns + len(scs), ns + len(scs) + 1
    J, eps = model.hopping, model.epsilon
    t_out, r_out = [], []
    for k in np.atleast_1d(ks):
        w = float(dispersion(k, model))
        Mx = np.zeros((size, size), dtype=np.complex128)
        rhs = np.zeros(size, dtype=np.complex128)
        row = 0
        for i, x in enumerate(sites):
            # (eps - w) psi_x - J (psi_{x-1} + psi_{x+1}) + sum_s g_s q_s = 0
            Mx[row, i] = eps - w
            if i > 0:
                Mx[row, i - 1] += -J
            else:
                Mx[row, ir] += -J * np.exp(-1j * k * (x - 1))
                rhs[row] += J * np.exp(1j * k * (x - 1))
            if i < ns - 1:
                Mx[row, i + 1] += -J
            else:
                Mx[row, it] += -J * np.exp(1j * k * (x + 1))
            for j, sc in enumerate(scs):
                if sc.position == x:
                    Mx[row, ns + j] += sc.collective_g
            row += 1
        for j, sc in enumerate(scs):
            # (Delta - w) q + g psi_x = 0
            Mx[row, ns + j] = sc.delta - w
            Mx[row, sites.index(sc.position)] = sc.collective_g
            row += 1
        Mx[row, 0] = 1.0
        Mx[row, ir] = -np.exp(-1j * k * a)
        rhs[row] = np.exp(1j * k * a)
        row += 1
        Mx[row, ns - 1] = 1.0
        Mx[row, it] = -np.exp(1j * k * b)
        # A bound state in the continuum (e.g. a dark combination of qubits at
        # this energy) makes the system singular without affecting r and t, so
        # only null directions that touch r or t make the problem ill-posed.
        u, sv, vh = np.linalg.svd(Mx)
        null = vh[sv < 1e-10 * sv[0]]
        if null.size and np.abs(null[:, [ir, it]]).max() > 1e-8:
            raise ModelError(f"singular scattering system at omega={w:.12g} (bound-state pole)")
        sol = np.linalg.lstsq(Mx, rhs, rcond=1e-10)[0]
        if not np.all(np.isfinite(sol)):
            raise ModelError(f"singular scattering system at omega={w:.12g} (bound-state pole)")
        t_out.append(sol[it])
        r_out.append(sol[ir])
    return np.array(t_out), np.array(r_out)
