"""Exact-oracle runs written in the same CSV schema as MPS scattering runs.

Routes, chosen from the model:

* every scatterer an oscillator: Bogoliubov modes, elastic ``t_k, r_k`` of the
  packet (N = 1) and, for RWA, the Wick two-photon map (N = 2);
* RWA with N <= 3: exact evolution in the fixed-excitation sector, giving
  ``n_k`` spectra, scatterer populations and (N = 2) the two-photon map;
* RWA: monochromatic ``|t_k|^2, |r_k|^2`` from the stationary one-excitation solve.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from ..artifacts import write_csv, write_pair_map, write_spectra
from ..errors import ConfigurationError, ModelError
from ..scattering import ScatteringRun, elastic_amplitudes, transmission_reflection
from ..spectra import k_grid, momentum_density_from_correlations
from .linear import bogoliubov_diagonalize, single_excitation_solve, single_photon_smatrix, two_photon_map_linear
from .sector import SectorModel

__all__ = ["run_oracle"]


def run_oracle(spec: ScatteringRun, out_dir) -> tuple[list[Path], dict]:
    """Write every applicable oracle observable for ``spec``; returns files and diagnostics."""
    model, packet, engine = spec.model, spec.packet, spec.engine
    out = Path(out_dir)
    files, diag = [], {"routes": []}
    t_out = spec.steps * engine.dt
    x = model.positions()
    phi = packet.amplitudes(x)
    ks = k_grid(model.n_cav, engine.k_oversample)
    threshold = engine.threshold_factor * packet.n_photons
    linear = bool(model.scatterers) and all(sc.kind == "oscillator" for sc in model.scatterers)

    if linear:
        t0 = time.perf_counter()
        sol = bogoliubov_diagonalize(model)
        files.append(write_csv(out / "bogoliubov_modes.csv", ["l", "Lambda"], enumerate(sol.frequencies)))
        diag["commutator_error"] = sol.commutator_error()
        if packet.n_photons == 1:
            k, t, r = single_photon_smatrix(sol, t_out, ks, phi, engine.threshold_factor)
            unhalved = 1.0 - np.abs(t) ** 2 - np.abs(r) ** 2
            files.append(write_spectra(out, model, k, t, r, np.abs(t) ** 2, np.abs(r) ** 2, 0.5 * unhalved, unhalved))
        elif packet.n_photons == 2 and model.coupling == "rwa":
            files.append(write_pair_map(out, model, two_photon_map_linear(sol, phi, t_out)))
        diag["routes"].append("bogoliubov")
        diag["bogoliubov_seconds"] = time.perf_counter() - t0

    if model.coupling == "rwa" and packet.n_photons <= 3 and not (linear and packet.n_photons == 1):
        t0 = time.perf_counter()
        sm = SectorModel(model)
        n = packet.n_photons
        v0 = sm.packet_state(phi, n)
        v1 = sm.evolve(v0, n, t_out)
        nk0 = momentum_density_from_correlations(sm.photon_correlations(v0, n), x, ks)
        nk1 = momentum_density_from_correlations(sm.photon_correlations(v1, n), x, ks)
        files.append(write_csv(out / "momentum.csv", ["k", "nk_gs", "nk0", "nk_out"], zip(ks, 0 * ks, nk0, nk1)))
        kd, T, R = transmission_reflection(ks, nk0, nk1, n, engine.threshold_factor)
        if n == 1:
            field0 = v0[: model.n_cav]
            field1 = v1[: model.n_cav]
            _, t, r = elastic_amplitudes(field0, field1, model, ks, nk0, threshold)
            unhalved = 1.0 - np.abs(t) ** 2 - np.abs(r) ** 2
            files.append(write_spectra(out, model, kd, t, r, T, R, 0.5 * unhalved, unhalved))
        else:
            files.append(write_spectra(out, model, kd, None, None, T, R))
        if n == 2:
            files.append(write_pair_map(out, model, sm.two_photon_map(v1)))
        counts = sm.scatterer_counts(v1, n)
        if counts:
            files.append(write_csv(out / "final_populations.csv", ["position", "delta_P"], sorted(counts.items())))
        diag["routes"].append("sector")
        diag["sector_dimension"] = sm.basis(n).dim
        diag["sector_seconds"] = time.perf_counter() - t0

    if model.coupling == "rwa":
        kpos = ks[(ks > 0) & (ks < np.pi)]
        try:
            t, r = single_excitation_solve(model, kpos)
        except ModelError as exc:
            diag["stationary_solve_error"] = str(exc)
        else:
            files.append(write_csv(
                out / "stationary_smatrix.csv", ["k", "abs_t2", "abs_r2"],
                zip(kpos, np.abs(t) ** 2, np.abs(r) ** 2),
            ))
            diag["routes"].append("stationary")

    if not diag["routes"]:
        raise ConfigurationError(
            "no exact oracle covers full coupling with qubit scatterers; use the dense oracle on a small chain",
            "model.coupling",
        )
    return files, diag
