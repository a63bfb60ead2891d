import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveguide_mps import ModelSpec, ScattererSpec
from waveguide_mps.errors import ArgumentError, ModelError
from waveguide_mps.oracle.dense import dense_ground_state
from waveguide_mps.oracle.linear import (
    bogoliubov_diagonalize,
    coherent_output,
    nphoton_smatrix_linear,
    permanent,
    single_excitation_solve,
    single_photon_field,
    single_photon_smatrix,
    two_photon_map_linear,
)
from waveguide_mps.oracle.sector import SectorModel
from waveguide_mps.scattering import Wavepacket
from waveguide_mps.spectra import k_grid


def osc(coupling="full", n_cav=21, g=0.3, n_osc=3, **kw):
    return ModelSpec(n_cav=n_cav, n_max=2, coupling=coupling,
                     scatterers=(ScattererSpec(0, g=g, kind="oscillator", n_osc=n_osc, **kw),))


class TestBogoliubov:
    def test_zero_coupling_gives_free_modes(self):
        m = osc(g=0.0, n_cav=11)
        sol = bogoliubov_diagonalize(m)
        chain = m.epsilon - 2 * m.hopping * np.cos(np.pi * np.arange(1, 12) / 12)
        np.testing.assert_allclose(sol.frequencies, np.sort(np.append(chain, 1.0)), atol=1e-12)
        assert np.abs(sol.eta_a).max() < 1e-12

    @pytest.mark.parametrize("coupling", ["rwa", "full"])
    def test_canonical_commutators(self, coupling):
        assert bogoliubov_diagonalize(osc(coupling)).commutator_error() < 1e-10

    def test_rwa_has_no_anomalous_part(self):
        sol = bogoliubov_diagonalize(osc("rwa"))
        assert np.abs(sol.eta_a).max() < 1e-12 and np.abs(sol.eta_c).max() < 1e-12

    def test_full_coupling_mixes_creation_operators(self):
        assert np.abs(bogoliubov_diagonalize(osc("full")).eta_a).max() > 1e-3

    def test_gaps_match_dense_spectrum(self):
        # the truncated Fock space converges to the harmonic answer as n_max grows
        errors = []
        for n_max in (3, 6):
            m = ModelSpec(n_cav=3, n_max=n_max, coupling="full",
                          scatterers=(ScattererSpec(0, g=0.3, kind="oscillator", n_osc=n_max),))
            lam = bogoliubov_diagonalize(m).frequencies
            w, _ = dense_ground_state(m, k=4)
            # lowest excitations of independent modes: one quantum of either mode, or two of the lowest
            expected = np.sort([lam[0], lam[1], 2 * lam[0]])
            errors.append(np.abs(w[1:] - w[0] - expected).max())
        assert errors[1] < errors[0] / 10
        assert errors[1] < 5e-4

    def test_instability_is_reported(self):
        with pytest.raises(ModelError):
            bogoliubov_diagonalize(osc(g=0.5))

    def test_qubits_are_rejected(self):
        with pytest.raises(ModelError):
            bogoliubov_diagonalize(ModelSpec(n_cav=9, scatterers=(ScattererSpec(0),)))


class TestPermanent:
    @settings(max_examples=20)
    @given(st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_matches_permutation_sum(self, n, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        brute = sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))
        assert permanent(m) == pytest.approx(brute, rel=1e-10, abs=1e-12)

    def test_identity_and_ones(self):
        assert permanent(np.eye(4)) == 1
        assert permanent(np.ones((4, 4))) == pytest.approx(24)

    def test_non_square(self):
        with pytest.raises(ArgumentError):
            permanent(np.ones((2, 3)))


class TestNPhoton:
    def setup_method(self):
        self.ks = np.array([0.5, 1.0, 1.5])
        self.t = np.array([0.6, 0.8j, -0.3])
        self.r = np.array([0.8j, 0.6, 0.95j])

    def test_number_changing_element_vanishes(self):
        assert nphoton_smatrix_linear(self.ks, self.t, self.r, [1.0], [1.0, 1.0]) == 0

    def test_two_photons_same_momentum(self):
        val = nphoton_smatrix_linear(self.ks, self.t, self.r, [1.0, 1.0], [1.0, 1.0])
        assert val == pytest.approx(2 * self.t[1] ** 2)

    def test_one_transmitted_one_reflected(self):
        val = nphoton_smatrix_linear(self.ks, self.t, self.r, [1.0, 1.5], [1.0, -1.5])
        assert val == pytest.approx(self.t[1] * self.r[2])

    def test_untabulated_momentum(self):
        with pytest.raises(ArgumentError):
            nphoton_smatrix_linear(self.ks, self.t, self.r, [2.0], [2.0])

    def test_coherent_intensity_ratio_is_amplitude_independent(self):
        t, r = 0.6 + 0.1j, 0.2 - 0.7j
        ratios = []
        for a in (0.1, 1.0, 10.0):
            ot, orr = coherent_output(a, t, r)
            ratios.append(abs(ot) ** 2 / abs(orr) ** 2)
        assert max(ratios) - min(ratios) <= 1e-12 * ratios[0]


class TestStationary:
    def test_resonant_qubit_reflects_fully(self):
        m = ModelSpec(n_cav=9, scatterers=(ScattererSpec(0, g=0.15),))
        t, r = single_excitation_solve(m, [math.pi / 2])
        assert abs(r[0]) ** 2 == pytest.approx(1.0, abs=1e-10)
        assert abs(t[0]) ** 2 < 1e-20

    @pytest.mark.parametrize("kind", ["qubit", "oscillator"])
    def test_flux_conservation(self, kind):
        m = ModelSpec(n_cav=9, scatterers=(ScattererSpec(-1, g=0.2, kind=kind, n_osc=2), ScattererSpec(1, g=0.1, delta=1.1)))
        ks = np.linspace(0.2, 2.9, 25)
        t, r = single_excitation_solve(m, ks)
        np.testing.assert_allclose(np.abs(t) ** 2 + np.abs(r) ** 2, 1.0, atol=1e-12)

    def test_half_wavelength_spacing_matches_colocated(self):
        # at k = pi/2 a spacing of 2 sites is a phase of pi, invisible to the one-photon S-matrix
        g = 0.1 / math.sqrt(3)
        same = ModelSpec(n_cav=9, scatterers=(ScattererSpec(0, g=g, count=3),))
        spread = ModelSpec(n_cav=21, scatterers=tuple(ScattererSpec(x, g=g) for x in (-2, 0, 2)))
        t0, r0 = single_excitation_solve(same, [math.pi / 2])
        t2, r2 = single_excitation_solve(spread, [math.pi / 2])
        assert abs(t0[0] - t2[0]) < 1e-12 and abs(abs(r0[0]) - abs(r2[0])) < 1e-12

    def test_full_coupling_is_rejected(self):
        with pytest.raises(ModelError):
            single_excitation_solve(osc("full"), [1.0])


class TestCrossRoutes:
    """Three exact routes on the RWA oscillator must agree."""

    def setup_method(self):
        self.m = osc("rwa", n_cav=41, g=0.3, n_osc=2)
        self.pk = Wavepacket(-10, 2.0)
        self.phi = self.pk.amplitudes(self.m.positions())
        self.sol = bogoliubov_diagonalize(self.m)
        self.sm = SectorModel(self.m)

    def test_single_photon_field(self):
        v = self.sm.evolve(self.sm.packet_state(self.phi, 1), 1, 20.0)
        f = single_photon_field(self.sol, self.phi, 20.0)
        np.testing.assert_allclose(f, v[: self.m.n_cav], atol=1e-8)

    def test_two_photon_map(self):
        v = self.sm.evolve(self.sm.packet_state(self.phi, 2), 2, 20.0)
        np.testing.assert_allclose(two_photon_map_linear(self.sol, self.phi, 20.0), self.sm.two_photon_map(v), atol=1e-8)

    def test_map_is_rank_one(self):
        s = np.linalg.svd(two_photon_map_linear(self.sol, self.phi, 20.0), compute_uv=False)
        assert s[1] < 1e-12 * s[0]

    def test_packet_amplitudes_approach_stationary_solution(self):
        m = osc("rwa", n_cav=257, g=0.3, n_osc=2)
        pk = Wavepacket(-64, 8.0)
        sol = bogoliubov_diagonalize(m)
        ks = k_grid(m.n_cav, 4)
        k, t, r = single_photon_smatrix(sol, 240.0, ks, pk.amplitudes(m.positions()), 1e-2)
        ts, rs = single_excitation_solve(m, k)
        # once the packet has fully left the scatterer, intensities agree bin by bin; the
        # phases carry the packet's propagation phase and are not compared
        np.testing.assert_allclose(np.abs(t) ** 2, np.abs(ts) ** 2, atol=1e-3)
        np.testing.assert_allclose(np.abs(r) ** 2, np.abs(rs) ** 2, atol=1e-3)
