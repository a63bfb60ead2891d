import itertools
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from waveguide_mps import ModelSpec, ScattererSpec, build_terms, dicke_ladder, dispersion, group_velocity
from waveguide_mps.errors import ArgumentError, ConfigurationError
from waveguide_mps.model import dense_hamiltonian, excitation_number_operator, parity_operator


def small(coupling="rwa", n_cav=5, n_max=2, **sc):
    return ModelSpec(n_cav=n_cav, n_max=n_max, coupling=coupling, scatterers=(ScattererSpec(0, **sc),))


class TestDispersion:
    def test_band_centre(self):
        assert dispersion(math.pi / 2, ModelSpec()) == pytest.approx(1.0, abs=1e-15)

    def test_band_bottom(self):
        m = ModelSpec()
        assert dispersion(0.0, m) == pytest.approx(m.epsilon - 2 * m.hopping)

    def test_bandwidth(self):
        m = ModelSpec()
        w = dispersion(np.linspace(-np.pi, np.pi, 2001), m)
        assert w.max() - w.min() == pytest.approx(4 * m.hopping, rel=1e-9)
        assert w.min() == pytest.approx(1 - 2 / math.pi) and w.max() == pytest.approx(1 + 2 / math.pi)

    def test_group_velocity_is_derivative(self):
        m = ModelSpec()
        k = np.linspace(0.1, 3.0, 7)
        h = 1e-6
        num = (dispersion(k + h, m) - dispersion(k - h, m)) / (2 * h)
        np.testing.assert_allclose(group_velocity(k, m), num, rtol=1e-8)


class TestDickeLadder:
    def test_single_qubit_is_pauli_ladder(self):
        up, down, num = dicke_ladder(1, 1)
        np.testing.assert_array_equal(up, [[0, 0], [1, 0]])
        np.testing.assert_array_equal(down, up.T)
        np.testing.assert_array_equal(np.diag(num), [0, 1])

    def test_bosonic_limit(self):
        up, _, _ = dicke_ladder(10**8, 3)
        np.testing.assert_allclose([up[1, 0], up[2, 1]], [1.0, math.sqrt(2)], rtol=1e-7)

    def test_cap_above_m_is_rejected(self):
        with pytest.raises(ArgumentError):
            dicke_ladder(2, 3)

    def test_two_qubit_brute_force(self):
        sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g> = 0, |e> = 1
        eye = np.eye(2)
        b = (np.kron(sm, eye) + np.kron(eye, sm)) / math.sqrt(2)
        # kron ordering: |gg> = 0, |ge> = 1, |eg> = 2, |ee> = 3
        basis = np.array([[1, 0, 0, 0], [0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0], [0, 0, 0, 1]], dtype=complex).T
        projected = basis.conj().T @ b.conj().T @ basis
        up, _, _ = dicke_ladder(2, 2)
        np.testing.assert_allclose(projected, up, atol=1e-15)

    @given(st.integers(1, 30), st.data())
    def test_commutator_matches_collective_formula(self, m, data):
        cap = data.draw(st.integers(1, m))
        up, down, num = dicke_ladder(m, cap)
        comm = down @ up - up @ down
        expected = np.eye(cap + 1) - 2 * num / m
        # the top level is truncated, so only rows below the cap are exact
        np.testing.assert_allclose(comm[:cap, :cap], expected[:cap, :cap], atol=1e-12)


class TestModelSpec:
    def test_even_chain_rejected(self):
        with pytest.raises(ConfigurationError) as err:
            ModelSpec(n_cav=10)
        assert err.value.field == "n_cav"

    def test_duplicate_position_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelSpec(n_cav=9, scatterers=(ScattererSpec(0), ScattererSpec(0)))

    def test_edge_position_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelSpec(n_cav=9, scatterers=(ScattererSpec(4),))

    def test_negative_coupling_rejected(self):
        with pytest.raises(ConfigurationError):
            ScattererSpec(0, g=-0.1)

    def test_local_dimension_ceiling_names_site(self):
        with pytest.raises(ConfigurationError, match="site"):
            ModelSpec(n_cav=9, n_max=3, scatterers=(ScattererSpec(0, kind="oscillator", n_osc=20),)).layout

    def test_composite_dimensions(self):
        m = ModelSpec(n_cav=7, n_max=2, scatterers=(ScattererSpec(-1, count=3), ScattererSpec(2, kind="oscillator", n_osc=2)))
        assert m.layout.dims == (3, 3, 12, 3, 3, 9, 3)

    def test_dicke_cap_limits_levels(self):
        m = ModelSpec(n_cav=5, n_max=1, dicke_cap=2, scatterers=(ScattererSpec(0, count=20),))
        assert m.layout.dims[2] == 2 * 3


def hand_built(n_cav, n_max, g, delta, eps, J, coupling):
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    sm = np.array([[0, 1], [0, 0]], dtype=float)
    centre = n_cav // 2
    factors = []
    for x in range(n_cav):
        factors.append(n_max + 1)
        if x == centre:
            factors.append(2)

    def op(site_ops):
        mats = [np.eye(d) for d in factors]
        for idx, o in site_ops:
            mats[idx] = o
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    slot = []
    i = 0
    for x in range(n_cav):
        slot.append(i)
        i += 2 if x == centre else 1
    qslot = slot[centre] + 1
    H = 0
    for x in range(n_cav):
        H = H + eps * op([(slot[x], a.T @ a)])
    for x in range(n_cav - 1):
        hop = op([(slot[x], a.T), (slot[x + 1], a)])
        H = H - J * (hop + hop.T)
    H = H + delta * op([(qslot, sm.T @ sm)])
    ac = op([(slot[centre], a)])
    s = op([(qslot, sm)])
    if coupling == "full":
        H = H + g * (s + s.T) @ (ac + ac.T)
    else:
        H = H + g * (s.T @ ac + s @ ac.T)
    return H


class TestBuildTerms:
    @pytest.mark.parametrize("coupling", ["rwa", "full"])
    def test_matches_hand_built_matrix(self, coupling):
        # the centre of a 4-site chain is not symmetric, so use 5 sites with the qubit at x=0
        m = small(coupling, n_cav=5, n_max=2, g=0.37, delta=1.3)
        h = dense_hamiltonian(build_terms(m)).toarray()
        ref = hand_built(5, 2, 0.37, 1.3, m.epsilon, m.hopping, coupling)
        assert np.abs(h - ref).max() <= 1e-14

    def test_four_site_chain_full_coupling(self):
        m = ModelSpec(n_cav=5, n_max=1, coupling="full", scatterers=(ScattererSpec(-1, g=0.3),))
        h = dense_hamiltonian(build_terms(m)).toarray()
        assert np.abs(h - h.conj().T).max() == 0.0

    @pytest.mark.parametrize("coupling", ["rwa", "full"])
    def test_terms_are_exactly_hermitian(self, coupling):
        terms = build_terms(small(coupling, g=0.3, count=2))
        for o in terms.onsite + terms.bonds:
            assert np.array_equal(o, o.conj().T)

    def test_rwa_commutes_with_excitation_number(self):
        for sc in (dict(g=0.3), dict(g=0.2, count=3), dict(g=0.2, kind="oscillator", n_osc=2)):
            m = small("rwa", n_cav=5, n_max=2, **sc)
            h = dense_hamiltonian(build_terms(m))
            n = excitation_number_operator(m)
            assert abs(h @ n - n @ h).max() == 0.0

    def test_full_coupling_breaks_number_but_keeps_parity(self):
        m = small("full", n_cav=5, n_max=2, g=0.3)
        h = dense_hamiltonian(build_terms(m))
        n = excitation_number_operator(m)
        p = parity_operator(m)
        assert abs(h @ n - n @ h).max() > 0.1
        assert abs(h @ p - p @ h).max() <= 1e-14

    def test_zero_coupling_is_free_band(self):
        m = ModelSpec(n_cav=7, n_max=1, scatterers=(ScattererSpec(0, g=0.0),))
        h = dense_hamiltonian(build_terms(m)).toarray()
        w = np.linalg.eigvalsh(h)
        free = dispersion(np.pi * np.arange(1, 8) / 8, m)
        for f in free:
            assert np.min(np.abs(w - f)) < 1e-12

    def test_collective_coupling_factor(self):
        m = small("rwa", n_cav=3, n_max=1, g=0.1, count=4)
        assert m.scatterers[0].collective_g == pytest.approx(0.2)


def full_qubit_space_hamiltonian(n_cav, m, g, delta, eps, J, coupling):
    """Chain with ``m`` explicit qubits on the centre cavity, n_max = 1."""
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = a.copy()
    n_fac = n_cav + m
    centre = n_cav // 2

    def op(pairs):
        mats = [np.eye(2)] * n_fac
        mats = list(mats)
        for idx, o in pairs:
            mats[idx] = o
        out = mats[0]
        for x in mats[1:]:
            out = np.kron(out, x)
        return out

    H = 0
    for x in range(n_cav):
        H = H + eps * op([(x, a.T @ a)])
    for x in range(n_cav - 1):
        hop = op([(x, a.T), (x + 1, a)])
        H = H - J * (hop + hop.T)
    ac = op([(centre, a)])
    for j in range(m):
        s = op([(n_cav + j, sm)])
        H = H + delta * s.T @ s
        H = H + (g * (s + s.T) @ (ac + ac.T) if coupling == "full" else g * (s.T @ ac + s @ ac.T))
    return H


@pytest.mark.parametrize("m_qubits", [2, 3])
@pytest.mark.parametrize("coupling", ["rwa", "full"])
def test_dicke_reduction_matches_full_qubit_space(m_qubits, coupling):
    n_cav, g, t = 3, 0.25, 7.0
    spec = ModelSpec(n_cav=n_cav, n_max=1, coupling=coupling, scatterers=(ScattererSpec(0, g=g, count=m_qubits),))
    h_dicke = dense_hamiltonian(build_terms(spec)).toarray()
    h_full = full_qubit_space_hamiltonian(n_cav, m_qubits, g, 1.0, spec.epsilon, spec.hopping, coupling)

    # symmetric Dicke states |n> in the explicit qubit register (|g> = index 0 after the swap below)
    def dicke_vec(n):
        v = np.zeros(2**m_qubits, dtype=complex)
        for bits in itertools.product([0, 1], repeat=m_qubits):
            if sum(bits) == n:
                # sigma_minus = [[0,1],[0,0]] makes index 1 the excited level
                v[int("".join(map(str, bits)), 2)] = 1.0
        return v / np.linalg.norm(v)

    iso = np.zeros((h_full.shape[0], h_dicke.shape[0]), dtype=complex)
    dims = spec.layout.dims
    photon_dim = 2
    for idx in itertools.product(*(range(d) for d in dims)):
        col = np.ravel_multi_index(idx, dims)
        photons = []
        q = 0
        for site, d in enumerate(dims):
            if d == photon_dim:
                photons.append(idx[site])
            else:
                photons.append(idx[site] // (m_qubits + 1))
                q = idx[site] % (m_qubits + 1)
        vec_ph = np.zeros(2**n_cav)
        vec_ph[int("".join(map(str, photons)), 2)] = 1.0
        iso[:, col] = np.kron(vec_ph, dicke_vec(q))
    # initial state: one photon on the left cavity plus one collective excitation
    psi0 = np.zeros(h_dicke.shape[0], dtype=complex)
    left = [1] + [0] * (n_cav - 1)
    idx = [l if d == 2 else l * (m_qubits + 1) + 1 for l, d in zip(left, dims)]
    psi0[np.ravel_multi_index(idx, dims)] = 1.0
    out_d = sla.expm(-1j * t * h_dicke) @ psi0
    out_f = sla.expm(-1j * t * h_full) @ (iso @ psi0)
    fid = abs(np.vdot(iso @ out_d, out_f)) ** 2
    assert fid >= 1 - 1e-10
