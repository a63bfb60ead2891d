import numpy as np
import pytest

from waveguide_mps import EngineConfig, ModelSpec, ScattererSpec, build_terms
from waveguide_mps.errors import ArgumentError, ResourceError
from waveguide_mps.mps import from_dense, product_state, to_dense
from waveguide_mps.oracle.dense import DenseState, dense_evolve, dense_ground_state, trotter_evolve_vector
from waveguide_mps.scattering import prepare_ground_state, total_excitations
from waveguide_mps.tensor import SvdTruncation
from waveguide_mps.trotter import TrotterPlan, energy, evolve, trotter_schedule

EXACT = SvdTruncation(max_rank=4096, discard_tolerance=0.0)


def model(coupling="rwa", n_cav=7, n_max=2, **sc):
    sc.setdefault("g", 0.4)
    return ModelSpec(n_cav=n_cav, n_max=n_max, coupling=coupling, scatterers=(ScattererSpec(0, **sc),))


def photon_on_left(m):
    dims = m.layout.dims
    vecs = []
    for n, d in enumerate(dims):
        v = np.zeros(d)
        v[(m.layout.dims[n] // (m.n_max + 1)) if n == 0 else 0] = 1.0  # one photon at the left edge
        vecs.append(v)
    return product_state(dims, vecs)


class TestSchedule:
    def test_layer_counts(self):
        sched = trotter_schedule(3)
        flat = [l for step in sched for l in step]
        assert flat[0] == (0, 0.5) and flat[-1] == (0, 0.5)
        assert sum(f for p, f in flat if p == 0) == pytest.approx(3.0)
        assert sum(f for p, f in flat if p == 1) == pytest.approx(3.0)

    def test_single_step(self):
        assert trotter_schedule(1) == [[(0, 0.5), (1, 1.0), (0, 0.5)]]

    def test_gates_are_unitary_in_real_time(self):
        plan = TrotterPlan.from_terms(build_terms(model("full")), 0.05)
        for g in plan.bond_gates:
            np.testing.assert_allclose(g @ g.conj().T, np.eye(g.shape[0]), atol=1e-12)

    def test_plan_rejects_other_dims(self, rng):
        plan = TrotterPlan.from_terms(build_terms(model()), 0.05)
        state = from_dense(np.ones(8) / np.sqrt(8), [2, 2, 2])
        with pytest.raises(ArgumentError):
            evolve(state, plan, 1, EXACT)


class TestAgainstDense:
    @pytest.mark.parametrize("coupling", ["rwa", "full"])
    def test_tebd_matches_dense_trotter(self, coupling):
        m = model(coupling, n_cav=7, n_max=2, count=2)
        state = photon_on_left(m)
        psi0 = to_dense(state)
        plan = TrotterPlan.from_terms(build_terms(m), 0.05)
        evolve(state, plan, 60, EXACT)
        ref = trotter_evolve_vector(psi0.copy(), plan, 60)
        fid = DenseState(state.local_dims, to_dense(state)).fidelity(DenseState(state.local_dims, ref))
        assert fid >= 1 - 1e-9

    def test_dense_trotter_converges_to_exact(self):
        m = model("full", n_cav=5, n_max=2)
        psi0 = DenseState(m.layout.dims, to_dense(photon_on_left(m)))
        exact = dense_evolve(m, psi0, 2.0, method="exact")
        errs = [1 - dense_evolve(m, psi0, 2.0, dt=dt).fidelity(exact) for dt in (0.1, 0.05)]
        # second order: infidelity scales as dt^4
        assert errs[1] < errs[0] / 10
        assert errs[1] < 1e-6


class TestConservation:
    def test_norm_equals_one_minus_discarded(self):
        m = model("full", n_cav=9, n_max=2, count=2)
        state = photon_on_left(m)
        plan = TrotterPlan.from_terms(build_terms(m), 0.05)
        _, diag = evolve(state, plan, 40, SvdTruncation(max_rank=4, discard_tolerance=0.0))
        assert diag.total_discarded > 0
        kept = np.exp(2 * state.log_norm)
        # the product of per-gate kept fractions equals 1 - total to first order
        assert kept == pytest.approx(1 - diag.total_discarded, abs=diag.total_discarded**2 * 10 + 1e-12)

    @pytest.mark.parametrize("coupling", ["rwa", "full"])
    def test_energy_is_conserved(self, coupling):
        m = model(coupling, n_cav=9, n_max=2)
        state = photon_on_left(m)
        plan = TrotterPlan.from_terms(build_terms(m), 0.05)
        e0 = energy(state, plan)
        evolve(state, plan, 100, SvdTruncation(64, 1e-12))
        assert abs(energy(state, plan) - e0) / abs(e0) < 1e-3

    def test_rwa_conserves_excitations(self):
        m = model("rwa", n_cav=9, n_max=2, count=3)
        state = photon_on_left(m)
        plan = TrotterPlan.from_terms(build_terms(m), 0.05)
        evolve(state, plan, 100, SvdTruncation(64, 1e-12))
        assert total_excitations(state, m) == pytest.approx(1.0, abs=1e-10)

    def test_hard_cap_aborts_with_diagnostics(self):
        m = model("full", n_cav=9, n_max=2, g=0.8)
        state = photon_on_left(m)
        plan = TrotterPlan.from_terms(build_terms(m), 0.05)
        with pytest.raises(ResourceError) as err:
            evolve(state, plan, 50, SvdTruncation(1, 0.0), hard_cap=1)
        assert err.value.diagnostics.aborted


class TestGroundState:
    @pytest.mark.parametrize("coupling,g", [("rwa", 0.4), ("full", 0.7)])
    def test_matches_dense_eigensolver(self, coupling, g):
        m = ModelSpec(n_cav=7, n_max=2, coupling=coupling, scatterers=(ScattererSpec(0, g=g),))
        gs = prepare_ground_state(m, EngineConfig(discard_tolerance=1e-12))
        w, v = dense_ground_state(m)
        assert gs.energy == pytest.approx(w[0], abs=1e-6)
        fid = DenseState(m.layout.dims, to_dense(gs.state)).fidelity(DenseState(m.layout.dims, v[:, 0]))
        assert fid >= 1 - 1e-6

    def test_rwa_ground_state_is_vacuum(self):
        m = model("rwa", n_cav=9)
        gs = prepare_ground_state(m)
        assert gs.total_photons == pytest.approx(0.0, abs=1e-12)
        assert gs.energy == pytest.approx(0.0, abs=1e-12)

    def test_full_coupling_dresses_the_scatterer(self):
        m = ModelSpec(n_cav=21, n_max=3, coupling="full", scatterers=(ScattererSpec(0, g=0.7),))
        gs = prepare_ground_state(m, EngineConfig(discard_tolerance=1e-10))
        assert gs.total_photons > 1e-3
        assert gs.energy < 0
        # the photon cloud is centred on the scatterer
        assert np.argmax(gs.photon_density) == m.site_of(0)
