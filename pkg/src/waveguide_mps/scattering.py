"""End-to-end scattering experiments on the MPS engine.

A run prepares the interacting ground state by imaginary-time evolution,
creates ``N`` photons in a Gaussian packet on top of it, evolves in real time to
``t_out`` and extracts momentum spectra, elastic amplitudes, scatterer
populations and few-photon position maps.

Positions ``x`` run over ``-L..L``; site index ``n = x + L``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError, InconsistentRunError, ArgumentError
from .model import ModelSpec, build_terms, group_velocity, local_excitation_number
from .mps import (
    LocalOperator,
    MPSState,
    apply_operator_sum,
    correlation_matrix,
    expectation_product,
    local_expectations,
    overlap,
    vacuum_state,
)
from .spectra import elastic_ratios, k_grid, project_momentum, momentum_density_from_correlations, transmission_reflection_spectra
from .tensor import SvdTruncation
from .trotter import EvolveDiagnostics, TrotterPlan, energy, evolve

__all__ = [
    "Wavepacket",
    "EngineConfig",
    "ScatteringRun",
    "GroundState",
    "ScatteringResult",
    "default_t_out",
    "prepare_ground_state",
    "ground_state_from_state",
    "inject_wavepacket",
    "photon_density",
    "momentum_density",
    "transmission_reflection",
    "photon_field",
    "elastic_amplitudes",
    "inelastic_weight",
    "scatterer_counts",
    "qubit_populations",
    "qubit_correlators",
    "nphoton_projector",
    "two_photon_map",
    "reflected_block",
    "map_l1_distance",
    "total_excitations",
    "run",
]


@dataclass(frozen=True)
class Wavepacket:
    """Gaussian packet ``phi_x ~ exp(-(x - x_in)^2 / (2 theta^2) + i k_in x)`` holding ``n_photons``."""

    x_in: int
    theta: float
    k_in: float = math.pi / 2
    n_photons: int = 1

    def __post_init__(self):
        if not 0.0 < self.k_in < math.pi:
            raise ConfigurationError(f"k_in must lie in (0, pi), got {self.k_in}", "k_in")
        if self.theta <= 0:
            raise ConfigurationError(f"theta must be positive, got {self.theta}", "theta")
        if int(self.n_photons) != self.n_photons or self.n_photons < 1:
            raise ConfigurationError(f"n_photons must be a positive integer, got {self.n_photons}", "n_photons")

    def amplitudes(self, x: np.ndarray) -> np.ndarray:
        """Unit-norm ``phi_x`` on the positions ``x``."""
        x = np.asarray(x, dtype=float)
        phi = np.exp(-((x - self.x_in) ** 2) / (2.0 * self.theta**2) + 1j * self.k_in * x)
        return phi / np.linalg.norm(phi)

    def check_fits(self, model: ModelSpec) -> None:
        """Raise :class:`ConfigurationError` unless the packet clears scatterers and edges by ``3 theta``."""
        L = model.half_length
        margin = 3.0 * self.theta
        edge = min(self.x_in + L, L - self.x_in)
        if edge <= margin:
            raise ConfigurationError(
                f"packet at x_in={self.x_in} with theta={self.theta} is within 3*theta of the chain edge (L={L})",
                "x_in",
            )
        for sc in model.scatterers:
            if abs(sc.position - self.x_in) <= margin:
                raise ConfigurationError(
                    f"packet at x_in={self.x_in} overlaps the scatterer at x={sc.position} (3*theta={margin:g})",
                    "x_in",
                )


@dataclass(frozen=True)
class EngineConfig:
    """Numerical parameters of the engine.

    Imaginary time starts at ``gs_dt`` and is halved whenever the energy changes
    by less than ``gs_halve_tol`` in one sweep, down to ``gs_dt_min``; the search
    stops once, at ``gs_dt_min``, the relative change per sweep drops below
    ``gs_energy_tol``.
    """

    dt: float = 0.05
    max_rank: int = 64
    discard_tolerance: float = 1e-8
    hard_cap: int = 256
    gs_dt: float = 0.1
    gs_dt_min: float = 0.00625
    gs_halve_tol: float = 1e-7
    gs_energy_tol: float = 1e-9
    gs_max_sweeps: int = 20000
    k_oversample: int = 4
    threshold_factor: float = 1e-4

    def __post_init__(self):
        for name in ("dt", "gs_dt", "gs_dt_min"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive", name)
        if self.max_rank < 1 or self.hard_cap < self.max_rank:
            raise ConfigurationError("need 1 <= max_rank <= hard_cap", "max_rank")
        if not 0 <= self.discard_tolerance < 1:
            raise ConfigurationError("discard_tolerance must lie in [0, 1)", "discard_tolerance")
        if self.k_oversample < 1:
            raise ConfigurationError("k_oversample must be >= 1", "k_oversample")

    @property
    def trunc(self) -> SvdTruncation:
        return SvdTruncation(self.max_rank, self.discard_tolerance)


def default_t_out(model: ModelSpec, packet: Wavepacket) -> float:
    """Time for the carrier to run from ``x_in`` to ``min(0.75 L, L - 3 theta)``."""
    L = model.half_length
    target = min(0.75 * L, L - 3.0 * packet.theta)
    v = float(group_velocity(packet.k_in, model))
    if target <= packet.x_in:
        raise ConfigurationError("packet starts beyond the default read-out point", "x_in")
    return (target - packet.x_in) / v


@dataclass(frozen=True)
class ScatteringRun:
    """One experiment; ``t_out=None`` selects :func:`default_t_out`."""

    model: ModelSpec
    packet: Wavepacket
    t_out: float | None = None
    engine: EngineConfig = field(default_factory=EngineConfig)
    snapshot_stride: int = 20
    two_photon_map: bool | None = None
    strict: bool = False                # raise on T2 below -t2_tolerance instead of counting bins
    t2_tolerance: float = 2e-2

    def __post_init__(self):
        self.packet.check_fits(self.model)
        if self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be >= 1", "snapshot_stride")
        if self.t_out is not None and self.t_out < 0:
            raise ConfigurationError("t_out must be non-negative", "t_out")
        if self.t_out is not None:
            L = self.model.half_length
            v = float(group_velocity(self.packet.k_in, self.model))
            front = self.packet.x_in + v * self.t_out
            if front > L - 3.0 * self.packet.theta + 1e-9:
                raise ConfigurationError(
                    f"t_out={self.t_out} carries the transmitted centroid within 3*theta of the edge", "t_out"
                )

    @property
    def steps(self) -> int:
        return int(round(self.resolved_t_out / self.engine.dt))

    @property
    def resolved_t_out(self) -> float:
        return default_t_out(self.model, self.packet) if self.t_out is None else float(self.t_out)

    @property
    def wants_map(self) -> bool:
        return self.packet.n_photons == 2 if self.two_photon_map is None else bool(self.two_photon_map)


@dataclass
class GroundState:
    state: MPSState
    energy: float
    energy_trace: list
    photon_density: np.ndarray
    populations: dict
    sweeps: int
    plan: TrotterPlan = field(repr=False)

    @property
    def total_photons(self) -> float:
        return float(np.sum(self.photon_density))


@dataclass
class ScatteringResult:
    """Observables of one run; arrays over ``k`` refer to ``k_defined``."""

    run: ScatteringRun
    times: np.ndarray
    photon_density: np.ndarray          # (snapshots, n_cav)
    populations: dict                   # scatterer position -> delta P trace
    correlators: dict                   # (x_i, x_j) -> <sigma_i^+ sigma_j^-> trace
    ks: np.ndarray
    nk0: np.ndarray
    nk_out: np.ndarray
    k_defined: np.ndarray
    T: np.ndarray
    R: np.ndarray
    t_k: np.ndarray | None
    r_k: np.ndarray | None
    T2: np.ndarray | None
    T2_unhalved: np.ndarray | None
    pair_map: np.ndarray | None
    gs_energy: float
    gs_photons: float
    nk_gs: np.ndarray
    energies: np.ndarray
    excitations: np.ndarray
    norms: np.ndarray
    diagnostics: EvolveDiagnostics
    timings: dict
    inconsistent_bins: int = 0          # bins with T2 below the consistency tolerance
    state: MPSState | None = None       # evolved state at t_out

    def T2_peak(self, weight_fraction: float = 1e-2) -> float:
        """Max of ``T2`` over bins whose input weight is at least ``weight_fraction`` of the input peak."""
        if self.T2 is None:
            raise ArgumentError("T2 exists only for single-photon runs")
        return float(np.max(self.T2[self.well_populated(weight_fraction)]))

    def well_populated(self, weight_fraction: float = 1e-2) -> np.ndarray:
        """Mask over ``k_defined`` selecting bins with input weight above ``weight_fraction`` of the peak."""
        idx = np.abs(self.ks[None, :] - self.k_defined[:, None]).argmin(axis=1)
        nk0 = (self.nk0 - self.nk_gs)[idx]
        return nk0 >= weight_fraction * nk0.max()

    @property
    def R_max(self) -> float:
        return float(np.max(self.R))

    def conservation(self) -> dict:
        """Norm bookkeeping, relative energy drift and relative excitation drift."""
        e0 = self.energies[0]
        n0 = self.excitations[0]
        return {
            "norm_loss": float(1.0 - self.norms[-1] ** 2),
            "discarded_total": self.diagnostics.total_discarded,
            "energy_drift": float(np.max(np.abs(self.energies - e0)) / max(abs(e0), 1e-12)),
            "excitation_drift": float(np.max(np.abs(self.excitations - n0)) / max(abs(n0), 1e-12)),
        }


# --- ground state ----------------------------------------------------------------

def _photon_op_dict(model: ModelSpec, which: int) -> dict:
    layout = model.layout
    return {n: layout.photon_ops(n)[which] for n in range(layout.n_sites)}


def photon_density(state: MPSState, model: ModelSpec) -> np.ndarray:
    """``<a_x^dag a_x>`` per unit norm for every cavity."""
    vals = local_expectations(state, state, _photon_op_dict(model, 2))
    norm2 = overlap(state, state).real
    return np.array([vals[n].real for n in range(model.n_cav)]) / norm2


def scatterer_counts(state: MPSState, model: ModelSpec) -> dict:
    """Excitation count of every scatterer (collective count for Dicke groups), keyed by position."""
    layout = model.layout
    ops = {n: layout.scatterer_ops(n)[2] for n in layout.scatterer_sites}
    if not ops:
        return {}
    vals = local_expectations(state, state, ops)
    norm2 = overlap(state, state).real
    return {layout.scatterer_sites[n].position: vals[n].real / norm2 for n in ops}


def total_excitations(state: MPSState, model: ModelSpec) -> float:
    layout = model.layout
    ops = {n: local_excitation_number(layout, n) for n in range(layout.n_sites)}
    vals = local_expectations(state, state, ops)
    return float(sum(v.real for v in vals.values()) / overlap(state, state).real)


def prepare_ground_state(model: ModelSpec, engine: EngineConfig | None = None) -> GroundState:
    """Imaginary-time search from the vacuum (even parity sector).

    Raises :class:`ConvergenceError`, carrying the energy trace, when the sweep
    budget runs out first.
    """
    engine = engine or EngineConfig()
    terms = build_terms(model)
    plan = TrotterPlan.from_terms(terms, engine.gs_dt, "imaginary")
    state = vacuum_state(terms.dims)
    trunc = engine.trunc
    e_prev = energy(state, plan)
    trace = [e_prev]
    dt = engine.gs_dt
    sweeps = 0
    while True:
        if sweeps >= engine.gs_max_sweeps:
            raise ConvergenceError(
                f"ground state not converged after {sweeps} sweeps (last change {abs(trace[-1] - trace[-2]):.3g})",
                trace=trace,
            )
        evolve(state, plan, 1, trunc, renormalize=True, hard_cap=engine.hard_cap)
        sweeps += 1
        e = energy(state, plan)
        trace.append(e)
        change = abs(e - e_prev)
        e_prev = e
        at_floor = dt <= engine.gs_dt_min * (1 + 1e-12)
        if at_floor and change <= engine.gs_energy_tol * max(abs(e), 1.0):
            break
        if not at_floor and change < engine.gs_halve_tol:
            dt = max(dt / 2.0, engine.gs_dt_min)
            plan = plan.with_dt(dt)
    state.normalize()
    real_plan = TrotterPlan.from_terms(terms, engine.dt, "real")
    return GroundState(
        state=state,
        energy=energy(state, real_plan),
        energy_trace=trace,
        photon_density=photon_density(state, model),
        populations=scatterer_counts(state, model),
        sweeps=sweeps,
        plan=real_plan,
    )


def ground_state_from_state(model: ModelSpec, state: MPSState, engine: EngineConfig | None = None) -> GroundState:
    """Wrap a stored ground state (e.g. a loaded checkpoint) without further imaginary time."""
    engine = engine or EngineConfig()
    terms = build_terms(model)
    if list(state.local_dims) != list(terms.dims):
        raise ConfigurationError("checkpoint local dimensions do not match the model layout", "ground_state")
    state.normalize()
    plan = TrotterPlan.from_terms(terms, engine.dt, "real")
    e = energy(state, plan)
    return GroundState(
        state=state,
        energy=e,
        energy_trace=[e],
        photon_density=photon_density(state, model),
        populations=scatterer_counts(state, model),
        sweeps=0,
        plan=plan,
    )


# --- injection and observables ------------------------------------------------------

def inject_wavepacket(gs: MPSState, model: ModelSpec, packet: Wavepacket, trunc: SvdTruncation) -> MPSState:
    """``(a_phi^dag)^N |gs>``, normalised (``log_norm`` reset to zero)."""
    phi = packet.amplitudes(model.positions())
    layout = model.layout
    state = gs.copy()
    for _ in range(packet.n_photons):
        ops = {n: phi[n] * layout.photon_ops(n)[1] for n in range(model.n_cav)}
        state = apply_operator_sum(state, ops, trunc)
    state.log_norm = 0.0
    return state


def _correlations(state: MPSState, model: ModelSpec) -> np.ndarray:
    layout = model.layout
    ad = {n: layout.photon_ops(n)[1] for n in range(model.n_cav)}
    a = {n: layout.photon_ops(n)[0] for n in range(model.n_cav)}
    num = {n: layout.photon_ops(n)[2] for n in range(model.n_cav)}
    c = correlation_matrix(state, state, ad, a, num)
    c = c + np.triu(c, 1).conj().T
    return c / overlap(state, state).real


def momentum_density(state: MPSState, model: ModelSpec, ks: np.ndarray | None = None) -> np.ndarray:
    """``n_k`` per unit norm on ``ks`` (default: the plain DFT grid)."""
    if ks is None:
        ks = k_grid(model.n_cav)
    return momentum_density_from_correlations(_correlations(state, model), model.positions(), ks)


def transmission_reflection(ks, nk0, nk_out, n_photons: int, threshold_factor: float = 1e-4, baseline=None):
    """``(k, T_k, R_k)`` on bins whose input weight reaches ``threshold_factor * N``.

    ``baseline`` (the ground-state ``n_k``) is subtracted from both spectra.
    """
    nk0 = np.asarray(nk0, dtype=float)
    nk_out = np.asarray(nk_out, dtype=float)
    if baseline is not None:
        nk0 = nk0 - baseline
        nk_out = nk_out - baseline
    return transmission_reflection_spectra(np.asarray(ks), nk0, nk_out, threshold_factor * n_photons)


def photon_field(gs: MPSState, state: MPSState, model: ModelSpec) -> np.ndarray:
    """``<GS| a_x |psi>`` per unit norm of both states."""
    vals = local_expectations(gs, state, _photon_op_dict(model, 0))
    scale = math.sqrt(overlap(gs, gs).real * overlap(state, state).real)
    return np.array([vals[n] for n in range(model.n_cav)]) / scale


def elastic_amplitudes(field0: np.ndarray, field_out: np.ndarray, model: ModelSpec, ks, nk_in,
                       threshold: float, phase: complex = 1.0):
    """``(k, t_k, r_k)`` from the projected single-photon fields at ``t = 0`` and ``t_out``."""
    x = model.positions()
    amp0 = project_momentum(field0, x, ks)
    amp1 = project_momentum(field_out, x, ks)
    return elastic_ratios(ks, amp0, amp1, nk_in, threshold, phase)


def inelastic_weight(t_k, r_k, tolerance: float = 2e-2):
    """``(T2, 1 - |t|^2 - |r|^2)``; raises :class:`InconsistentRunError` below ``-tolerance``."""
    unhalved = 1.0 - np.abs(t_k) ** 2 - np.abs(r_k) ** 2
    t2 = 0.5 * unhalved
    if np.any(t2 < -tolerance):
        worst = float(np.min(t2))
        raise InconsistentRunError(f"inelastic weight {worst:.4g} below -{tolerance:g}: elastic flux exceeds input")
    return t2, unhalved


def qubit_populations(state: MPSState, model: ModelSpec, baseline: dict) -> dict:
    """``delta P_i = P_i - (P_i)_GS`` keyed by scatterer position."""
    counts = scatterer_counts(state, model)
    return {x: counts[x] - baseline.get(x, 0.0) for x in counts}


def qubit_correlators(state: MPSState, model: ModelSpec) -> dict:
    """``<sigma_i^+ sigma_j^->`` for every ordered pair of distinct scatterer positions ``x_i < x_j``."""
    layout = model.layout
    sites = sorted(layout.scatterer_sites)
    if len(sites) < 2:
        return {}
    plus = {n: layout.qubit_sigma_ops(n)[0] for n in sites}
    minus = {n: layout.qubit_sigma_ops(n)[1] for n in sites}
    c = correlation_matrix(state, state, plus, minus) / overlap(state, state).real
    out = {}
    for i, ni in enumerate(sites):
        for nj in sites[i + 1:]:
            out[(layout.scatterer_sites[ni].position, layout.scatterer_sites[nj].position)] = complex(c[ni, nj])
    return out


def nphoton_projector(gs: MPSState, state: MPSState, model: ModelSpec, positions) -> complex:
    """``(N!)^{-1/2} <GS| a_x1 ... a_xN |psi>`` per unit norm, positions ascending."""
    positions = list(positions)
    if positions != sorted(positions):
        raise ArgumentError("positions must be sorted ascending")
    a = model.layout
    counts = {}
    for x in positions:
        counts[model.site_of(x)] = counts.get(model.site_of(x), 0) + 1
    ops = [LocalOperator(n, np.linalg.matrix_power(a.photon_ops(n)[0], c)) for n, c in counts.items()]
    val = expectation_product(gs, state, ops)
    scale = math.sqrt(overlap(gs, gs).real * overlap(state, state).real * math.factorial(len(positions)))
    return val / scale


def two_photon_map(gs: MPSState, state: MPSState, model: ModelSpec) -> np.ndarray:
    """Symmetric ``phi_{x1 x2} = 2^{-1/2} <GS| a_x1 a_x2 |psi>`` over all cavity pairs."""
    layout = model.layout
    a = {n: layout.photon_ops(n)[0] for n in range(model.n_cav)}
    aa = {n: m @ m for n, m in a.items()}
    c = correlation_matrix(gs, state, a, a, aa)
    c = c + np.triu(c, 1).T
    scale = math.sqrt(2.0 * overlap(gs, gs).real * overlap(state, state).real)
    return c / scale


def reflected_block(pair_map: np.ndarray, model: ModelSpec, x_max: int) -> np.ndarray:
    """Sub-map with both photons at positions ``< x_max`` (left of the scatterers)."""
    n = model.site_of(x_max)
    return pair_map[:n, :n]


def map_l1_distance(a: np.ndarray, b: np.ndarray) -> float:
    """L1 distance between ``|a|^2`` and ``|b|^2`` after normalising each to unit sum (range [0, 2])."""
    pa = np.abs(a) ** 2
    pb = np.abs(b) ** 2
    return float(np.sum(np.abs(pa / pa.sum() - pb / pb.sum())))


# --- the full experiment -----------------------------------------------------------

def run(spec: ScatteringRun, gs: GroundState | None = None, progress=None) -> ScatteringResult:
    """Execute ``spec``; an already prepared ground state for the same model may be passed."""
    timings = {}
    model, packet, engine = spec.model, spec.packet, spec.engine
    trunc = engine.trunc
    t0 = time.perf_counter()
    if gs is None:
        gs = prepare_ground_state(model, engine)
    timings["ground_state"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    state = inject_wavepacket(gs.state, model, packet, trunc)
    ks = k_grid(model.n_cav, engine.k_oversample)
    x = model.positions()
    corr_gs = _correlations(gs.state, model)
    nk_gs = momentum_density_from_correlations(corr_gs, x, ks)
    nk0 = momentum_density(state, model, ks)
    field0 = photon_field(gs.state, state, model) if packet.n_photons == 1 else None
    timings["injection"] = time.perf_counter() - t1

    plan = gs.plan
    steps = spec.steps
    t_out = steps * engine.dt
    stride = spec.snapshot_stride
    times, dens, pops, cors, energies, excit, norms = [], [], [], [], [], [], []

    def snapshot(t):
        times.append(t)
        dens.append(photon_density(state, model))
        pops.append(qubit_populations(state, model, gs.populations))
        cors.append(qubit_correlators(state, model))
        energies.append(energy(state, plan))
        excit.append(total_excitations(state, model))
        norms.append(state.norm())

    t2 = time.perf_counter()
    diag = EvolveDiagnostics(max_bond=state.max_bond)
    snapshot(0.0)
    done = 0
    while done < steps:
        chunk = min(stride, steps - done)
        state, d = evolve(state, plan, chunk, trunc, renormalize=False, hard_cap=engine.hard_cap)
        diag.extend(d)
        done += chunk
        snapshot(done * engine.dt)
        if progress is not None:
            progress(done, steps, state)
    timings["evolution"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    nk_out = momentum_density(state, model, ks)
    threshold = engine.threshold_factor * packet.n_photons
    k_def, T, R = transmission_reflection(ks, nk0, nk_out, packet.n_photons, engine.threshold_factor, nk_gs)
    t_k = r_k = T2 = T2u = None
    inconsistent = 0
    if packet.n_photons == 1:
        field_out = photon_field(gs.state, state, model)
        phase = np.exp(1j * gs.energy * t_out)
        _, t_k, r_k = elastic_amplitudes(field0, field_out, model, ks, nk0 - nk_gs, threshold, phase)
        T2, T2u = inelastic_weight(t_k, r_k, tolerance=np.inf)
        inconsistent = int(np.sum(T2 < -spec.t2_tolerance))
        if inconsistent and spec.strict:
            inelastic_weight(t_k, r_k, tolerance=spec.t2_tolerance)
    pair = two_photon_map(gs.state, state, model) if spec.wants_map else None
    timings["observables"] = time.perf_counter() - t3

    keys = sorted(pops[0]) if pops and pops[0] else []
    ckeys = sorted(cors[0]) if cors and cors[0] else []
    return ScatteringResult(
        run=spec,
        times=np.array(times),
        photon_density=np.array(dens),
        populations={k: np.array([p[k] for p in pops]) for k in keys},
        correlators={k: np.array([c[k] for c in cors]) for k in ckeys},
        ks=ks,
        nk0=nk0,
        nk_out=nk_out,
        k_defined=k_def,
        T=T,
        R=R,
        t_k=t_k,
        r_k=r_k,
        T2=T2,
        T2_unhalved=T2u,
        pair_map=pair,
        gs_energy=gs.energy,
        gs_photons=gs.total_photons,
        nk_gs=nk_gs,
        energies=np.array(energies),
        excitations=np.array(excit),
        norms=np.array(norms),
        diagnostics=diag,
        timings=timings,
        inconsistent_bins=inconsistent if packet.n_photons == 1 else 0,
        state=state,
    )

