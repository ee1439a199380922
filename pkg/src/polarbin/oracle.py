"""Brute-force validation engines.

Two reference constructions, both deliberately expensive and kept small:

* the explicit finite-ensemble Hamiltonian (every molecule with its own
  vibrational coordinate, single-molecule coupling g = G/sqrt(N), no
  Franck-Condon projector), used to demonstrate that the binned effective
  model is the large-ensemble limit at fixed collective coupling;
* the multi-coordinate two-bin form, used to confirm that collapsing all
  bins onto one shared coordinate is exact for the supported initial
  states.

Both reuse :func:`polarbin.propagator.propagate` verbatim, so the engine
under test differs only in Hamiltonian assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DimensionCapError
from .hamiltonian import (
    EffectiveHamiltonian,
    MultibinLayout,
    build_effective_hamiltonian,
    build_multibin_hamiltonian,
    displaced_number_operator,
)
from .model import BasisLayout, BinSet, ModelSpec
from .propagator import DEFAULT_TOLERANCE, make_initial_state, propagate

EXPLICIT_DIMENSION_CAP = 50_000
MAX_EXPLICIT_MOLECULES = 4


def apportion_molecules(bins: BinSet, n_molecules: int) -> np.ndarray:
    """Integer molecule counts per bin by largest-remainder rounding.

    Ties go to the lower bin index, keeping the assignment deterministic.
    The rounding mismatch against the real weights is part of the
    finite-ensemble error the oracle quantifies.
    """
    if n_molecules < 1:
        raise ConfigError("need at least one molecule")
    quota = bins.weights * n_molecules
    counts = np.floor(quota).astype(int)
    remainder = n_molecules - counts.sum()
    order = np.argsort(-(quota - counts), kind="stable")
    for i in order[:remainder]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class ExplicitEnsemble:
    """Finite ensemble: one entry of molecule_bins per molecule."""

    bins: BinSet
    molecule_bins: np.ndarray
    n_vib: int
    coupling: float  # collective value; single-molecule g = coupling/sqrt(N)

    @property
    def n_molecules(self) -> int:
        return len(self.molecule_bins)

    @property
    def g_single(self) -> float:
        return self.coupling / math.sqrt(self.n_molecules)

    @classmethod
    def from_bins(cls, bins: BinSet, n_molecules: int, n_vib: int, coupling: float):
        counts = apportion_molecules(bins, n_molecules)
        molecule_bins = np.repeat(np.arange(bins.n_bins), counts)
        return cls(bins=bins, molecule_bins=molecule_bins, n_vib=n_vib,
                   coupling=coupling)


class ExplicitLayout:
    """Basis of the first excitation manifold of the explicit ensemble.

    Blocks: photon, then one reactant block per molecule, then one product
    block per molecule; each block spans all n_vib**N vibrational
    configurations in row-major order.
    """

    def __init__(self, n_molecules: int, n_vib: int):
        self.n_molecules = n_molecules
        self.n_vib = n_vib
        self.vib_dim = n_vib**n_molecules
        self.dimension = (1 + 2 * n_molecules) * self.vib_dim

    def photon_slice(self) -> slice:
        return slice(0, self.vib_dim)

    def e1_slice(self, molecule: int) -> slice:
        start = (1 + molecule) * self.vib_dim
        return slice(start, start + self.vib_dim)

    def e2_slice(self, molecule: int) -> slice:
        start = (1 + self.n_molecules + molecule) * self.vib_dim
        return slice(start, start + self.vib_dim)


def _embed(op, coordinate: int, n_coords: int, n_vib: int):
    factors = [
        op if k == coordinate else sp.identity(n_vib, format="csr")
        for k in range(n_coords)
    ]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


def build_explicit_hamiltonian(
    spec: ModelSpec,
    ensemble: ExplicitEnsemble,
    dimension_cap: int = EXPLICIT_DIMENSION_CAP,
) -> EffectiveHamiltonian:
    """Assemble the explicit-ensemble Hamiltonian, first excitation manifold.

    Ground-state molecules keep their undisplaced oscillators, so spectator
    vibrational dynamics is fully represented; the cavity couples to every
    reactant transition with the bare g and the full vibrational identity
    (the Franck-Condon projection of the binned model is emergent, not
    imposed).
    """
    n = ensemble.n_molecules
    if n > MAX_EXPLICIT_MOLECULES:
        raise ConfigError(
            f"explicit ensemble capped at {MAX_EXPLICIT_MOLECULES} molecules"
        )
    layout = ExplicitLayout(n, ensemble.n_vib)
    if layout.dimension > dimension_cap:
        raise DimensionCapError(
            f"dimension {layout.dimension} exceeds cap {dimension_cap}"
        )
    n_vib = ensemble.n_vib
    number_op = sp.diags(np.arange(n_vib, dtype=float))
    ground_vib = sum(
        _embed(spec.omega_nu * number_op, k, n, n_vib) for k in range(n)
    )
    identity = sp.identity(layout.vib_dim, format="csr")
    g = ensemble.g_single

    n_blocks = 1 + 2 * n
    blocks = [[None] * n_blocks for _ in range(n_blocks)]
    blocks[0][0] = (spec.omega_c - 0.5j * spec.kappa) * identity + ground_vib

    for j in range(n):
        omega0_j = ensemble.bins.centers[ensemble.molecule_bins[j]]
        for surface, s_disp, offset in ((1, spec.s1, 0.0), (2, spec.s2, spec.delta2)):
            block = 1 + (surface - 1) * n + j
            vib = sum(
                _embed(
                    spec.omega_nu
                    * sp.csr_matrix(
                        displaced_number_operator(s_disp, n_vib)
                        if k == j
                        else number_op
                    ),
                    k,
                    n,
                    n_vib,
                )
                for k in range(n)
            )
            blocks[block][block] = (omega0_j + offset) * identity + vib
        e1_block = 1 + j
        e2_block = 1 + n + j
        blocks[0][e1_block] = g * identity
        blocks[e1_block][0] = g * identity
        blocks[e1_block][e2_block] = spec.v12 * identity
        blocks[e2_block][e1_block] = spec.v12 * identity

    matrix = sp.bmat(blocks, format="csr", dtype=complex)
    return EffectiveHamiltonian(matrix=matrix, layout=layout, kappa=spec.kappa)


def explicit_photonic_state(layout: ExplicitLayout) -> np.ndarray:
    psi = np.zeros(layout.dimension, dtype=complex)
    psi[0] = 1.0  # photon block, every coordinate in its ground level
    return psi


def explicit_populations(psi: np.ndarray, layout: ExplicitLayout,
                         ensemble: ExplicitEnsemble):
    """Photon population and per-bin reactant/product populations."""
    n_bins = ensemble.bins.n_bins
    photon = float(np.linalg.norm(psi[layout.photon_slice()]) ** 2)
    p_e1 = np.zeros(n_bins)
    p_e2 = np.zeros(n_bins)
    for j in range(layout.n_molecules):
        b = ensemble.molecule_bins[j]
        p_e1[b] += np.linalg.norm(psi[layout.e1_slice(j)]) ** 2
        p_e2[b] += np.linalg.norm(psi[layout.e2_slice(j)]) ** 2
    return photon, p_e1, p_e2


def multibin_initial_state(name: str, layout: MultibinLayout, bins: BinSet) -> np.ndarray:
    """Photonic/bright/polariton states in the multi-coordinate basis."""
    photon = np.zeros(layout.dimension, dtype=complex)
    bright = np.zeros(layout.dimension, dtype=complex)
    photon[layout.PHOTON] = 1.0
    for i in range(bins.n_bins):
        bright[layout.e1_slice(i).start] = math.sqrt(bins.weights[i])
    if name == "photonic":
        return photon
    if name == "bright":
        return bright
    if name == "upper_polariton":
        return (photon + bright) / math.sqrt(2.0)
    if name == "lower_polariton":
        return (photon - bright) / math.sqrt(2.0)
    raise ConfigError(f"unknown initial state {name!r}")


def multibin_populations(psi: np.ndarray, layout: MultibinLayout):
    photon = float(np.abs(psi[layout.PHOTON]) ** 2)
    p_e1 = np.array([
        np.linalg.norm(psi[layout.e1_slice(i)]) ** 2 for i in range(layout.n_bins)
    ])
    p_e2 = np.array([
        np.linalg.norm(psi[layout.e2_slice(i)]) ** 2 for i in range(layout.n_bins)
    ])
    return photon, p_e1, p_e2


@dataclass(frozen=True)
class DeviationReport:
    """Absolute deviations between a reference engine and the binned one."""

    label: str
    times: np.ndarray
    photon_max: float
    photon_final: float
    p_e1_max: float          # max over bins and times
    p_e1_final: float
    p_e2_max: float
    p_e2_final: float
    p_e1_total_max: float
    autocorr_max: float
    autocorr_final: float


def _deviations(label, times, ref, eff) -> DeviationReport:
    (ph_r, e1_r, e2_r, c_r) = ref
    (ph_e, e1_e, e2_e, c_e) = eff
    d_e1 = np.abs(e1_r - e1_e)
    d_e2 = np.abs(e2_r - e2_e)
    d_ph = np.abs(ph_r - ph_e)
    d_c = np.abs(c_r - c_e)
    d_tot = np.abs(e1_r.sum(axis=1) - e1_e.sum(axis=1))
    return DeviationReport(
        label=label,
        times=times,
        photon_max=float(d_ph.max()),
        photon_final=float(d_ph[-1]),
        p_e1_max=float(d_e1.max()),
        p_e1_final=float(d_e1[-1].max()),
        p_e2_max=float(d_e2.max()),
        p_e2_final=float(d_e2[-1].max()),
        p_e1_total_max=float(d_tot.max()),
        autocorr_max=float(d_c.max()),
        autocorr_final=float(d_c[-1]),
    )


def _population_series(traj, extractor):
    photon = np.empty(len(traj.snapshots))
    e1 = None
    e2 = None
    for k, psi in enumerate(traj.snapshots):
        ph, p1, p2 = extractor(psi)
        if e1 is None:
            e1 = np.empty((len(traj.snapshots), len(p1)))
            e2 = np.empty_like(e1)
        photon[k] = ph
        e1[k] = p1
        e2[k] = p2
    return photon, e1, e2


def compare_to_cute(
    spec: ModelSpec,
    bins: BinSet,
    n_vib: int,
    n_molecules: int,
    dt_record: float,
    t_final: float,
    tolerance: float = DEFAULT_TOLERANCE,
) -> DeviationReport:
    """Propagate the explicit ensemble and the binned model side by side.

    Both start from the photonic state and share the propagator; the
    report holds absolute deviations of photon population, per-bin
    populations, and the autocorrelation on the common grid.
    """
    ensemble = ExplicitEnsemble.from_bins(bins, n_molecules, n_vib, spec.coupling)
    explicit = build_explicit_hamiltonian(spec, ensemble)
    effective = build_effective_hamiltonian(spec, bins, n_vib)

    ref_traj = propagate(
        explicit, explicit_photonic_state(explicit.layout), dt_record, t_final,
        tolerance, snapshot_stride=1, initial_state_label="photonic",
    )
    eff_traj = propagate(
        effective, make_initial_state("photonic", effective.layout, bins),
        dt_record, t_final, tolerance, snapshot_stride=1,
        initial_state_label="photonic",
    )

    ph_r, e1_r, e2_r = _population_series(
        ref_traj, lambda psi: explicit_populations(psi, explicit.layout, ensemble)
    )
    ph_e, e1_e, e2_e = _population_series(
        eff_traj,
        lambda psi: _effective_extract(psi, effective.layout),
    )
    return _deviations(
        f"explicit N={n_molecules}",
        ref_traj.times,
        (ph_r, e1_r, e2_r, ref_traj.autocorr),
        (ph_e, e1_e, e2_e, eff_traj.autocorr),
    )


def _effective_extract(psi, layout: BasisLayout):
    nb, nv = layout.n_bins, layout.n_vib
    blocks = np.abs(psi[1:].reshape(2 * nb, nv)) ** 2
    per = blocks.sum(axis=1)
    return float(np.abs(psi[0]) ** 2), per[:nb], per[nb:]


def compare_multibin_to_effective(
    spec: ModelSpec,
    bins: BinSet,
    n_vib: int,
    dt_record: float,
    t_final: float,
    tolerance: float = DEFAULT_TOLERANCE,
    initial_state: str = "photonic",
) -> DeviationReport:
    """Check the multi-coordinate and shared-coordinate engines agree.

    With a uniform vibrational frequency the two forms are exactly
    equivalent for states entering through the ground vibrational level,
    so deviations should sit at integrator tolerance.
    """
    multibin = build_multibin_hamiltonian(spec, bins, n_vib)
    effective = build_effective_hamiltonian(spec, bins, n_vib)

    ref_traj = propagate(
        multibin, multibin_initial_state(initial_state, multibin.layout, bins),
        dt_record, t_final, tolerance, snapshot_stride=1,
        initial_state_label=initial_state,
    )
    eff_traj = propagate(
        effective, make_initial_state(initial_state, effective.layout, bins),
        dt_record, t_final, tolerance, snapshot_stride=1,
        initial_state_label=initial_state,
    )
    ph_r, e1_r, e2_r = _population_series(
        ref_traj, lambda psi: multibin_populations(psi, multibin.layout)
    )
    ph_e, e1_e, e2_e = _population_series(
        eff_traj, lambda psi: _effective_extract(psi, effective.layout)
    )
    return _deviations(
        "multibin",
        ref_traj.times,
        (ph_r, e1_r, e2_r, ref_traj.autocorr),
        (ph_e, e1_e, e2_e, eff_traj.autocorr),
    )
